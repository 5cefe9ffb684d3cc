#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <Eigen/Dense>
#include <set>
#include <vector>

#include "feederid/library.hpp"
#include "feederid/network.hpp"
#include "feederid/rng.hpp"
#include "feederid/simulate.hpp"

namespace testutil {

using namespace feederid;

inline FeederTopology chain_feeder(int n_edges, double len = 30.0) {
  std::vector<RawEdge> edges;
  for (int i = 0; i < n_edges; ++i) edges.emplace_back(i, i + 1, len);
  return validate_topology(edges);
}

inline FeederTopology star_feeder(int n_leaves, double len = 30.0) {
  std::vector<RawEdge> edges;
  for (int i = 0; i < n_leaves; ++i) edges.emplace_back(0, i + 1, len);
  return validate_topology(edges);
}

// uniform random recursive tree: parent of node i drawn below i
inline FeederTopology random_tree(int n_nodes, Rng& rng, double len_lo = 10.0,
                                  double len_hi = 60.0) {
  std::vector<RawEdge> edges;
  for (int i = 1; i < n_nodes; ++i) {
    edges.emplace_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(i))),
                       i, rng.uniform(len_lo, len_hi));
  }
  return validate_topology(edges);
}

// 116 nodes, 6 degree-2 joints forming 5 chains with interior counts
// {2,1,1,1,1} -> chain edge counts {3,2,2,2,2}, 11 edges total.
inline FeederTopology ieee_like_replica() {
  std::vector<RawEdge> edges;
  auto len = [](int a, int b) {
    return 20.0 + 7.0 * static_cast<double>((a * 31 + b) % 13);
  };
  std::set<std::pair<int, int>> spliced = {
      {1, 3}, {2, 5}, {2, 6}, {53, 107}, {53, 108}};
  // full binary tree over 0..108 plus an extra third child of node 1
  for (int i = 1; i <= 108; ++i) {
    const int p = (i - 1) / 2;
    if (spliced.count({p, i})) continue;
    edges.emplace_back(p, i, len(p, i));
  }
  edges.emplace_back(1, 109, len(1, 109));
  // splices: 1-110-111-3 (two interior joints), then one joint each
  edges.emplace_back(1, 110, len(1, 110));
  edges.emplace_back(110, 111, len(110, 111));
  edges.emplace_back(111, 3, len(111, 3));
  edges.emplace_back(2, 112, len(2, 112));
  edges.emplace_back(112, 5, len(112, 5));
  edges.emplace_back(2, 113, len(2, 113));
  edges.emplace_back(113, 6, len(113, 6));
  edges.emplace_back(53, 114, len(53, 114));
  edges.emplace_back(114, 107, len(114, 107));
  edges.emplace_back(53, 115, len(53, 115));
  edges.emplace_back(115, 108, len(115, 108));
  return validate_topology(edges);
}

// ohm/km -> per-unit per meter at 400 V / 100 kVA
inline constexpr double kScale = 1e-3 / 1.6;

inline std::vector<Eigen::Vector2d> lv_cables() {
  return {Eigen::Vector2d(0.32 * kScale, 0.075 * kScale),
          Eigen::Vector2d(0.64 * kScale, 0.080 * kScale),
          Eigen::Vector2d(1.15 * kScale, 0.085 * kScale)};
}

inline std::vector<Eigen::Vector2d> lv_cables5() {
  return {Eigen::Vector2d(0.206 * kScale, 0.0745 * kScale),
          Eigen::Vector2d(0.32 * kScale, 0.075 * kScale),
          Eigen::Vector2d(0.443 * kScale, 0.0765 * kScale),
          Eigen::Vector2d(0.64 * kScale, 0.080 * kScale),
          Eigen::Vector2d(1.15 * kScale, 0.085 * kScale)};
}

inline LibraryBounds lv_bounds(const std::vector<Eigen::Vector2d>& cables) {
  // upper intercept 0.069 keeps the lightest five-entry cable inside the band
  return default_bounds({cables}, 0.030, 0.069, 0.017, 0.061, kScale);
}

inline CableLibrary lv_library(int edge_count) {
  const auto cables = lv_cables();
  return CableLibrary::shared(cables, edge_count, lv_bounds(cables));
}

inline CableLibrary lv_library5(int edge_count) {
  const auto cables = lv_cables5();
  return CableLibrary::shared(cables, edge_count, lv_bounds(cables));
}

// voltage readings at root + leaves taken from a full T x N squared-voltage
// matrix (exact linearized data when v2full = lindistflow_forward(...))
inline MeterDataset dataset_from_v2(const FeederTopology& topology,
                                    const Eigen::MatrixXd& P,
                                    const Eigen::MatrixXd& Q,
                                    const Eigen::MatrixXd& v2full) {
  MeterDataset data;
  data.T = static_cast<int>(P.rows());
  data.P = P;
  data.Q = Q;
  data.v2_nodes.push_back(0);
  for (int leaf : topology.leaf_set()) data.v2_nodes.push_back(leaf);
  data.v2.resize(data.T, static_cast<Eigen::Index>(data.v2_nodes.size()));
  for (size_t c = 0; c < data.v2_nodes.size(); ++c) {
    data.v2.col(static_cast<Eigen::Index>(c)) = v2full.col(data.v2_nodes[c]);
  }
  data.check_consistent(topology);
  return data;
}

// mixed-power-factor leaf injections, deterministic in seed
inline void random_loads(const FeederTopology& topology, int T,
                         std::uint64_t seed, Eigen::MatrixXd& P,
                         Eigen::MatrixXd& Q, double p_lo = 0.05,
                         double p_hi = 0.3) {
  const int n = topology.node_count();
  P = Eigen::MatrixXd::Zero(T, n);
  Q = Eigen::MatrixXd::Zero(T, n);
  Rng rng(seed);
  for (int t = 0; t < T; ++t) {
    for (int leaf : topology.leaf_set()) {
      P(t, leaf) = rng.uniform(p_lo, p_hi);
      Q(t, leaf) = rng.uniform(0.0, 0.4) * P(t, leaf);
    }
  }
}

// brute-force subtree-membership oracle: nodes strictly below edge e
inline std::vector<int> subtree_below(const FeederTopology& topology, int e) {
  std::vector<int> out;
  std::vector<int> stack = {topology.edge(e).child};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (int ce : topology.child_edges(v)) stack.push_back(topology.edge(ce).child);
  }
  return out;
}

}  // namespace testutil
