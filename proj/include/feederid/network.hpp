#pragma once

#include <Eigen/Dense>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "feederid/common.hpp"

namespace feederid {

struct Edge {
  int parent = 0;
  int child = 0;
  double length_m = 0.0;
};

// Rooted radial feeder. Node 0 is the root cabinet; edges are stored in DFS
// preorder from the root so column indexing is reproducible across runs.
class FeederTopology {
 public:
  FeederTopology() = default;
  FeederTopology(int node_count, std::vector<Edge> edges_preorder);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<size_t>(e)]; }

  // -1 for the root
  int parent_edge(int node) const { return parent_edge_[static_cast<size_t>(node)]; }
  const std::vector<int>& child_edges(int node) const {
    return child_edges_[static_cast<size_t>(node)];
  }
  int degree(int node) const {
    return static_cast<int>(child_edges_[static_cast<size_t>(node)].size()) +
           (node == 0 ? 0 : 1);
  }
  bool is_leaf(int node) const { return node != 0 && degree(node) == 1; }
  const std::vector<int>& leaf_set() const { return leaves_; }

  Eigen::VectorXd lengths() const;

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> parent_edge_;
  std::vector<std::vector<int>> child_edges_;
  std::vector<int> leaves_;
};

// Synchronized nodal snapshots. P/Q are per-unit injections (consumption
// positive) at all nodes; v2 holds squared per-unit voltage magnitudes at the
// root and leaves only, with v2_nodes mapping columns to node ids.
struct MeterDataset {
  int T = 0;
  Eigen::MatrixXd P;   // T x N
  Eigen::MatrixXd Q;   // T x N
  Eigen::MatrixXd v2;  // T x (#leaves + 1)
  std::vector<int> v2_nodes;

  int v2_column(int node) const;
  bool has_v2(int node) const;
  double v2_at(int t, int node) const { return v2(t, v2_column(node)); }
  void check_consistent(const FeederTopology& topology) const;
};

struct AggregatedFlows {
  Eigen::MatrixXd Pbr;  // T x E
  Eigen::MatrixXd Qbr;  // T x E
};

using RawEdge = std::tuple<int, int, double>;

// Validates an undirected edge list as a tree rooted at node 0 and orients it.
// Throws Error with code CycleDetected / DisconnectedNode / NonPositiveLength /
// DuplicateEdge / MissingRoot on malformed input.
FeederTopology validate_topology(const std::vector<RawEdge>& raw_edges);

// A(n, e) = 1 iff edge e lies on the root-to-n path.
Eigen::MatrixXd incidence(const FeederTopology& topology);

// Bottom-up accumulation of nodal injections into branch flows.
AggregatedFlows aggregate_flows(const FeederTopology& topology,
                                const MeterDataset& data);
AggregatedFlows aggregate_flows(const FeederTopology& topology,
                                const Eigen::MatrixXd& P,
                                const Eigen::MatrixXd& Q);

// Maximal chains of edges connected through degree-2 internal nodes. Each
// chain has >= 2 edges; edges not in any chain are omitted.
std::vector<std::vector<int>> degree2_chains(const FeederTopology& topology);

struct CollapsedNetwork {
  FeederTopology topology;
  Eigen::VectorXd z;             // 2 * collapsed edge count
  std::vector<int> edge_of_old;  // old edge index -> collapsed edge index
};

// Replaces every degree-2 chain by a single edge whose r and x are the sums
// over chain members; used for degree-simplified error evaluation.
CollapsedNetwork collapse_chains(const FeederTopology& topology,
                                 const Eigen::VectorXd& z);

}  // namespace feederid
