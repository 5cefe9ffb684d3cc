#include "feederid/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace feederid {
namespace {

// injective draw address for (snapshot, node)
inline std::uint64_t tn_counter(int t, int node) {
  return (static_cast<std::uint64_t>(t) << 24) +
         static_cast<std::uint64_t>(node);
}

// lane assignment (normal lanes consume two u64 lanes each; keep disjoint):
// 0,1 load P,Q | 2,3 injection noise P,Q | normal 4 voltage | normal 5 length
constexpr std::uint64_t kLaneLoadP = 0;
constexpr std::uint64_t kLaneLoadQ = 1;
constexpr std::uint64_t kLaneNoiseP = 2;
constexpr std::uint64_t kLaneNoiseQ = 3;
constexpr std::uint64_t kLaneNoiseV = 4;
constexpr std::uint64_t kLaneNoiseLen = 5;

MeterDataset collect_dataset(const FeederTopology& topology,
                             const InjectionSampler& sampler, int T,
                             std::uint64_t seed,
                             const std::function<Eigen::VectorXd(
                                 int t, const Eigen::VectorXd& P,
                                 const Eigen::VectorXd& Q)>& v2_of_snapshot) {
  require(T >= 1, ErrorCode::InvalidArgument, "T must be >= 1");
  const int n = topology.node_count();
  const auto& leaves = topology.leaf_set();

  MeterDataset data;
  data.T = T;
  data.P = Eigen::MatrixXd::Zero(T, n);
  data.Q = Eigen::MatrixXd::Zero(T, n);
  data.v2_nodes.push_back(0);  // root column first, then leaves ascending
  for (int leaf : leaves) data.v2_nodes.push_back(leaf);
  data.v2.resize(T, static_cast<Eigen::Index>(data.v2_nodes.size()));

  CounterRng rng(seed);
  for (int t = 0; t < T; ++t) {
    for (int leaf : leaves) {
      auto [p, q] = sampler.draw(t, leaf, rng);
      data.P(t, leaf) = p;
      data.Q(t, leaf) = q;
    }
    Eigen::VectorXd v2 = v2_of_snapshot(t, data.P.row(t).transpose(),
                                        data.Q.row(t).transpose());
    for (size_t k = 0; k < data.v2_nodes.size(); ++k) {
      data.v2(t, static_cast<Eigen::Index>(k)) = v2(data.v2_nodes[k]);
    }
  }
  data.check_consistent(topology);
  return data;
}

}  // namespace

GroundTruthAssignment materialize_assignment(const FeederTopology& topology,
                                             const CableLibrary& library,
                                             const std::vector<int>& choice) {
  const int ne = topology.edge_count();
  require(library.edge_count() == ne, ErrorCode::DimensionMismatch,
          "library edge count != topology edge count");
  require(static_cast<int>(choice.size()) == ne, ErrorCode::DimensionMismatch,
          "one cable choice per edge required");
  GroundTruthAssignment gt;
  gt.cable_index = choice;
  gt.z = Eigen::VectorXd::Zero(2 * ne);
  for (int e = 0; e < ne; ++e) {
    const auto& list = library.candidates(e);
    require(choice[static_cast<size_t>(e)] >= 0 &&
                choice[static_cast<size_t>(e)] < static_cast<int>(list.size()),
            ErrorCode::InvalidArgument,
            "cable choice out of range on edge " + std::to_string(e));
    const Eigen::Vector2d c = list[static_cast<size_t>(choice[static_cast<size_t>(e)])];
    const double len = topology.edge(e).length_m;
    gt.z(e) = len * c(0);
    gt.z(ne + e) = len * c(1);
  }
  return gt;
}

Eigen::VectorXcd ac_power_flow(const FeederTopology& topology,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& P,
                               const Eigen::VectorXd& Q, double root_v,
                               const AcOptions& opts) {
  const int n = topology.node_count();
  const int ne = topology.edge_count();
  require(z.size() == 2 * ne, ErrorCode::DimensionMismatch, "z size != 2|E|");
  require(P.size() == n && Q.size() == n, ErrorCode::DimensionMismatch,
          "injection vectors must have one entry per node");
  require(root_v > 0.0, ErrorCode::InvalidArgument, "root_v must be > 0");

  using cd = std::complex<double>;
  Eigen::VectorXcd V = Eigen::VectorXcd::Constant(n, cd(root_v, 0.0));
  Eigen::VectorXcd S(n);
  for (int i = 0; i < n; ++i) S(i) = cd(P(i), Q(i));
  Eigen::VectorXcd Ibr(ne);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // backward: branch currents, children before parents (reverse preorder)
    for (int e = ne - 1; e >= 0; --e) {
      const int child = topology.edge(e).child;
      cd acc = std::conj(S(child) / V(child));
      for (int ce : topology.child_edges(child)) acc += Ibr(ce);
      Ibr(e) = acc;
    }
    // forward: propagate voltage drops from the slack down
    double step = 0.0;
    for (int e = 0; e < ne; ++e) {
      const auto& edge = topology.edge(e);
      const cd v_new = V(edge.parent) - cd(z(e), z(ne + e)) * Ibr(e);
      step = std::max(step, std::abs(v_new - V(edge.child)));
      V(edge.child) = v_new;
    }
    require(std::isfinite(step), ErrorCode::NonConvergence,
            "power flow diverged (voltage collapse)");
    if (step < opts.tol) return V;
  }
  fail(ErrorCode::NonConvergence,
       "power flow not converged after " + std::to_string(opts.max_iters) +
           " sweeps");
}

Eigen::MatrixXd lindistflow_forward(const FeederTopology& topology,
                                    const Eigen::VectorXd& z,
                                    const Eigen::MatrixXd& P,
                                    const Eigen::MatrixXd& Q) {
  const int n = topology.node_count();
  const int ne = topology.edge_count();
  require(z.size() == 2 * ne, ErrorCode::DimensionMismatch, "z size != 2|E|");
  require(P.cols() == n && Q.cols() == n && P.rows() == Q.rows(),
          ErrorCode::DimensionMismatch, "P, Q must be T x N");

  const AggregatedFlows fl = aggregate_flows(topology, P, Q);
  const Eigen::MatrixXd A = incidence(topology);
  const Eigen::MatrixXd drop =
      (fl.Pbr * z.head(ne).asDiagonal() + fl.Qbr * z.tail(ne).asDiagonal()) *
      A.transpose();
  return (1.0 - 2.0 * drop.array()).matrix();
}

InjectionSampler fixed_pf_sampler(double p_lo, double p_hi, double pf) {
  require(pf > 0.0 && pf <= 1.0, ErrorCode::InvalidArgument,
          "power factor must be in (0, 1]");
  const double tan_phi = std::tan(std::acos(pf));
  return {[=](int t, int node, const CounterRng& rng) {
    const double p = rng.uniform_at(p_lo, p_hi, tn_counter(t, node), kLaneLoadP);
    return std::make_pair(p, p * tan_phi);
  }};
}

InjectionSampler uniform_pq_sampler(double p_lo, double p_hi, double q_lo,
                                    double q_hi) {
  return {[=](int t, int node, const CounterRng& rng) {
    const std::uint64_t c = tn_counter(t, node);
    return std::make_pair(rng.uniform_at(p_lo, p_hi, c, kLaneLoadP),
                          rng.uniform_at(q_lo, q_hi, c, kLaneLoadQ));
  }};
}

InjectionSampler replay_sampler(Eigen::MatrixXd P, Eigen::MatrixXd Q) {
  require(P.rows() == Q.rows() && P.cols() == Q.cols(),
          ErrorCode::DimensionMismatch, "replay profiles must match");
  auto Ps = std::make_shared<Eigen::MatrixXd>(std::move(P));
  auto Qs = std::make_shared<Eigen::MatrixXd>(std::move(Q));
  return {[Ps, Qs](int t, int node, const CounterRng&) {
    require(t < Ps->rows() && node < Ps->cols(), ErrorCode::DimensionMismatch,
            "replay profile too short for requested snapshot/node");
    return std::make_pair((*Ps)(t, node), (*Qs)(t, node));
  }};
}

MeterDataset make_dataset(const FeederTopology& topology,
                          const Eigen::VectorXd& z,
                          const InjectionSampler& sampler, int T,
                          std::uint64_t seed, const AcOptions& opts) {
  return collect_dataset(
      topology, sampler, T, seed,
      [&](int t, const Eigen::VectorXd& P, const Eigen::VectorXd& Q) {
        try {
          return ac_power_flow(topology, z, P, Q, 1.0, opts)
              .cwiseAbs2()
              .eval();
        } catch (const Error& err) {
          if (err.code() == ErrorCode::NonConvergence) {
            fail(ErrorCode::NonConvergence,
                 "snapshot " + std::to_string(t) + ": " + err.what());
          }
          throw;
        }
      });
}

MeterDataset make_dataset_lindistflow(const FeederTopology& topology,
                                      const Eigen::VectorXd& z,
                                      const InjectionSampler& sampler, int T,
                                      std::uint64_t seed) {
  return collect_dataset(
      topology, sampler, T, seed,
      [&](int, const Eigen::VectorXd& P, const Eigen::VectorXd& Q) {
        return lindistflow_forward(topology, z, P.transpose(), Q.transpose())
            .row(0)
            .transpose()
            .eval();
      });
}

Eigen::VectorXd apply_noise(const Eigen::VectorXd& lengths,
                            const NoiseSpec& spec) {
  spec.validate();
  Eigen::VectorXd out = lengths;
  if (spec.length_sigma == 0.0) return out;
  CounterRng rng(spec.seed);
  for (Eigen::Index e = 0; e < out.size(); ++e) {
    const double factor =
        1.0 + spec.length_sigma *
                  rng.normal_at(static_cast<std::uint64_t>(e), kLaneNoiseLen);
    out(e) = std::max(lengths(e) * factor, 1e-9 * lengths(e));
  }
  return out;
}

MeterDataset apply_noise(const MeterDataset& data, const NoiseSpec& spec) {
  spec.validate();
  MeterDataset out = data;
  CounterRng rng(spec.seed);
  if (spec.injection_halfwidth > 0.0) {
    const double hw = spec.injection_halfwidth;
    for (int t = 0; t < data.T; ++t) {
      for (Eigen::Index node = 0; node < data.P.cols(); ++node) {
        const std::uint64_t c = tn_counter(t, static_cast<int>(node));
        out.P(t, node) *= 1.0 + rng.uniform_at(-hw, hw, c, kLaneNoiseP);
        out.Q(t, node) *= 1.0 + rng.uniform_at(-hw, hw, c, kLaneNoiseQ);
      }
    }
  }
  if (spec.voltage_sigma > 0.0) {
    for (int t = 0; t < data.T; ++t) {
      for (size_t k = 0; k < data.v2_nodes.size(); ++k) {
        const Eigen::Index col = static_cast<Eigen::Index>(k);
        const std::uint64_t c = tn_counter(t, data.v2_nodes[k]);
        const double v = std::sqrt(data.v2(t, col)) *
                         (1.0 + spec.voltage_sigma * rng.normal_at(c, kLaneNoiseV));
        out.v2(t, col) = v * v;
      }
    }
  }
  return out;
}

}  // namespace feederid
