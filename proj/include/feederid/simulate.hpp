#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "feederid/library.hpp"
#include "feederid/network.hpp"
#include "feederid/rng.hpp"

namespace feederid {

// Per-edge cable choice and the impedance vector it materializes.
struct GroundTruthAssignment {
  std::vector<int> cable_index;  // per edge, into the library's edge list
  Eigen::VectorXd z;             // [r; x], length 2|E|, per-unit
};

GroundTruthAssignment materialize_assignment(const FeederTopology& topology,
                                             const CableLibrary& library,
                                             const std::vector<int>& choice);

// Relative perturbation magnitudes. All zero = identity.
struct NoiseSpec {
  double length_sigma = 0.0;         // gaussian std on lengths
  double injection_halfwidth = 0.0;  // uniform half-width on P and Q
  double voltage_sigma = 0.0;        // gaussian std on |v|, before squaring
  std::uint64_t seed = 0;

  void validate() const {
    require(length_sigma >= 0.0 && injection_halfwidth >= 0.0 &&
                voltage_sigma >= 0.0,
            ErrorCode::InvalidArgument, "noise magnitudes must be >= 0");
  }
};

struct AcOptions {
  double tol = 1e-10;  // max per-unit voltage update between sweeps
  int max_iters = 100;
};

// Complex nodal voltages for one snapshot, constant-power loads (consumption
// positive), slack voltage root_v at node 0. Backward/forward sweep.
Eigen::VectorXcd ac_power_flow(const FeederTopology& topology,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& P,
                               const Eigen::VectorXd& Q, double root_v = 1.0,
                               const AcOptions& opts = {});

// Linearized squared voltages at every node for T snapshots:
//   v2[t][n] = 1 - 2 * sum_e A[n][e] * (Pbr[t][e] r_e + Qbr[t][e] x_e)
Eigen::MatrixXd lindistflow_forward(const FeederTopology& topology,
                                    const Eigen::VectorXd& z,
                                    const Eigen::MatrixXd& P,
                                    const Eigen::MatrixXd& Q);

// Draws (P, Q) consumption for a leaf at snapshot t. Implementations address
// a counter-based generator so draws are order-independent.
struct InjectionSampler {
  std::function<std::pair<double, double>(int t, int node, const CounterRng&)>
      draw;
};

// P uniform in [p_lo, p_hi], Q = P * tan(acos(pf)).
InjectionSampler fixed_pf_sampler(double p_lo, double p_hi, double pf);

// P and Q drawn independently (mixed power factors).
InjectionSampler uniform_pq_sampler(double p_lo, double p_hi, double q_lo,
                                    double q_hi);

// Replays given T x N profiles verbatim.
InjectionSampler replay_sampler(Eigen::MatrixXd P, Eigen::MatrixXd Q);

// Synthesizes a meter dataset: loads drawn at leaves, full AC solve per
// snapshot, squared voltage magnitudes retained at root + leaves.
MeterDataset make_dataset(const FeederTopology& topology,
                          const Eigen::VectorXd& z,
                          const InjectionSampler& sampler, int T,
                          std::uint64_t seed, const AcOptions& opts = {});

// Same dataset but with exact linearized voltages instead of AC ones.
MeterDataset make_dataset_lindistflow(const FeederTopology& topology,
                                      const Eigen::VectorXd& z,
                                      const InjectionSampler& sampler, int T,
                                      std::uint64_t seed);

// lengths' = lengths .* (1 + N(0, sigma)), clipped positive.
Eigen::VectorXd apply_noise(const Eigen::VectorXd& lengths,
                            const NoiseSpec& spec);

// Injections: multiplicative uniform, independent per entry on P and Q.
// Voltages: multiplicative gaussian on |v| (then squared).
MeterDataset apply_noise(const MeterDataset& data, const NoiseSpec& spec);

}  // namespace feederid
