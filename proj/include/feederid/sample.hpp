#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "feederid/polytope.hpp"

namespace feederid {

// Constraint system without provenance, for analytic test polytopes and
// internally-derived systems.
HalfSpaceSystem make_system(Eigen::MatrixXd M, Eigen::VectorXd d);

// Per-row LP certificates: a row goes iff its LHS maximum over the remaining
// rows stays within its RHS. Feasible set is unchanged.
HalfSpaceSystem remove_redundant(const HalfSpaceSystem& system,
                                 const LpOptions& lp_opts = {});

// Walk-space polytope M u <= d plus the affine map back to input coords.
struct RoundedPolytope {
  Eigen::MatrixXd M;
  Eigen::VectorXd d;
  Eigen::MatrixXd map_L;   // input = map_L * u + shift
  Eigen::VectorXd shift;
  Eigen::VectorXd start;   // strictly interior in walk space

  int dim() const { return static_cast<int>(M.cols()); }
  Eigen::VectorXd to_input(const Eigen::VectorXd& u) const {
    return map_L * u + shift;
  }
};

// Equality-like row pairs (slab width <= 1e-9 after normalization) are
// eliminated by null-space projection; the rest is whitened with pilot
// hit-and-run covariance rounds until the pilot covariance condition number
// drops below 10 (at least two rounds).
RoundedPolytope round_polytope(const HalfSpaceSystem& system,
                               std::uint64_t pilot_seed = 0x726F756E64ULL);

struct WalkOptions {
  enum class Kind { CoordinateHitAndRun, Dikin };
  Kind kind = Kind::CoordinateHitAndRun;
  int chains = 4;
  int thinning = 3;         // raw steps per retained sample
  int burn_in_per_dim = 10;
  double dikin_step = 0.5;
};

// m near-uniform samples, returned in input coordinates (rows = samples).
// Deterministic in (rp, m, seed, options); chains are interleaved by index.
Eigen::MatrixXd sample_walk(const RoundedPolytope& rp, int m,
                            std::uint64_t seed, const WalkOptions& opts = {});

// Scatters free-coordinate samples into full impedance vectors around the
// split's anchor; optionally validates every row against the full system.
Eigen::MatrixXd lift_to_full(const Eigen::MatrixXd& samples_free,
                             const DirectionSplit& split,
                             const HalfSpaceSystem* validate_against = nullptr);

}  // namespace feederid
