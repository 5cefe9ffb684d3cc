#pragma once

#include <Eigen/Dense>

#include "feederid/library.hpp"
#include "feederid/polytope.hpp"

namespace feederid {

struct RefinementConfig {
  double lambda = 0.01;  // learning rate
  double rho = 0.0;      // constraint-violation penalty coefficient
  int max_iters = 5000;
  double stop_tol = -1.0;  // step-norm threshold; < 0 means 1e-8 * lambda
  bool verbose = false;    // per-row convergence log (JSON lines on stderr)
};

// Q(z) = sum_e min_c |(r_e, x_e) - l_e * c|  (complex modulus per edge).
double library_distance(const Eigen::VectorXd& z, const CableLibrary& lib,
                        const Eigen::VectorXd& lengths);

// Subgradient of Q: per edge the unit phasor of z_e - l_e*c_nearest, zero
// within 1e-14 of a library point; argmin ties go to the lowest index.
Eigen::VectorXd library_gradient(const Eigen::VectorXd& z,
                                 const CableLibrary& lib,
                                 const Eigen::VectorXd& lengths);

// (rho/2) * ||max(M z - d, 0)||^2 and its gradient rho * M' max(M z - d, 0).
double penalty_value(const Eigen::VectorXd& z, const HalfSpaceSystem& system,
                     double rho);
Eigen::VectorXd penalty_gradient(const Eigen::VectorXd& z,
                                 const HalfSpaceSystem& system, double rho);

// Row-wise descent z <- z - lambda * (grad Q + grad penalty). The library
// pull is capped per edge at the remaining distance so descent lands exactly
// on library points instead of orbiting them. Rows whose objective ends above
// its best-seen value are returned at that best iterate.
Eigen::MatrixXd refine_candidates(const Eigen::MatrixXd& B,
                                  const HalfSpaceSystem& system,
                                  const CableLibrary& lib,
                                  const Eigen::VectorXd& lengths,
                                  const RefinementConfig& cfg);

}  // namespace feederid
