#pragma once

#include <Eigen/Dense>

#include "feederid/common.hpp"

namespace feederid {

struct LpOptions {
  double tol = 1e-9;
  int max_iters = 200000;
  int refactor_every = 64;
  // consecutive non-improving pivots before switching pricing to Bland's rule
  int stall_limit = 500;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;  // primal point in the caller's variables
  double objective = 0.0;
  // multipliers on the Ax <= b rows; for a minimization they satisfy y <= 0,
  // A'y <= c, and complementary slackness at the reported point
  Eigen::VectorXd y;
  double duality_gap = 0.0;
  double comp_slack_residual = 0.0;
  double primal_infeasibility = 0.0;
  int iterations = 0;
};

// min c'x  s.t.  A x <= b,  x >= 0 when nonneg (x free otherwise).
// Dense two-phase revised simplex; Bland's rule engages on stalls.
LpResult solve_lp_min(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& b, bool nonneg,
                      const LpOptions& opts = {});

// max c'x under the same constraints. The reported objective and duals are for
// the maximization (gap and slackness residuals stay non-negative).
LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& b, bool nonneg,
                      const LpOptions& opts = {});

}  // namespace feederid
