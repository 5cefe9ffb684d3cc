#include "feederid/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace feederid {
namespace {

constexpr double kPivotTol = 1e-10;

// Revised simplex over the computational form  min c'x, Ax = b, x >= 0 with
// b >= 0, maintaining an explicit dense basis inverse with product-form
// updates and periodic refactorization.
class Simplex {
 public:
  Simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
          const LpOptions& opts)
      : A_(A), b_(b), m_(static_cast<int>(A.rows())),
        n_(static_cast<int>(A.cols())), opts_(opts) {
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
  }

  void set_basis(const std::vector<int>& basis) {
    basis_ = basis;
    in_basis_.assign(static_cast<size_t>(n_), false);
    for (int j : basis_) in_basis_[static_cast<size_t>(j)] = true;
    refactor();
  }

  const std::vector<int>& basis() const { return basis_; }
  int iterations() const { return total_iters_; }

  // Degenerate pivot replacing the basic variable of `row` with any column
  // < col_limit that has a usable pivot element. Returns false when the row
  // is linearly dependent on the others (no such column exists).
  bool pivot_out_row(int row, int col_limit) {
    Eigen::RowVectorXd tableau_row = binv_.row(row) * A_.leftCols(col_limit);
    for (int j = 0; j < col_limit; ++j) {
      if (in_basis_[static_cast<size_t>(j)]) continue;
      if (std::abs(tableau_row(j)) > kPivotTol) {
        Eigen::VectorXd w = binv_ * A_.col(j);
        pivot(j, row, w);
        return true;
      }
    }
    return false;
  }

  Eigen::VectorXd basic_solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd xb = binv_ * b_;
    for (int i = 0; i < m_; ++i) x(basis_[static_cast<size_t>(i)]) = xb(i);
    return x;
  }

  Eigen::VectorXd duals(const Eigen::VectorXd& c) const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = c(basis_[static_cast<size_t>(i)]);
    return binv_.transpose() * cb;
  }

  // Runs simplex for the given costs; `banned` columns never enter the basis.
  // Returns Optimal, Unbounded or IterationLimit.
  LpStatus run(const Eigen::VectorXd& c, const std::vector<bool>& banned) {
    const double cost_scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    const double enter_tol = opts_.tol * cost_scale;
    bool bland = false;
    int stall = 0;
    double last_obj = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opts_.max_iters; ++iter, ++total_iters_) {
      Eigen::VectorXd y = duals(c);
      Eigen::VectorXd d = c - A_.transpose() * y;

      int enter = -1;
      if (!bland) {
        double best = -enter_tol;
        for (int j = 0; j < n_; ++j) {
          if (in_basis_[static_cast<size_t>(j)] || banned[static_cast<size_t>(j)]) continue;
          if (d(j) < best) {
            best = d(j);
            enter = j;
          }
        }
      } else {
        for (int j = 0; j < n_; ++j) {
          if (in_basis_[static_cast<size_t>(j)] || banned[static_cast<size_t>(j)]) continue;
          if (d(j) < -enter_tol) {
            enter = j;
            break;
          }
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      Eigen::VectorXd w = binv_ * A_.col(enter);
      Eigen::VectorXd xb = binv_ * b_;

      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (w(i) <= kPivotTol) continue;
        const double ratio = std::max(xb(i), 0.0) / w(i);
        if (ratio < best_ratio - 1e-12) {
          best_ratio = ratio;
          leave = i;
        } else if (ratio < best_ratio + 1e-12 && leave >= 0) {
          if (bland) {
            // anti-cycling: lowest basis column index among ties
            if (basis_[static_cast<size_t>(i)] < basis_[static_cast<size_t>(leave)]) leave = i;
          } else if (w(i) > w(leave)) {
            leave = i;  // larger pivot element for stability
          }
        }
      }
      if (leave < 0) return LpStatus::Unbounded;

      pivot(enter, leave, w);

      const double obj = c.dot(basic_solution());
      if (obj < last_obj - enter_tol) {
        stall = 0;
        last_obj = obj;
      } else if (++stall > opts_.stall_limit) {
        bland = true;
      }
    }
    return LpStatus::IterationLimit;
  }

 private:
  void pivot(int enter, int leave, const Eigen::VectorXd& w) {
    // product-form update of the basis inverse
    const double piv = w(leave);
    Eigen::RowVectorXd row = binv_.row(leave) / piv;
    for (int i = 0; i < m_; ++i) {
      if (i == leave) continue;
      binv_.row(i) -= w(i) * row;
    }
    binv_.row(leave) = row;
    in_basis_[static_cast<size_t>(basis_[static_cast<size_t>(leave)])] = false;
    basis_[static_cast<size_t>(leave)] = enter;
    in_basis_[static_cast<size_t>(enter)] = true;
    if (++pivots_since_refactor_ >= opts_.refactor_every) refactor();
  }

  void refactor() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[static_cast<size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.solve(Eigen::MatrixXd::Identity(m_, m_));
    // partial pivoting has no rank signal; probe the inverse instead
    Eigen::VectorXd probe = Eigen::VectorXd::LinSpaced(m_, 1.0, 2.0);
    const double resid = (B * (binv_ * probe) - probe).cwiseAbs().maxCoeff();
    require(std::isfinite(resid) && resid < 1e-6 * probe.norm(),
            ErrorCode::SolverFailure, "singular simplex basis");
    pivots_since_refactor_ = 0;
  }

  const Eigen::MatrixXd& A_;
  const Eigen::VectorXd& b_;
  int m_;
  int n_;
  LpOptions opts_;
  Eigen::MatrixXd binv_;
  std::vector<int> basis_;
  std::vector<bool> in_basis_;
  int pivots_since_refactor_ = 0;
  int total_iters_ = 0;
};

}  // namespace

LpResult solve_lp_min(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& b, bool nonneg,
                      const LpOptions& opts) {
  const int rows = static_cast<int>(A.rows());
  const int n_orig = static_cast<int>(A.cols());
  require(b.size() == rows && c.size() == n_orig, ErrorCode::DimensionMismatch,
          "LP dimensions disagree");
  require(rows > 0 && n_orig > 0, ErrorCode::InvalidArgument, "empty LP");

  // structural columns: x (split into x+ - x- when free)
  const int n_struct = nonneg ? n_orig : 2 * n_orig;
  auto struct_col = [&](int j) -> Eigen::VectorXd {
    if (j < n_orig) return A.col(j);
    return -A.col(j - n_orig);
  };
  auto struct_cost = [&](int j) -> double {
    if (j < n_orig) return c(j);
    return -c(j - n_orig);
  };

  // row equilibration (preserves the feasible set; duals mapped back below)
  Eigen::VectorXd row_scale(rows);
  for (int i = 0; i < rows; ++i) {
    const double a = A.row(i).cwiseAbs().maxCoeff();
    row_scale(i) = (a > 0.0) ? 1.0 / a : 1.0;
  }

  // orientation: flip rows with negative scaled rhs so slacks/artificials
  // start feasible
  Eigen::VectorXd rhs(rows), orient(rows);
  for (int i = 0; i < rows; ++i) {
    const double bi = b(i) * row_scale(i);
    orient(i) = (bi >= 0.0) ? 1.0 : -1.0;
    rhs(i) = std::abs(bi);
  }

  int n_art = 0;
  std::vector<int> art_of_row(static_cast<size_t>(rows), -1);
  for (int i = 0; i < rows; ++i) {
    if (orient(i) < 0.0) art_of_row[static_cast<size_t>(i)] = n_art++;
  }

  const int n_total = n_struct + rows + n_art;
  Eigen::MatrixXd At = Eigen::MatrixXd::Zero(rows, n_total);
  for (int j = 0; j < n_struct; ++j) {
    At.col(j) = orient.asDiagonal() * (row_scale.asDiagonal() * struct_col(j));
  }
  for (int i = 0; i < rows; ++i) {
    At(i, n_struct + i) = orient(i);  // slack
    if (art_of_row[static_cast<size_t>(i)] >= 0) {
      At(i, n_struct + rows + art_of_row[static_cast<size_t>(i)]) = 1.0;
    }
  }

  Simplex simplex(At, rhs, opts);
  std::vector<int> basis(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    basis[static_cast<size_t>(i)] = (art_of_row[static_cast<size_t>(i)] >= 0)
        ? n_struct + rows + art_of_row[static_cast<size_t>(i)]
        : n_struct + i;
  }
  simplex.set_basis(basis);

  LpResult out;
  std::vector<bool> banned(static_cast<size_t>(n_total), false);

  if (n_art > 0) {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(n_total);
    c1.tail(n_art).setOnes();
    const LpStatus s1 = simplex.run(c1, banned);
    if (s1 == LpStatus::IterationLimit) {
      out.status = LpStatus::IterationLimit;
      out.iterations = simplex.iterations();
      return out;
    }
    const double phase1 = c1.dot(simplex.basic_solution());
    if (phase1 > opts.tol * std::max(1.0, rhs.maxCoeff())) {
      out.status = LpStatus::Infeasible;
      out.iterations = simplex.iterations();
      return out;
    }
    // push remaining basic artificials out with degenerate pivots so phase 2
    // can never grow them again; rows where that fails are dependent and the
    // stuck artificial stays pinned at zero
    const int first_art = n_struct + rows;
    for (int i = 0; i < rows; ++i) {
      if (simplex.basis()[static_cast<size_t>(i)] >= first_art) {
        simplex.pivot_out_row(i, first_art);
      }
    }
    for (int j = first_art; j < n_total; ++j) banned[static_cast<size_t>(j)] = true;
  }

  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(n_total);
  for (int j = 0; j < n_struct; ++j) c2(j) = struct_cost(j);
  const LpStatus s2 = simplex.run(c2, banned);
  out.iterations = simplex.iterations();
  if (s2 != LpStatus::Optimal) {
    out.status = s2;
    return out;
  }

  const Eigen::VectorXd xt = simplex.basic_solution();
  out.x = Eigen::VectorXd::Zero(n_orig);
  for (int j = 0; j < n_orig; ++j) {
    out.x(j) = xt(j) - (nonneg ? 0.0 : xt(n_orig + j));
  }
  out.objective = c.dot(out.x);

  // dual on scaled equality rows -> multipliers for the original Ax <= b rows
  const Eigen::VectorXd yt = simplex.duals(c2);
  out.y = Eigen::VectorXd(rows);
  for (int i = 0; i < rows; ++i) out.y(i) = yt(i) * orient(i) * row_scale(i);

  out.duality_gap = std::abs(out.objective - b.dot(out.y));
  const Eigen::VectorXd slack = b - A * out.x;
  out.primal_infeasibility = std::max(0.0, -slack.minCoeff());
  double cs = 0.0;
  for (int i = 0; i < rows; ++i) cs += std::abs(out.y(i) * slack(i));
  const Eigen::VectorXd red = c - A.transpose() * out.y;
  if (nonneg) {
    for (int j = 0; j < n_orig; ++j) cs += std::abs(red(j) * out.x(j));
  } else {
    // free variables: dual feasibility requires A'y = c exactly
    for (int j = 0; j < n_orig; ++j) cs += std::abs(red(j)) * std::max(1.0, std::abs(out.x(j)));
  }
  out.comp_slack_residual = cs;
  out.status = LpStatus::Optimal;
  return out;
}

LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& b, bool nonneg,
                      const LpOptions& opts) {
  LpResult r = solve_lp_min(-c, A, b, nonneg, opts);
  if (r.status == LpStatus::Optimal) {
    r.objective = -r.objective;
    r.y = -r.y;
    r.duality_gap = std::abs(r.objective - b.dot(r.y));
  }
  return r;
}

}  // namespace feederid
