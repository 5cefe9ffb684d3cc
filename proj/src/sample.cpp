#include "feederid/sample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "feederid/rng.hpp"

namespace feederid {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One coordinate hit-and-run step: uniform draw on the feasible segment along
// axis k, slack vector kept incrementally.
void char_step(const Eigen::MatrixXd& M, Eigen::VectorXd& u,
               Eigen::VectorXd& slack, Rng& rng) {
  const int n = static_cast<int>(M.cols());
  const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  double t_lo = -kInf, t_hi = kInf;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double a = M(i, k);
    if (a > 1e-14) {
      t_hi = std::min(t_hi, slack(i) / a);
    } else if (a < -1e-14) {
      t_lo = std::max(t_lo, slack(i) / a);
    }
  }
  require(std::isfinite(t_lo) && std::isfinite(t_hi), ErrorCode::Unbounded,
          "walk direction unbounded: polytope is not bounded");
  if (t_hi <= t_lo) return;  // pinched; stay put
  const double t = t_lo + (t_hi - t_lo) * rng.uniform01_open();
  u(k) += t;
  slack -= t * M.col(k);
}

// Runs `steps` CHAR steps; optionally records every visited point.
void char_run(const Eigen::MatrixXd& M, const Eigen::VectorXd& d,
              Eigen::VectorXd& u, int steps, Rng& rng,
              Eigen::MatrixXd* record) {
  Eigen::VectorXd slack = d - M * u;
  require(slack.minCoeff() > 0.0, ErrorCode::StartInfeasible,
          "walk start is not strictly interior");
  for (int s = 0; s < steps; ++s) {
    if (s > 0 && s % 4096 == 0) slack = d - M * u;  // kill drift
    char_step(M, u, slack, rng);
    if (record != nullptr) record->row(s) = u.transpose();
  }
}

// Log-barrier Hessian at u: sum_i a_i a_i' / slack_i^2.
Eigen::MatrixXd dikin_hessian(const Eigen::MatrixXd& M,
                              const Eigen::VectorXd& slack) {
  const Eigen::VectorXd w = slack.cwiseInverse();
  const Eigen::MatrixXd Mw = w.asDiagonal() * M;
  return Mw.transpose() * Mw;
}

// Metropolized Dikin walk step. Returns true when the proposal is accepted.
bool dikin_step(const Eigen::MatrixXd& M, const Eigen::VectorXd& d,
                Eigen::VectorXd& u, double step, Rng& rng) {
  const int n = static_cast<int>(M.cols());
  const Eigen::VectorXd slack_u = d - M * u;
  const Eigen::MatrixXd Hu = dikin_hessian(M, slack_u);
  const Eigen::LLT<Eigen::MatrixXd> llt_u(Hu);
  require(llt_u.info() == Eigen::Success, ErrorCode::NumericalDegeneracy,
          "barrier hessian not positive definite");

  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.normal();
  // v = u + step/sqrt(n) * L^-T g  has covariance (step^2/n) H^-1
  const double scale = step / std::sqrt(static_cast<double>(n));
  const Eigen::VectorXd v =
      u + scale * llt_u.matrixU().solve(g);

  const Eigen::VectorXd slack_v = d - M * v;
  const double accept_draw = rng.uniform01();  // consumed even on rejection
  if (slack_v.minCoeff() <= 0.0) return false;

  const Eigen::MatrixXd Hv = dikin_hessian(M, slack_v);
  const Eigen::LLT<Eigen::MatrixXd> llt_v(Hv);
  if (llt_v.info() != Eigen::Success) return false;

  auto half_logdet = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  };
  const Eigen::VectorXd delta = v - u;
  const double qn = static_cast<double>(n) / (2.0 * step * step);
  const double log_fwd = half_logdet(llt_u) - qn * delta.dot(Hu * delta);
  const double log_bwd = half_logdet(llt_v) - qn * delta.dot(Hv * delta);
  if (std::log(std::max(accept_draw, 1e-300)) <= log_bwd - log_fwd) {
    u = v;
    return true;
  }
  return false;
}

// Max of row * x over the system without that row, via the LP certificate.
// The dual form keeps the simplex basis small when rows >> cols.
struct RowMax {
  bool bounded = false;
  double value = 0.0;
};

RowMax row_max_primal(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                      const Eigen::RowVectorXd& obj, const LpOptions& opts) {
  const LpResult lp =
      solve_lp_max(obj.transpose(), A, b, /*nonneg=*/false, opts);
  if (lp.status == LpStatus::Unbounded) return {false, 0.0};
  if (lp.status == LpStatus::Infeasible) {
    fail(ErrorCode::Infeasible, "constraint set is empty");
  }
  require(lp.status == LpStatus::Optimal, ErrorCode::SolverFailure,
          "redundancy certificate LP failed");
  return {true, lp.objective};
}

RowMax row_max_dual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                    const Eigen::RowVectorXd& obj, const LpOptions& opts) {
  // primal: max obj*x st Ax <= b. dual: min b'y st A'y = obj, y >= 0.
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Eigen::MatrixXd D(2 * n, m);
  D.topRows(n) = A.transpose();
  D.bottomRows(n) = -A.transpose();
  Eigen::VectorXd rhs(2 * n);
  rhs.head(n) = obj.transpose();
  rhs.tail(n) = -obj.transpose();
  const LpResult lp = solve_lp_min(b, D, rhs, /*nonneg=*/true, opts);
  if (lp.status == LpStatus::Unbounded) {
    fail(ErrorCode::Infeasible, "constraint set is empty");
  }
  if (lp.status == LpStatus::Infeasible) return {false, 0.0};
  require(lp.status == LpStatus::Optimal, ErrorCode::SolverFailure,
          "redundancy certificate LP failed");
  return {true, lp.objective};
}

}  // namespace

HalfSpaceSystem make_system(Eigen::MatrixXd M, Eigen::VectorXd d) {
  HalfSpaceSystem sys;
  sys.M = std::move(M);
  sys.d = std::move(d);
  sys.tags.assign(static_cast<size_t>(sys.M.rows()),
                  RowTag{RowKind::Generic, -1, -1, -1});
  sys.check();
  return sys;
}

HalfSpaceSystem remove_redundant(const HalfSpaceSystem& system,
                                 const LpOptions& lp_opts) {
  system.check();
  const int n = system.cols();
  require(system.rows() > 0 && n > 0, ErrorCode::InvalidArgument,
          "empty system");

  std::vector<int> alive(static_cast<size_t>(system.rows()));
  std::iota(alive.begin(), alive.end(), 0);

  for (int i = 0; i < system.rows(); ++i) {
    if (alive.size() <= 1) break;  // a single row is never redundant
    std::vector<int> others;
    others.reserve(alive.size());
    for (int j : alive) {
      if (j != i) others.push_back(j);
    }
    if (others.size() == alive.size()) continue;  // i already removed

    Eigen::MatrixXd A(static_cast<Eigen::Index>(others.size()), n);
    Eigen::VectorXd b(static_cast<Eigen::Index>(others.size()));
    for (size_t k = 0; k < others.size(); ++k) {
      A.row(static_cast<Eigen::Index>(k)) = system.M.row(others[k]);
      b(static_cast<Eigen::Index>(k)) = system.d(others[k]);
    }
    const Eigen::RowVectorXd obj = system.M.row(i);
    const RowMax rm = (A.rows() > 3 * A.cols())
                          ? row_max_dual(A, b, obj, lp_opts)
                          : row_max_primal(A, b, obj, lp_opts);
    if (!rm.bounded) continue;  // objective escapes: row is doing work
    const double tol = 1e-9 * std::max(1.0, std::abs(system.d(i)));
    if (rm.value <= system.d(i) + tol) {
      alive.erase(std::find(alive.begin(), alive.end(), i));
    }
  }

  HalfSpaceSystem out;
  out.M.resize(static_cast<Eigen::Index>(alive.size()), n);
  out.d.resize(static_cast<Eigen::Index>(alive.size()));
  for (size_t k = 0; k < alive.size(); ++k) {
    out.M.row(static_cast<Eigen::Index>(k)) = system.M.row(alive[k]);
    out.d(static_cast<Eigen::Index>(k)) = system.d(alive[k]);
    out.tags.push_back(system.tags[static_cast<size_t>(alive[k])]);
  }
  out.check();
  return out;
}

RoundedPolytope round_polytope(const HalfSpaceSystem& system,
                               std::uint64_t pilot_seed) {
  system.check();
  const int n = system.cols();
  require(system.rows() > 0 && n > 0, ErrorCode::InvalidArgument,
          "empty system");

  // --- equality-like pair elimination -------------------------------------
  Eigen::MatrixXd Mn = system.M;
  Eigen::VectorXd dn = system.d;
  Eigen::VectorXd norms(system.rows());
  for (int i = 0; i < system.rows(); ++i) {
    norms(i) = system.M.row(i).norm();
    require(norms(i) > 1e-14, ErrorCode::InvalidArgument,
            "zero row in system; simplify first");
    Mn.row(i) /= norms(i);
    dn(i) /= norms(i);
  }

  std::vector<bool> in_pair(static_cast<size_t>(system.rows()), false);
  std::vector<Eigen::RowVectorXd> eq_rows;
  std::vector<double> eq_rhs;
  for (int i = 0; i < system.rows(); ++i) {
    if (in_pair[static_cast<size_t>(i)]) continue;
    for (int j = i + 1; j < system.rows(); ++j) {
      if (in_pair[static_cast<size_t>(j)]) continue;
      if ((Mn.row(i) + Mn.row(j)).norm() > 1e-12) continue;
      const double width = dn(i) + dn(j);
      require(width >= -1e-9, ErrorCode::Infeasible,
              "antiparallel rows with negative gap: empty polytope");
      if (width <= 1e-9) {
        in_pair[static_cast<size_t>(i)] = in_pair[static_cast<size_t>(j)] = true;
        eq_rows.push_back(Mn.row(i));
        eq_rhs.push_back(0.5 * (dn(i) - dn(j)));  // slab midpoint
        break;
      }
    }
  }

  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Mc;
  Eigen::VectorXd dc;

  if (!eq_rows.empty()) {
    const int k = static_cast<int>(eq_rows.size());
    Eigen::MatrixXd E(k, n);
    Eigen::VectorXd f(k);
    for (int i = 0; i < k; ++i) {
      E.row(i) = eq_rows[static_cast<size_t>(i)];
      f(i) = eq_rhs[static_cast<size_t>(i)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        E, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > 1e-10 * smax) ++rank;
    }
    require(rank < n, ErrorCode::NumericalDegeneracy,
            "equality constraints pin every direction: nothing to sample");
    // min-norm particular solution
    Eigen::VectorXd sv_inv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv_inv.size(); ++i) {
      sv_inv(i) = (svd.singularValues()(i) > 1e-10 * smax)
                      ? 1.0 / svd.singularValues()(i)
                      : 0.0;
    }
    origin = svd.matrixV().leftCols(sv_inv.size()) * sv_inv.asDiagonal() *
             svd.matrixU().transpose() * f;
    require((E * origin - f).cwiseAbs().maxCoeff() <= 1e-8,
            ErrorCode::Infeasible, "inconsistent equality constraints");
    basis = svd.matrixV().rightCols(n - rank);  // orthonormal null space

    std::vector<int> keep;
    for (int i = 0; i < system.rows(); ++i) {
      if (!in_pair[static_cast<size_t>(i)]) keep.push_back(i);
    }
    Mc.resize(static_cast<Eigen::Index>(keep.size()), n - rank);
    dc.resize(static_cast<Eigen::Index>(keep.size()));
    Eigen::Index r = 0;
    for (int i : keep) {
      const Eigen::RowVectorXd projected = Mn.row(i) * basis;
      const double rhs = dn(i) - Mn.row(i).dot(origin);
      if (projected.cwiseAbs().maxCoeff() <= 1e-12) {
        require(rhs >= -1e-9, ErrorCode::Infeasible,
                "projected-out row is violated on the equality set");
        continue;  // row vacuous on the affine subspace
      }
      Mc.row(r) = projected;
      dc(r) = rhs;
      ++r;
    }
    Mc.conservativeResize(r, Eigen::NoChange);
    dc.conservativeResize(r);
    require(r > 0, ErrorCode::NumericalDegeneracy,
            "no inequalities left after projection");
  } else {
    Mc = Mn;
    dc = dn;
  }

  // --- interior start -------------------------------------------------------
  const ChebyshevResult cheb = chebyshev_center(make_system(Mc, dc));
  require(cheb.radius > 0.0, ErrorCode::NumericalDegeneracy,
          "polytope has no interior in the free directions");
  Eigen::VectorXd w = cheb.center;

  // --- pilot whitening rounds ----------------------------------------------
  constexpr int kPilotSteps = 5000;
  constexpr int kMinRounds = 2;
  constexpr int kMaxRounds = 5;
  const int q = static_cast<int>(Mc.cols());

  int rounds_applied = 0;
  double cond = kInf;
  for (;;) {
    Eigen::MatrixXd pilot(kPilotSteps, q);
    Rng rng(mix_seed(pilot_seed, static_cast<std::uint64_t>(rounds_applied)));
    char_run(Mc, dc, w, kPilotSteps, rng, &pilot);

    const Eigen::RowVectorXd mu = pilot.colwise().mean();
    const Eigen::MatrixXd centered = pilot.rowwise() - mu;
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(kPilotSteps - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorCode::NumericalDegeneracy,
            "pilot covariance eigendecomposition failed");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    require(lo > 1e-12 * std::max(hi, 1e-300), ErrorCode::NumericalDegeneracy,
            "pilot covariance is rank-deficient: a free direction carries no "
            "volume");
    cond = hi / lo;
    if (rounds_applied >= kMinRounds && cond < 10.0) break;
    if (rounds_applied >= kMaxRounds) break;

    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success, ErrorCode::NumericalDegeneracy,
            "pilot covariance not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::VectorXd mu_t = mu.transpose();
    // coords w = mu + L w'
    w = L.triangularView<Eigen::Lower>().solve(w - mu_t);
    dc -= Mc * mu_t;
    Mc = Mc * L;
    origin += basis * mu_t;
    basis = basis * L;
    ++rounds_applied;
  }
  require(cond < 10.0, ErrorCode::NumericalDegeneracy,
          "rounding failed to control the covariance condition number");

  RoundedPolytope rp;
  rp.M = std::move(Mc);
  rp.d = std::move(dc);
  rp.map_L = std::move(basis);
  rp.shift = std::move(origin);
  rp.start = std::move(w);
  require((rp.d - rp.M * rp.start).minCoeff() > 0.0,
          ErrorCode::StartInfeasible, "rounded start not strictly interior");
  return rp;
}

Eigen::MatrixXd sample_walk(const RoundedPolytope& rp, int m,
                            std::uint64_t seed, const WalkOptions& opts) {
  require(m >= 1, ErrorCode::InvalidArgument, "need m >= 1 samples");
  require(opts.chains >= 1 && opts.thinning >= 1, ErrorCode::InvalidArgument,
          "bad walk options");
  const int q = rp.dim();
  require(rp.start.size() == q, ErrorCode::DimensionMismatch,
          "start dimension mismatch");
  {
    const Eigen::VectorXd slack = rp.d - rp.M * rp.start;
    require(slack.minCoeff() > 0.0, ErrorCode::StartInfeasible,
            "walk start is not strictly interior");
  }

  const int nc = std::min(opts.chains, m);
  const int input_dim = static_cast<int>(rp.map_L.rows());
  Eigen::MatrixXd out(m, input_dim);

  for (int c = 0; c < nc; ++c) {
    const int quota = (m - c + nc - 1) / nc;  // samples with index % nc == c
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    Eigen::VectorXd u = rp.start;
    Eigen::VectorXd slack = rp.d - rp.M * u;

    const int burn = opts.burn_in_per_dim * q;
    long long step_count = 0;
    auto step = [&]() {
      if (step_count > 0 && step_count % 4096 == 0) slack = rp.d - rp.M * u;
      ++step_count;
      if (opts.kind == WalkOptions::Kind::CoordinateHitAndRun) {
        char_step(rp.M, u, slack, rng);
      } else {
        if (dikin_step(rp.M, rp.d, u, opts.dikin_step, rng)) {
          slack = rp.d - rp.M * u;
        }
      }
    };
    for (int s = 0; s < burn; ++s) step();
    for (int k = 0; k < quota; ++k) {
      for (int s = 0; s < opts.thinning; ++s) step();
      out.row(c + k * nc) = rp.to_input(u).transpose();
    }
  }
  return out;
}

Eigen::MatrixXd lift_to_full(const Eigen::MatrixXd& samples_free,
                             const DirectionSplit& split,
                             const HalfSpaceSystem* validate_against) {
  const Eigen::Index m = samples_free.rows();
  require(samples_free.cols() ==
              static_cast<Eigen::Index>(split.free_indices.size()),
          ErrorCode::DimensionMismatch,
          "sample columns != free coordinate count");
  Eigen::MatrixXd full(m, split.z0_full.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    full.row(i) = split.lift(samples_free.row(i).transpose()).transpose();
  }
  if (validate_against != nullptr) {
    validate_against->check();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double viol =
          (validate_against->M * full.row(i).transpose() - validate_against->d)
              .maxCoeff();
      require(viol <= 1e-8, ErrorCode::SolverFailure,
              "lifted sample violates the constraint set by " +
                  std::to_string(viol));
    }
  }
  return full;
}

}  // namespace feederid
