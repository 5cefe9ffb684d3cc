#include "feederid/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

namespace feederid {
namespace {

// Data rows mapping one (t, leaf) pair to coefficients on [r; x]:
// column e holds 2*A(leaf,e)*Pbr(t,e), column E+e holds 2*A(leaf,e)*Qbr(t,e).
Eigen::RowVectorXd data_row(const Eigen::MatrixXd& A,
                            const AggregatedFlows& flows, int leaf, int t,
                            int ne) {
  Eigen::RowVectorXd row(2 * ne);
  for (int e = 0; e < ne; ++e) {
    row(e) = 2.0 * A(leaf, e) * flows.Pbr(t, e);
    row(ne + e) = 2.0 * A(leaf, e) * flows.Qbr(t, e);
  }
  return row;
}

// Unique data rows (one per (t, leaf)) for diagnostics; prefers tagged
// DataLower rows, falls back to every row when the system carries no tags.
Eigen::MatrixXd data_block(const HalfSpaceSystem& system) {
  std::vector<int> keep;
  for (int i = 0; i < system.rows(); ++i) {
    if (system.tags[static_cast<size_t>(i)].kind == RowKind::DataLower) {
      keep.push_back(i);
    }
  }
  if (keep.empty()) {
    keep.resize(static_cast<size_t>(system.rows()));
    std::iota(keep.begin(), keep.end(), 0);
  }
  Eigen::MatrixXd D(static_cast<Eigen::Index>(keep.size()), system.cols());
  for (size_t k = 0; k < keep.size(); ++k) D.row(static_cast<Eigen::Index>(k)) = system.M.row(keep[k]);
  return D;
}

}  // namespace

void HalfSpaceSystem::check() const {
  require(M.rows() == d.size(), ErrorCode::DimensionMismatch,
          "halfspace rows and rhs disagree");
  require(tags.size() == static_cast<size_t>(M.rows()),
          ErrorCode::DimensionMismatch, "halfspace tags misaligned");
  require(M.allFinite() && d.allFinite(), ErrorCode::InvalidData,
          "halfspace system has non-finite entries");
}

DeltaSolution solve_delta_lp(const FeederTopology& topology,
                             const MeterDataset& data,
                             const AggregatedFlows& flows,
                             const LpOptions& lp_opts) {
  data.check_consistent(topology);
  const int ne = topology.edge_count();
  const auto& leaves = topology.leaf_set();
  require(!leaves.empty(), ErrorCode::InvalidArgument, "feeder has no leaves");
  require(flows.Pbr.rows() == data.T && flows.Pbr.cols() == ne,
          ErrorCode::DimensionMismatch, "flows inconsistent with data");

  const Eigen::MatrixXd A = incidence(topology);
  const int n_rows = 2 * data.T * static_cast<int>(leaves.size());
  const int n_vars = 2 * ne + 1;  // [z; Delta]
  Eigen::MatrixXd C(n_rows, n_vars);
  Eigen::VectorXd b(n_rows);

  int r = 0;
  for (int t = 0; t < data.T; ++t) {
    const double root_v2 = data.v2(t, 0);
    for (int leaf : leaves) {
      const Eigen::RowVectorXd m = data_row(A, flows, leaf, t, ne);
      const double meas = data.v2_at(t, leaf);
      // predicted v2 = root_v2 - m z; |predicted - measured| <= Delta
      C.row(r).head(2 * ne) = -m;
      C(r, 2 * ne) = -1.0;
      b(r) = meas - root_v2;
      ++r;
      C.row(r).head(2 * ne) = m;
      C(r, 2 * ne) = -1.0;
      b(r) = root_v2 - meas;
      ++r;
    }
  }

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n_vars);
  c(2 * ne) = 1.0;
  const LpResult lp = solve_lp_min(c, C, b, /*nonneg=*/true, lp_opts);
  if (lp.status == LpStatus::Unbounded) {
    fail(ErrorCode::LpUnbounded, "slack minimization reported unbounded");
  }
  require(lp.status == LpStatus::Optimal, ErrorCode::SolverFailure,
          "slack minimization did not reach optimality");
  require(lp.duality_gap < 1e-9 * std::max(1.0, std::abs(lp.objective)),
          ErrorCode::SolverFailure, "slack LP optimality certificate failed");

  DeltaSolution out;
  out.z_star = lp.x.head(2 * ne);
  // the optimum is a minimax of absolute residuals; solver round-off can
  // report it a hair below zero on exactly linear data
  out.delta_star = std::max(lp.objective, 0.0);
  out.duality_gap = lp.duality_gap;
  return out;
}

HalfSpaceSystem assemble_halfspaces(const FeederTopology& topology,
                                    const MeterDataset& data,
                                    const AggregatedFlows& flows,
                                    double delta_star, double kappa) {
  data.check_consistent(topology);
  require(kappa > 1.0, ErrorCode::InvalidArgument, "kappa must exceed 1");
  require(delta_star >= 0.0, ErrorCode::InvalidArgument,
          "delta_star must be >= 0");
  const int ne = topology.edge_count();
  const auto& leaves = topology.leaf_set();
  require(flows.Pbr.rows() == data.T && flows.Pbr.cols() == ne,
          ErrorCode::DimensionMismatch, "flows inconsistent with data");

  double slack = kappa * delta_star;
  if (delta_star < 1e-12) {
    slack = 1e-12;
    std::cerr << "[polytope] data is (near-)exactly linear: slack floor "
                 "1e-12 substituted for kappa*delta_star = "
              << kappa * delta_star << "\n";
  }

  const Eigen::MatrixXd A = incidence(topology);
  HalfSpaceSystem sys;
  const int n_rows = 2 * data.T * static_cast<int>(leaves.size());
  sys.M.resize(n_rows, 2 * ne);
  sys.d.resize(n_rows);
  sys.tags.reserve(static_cast<size_t>(n_rows));

  int r = 0;
  for (int t = 0; t < data.T; ++t) {
    const double root_v2 = data.v2(t, 0);
    for (int leaf : leaves) {
      const Eigen::RowVectorXd m = data_row(A, flows, leaf, t, ne);
      const double meas = data.v2_at(t, leaf);
      // upper: root_v2 - m z <= meas + slack
      sys.M.row(r) = -m;
      sys.d(r) = meas - root_v2 + slack;
      sys.tags.push_back({RowKind::DataUpper, leaf, t, -1});
      ++r;
      // lower: root_v2 - m z >= meas - slack
      sys.M.row(r) = m;
      sys.d(r) = root_v2 - meas + slack;
      sys.tags.push_back({RowKind::DataLower, leaf, t, -1});
      ++r;
    }
  }
  sys.check();
  return sys;
}

ChebyshevResult chebyshev_center(const HalfSpaceSystem& system,
                                 const LpOptions& lp_opts) {
  system.check();
  const int n = system.cols();
  require(system.rows() > 0 && n > 0, ErrorCode::InvalidArgument,
          "empty halfspace system");

  std::vector<int> keep;
  for (int i = 0; i < system.rows(); ++i) {
    const double norm = system.M.row(i).norm();
    if (norm <= 1e-14) {
      require(system.d(i) >= -1e-12, ErrorCode::Infeasible,
              "zero row with negative rhs: empty polytope");
      continue;  // vacuous row
    }
    keep.push_back(i);
  }
  require(!keep.empty(), ErrorCode::InvalidArgument,
          "no usable rows for center computation");

  const int m = static_cast<int>(keep.size());
  // variables [z; radius], all free; radius >= 0 enforced by an extra row
  Eigen::MatrixXd A(m + 1, n + 1);
  Eigen::VectorXd b(m + 1);
  for (int k = 0; k < m; ++k) {
    A.row(k).head(n) = system.M.row(keep[static_cast<size_t>(k)]);
    A(k, n) = system.M.row(keep[static_cast<size_t>(k)]).norm();
    b(k) = system.d(keep[static_cast<size_t>(k)]);
  }
  A.row(m).setZero();
  A(m, n) = -1.0;
  b(m) = 0.0;

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c(n) = 1.0;
  const LpResult lp = solve_lp_max(c, A, b, /*nonneg=*/false, lp_opts);
  if (lp.status == LpStatus::Infeasible) {
    fail(ErrorCode::Infeasible,
         "constraint set is empty: measurements are mutually incompatible");
  }
  if (lp.status == LpStatus::Unbounded) {
    fail(ErrorCode::Unbounded,
         "constraint set is unbounded; apply library bounds first");
  }
  require(lp.status == LpStatus::Optimal, ErrorCode::SolverFailure,
          "center LP did not reach optimality");

  ChebyshevResult out;
  out.center = lp.x.head(n);
  out.radius = lp.x(n);
  return out;
}

HalfSpaceSystem apply_library_bounds(const HalfSpaceSystem& system,
                                     const Eigen::VectorXd& lengths,
                                     const LibraryBounds& bounds) {
  system.check();
  bounds.validate();
  const int ne = static_cast<int>(lengths.size());
  require(system.cols() == 2 * ne, ErrorCode::DimensionMismatch,
          "system columns != 2 * edge count");

  HalfSpaceSystem out;
  const int base = system.rows();
  out.M = Eigen::MatrixXd::Zero(base + 6 * ne, 2 * ne);
  out.d.resize(base + 6 * ne);
  out.M.topRows(base) = system.M;
  out.d.head(base) = system.d;
  out.tags = system.tags;
  out.tags.reserve(static_cast<size_t>(base + 6 * ne));

  int r = base;
  auto push = [&](RowKind kind, int edge) {
    out.tags.push_back({kind, -1, -1, edge});
    ++r;
  };
  for (int e = 0; e < ne; ++e) {  // r_e <= l r_hi
    out.M(r, e) = 1.0;
    out.d(r) = lengths(e) * bounds.r_hi;
    push(RowKind::BoundRHi, e);
  }
  for (int e = 0; e < ne; ++e) {  // x_e <= l x_hi
    out.M(r, ne + e) = 1.0;
    out.d(r) = lengths(e) * bounds.x_hi;
    push(RowKind::BoundXHi, e);
  }
  for (int e = 0; e < ne; ++e) {  // r_e >= l r_lo
    out.M(r, e) = -1.0;
    out.d(r) = -lengths(e) * bounds.r_lo;
    push(RowKind::BoundRLo, e);
  }
  for (int e = 0; e < ne; ++e) {  // x_e >= l x_lo
    out.M(r, ne + e) = -1.0;
    out.d(r) = -lengths(e) * bounds.x_lo;
    push(RowKind::BoundXLo, e);
  }
  for (int e = 0; e < ne; ++e) {  // x_e <= m_hi r_e + l b_hi
    out.M(r, e) = -bounds.m_hi;
    out.M(r, ne + e) = 1.0;
    out.d(r) = lengths(e) * bounds.b_hi;
    push(RowKind::BoundLineHi, e);
  }
  for (int e = 0; e < ne; ++e) {  // x_e >= m_lo r_e + l b_lo
    out.M(r, e) = bounds.m_lo;
    out.M(r, ne + e) = -1.0;
    out.d(r) = -lengths(e) * bounds.b_lo;
    push(RowKind::BoundLineLo, e);
  }
  out.check();
  return out;
}

IdentifiabilityReport diagnose_identifiability(const HalfSpaceSystem& system) {
  system.check();
  const Eigen::MatrixXd D = data_block(system);
  const int cols = static_cast<int>(D.cols());
  require(cols % 2 == 0, ErrorCode::DimensionMismatch,
          "data block must have an even column count");
  const int ne = cols / 2;

  IdentifiabilityReport rep;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values.size() > 0
                          ? rep.singular_values(0)
                          : 0.0;
  rep.numerical_rank = 0;
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i) {
    if (rep.singular_values(i) > 1e-8 * smax) ++rep.numerical_rank;
  }

  // ||pseudoinverse||_1 = max column abs-sum of V S^+ U'
  {
    Eigen::VectorXd sinv = rep.singular_values;
    for (Eigen::Index i = 0; i < sinv.size(); ++i) {
      sinv(i) = (rep.singular_values(i) > 1e-8 * smax)
                    ? 1.0 / rep.singular_values(i)
                    : 0.0;
    }
    const Eigen::MatrixXd pinv = svd.matrixV() * sinv.asDiagonal() *
                                 svd.matrixU().transpose();
    rep.pinv_norm1 = pinv.cwiseAbs().colwise().sum().maxCoeff();
  }

  // duplicate columns (unmetered degree-2 signature): union-find over pairs
  std::vector<int> parent(static_cast<size_t>(cols));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  for (int i = 0; i < cols; ++i) {
    for (int j = i + 1; j < cols; ++j) {
      const double scale = std::max(D.col(i).norm(), D.col(j).norm());
      if ((D.col(i) - D.col(j)).norm() <= 1e-10 * scale) {
        parent[static_cast<size_t>(find(j))] = find(i);
      }
    }
  }
  std::vector<std::vector<int>> groups(static_cast<size_t>(cols));
  for (int i = 0; i < cols; ++i) groups[static_cast<size_t>(find(i))].push_back(i);
  for (auto& g : groups) {
    if (g.size() >= 2) rep.duplicate_column_groups.push_back(std::move(g));
  }
  std::sort(rep.duplicate_column_groups.begin(),
            rep.duplicate_column_groups.end());

  // constant-power-factor collapse: right half proportional to left half
  const Eigen::MatrixXd L = D.leftCols(ne);
  const Eigen::MatrixXd R = D.rightCols(ne);
  const double ll = L.squaredNorm();
  if (ll > 0.0) {
    const double ratio = (L.array() * R.array()).sum() / ll;
    const double resid = (R - ratio * L).norm();
    if (resid <= 1e-8 * std::max(R.norm(), 1e-300) && ratio > 0.0) {
      rep.constant_pf_collapse = true;
      rep.tan_phi_estimate = ratio;
    }
  }
  return rep;
}

Eigen::VectorXd DirectionSplit::lift(const Eigen::VectorXd& z_free) const {
  require(z_free.size() == static_cast<Eigen::Index>(free_indices.size()),
          ErrorCode::DimensionMismatch, "free coordinate count mismatch");
  Eigen::VectorXd z = z0_full;
  for (size_t k = 0; k < free_indices.size(); ++k) {
    z(free_indices[k]) = z_free(static_cast<Eigen::Index>(k));
  }
  return z;
}

DirectionSplit split_directions(const HalfSpaceSystem& system,
                                const Eigen::VectorXd& z0,
                                const std::vector<int>& free_indices,
                                double feas_tol) {
  system.check();
  const int n = system.cols();
  require(z0.size() == n, ErrorCode::DimensionMismatch, "z0 size mismatch");

  std::vector<int> free_sorted = free_indices;
  std::sort(free_sorted.begin(), free_sorted.end());
  require(std::adjacent_find(free_sorted.begin(), free_sorted.end()) ==
              free_sorted.end(),
          ErrorCode::InvalidArgument, "duplicate free index");
  for (int idx : free_sorted) {
    require(idx >= 0 && idx < n, ErrorCode::InvalidArgument,
            "free index out of range");
  }

  const Eigen::VectorXd resid = system.M * z0 - system.d;
  const double worst = resid.size() > 0 ? resid.maxCoeff() : 0.0;
  require(worst <= feas_tol, ErrorCode::InfeasibleFixedPoint,
          "anchor point violates the constraint set by " +
              std::to_string(worst));

  DirectionSplit split;
  split.free_indices = free_sorted;
  split.z0_full = z0;
  std::vector<bool> is_free(static_cast<size_t>(n), false);
  for (int idx : free_sorted) is_free[static_cast<size_t>(idx)] = true;
  for (int i = 0; i < n; ++i) {
    if (!is_free[static_cast<size_t>(i)]) split.fixed_indices.push_back(i);
  }
  split.z0_fixed.resize(static_cast<Eigen::Index>(split.fixed_indices.size()));
  for (size_t k = 0; k < split.fixed_indices.size(); ++k) {
    split.z0_fixed(static_cast<Eigen::Index>(k)) = z0(split.fixed_indices[k]);
  }

  const int nf = static_cast<int>(free_sorted.size());
  // rhs = d - M_fixed z0_fixed; rows with no free support become vacuous
  std::vector<int> keep;
  Eigen::VectorXd rhs(system.rows());
  Eigen::MatrixXd Mf(system.rows(), nf);
  for (int i = 0; i < system.rows(); ++i) {
    double fixed_part = 0.0;
    for (size_t k = 0; k < split.fixed_indices.size(); ++k) {
      fixed_part += system.M(i, split.fixed_indices[k]) * split.z0_fixed(static_cast<Eigen::Index>(k));
    }
    rhs(i) = system.d(i) - fixed_part;
    for (int k = 0; k < nf; ++k) Mf(i, k) = system.M(i, free_sorted[static_cast<size_t>(k)]);
    if (nf == 0 || Mf.row(i).cwiseAbs().maxCoeff() <= 1e-14) {
      require(rhs(i) >= -feas_tol, ErrorCode::InfeasibleFixedPoint,
              "fixed coordinates contradict a constraint with no free part");
      continue;
    }
    keep.push_back(i);
  }

  split.reduced.M.resize(static_cast<Eigen::Index>(keep.size()), nf);
  split.reduced.d.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    split.reduced.M.row(static_cast<Eigen::Index>(k)) = Mf.row(keep[k]);
    split.reduced.d(static_cast<Eigen::Index>(k)) = rhs(keep[k]);
    split.reduced.tags.push_back(system.tags[static_cast<size_t>(keep[k])]);
  }
  split.reduced.check();
  return split;
}

std::vector<int> auto_select_free(const IdentifiabilityReport&,
                                  const FeederTopology& topology) {
  const int ne = topology.edge_count();
  std::vector<int> free;
  for (const auto& chain : degree2_chains(topology)) {
    for (int e : chain) {
      free.push_back(e);
      free.push_back(ne + e);
    }
  }
  std::sort(free.begin(), free.end());
  return free;
}

}  // namespace feederid
