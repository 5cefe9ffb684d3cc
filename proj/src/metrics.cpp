#include "feederid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace feederid {
namespace {

EdgeEnvelope envelope_of(std::vector<double>& vals) {
  std::sort(vals.begin(), vals.end());
  EdgeEnvelope env;
  env.min = vals.front();
  env.max = vals.back();
  const size_t n = vals.size();
  env.median = (n % 2 == 1) ? vals[n / 2]
                            : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  return env;
}

}  // namespace

std::pair<double, double> mape_star(const Eigen::MatrixXd& candidates,
                                    const Eigen::VectorXd& z_true) {
  require(candidates.rows() >= 1, ErrorCode::InvalidArgument,
          "empty candidate set");
  require(candidates.cols() == z_true.size(), ErrorCode::DimensionMismatch,
          "candidate and truth dimensions disagree");
  require(z_true.size() % 2 == 0, ErrorCode::DimensionMismatch,
          "truth must hold [r; x]");
  const Eigen::Index ne = z_true.size() / 2;
  for (Eigen::Index i = 0; i < z_true.size(); ++i) {
    require(z_true(i) != 0.0, ErrorCode::ZeroTruthComponent,
            "ground truth has a zero component; relative error undefined");
  }

  double best_r = std::numeric_limits<double>::infinity();
  double best_x = std::numeric_limits<double>::infinity();
  for (Eigen::Index h = 0; h < candidates.rows(); ++h) {
    double err_r = 0.0, err_x = 0.0;
    for (Eigen::Index e = 0; e < ne; ++e) {
      err_r += std::abs(candidates(h, e) - z_true(e)) / std::abs(z_true(e));
      err_x += std::abs(candidates(h, ne + e) - z_true(ne + e)) /
               std::abs(z_true(ne + e));
    }
    best_r = std::min(best_r, err_r / static_cast<double>(ne));
    best_x = std::min(best_x, err_x / static_cast<double>(ne));
  }
  return {100.0 * best_r, 100.0 * best_x};
}

Eigen::MatrixXd collapse_rows(const FeederTopology& topology,
                              const Eigen::MatrixXd& candidates) {
  const int ne = topology.edge_count();
  require(candidates.cols() == 2 * ne, ErrorCode::DimensionMismatch,
          "candidate columns != 2 * edge count");
  // mapping old edge -> collapsed edge comes from any one collapse
  const CollapsedNetwork cn =
      collapse_chains(topology, Eigen::VectorXd::Zero(2 * ne));
  const int nc = cn.topology.edge_count();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(candidates.rows(), 2 * nc);
  for (Eigen::Index h = 0; h < candidates.rows(); ++h) {
    for (int e = 0; e < ne; ++e) {
      const int ce = cn.edge_of_old[static_cast<size_t>(e)];
      out(h, ce) += candidates(h, e);
      out(h, nc + ce) += candidates(h, ne + e);
    }
  }
  return out;
}

RangeReport range_report(const Eigen::MatrixXd& candidates,
                         const std::optional<Eigen::VectorXd>& z_true,
                         const FeederTopology& topology) {
  const int ne = topology.edge_count();
  require(candidates.rows() >= 1, ErrorCode::InvalidArgument,
          "empty candidate set");
  require(candidates.cols() == 2 * ne, ErrorCode::DimensionMismatch,
          "candidate columns != 2 * edge count");

  RangeReport rep;
  rep.r.resize(static_cast<size_t>(ne));
  rep.x.resize(static_cast<size_t>(ne));
  rep.z_mag.resize(static_cast<size_t>(ne));
  std::vector<double> vals(static_cast<size_t>(candidates.rows()));
  for (int e = 0; e < ne; ++e) {
    for (Eigen::Index h = 0; h < candidates.rows(); ++h) {
      vals[static_cast<size_t>(h)] = candidates(h, e);
    }
    rep.r[static_cast<size_t>(e)] = envelope_of(vals);
    for (Eigen::Index h = 0; h < candidates.rows(); ++h) {
      vals[static_cast<size_t>(h)] = candidates(h, ne + e);
    }
    rep.x[static_cast<size_t>(e)] = envelope_of(vals);
    for (Eigen::Index h = 0; h < candidates.rows(); ++h) {
      vals[static_cast<size_t>(h)] =
          std::hypot(candidates(h, e), candidates(h, ne + e));
    }
    rep.z_mag[static_cast<size_t>(e)] = envelope_of(vals);
  }

  if (z_true.has_value()) {
    require(z_true->size() == 2 * ne, ErrorCode::DimensionMismatch,
            "truth size != 2 * edge count");
    rep.has_truth = true;
    rep.contained.resize(static_cast<size_t>(ne));
    rep.out_of_range.resize(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) {
      const double rt = (*z_true)(e);
      const double xt = (*z_true)(ne + e);
      const auto& er = rep.r[static_cast<size_t>(e)];
      const auto& ex = rep.x[static_cast<size_t>(e)];
      const double miss_r =
          std::max({0.0, er.min - rt, rt - er.max});
      const double miss_x =
          std::max({0.0, ex.min - xt, xt - ex.max});
      rep.contained[static_cast<size_t>(e)] = miss_r == 0.0 && miss_x == 0.0;
      rep.out_of_range[static_cast<size_t>(e)] = std::max(miss_r, miss_x);
    }
    const auto [mr, mx] = mape_star(candidates, *z_true);
    rep.mape_r = mr;
    rep.mape_x = mx;
  }
  return rep;
}

}  // namespace feederid
