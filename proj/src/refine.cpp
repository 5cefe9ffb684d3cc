#include "feederid/refine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace feederid {
namespace {

struct Nearest {
  double dr = 0.0;  // z_e - l_e * c, real part
  double dx = 0.0;
  double dist = 0.0;
};

Nearest nearest_cable(double r, double x, double len,
                      const std::vector<Eigen::Vector2d>& cables) {
  Nearest best;
  double best_dist = -1.0;
  for (const auto& c : cables) {
    const double dr = r - len * c(0);
    const double dx = x - len * c(1);
    const double dist = std::hypot(dr, dx);
    if (best_dist < 0.0 || dist < best_dist) {
      best_dist = dist;
      best = {dr, dx, dist};
    }
  }
  return best;
}

void check_dims(const Eigen::VectorXd& z, const CableLibrary& lib,
                const Eigen::VectorXd& lengths) {
  require(lib.edge_count() == lengths.size(), ErrorCode::DimensionMismatch,
          "library and length dimensions disagree");
  require(z.size() == 2 * lengths.size(), ErrorCode::DimensionMismatch,
          "z size != 2 * edge count");
}

}  // namespace

double library_distance(const Eigen::VectorXd& z, const CableLibrary& lib,
                        const Eigen::VectorXd& lengths) {
  check_dims(z, lib, lengths);
  const int ne = static_cast<int>(lengths.size());
  double q = 0.0;
  for (int e = 0; e < ne; ++e) {
    q += nearest_cable(z(e), z(ne + e), lengths(e), lib.candidates(e)).dist;
  }
  return q;
}

Eigen::VectorXd library_gradient(const Eigen::VectorXd& z,
                                 const CableLibrary& lib,
                                 const Eigen::VectorXd& lengths) {
  check_dims(z, lib, lengths);
  const int ne = static_cast<int>(lengths.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * ne);
  for (int e = 0; e < ne; ++e) {
    const Nearest nb =
        nearest_cable(z(e), z(ne + e), lengths(e), lib.candidates(e));
    if (nb.dist < 1e-14) continue;
    g(e) = nb.dr / nb.dist;
    g(ne + e) = nb.dx / nb.dist;
  }
  return g;
}

double penalty_value(const Eigen::VectorXd& z, const HalfSpaceSystem& system,
                     double rho) {
  if (rho == 0.0 || system.rows() == 0) return 0.0;
  const Eigen::VectorXd viol =
      (system.M * z - system.d).cwiseMax(0.0);
  return 0.5 * rho * viol.squaredNorm();
}

Eigen::VectorXd penalty_gradient(const Eigen::VectorXd& z,
                                 const HalfSpaceSystem& system, double rho) {
  if (rho == 0.0 || system.rows() == 0) {
    return Eigen::VectorXd::Zero(z.size());
  }
  const Eigen::VectorXd viol =
      (system.M * z - system.d).cwiseMax(0.0);
  return rho * (system.M.transpose() * viol);
}

Eigen::MatrixXd refine_candidates(const Eigen::MatrixXd& B,
                                  const HalfSpaceSystem& system,
                                  const CableLibrary& lib,
                                  const Eigen::VectorXd& lengths,
                                  const RefinementConfig& cfg) {
  require(cfg.lambda > 0.0, ErrorCode::InvalidArgument, "lambda must be > 0");
  require(cfg.rho >= 0.0, ErrorCode::InvalidArgument, "rho must be >= 0");
  const int ne = static_cast<int>(lengths.size());
  require(B.cols() == 2 * ne, ErrorCode::DimensionMismatch,
          "candidate columns != 2 * edge count");
  if (cfg.rho > 0.0) {
    system.check();
    require(system.cols() == 2 * ne, ErrorCode::DimensionMismatch,
            "system columns != 2 * edge count");
  }
  const double stop_tol = cfg.stop_tol >= 0.0 ? cfg.stop_tol
                                              : 1e-8 * cfg.lambda;

  Eigen::MatrixXd C = B;
  for (Eigen::Index row = 0; row < B.rows(); ++row) {
    Eigen::VectorXd z = B.row(row).transpose();
    auto objective = [&](const Eigen::VectorXd& p) {
      return library_distance(p, lib, lengths) +
             penalty_value(p, system, cfg.rho);
    };
    Eigen::VectorXd best_z = z;
    double best_obj = objective(z);
    int iters = 0;

    for (; iters < cfg.max_iters; ++iters) {
      Eigen::VectorXd step = cfg.lambda * penalty_gradient(z, system, cfg.rho);
      for (int e = 0; e < ne; ++e) {
        const Nearest nb =
            nearest_cable(z(e), z(ne + e), lengths(e), lib.candidates(e));
        if (nb.dist < 1e-14) continue;
        // cap the pull at the remaining distance: the last step lands on the
        // cable instead of orbiting it at radius lambda
        const double pull = std::min(cfg.lambda, nb.dist) / nb.dist;
        step(e) += pull * nb.dr;
        step(ne + e) += pull * nb.dx;
      }
      z -= step;
      const double obj = objective(z);
      if (obj < best_obj) {
        best_obj = obj;
        best_z = z;
      }
      if (step.norm() < stop_tol) {
        ++iters;
        break;
      }
    }

    const double final_obj = objective(z);
    const bool kept_best = final_obj > best_obj;
    if (kept_best) z = best_z;  // oscillated or diverged past its best
    C.row(row) = z.transpose();
    if (cfg.verbose) {
      std::cerr << "{\"row\":" << row << ",\"iterations\":" << iters
                << ",\"q\":" << library_distance(z, lib, lengths)
                << ",\"penalty\":" << penalty_value(z, system, cfg.rho)
                << ",\"rolled_back\":" << (kept_best ? "true" : "false")
                << "}\n";
    }
  }
  return C;
}

}  // namespace feederid
