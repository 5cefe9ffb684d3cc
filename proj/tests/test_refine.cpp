#include <cmath>

#include "doctest.h"
#include "feederid/refine.hpp"
#include "feederid/sample.hpp"
#include "helpers.hpp"

using namespace feederid;
using namespace testutil;

namespace {

CableLibrary toy_library(std::vector<Eigen::Vector2d> cables, int edges) {
  LibraryBounds b;
  b.r_lo = 0.0;
  b.r_hi = 100.0;
  b.x_lo = 0.0;
  b.x_hi = 100.0;
  b.m_hi = 0.0;
  b.b_hi = 100.0;
  b.m_lo = 0.0;
  b.b_lo = -100.0;
  return CableLibrary::shared(cables, edges, b, 1e-6);
}

HalfSpaceSystem huge_box(int dim) {
  Eigen::MatrixXd M(2 * dim, dim);
  M << Eigen::MatrixXd::Identity(dim, dim),
      -Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd d = Eigen::VectorXd::Constant(2 * dim, 1e6);
  return make_system(M, d);
}

}  // namespace

TEST_SUITE_BEGIN("refine");

TEST_CASE("library distance is the summed closest-cable modulus") {
  CableLibrary lib = toy_library({{1.0, 0.0}, {2.0, 0.0}}, 1);
  Eigen::VectorXd len = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd z(2);
  z << 1.3, 0.0;
  CHECK(library_distance(z, lib, len) == doctest::Approx(0.3).epsilon(1e-12));
  z << 1.4, 0.05;
  CHECK(library_distance(z, lib, len) ==
        doctest::Approx(std::sqrt(0.1625)).epsilon(1e-12));
  z << 2.0, 0.0;
  CHECK(library_distance(z, lib, len) == 0.0);

  // lengths scale the anchor points
  CableLibrary lib2 = toy_library({{1.0, 0.5}}, 2);
  Eigen::VectorXd len2(2);
  len2 << 2.0, 3.0;
  Eigen::VectorXd z2(4);
  z2 << 2.0, 3.0, 1.0, 1.5;  // exactly length * cable on both edges
  CHECK(library_distance(z2, lib2, len2) == 0.0);
  z2(0) = 2.5;
  CHECK(library_distance(z2, lib2, len2) == doctest::Approx(0.5));
}

TEST_CASE("library gradient is the unit phasor toward the nearest cable") {
  CableLibrary lib = toy_library({{1.0, 0.2}, {3.0, 0.1}}, 2);
  Eigen::VectorXd len(2);
  len << 1.0, 2.0;
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) z(i) = rng.uniform(0.1, 4.0);
    Eigen::VectorXd g = library_gradient(z, lib, len);
    // per-edge block norm is 1 away from anchors, 0 on them
    for (int e = 0; e < 2; ++e) {
      const double norm = std::hypot(g(e), g(2 + e));
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
    }
    // central finite differences on the distance itself
    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      const double fd = (library_distance(zp, lib, len) -
                         library_distance(zm, lib, len)) /
                        (2.0 * h);
      CHECK(std::abs(fd - g(i)) <= 1e-5);
    }
  }
  // exactly on an anchor the subgradient vanishes
  Eigen::VectorXd z0(4);
  z0 << 1.0, 6.0, 0.2, 0.2;  // edge 0 at cable 0, edge 1 at 2 * cable 1
  CHECK(library_gradient(z0, lib, len).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("penalty value and gradient match finite differences") {
  Rng rng(6);
  Eigen::MatrixXd M(5, 4);
  Eigen::VectorXd d(5);
  for (int i = 0; i < M.size(); ++i) M(i) = rng.normal();
  for (int i = 0; i < 5; ++i) d(i) = rng.uniform(-0.5, 0.5);
  HalfSpaceSystem sys = make_system(M, d);
  const double rho = 3.7;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) z(i) = rng.uniform(-1.0, 1.0);
    // direct evaluation of (rho/2) ||max(Mz - d, 0)||^2
    const Eigen::ArrayXd viol = (M * z - d).array().max(0.0);
    CHECK(penalty_value(z, sys, rho) ==
          doctest::Approx(0.5 * rho * viol.square().sum()).epsilon(1e-12));
    Eigen::VectorXd g = penalty_gradient(z, sys, rho);
    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      const double fd =
          (penalty_value(zp, sys, rho) - penalty_value(zm, sys, rho)) /
          (2.0 * h);
      CHECK(std::abs(fd - g(i)) <= 1e-5);
    }
  }
  CHECK(penalty_value(Eigen::VectorXd::Zero(4), sys, 0.0) == 0.0);
  CHECK(penalty_gradient(Eigen::VectorXd::Zero(4), sys, 0.0)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("descent lands on the nearest cable in a bounded iteration count") {
  CableLibrary lib = toy_library({{1.0, 0.0}, {2.0, 0.0}}, 1);
  Eigen::VectorXd len = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd B(1, 2);
  B << 1.035, 0.0;  // 0.035 from cable 0: four pulls at lambda = 0.01
  RefinementConfig cfg;
  cfg.lambda = 0.01;
  cfg.rho = 0.0;
  cfg.max_iters = 10;
  Eigen::MatrixXd C = refine_candidates(B, huge_box(2), lib, len, cfg);
  CHECK(std::abs(C(0, 0) - 1.0) <= 1e-12);
  CHECK(std::abs(C(0, 1)) <= 1e-12);
  // a starting point in the other basin converges to the other cable
  B << 1.93, 0.01;
  C = refine_candidates(B, huge_box(2), lib, len, cfg);
  CHECK(std::abs(C(0, 0) - 2.0) <= 1e-12);
  // iteration cap short of the distance leaves the point mid-flight
  cfg.max_iters = 2;
  B << 1.035, 0.0;
  C = refine_candidates(B, huge_box(2), lib, len, cfg);
  CHECK(C(0, 0) == doctest::Approx(1.015).epsilon(1e-9));
  cfg.max_iters = 0;
  C = refine_candidates(B, huge_box(2), lib, len, cfg);
  CHECK(C(0, 0) == 1.035);
}

TEST_CASE("refinement never worsens the library distance when unpenalized") {
  Rng rng(7);
  FeederTopology t = random_tree(10, rng);
  const int ne = t.edge_count();
  CableLibrary lib = lv_library(ne);
  Eigen::VectorXd len = t.lengths();
  Eigen::MatrixXd B(40, 2 * ne);
  for (int r = 0; r < B.rows(); ++r) {
    for (int e = 0; e < ne; ++e) {
      B(r, e) = rng.uniform(0.8, 1.2) * 0.32 * kScale * len(e);
      B(r, ne + e) = rng.uniform(0.8, 1.2) * 0.075 * kScale * len(e);
    }
  }
  RefinementConfig cfg;
  cfg.lambda = 0.01;
  cfg.rho = 0.0;
  cfg.max_iters = 5000;
  Eigen::MatrixXd C = refine_candidates(B, huge_box(2 * ne), lib, len, cfg);
  for (int r = 0; r < B.rows(); ++r) {
    const double before = library_distance(B.row(r).transpose(), lib, len);
    const double after = library_distance(C.row(r).transpose(), lib, len);
    CHECK(after <= before + 1e-12);
    // lambda = 0.01 per unit on per-unit-scaled cables: plenty of iterations
    CHECK(after <= 1e-10);
  }
}

TEST_CASE("penalty keeps iterates near the feasible side") {
  // one edge, library point at r = 1 but constraint r <= 0.5
  CableLibrary lib = toy_library({{1.0, 0.0}}, 1);
  Eigen::VectorXd len = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  Eigen::VectorXd d(1);
  d << 0.5;
  HalfSpaceSystem sys = make_system(M, d);
  Eigen::MatrixXd B(1, 2);
  B << 0.2, 0.0;
  RefinementConfig cfg;
  cfg.lambda = 0.005;  // lambda * rho = 0.5 < 1: contraction to equilibrium
  cfg.rho = 100.0;
  cfg.max_iters = 5000;
  Eigen::MatrixXd C = refine_candidates(B, sys, lib, len, cfg);
  // equilibrium where the unit library pull balances rho * (r - 0.5)
  CHECK(C(0, 0) == doctest::Approx(0.5 + 1.0 / 100.0).epsilon(1e-6));
  // without the penalty the same start runs straight to the cable
  cfg.rho = 0.0;
  C = refine_candidates(B, sys, lib, len, cfg);
  CHECK(std::abs(C(0, 0) - 1.0) <= 1e-9);
}

TEST_CASE("equidistant ties resolve to the lowest cable index") {
  CableLibrary lib = toy_library({{1.0, 0.0}, {3.0, 0.0}}, 1);
  Eigen::VectorXd len = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd B(1, 2);
  B << 2.0, 0.0;
  RefinementConfig cfg;
  cfg.lambda = 0.01;
  cfg.max_iters = 200;
  Eigen::MatrixXd C = refine_candidates(B, huge_box(2), lib, len, cfg);
  CHECK(std::abs(C(0, 0) - 1.0) <= 1e-12);
}

TEST_CASE("input validation fires on malformed dimensions") {
  CableLibrary lib = toy_library({{1.0, 0.0}}, 1);
  Eigen::VectorXd len = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd B(1, 4);
  B.setOnes();
  RefinementConfig cfg;
  CHECK_THROWS_AS(refine_candidates(B, huge_box(4), lib, len, cfg), Error);
  Eigen::MatrixXd ok(1, 2);
  ok.setOnes();
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(refine_candidates(ok, huge_box(2), lib, len, cfg), Error);
}

TEST_SUITE_END();
