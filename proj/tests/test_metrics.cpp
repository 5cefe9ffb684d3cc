#include <cmath>

#include "doctest.h"
#include "feederid/metrics.hpp"
#include "helpers.hpp"

using namespace feederid;
using namespace testutil;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("closest-in-range error on a hand case") {
  Eigen::VectorXd z(4);
  z << 1.0, 2.0, 4.0, 5.0;  // [r0 r1 x0 x1]
  Eigen::MatrixXd C(1, 4);
  C << 1.1, 2.2, 4.0, 5.0;
  auto [mr, mx] = mape_star(C, z);
  CHECK(mr == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(mx == 0.0);
}

TEST_CASE("resistance and reactance minima come from different rows") {
  Eigen::VectorXd z(2);
  z << 1.0, 1.0;
  Eigen::MatrixXd C(2, 2);
  C << 1.0, 2.0,  // perfect r, 100% off x
      1.5, 1.0;   // 50% off r, perfect x
  auto [mr, mx] = mape_star(C, z);
  CHECK(mr == 0.0);
  CHECK(mx == 0.0);
}

TEST_CASE("closest-in-range error equals a double-loop oracle") {
  Rng rng(9);
  const int ne = 7, m = 50;
  Eigen::VectorXd z(2 * ne);
  for (int i = 0; i < 2 * ne; ++i) z(i) = rng.uniform(0.5, 2.0);
  Eigen::MatrixXd C(m, 2 * ne);
  for (int i = 0; i < C.size(); ++i) C(i) = rng.uniform(0.1, 3.0);
  auto [mr, mx] = mape_star(C, z);
  double br = 1e300, bx = 1e300;
  for (int h = 0; h < m; ++h) {
    double sr = 0.0, sx = 0.0;
    for (int e = 0; e < ne; ++e) {
      sr += std::abs(C(h, e) - z(e)) / z(e);
      sx += std::abs(C(h, ne + e) - z(ne + e)) / z(ne + e);
    }
    br = std::min(br, 100.0 * sr / ne);
    bx = std::min(bx, 100.0 * sx / ne);
  }
  CHECK(mr == doctest::Approx(br).epsilon(1e-12));
  CHECK(mx == doctest::Approx(bx).epsilon(1e-12));
}

TEST_CASE("zero truth components are rejected") {
  Eigen::VectorXd z(2);
  z << 1.0, 0.0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Ones(1, 2);
  CHECK_THROWS_WITH_AS(mape_star(C, z),
                       doctest::Contains("ZeroTruthComponent"), Error);
  Eigen::VectorXd odd(3);
  odd.setOnes();
  CHECK_THROWS_AS(mape_star(Eigen::MatrixXd::Ones(1, 3), odd), Error);
}

TEST_CASE("collapse_rows sums chain members per candidate row") {
  FeederTopology t = validate_topology(
      {{0, 1, 10}, {1, 2, 10}, {2, 3, 10}, {3, 4, 10}, {3, 5, 10}});
  // chain = edges {0,1,2}; edges 3, 4 stay
  Eigen::MatrixXd C(2, 10);
  C << 1, 2, 3, 4, 5, 10, 20, 30, 40, 50,
      2, 2, 2, 2, 2, 3, 3, 3, 3, 3;
  Eigen::MatrixXd out = collapse_rows(t, C);
  REQUIRE(out.cols() == 6);
  const CollapsedNetwork cn = collapse_chains(t, Eigen::VectorXd::Zero(10));
  const int ce = cn.edge_of_old[0];
  CHECK(out(0, ce) == doctest::Approx(6.0));
  CHECK(out(0, 3 + ce) == doctest::Approx(60.0));
  CHECK(out(1, ce) == doctest::Approx(6.0));
  CHECK(out(0, cn.edge_of_old[4]) == doctest::Approx(5.0));
  // column sums are preserved row-wise
  CHECK(out.row(0).sum() == doctest::Approx(C.row(0).sum()));
  CHECK(out.row(1).sum() == doctest::Approx(C.row(1).sum()));
}

TEST_CASE("range report envelopes follow order statistics") {
  FeederTopology t = chain_feeder(1);
  Eigen::MatrixXd C(4, 2);
  C << 1.0, 5.0, 3.0, 6.0, 2.0, 8.0, 10.0, 7.0;
  RangeReport rep = range_report(C, std::nullopt, t);
  CHECK(!rep.has_truth);
  CHECK(rep.r[0].min == 1.0);
  CHECK(rep.r[0].max == 10.0);
  CHECK(rep.r[0].median == doctest::Approx(2.5));  // even count: midpoint
  CHECK(rep.x[0].min == 5.0);
  CHECK(rep.x[0].median == doctest::Approx(6.5));
  // magnitude envelope over hypot(r, x) per row
  Eigen::Vector4d mags(std::hypot(1., 5.), std::hypot(3., 6.),
                       std::hypot(2., 8.), std::hypot(10., 7.));
  CHECK(rep.z_mag[0].min == doctest::Approx(mags.minCoeff()));
  CHECK(rep.z_mag[0].max == doctest::Approx(mags.maxCoeff()));

  Eigen::MatrixXd C3 = C.topRows(3);
  RangeReport rep3 = range_report(C3, std::nullopt, t);
  CHECK(rep3.r[0].median == 2.0);  // odd count: middle value
}

TEST_CASE("containment and exceedance against a known truth") {
  FeederTopology t = star_feeder(2);
  Eigen::MatrixXd C(2, 4);
  // edge 0: r in [1,2], x in [10,20]; edge 1: r in [5,6], x in [30,40]
  C << 1.0, 5.0, 10.0, 30.0, 2.0, 6.0, 20.0, 40.0;
  Eigen::VectorXd z(4);
  z << 1.5, 7.0, 15.0, 35.0;  // edge 1 resistance sits 1.0 above its range
  RangeReport rep = range_report(C, z, t);
  REQUIRE(rep.has_truth);
  CHECK(rep.contained[0]);
  CHECK(!rep.contained[1]);
  CHECK(rep.out_of_range[0] == 0.0);
  CHECK(rep.out_of_range[1] == doctest::Approx(1.0));
  // boundary counts as contained
  z << 1.0, 5.0, 20.0, 40.0;
  RangeReport rep2 = range_report(C, z, t);
  CHECK(rep2.contained[0]);
  CHECK(rep2.contained[1]);
  // the report's mape fields agree with the standalone scorer
  auto [mr, mx] = mape_star(C, z);
  CHECK(rep2.mape_r == doctest::Approx(mr));
  CHECK(rep2.mape_x == doctest::Approx(mx));
}

TEST_SUITE_END();
