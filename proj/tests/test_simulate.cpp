#include <cmath>
#include <complex>

#include "doctest.h"
#include "feederid/simulate.hpp"
#include "helpers.hpp"

using namespace feederid;
using namespace testutil;

namespace {

// direct evaluation of the linearized model from incidence + branch flows
Eigen::MatrixXd naive_linear_v2(const FeederTopology& t,
                                const Eigen::VectorXd& z,
                                const Eigen::MatrixXd& P,
                                const Eigen::MatrixXd& Q) {
  const Eigen::MatrixXd A = incidence(t);
  const AggregatedFlows f = aggregate_flows(t, P, Q);
  const int ne = t.edge_count();
  Eigen::MatrixXd v2(P.rows(), t.node_count());
  for (int tt = 0; tt < P.rows(); ++tt) {
    for (int n = 0; n < t.node_count(); ++n) {
      double drop = 0.0;
      for (int e = 0; e < ne; ++e) {
        drop += A(n, e) * (f.Pbr(tt, e) * z(e) + f.Qbr(tt, e) * z(ne + e));
      }
      v2(tt, n) = 1.0 - 2.0 * drop;
    }
  }
  return v2;
}

Eigen::VectorXd random_z(const FeederTopology& t, Rng& rng) {
  const int ne = t.edge_count();
  Eigen::VectorXd z(2 * ne);
  for (int e = 0; e < ne; ++e) {
    z(e) = rng.uniform(1e-3, 2e-2);
    z(ne + e) = rng.uniform(1e-4, 5e-3);
  }
  return z;
}

}  // namespace

TEST_SUITE_BEGIN("simulate");

TEST_CASE("single line with a real load matches the quadratic root") {
  FeederTopology t = chain_feeder(1);
  Eigen::VectorXd z(2);
  z << 0.01, 0.0;
  Eigen::VectorXd P(2), Q(2);
  P << 0.0, 0.1;
  Q << 0.0, 0.0;
  Eigen::VectorXcd v = ac_power_flow(t, z, P, Q);
  const double expect = (1.0 + std::sqrt(1.0 - 4.0 * 0.01 * 0.1)) / 2.0;
  CHECK(std::abs(v(0) - std::complex<double>(1.0, 0.0)) == 0.0);
  CHECK(std::abs(v(1)) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(v(1).imag()) <= 1e-12);
}

TEST_CASE("ac solution satisfies nodal power balance") {
  Rng rng(42);
  for (int rep = 0; rep < 5; ++rep) {
    FeederTopology t = random_tree(15, rng);
    Eigen::VectorXd z = random_z(t, rng);
    Eigen::VectorXd P = Eigen::VectorXd::Zero(t.node_count());
    Eigen::VectorXd Q = Eigen::VectorXd::Zero(t.node_count());
    for (int leaf : t.leaf_set()) {
      P(leaf) = rng.uniform(0.01, 0.2);
      Q(leaf) = rng.uniform(0.0, 0.08);
    }
    Eigen::VectorXcd v = ac_power_flow(t, z, P, Q);
    const int ne = t.edge_count();
    // branch currents from the voltage profile
    std::vector<std::complex<double>> ibr(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) {
      const std::complex<double> ze(z(e), z(ne + e));
      ibr[static_cast<size_t>(e)] =
          (v(t.edge(e).parent) - v(t.edge(e).child)) / ze;
    }
    for (int n = 1; n < t.node_count(); ++n) {
      std::complex<double> into = ibr[static_cast<size_t>(t.parent_edge(n))];
      for (int ce : t.child_edges(n)) into -= ibr[static_cast<size_t>(ce)];
      const std::complex<double> s = v(n) * std::conj(into);
      CHECK(std::abs(s - std::complex<double>(P(n), Q(n))) <= 1e-8);
    }
  }
}

TEST_CASE("lindistflow_forward equals the incidence-form evaluation") {
  Rng rng(43);
  FeederTopology t = random_tree(20, rng);
  Eigen::VectorXd z = random_z(t, rng);
  Eigen::MatrixXd P, Q;
  random_loads(t, 6, 99, P, Q);
  Eigen::MatrixXd got = lindistflow_forward(t, z, P, Q);
  Eigen::MatrixXd want = naive_linear_v2(t, z, P, Q);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((got.col(0).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("linearization error shrinks quadratically with loading") {
  Rng rng(44);
  FeederTopology t = random_tree(12, rng);
  Eigen::VectorXd z = random_z(t, rng);
  Eigen::MatrixXd P, Q;
  random_loads(t, 1, 7, P, Q);
  std::vector<double> alphas = {0.05, 0.1, 0.2, 0.4};
  std::vector<double> errs;
  for (double a : alphas) {
    Eigen::MatrixXd Pa = a * P, Qa = a * Q;
    Eigen::VectorXcd v =
        ac_power_flow(t, z, Pa.row(0).transpose(), Qa.row(0).transpose());
    Eigen::MatrixXd lin = lindistflow_forward(t, z, Pa, Qa);
    double err = 0.0;
    for (int n = 0; n < t.node_count(); ++n) {
      err = std::max(err, std::abs(std::norm(v(n)) - lin(0, n)));
    }
    errs.push_back(err);
  }
  // least-squares slope of log error against log alpha
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int k = static_cast<int>(alphas.size());
  for (int i = 0; i < k; ++i) {
    const double lx = std::log(alphas[static_cast<size_t>(i)]);
    const double ly = std::log(errs[static_cast<size_t>(i)]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  CHECK(slope >= 1.8);
  CHECK(slope <= 2.2);
}

TEST_CASE("voltage collapse surfaces as a convergence failure") {
  FeederTopology t = chain_feeder(1);
  Eigen::VectorXd z(2);
  z << 0.1, 0.0;
  Eigen::VectorXd P(2), Q(2);
  P << 0.0, 100.0;
  Q << 0.0, 0.0;
  CHECK_THROWS_WITH_AS(ac_power_flow(t, z, P, Q),
                       doctest::Contains("NonConvergence"), Error);
}

TEST_CASE("materialize_assignment scales cables by edge length") {
  FeederTopology t = chain_feeder(2, 50.0);
  CableLibrary lib = lv_library(2);
  GroundTruthAssignment gt = materialize_assignment(t, lib, {0, 2});
  CHECK(gt.cable_index == std::vector<int>{0, 2});
  CHECK(gt.z(0) == doctest::Approx(50.0 * lib.candidates(0)[0](0)));
  CHECK(gt.z(1) == doctest::Approx(50.0 * lib.candidates(1)[2](0)));
  CHECK(gt.z(2) == doctest::Approx(50.0 * lib.candidates(0)[0](1)));
  CHECK(gt.z(3) == doctest::Approx(50.0 * lib.candidates(1)[2](1)));
  CHECK_THROWS_AS(materialize_assignment(t, lib, {0}), Error);
  CHECK_THROWS_AS(materialize_assignment(t, lib, {0, 7}), Error);
}

TEST_CASE("synthetic datasets are shaped and seeded as advertised") {
  Rng rng(45);
  FeederTopology t = random_tree(14, rng);
  CableLibrary lib = lv_library(t.edge_count());
  GroundTruthAssignment gt =
      materialize_assignment(t, lib, std::vector<int>(static_cast<size_t>(t.edge_count()), 1));
  const auto sampler = fixed_pf_sampler(0.05, 0.3, 0.95);
  MeterDataset a = make_dataset(t, gt.z, sampler, 8, 77);
  MeterDataset b = make_dataset(t, gt.z, sampler, 8, 77);
  MeterDataset c = make_dataset(t, gt.z, sampler, 8, 78);
  CHECK(a.T == 8);
  CHECK((a.P - b.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.v2 - b.v2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.P - c.P).cwiseAbs().maxCoeff() > 0.0);
  // voltages at root plus every leaf, root column exactly 1
  CHECK(a.v2_nodes.size() == t.leaf_set().size() + 1);
  CHECK(a.v2_nodes[0] == 0);
  CHECK((a.v2.col(0).array() - 1.0).abs().maxCoeff() == 0.0);
  // consumption only at leaves, inside the configured band, at fixed pf
  const double tan_phi = std::tan(std::acos(0.95));
  for (int tt = 0; tt < a.T; ++tt) {
    for (int n = 1; n < t.node_count(); ++n) {
      if (t.is_leaf(n)) {
        CHECK(a.P(tt, n) >= 0.05);
        CHECK(a.P(tt, n) <= 0.3);
        CHECK(a.Q(tt, n) == doctest::Approx(a.P(tt, n) * tan_phi));
      } else {
        CHECK(a.P(tt, n) == 0.0);
        CHECK(a.Q(tt, n) == 0.0);
      }
    }
  }
  a.check_consistent(t);
}

TEST_CASE("mixed-pf sampler draws q on its own band") {
  FeederTopology t = star_feeder(6);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(12, 1e-3);
  MeterDataset d =
      make_dataset(t, z, uniform_pq_sampler(0.05, 0.3, 0.01, 0.09), 5, 3);
  double qmin = 1e9, qmax = -1e9;
  for (int tt = 0; tt < d.T; ++tt) {
    for (int leaf : t.leaf_set()) {
      qmin = std::min(qmin, d.Q(tt, leaf));
      qmax = std::max(qmax, d.Q(tt, leaf));
    }
  }
  CHECK(qmin >= 0.01);
  CHECK(qmax <= 0.09);
  // ratios q/p must actually vary (no constant power factor)
  Eigen::ArrayXd ratios(d.T * 6);
  int k = 0;
  for (int tt = 0; tt < d.T; ++tt) {
    for (int leaf : t.leaf_set()) ratios(k++) = d.Q(tt, leaf) / d.P(tt, leaf);
  }
  CHECK((ratios.maxCoeff() - ratios.minCoeff()) > 1e-3);
}

TEST_CASE("linearized dataset generator replays lindistflow_forward") {
  Rng rng(46);
  FeederTopology t = random_tree(10, rng);
  Eigen::VectorXd z = random_z(t, rng);
  MeterDataset d =
      make_dataset_lindistflow(t, z, uniform_pq_sampler(0.05, 0.3, 0.0, 0.1), 4, 9);
  Eigen::MatrixXd v2 = lindistflow_forward(t, z, d.P, d.Q);
  for (size_t c = 0; c < d.v2_nodes.size(); ++c) {
    CHECK((d.v2.col(static_cast<Eigen::Index>(c)) - v2.col(d.v2_nodes[c]))
              .cwiseAbs()
              .maxCoeff() <= 1e-15);
  }
  // loads must agree with the ac generator's draws for the same seed
  MeterDataset ac = make_dataset(t, z, uniform_pq_sampler(0.05, 0.3, 0.0, 0.1), 4, 9);
  CHECK((d.P - ac.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.Q - ac.Q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("replay sampler reproduces given profiles") {
  FeederTopology t = star_feeder(2);
  Eigen::MatrixXd P(2, 3), Q(2, 3);
  P << 0, 0.1, 0.2, 0, 0.15, 0.25;
  Q << 0, 0.01, 0.02, 0, 0.015, 0.025;
  Eigen::VectorXd z = Eigen::VectorXd::Constant(4, 1e-3);
  MeterDataset d = make_dataset(t, z, replay_sampler(P, Q), 2, 123);
  CHECK((d.P - P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.Q - Q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("length noise is multiplicative, clipped, and seed-stable") {
  Eigen::VectorXd len = Eigen::VectorXd::Constant(40, 30.0);
  NoiseSpec spec;
  CHECK((apply_noise(len, spec) - len).cwiseAbs().maxCoeff() == 0.0);
  spec.length_sigma = 0.05;
  spec.seed = 5;
  Eigen::VectorXd a = apply_noise(len, spec);
  Eigen::VectorXd b = apply_noise(len, spec);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - len).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.minCoeff() > 0.0);
  // empirical std of the relative perturbation in the right ballpark
  Eigen::ArrayXd rel = (a - len).array() / len.array();
  const double sd = std::sqrt(rel.square().mean());
  CHECK(sd > 0.02);
  CHECK(sd < 0.10);
  spec.length_sigma = 10.0;  // extreme draws must still stay positive
  CHECK(apply_noise(len, spec).minCoeff() > 0.0);
}

TEST_CASE("dataset noise respects magnitudes and lanes") {
  Rng rng(47);
  FeederTopology t = random_tree(12, rng);
  Eigen::VectorXd z = random_z(t, rng);
  MeterDataset clean =
      make_dataset(t, z, uniform_pq_sampler(0.05, 0.3, 0.0, 0.1), 6, 11);

  NoiseSpec zero;
  MeterDataset same = apply_noise(clean, zero);
  CHECK((same.P - clean.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((same.v2 - clean.v2).cwiseAbs().maxCoeff() == 0.0);

  NoiseSpec inj;
  inj.injection_halfwidth = 0.1;
  inj.seed = 21;
  MeterDataset noisy = apply_noise(clean, inj);
  CHECK((noisy.v2 - clean.v2).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < clean.P.size(); ++i) {
    CHECK(std::abs(noisy.P(i) - clean.P(i)) <= 0.1 * std::abs(clean.P(i)) + 1e-15);
    CHECK(std::abs(noisy.Q(i) - clean.Q(i)) <= 0.1 * std::abs(clean.Q(i)) + 1e-15);
  }
  CHECK((noisy.P - clean.P).cwiseAbs().maxCoeff() > 0.0);

  NoiseSpec volt;
  volt.voltage_sigma = 0.005;
  volt.seed = 21;
  MeterDataset vn = apply_noise(clean, volt);
  CHECK((vn.P - clean.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK((vn.v2 - clean.v2).cwiseAbs().maxCoeff() > 0.0);
  CHECK(vn.v2.minCoeff() > 0.0);

  MeterDataset vn2 = apply_noise(clean, volt);
  CHECK((vn.v2 - vn2.v2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_SUITE_END();
