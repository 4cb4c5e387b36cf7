#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "govdamp/errors.hpp"
#include "govdamp/simulator.hpp"
#include "govdamp/synthesis.hpp"
#include "support.hpp"

using namespace govdamp;

namespace {

const SynthesisResult& bundled_design() {
  static const SynthesisResult r = design_controllers(testing::bundled());
  return r;
}

ReducedNetwork network(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b) {
  ReducedNetwork n;
  n.G = g;
  n.B = b;
  return n;
}

Eigen::VectorXd equilibrium_angles(const PowerSystemCase& c, const SynthesisResult& r) {
  const StateLayout lay = StateLayout::from_case(c);
  Eigen::VectorXd d(c.machines.size());
  for (size_t k = 0; k < c.machines.size(); ++k) d(k) = r.equilibrium.x(lay.machines[k].delta);
  return d;
}

// Σ_j d_ij (Δδ_i − Δδ_j)² summed term by term, independent of build_H.
double brute_force(const InterconnectionBounds& b, int i, const Eigen::VectorXd& dd) {
  double s = 0.0;
  for (int j = 0; j < b.size(); ++j) {
    const double d = b.qq(i, j) + b.qd(i, j) + b.dq(i, j) + b.dd(i, j);
    s += d * (dd(i) - dd(j)) * (dd(i) - dd(j));
  }
  return s;
}

}  // namespace

TEST_CASE("interconnection bounds: formula cases") {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
  const InterconnectionBounds zero =
      compute_d_matrices(network(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)), ones, ones, ones);
  CHECK(zero.total().cwiseAbs().maxCoeff() == 0.0);

  const double e = 1.2, b = 7.5;
  Eigen::MatrixXd bm(2, 2);
  bm << 0.0, b, b, 0.0;
  const InterconnectionBounds two =
      compute_d_matrices(network(Eigen::MatrixXd::Zero(2, 2), bm), Eigen::Vector2d(e, e), Eigen::Vector2d::Zero(),
                         Eigen::Vector2d::Ones());
  CHECK(two.qq(0, 1) == doctest::Approx(4 * std::pow(e, 4) * b * b));
  CHECK(two.qq(1, 0) == doctest::Approx(4 * std::pow(e, 4) * b * b));
  CHECK(two.qq(0, 0) == 0.0);
  CHECK(two.qd.cwiseAbs().maxCoeff() == 0.0);
  CHECK(two.dq.cwiseAbs().maxCoeff() == 0.0);
  CHECK(two.dd.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(compute_d_matrices(network(bm, bm), ones, ones, ones), InputError);
}

TEST_CASE("interconnection bounds: non-negative and monotone in |B|") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0), pos(0.2, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd g(3, 3), b(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        g(i, j) = g(j, i) = u(rng);
        b(i, j) = b(j, i) = u(rng);
      }
    const Eigen::Vector3d eq(pos(rng), pos(rng), pos(rng)), ed(pos(rng), pos(rng), pos(rng));
    const Eigen::Vector3d sc(pos(rng), pos(rng), pos(rng));
    const InterconnectionBounds d0 = compute_d_matrices(network(g, b), eq, ed, sc);
    CHECK(d0.total().minCoeff() >= 0.0);

    const int i = trial % 3, j = (trial + 1) % 3;
    Eigen::MatrixXd b2 = b;
    const double grow = 1.0 + pos(rng);
    b2(i, j) *= grow;
    b2(j, i) *= grow;
    const InterconnectionBounds d1 = compute_d_matrices(network(g, b2), eq, ed, sc);
    CHECK(((d1.total() - d0.total()).array() >= -1e-12 * d0.total().maxCoeff()).all());
  }
}

TEST_CASE("H matrices") {
  const SynthesisResult& r = bundled_design();
  const InterconnectionBounds& b = r.bounds;
  REQUIRE(r.H.size() == 4);

  // zero rows when D vanishes
  InterconnectionBounds none = b;
  none.qq.setZero();
  none.qd.setZero();
  none.dq.setZero();
  none.dd.setZero();
  for (const auto& h : build_H(none, r.universe)) CHECK(h.rows() == 0);

  // identity ΔxᵀHᵀHΔx = Σ_j d_ij (Δδ_i − Δδ_j)² on random vectors
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Eigen::VectorXd dx(20);
    for (int k = 0; k < 20; ++k) dx(k) = nd(rng);
    Eigen::VectorXd dd(4);
    for (int k = 0; k < 4; ++k) dd(k) = dx(5 * k);
    for (int i = 0; i < 4; ++i) {
      const double lhs = (r.H[i] * dx).squaredNorm();
      const double rhs = brute_force(b, i, dd);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
      CHECK(bound_quadratic(b, i, dd) == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
  CHECK(worst <= 1e-12);

  // relabeling the universe permutes the column blocks
  const std::vector<int> perm{2, 0, 3, 1};
  const auto hp = build_H(b, perm);
  for (int a = 0; a < 4; ++a) {
    const int i = perm[a];
    REQUIRE(hp[a].rows() == r.H[i].rows());
    for (int c = 0; c < 4; ++c)
      CHECK((hp[a].middleCols(5 * c, 5) - r.H[i].middleCols(5 * perm[c], 5)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bound soundness") {
  const PowerSystemCase& c = testing::bundled();
  const SynthesisResult& r = bundled_design();
  const Eigen::VectorXd de = equilibrium_angles(c, r);

  // no angle deviation → no disturbance
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 20; ++s) {
    Eigen::VectorXd eq(4), ed(4);
    for (int k = 0; k < 4; ++k) {
      eq(k) = r.bounds.eq_bar(k) * u(rng);
      ed(k) = r.bounds.ed_bar(k) * u(rng);
    }
    for (int i = 0; i < 4; ++i) CHECK(std::abs(disturbance_h(r.network, r.bounds.scale, i, de, de, eq, ed)) < 1e-14);
  }

  const BoundCheck ok = verify_bound(r.bounds, r.network, de, 100000, std::numbers::pi / 3.0, 1);
  CHECK(ok.violations == 0);
  CHECK(ok.max_ratio > 0.0);
  CHECK(ok.max_ratio <= 1.0);
  CHECK_FALSE(ok.extrapolated);

  // An undersized bound must be caught. Uniform shrinking by small factors is not detectable (the bound is
  // an order of magnitude loose), so shrink below the observed worst ratio.
  InterconnectionBounds small = r.bounds;
  const double f = 0.5 * ok.max_ratio;
  small.qq *= f;
  small.qd *= f;
  small.dq *= f;
  small.dd *= f;
  CHECK(verify_bound(small, r.network, de, 100000, std::numbers::pi / 3.0, 1).violations > 0);

  // Dropping one coupling entry: moving only δ_j gives a nonzero h_i against a zero bound.
  InterconnectionBounds cut = r.bounds;
  for (auto* m : {&cut.qq, &cut.qd, &cut.dq, &cut.dd}) (*m)(0, 2) = 0.0;
  Eigen::VectorXd dd = Eigen::VectorXd::Zero(4);
  dd(2) = 0.3;
  const double h = disturbance_h(r.network, r.bounds.scale, 0, de + dd, de, r.bounds.eq_bar, r.bounds.ed_bar);
  CHECK(h * h > 0.0);
  CHECK(bound_quadratic(cut, 0, dd) == 0.0);
  CHECK(h * h <= bound_quadratic(r.bounds, 0, dd));

  CHECK(verify_bound(r.bounds, r.network, de, 10, 2.0, 1).extrapolated);
  CHECK_THROWS_AS(verify_bound(r.bounds, r.network, de, 0, 1.0, 1), InputError);
}

TEST_CASE("synthesis: bundled case") {
  const SynthesisResult& r = bundled_design();
  REQUIRE(r.ok);
  CHECK(r.solution.status == SdpStatus::Optimal);
  CHECK(r.residuals.passed);
  CHECK(r.residuals.worst >= -1e-9);
  CHECK(r.gains.max_real_part < 0.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(r.controllers.designed[i]);
    CHECK(r.gains.Y[i].llt().info() == Eigen::Success);
    CHECK(r.gains.gamma[i] <= 1.0);
    // k = L Y⁻¹ recomputed independently
    const Eigen::RowVectorXd k = r.gains.L[i].transpose() * r.gains.Y[i].inverse();
    CHECK((k.transpose() - r.gains.k[i]).norm() <= 1e-8 * (1.0 + k.norm()));
    CHECK((r.controllers.gains.row(i) - k).norm() <= 1e-8 * (1.0 + k.norm()));
  }

  // zero deviation from the reference → zero signal
  for (int i = 0; i < 4; ++i) CHECK(r.controllers.signal(i, r.controllers.reference.row(i).transpose()) == 0.0);
}

TEST_CASE("synthesis: gain locality") {
  const SynthesisResult& r = bundled_design();
  // each k_i depends only on machine i's own Y_i and L_i
  Eigen::VectorXd x = r.solution.x;
  const ExtractedGains base = extract_gains(r.assembly, x, r.blocks, r.lmi_options);
  for (int q = 0; q < 5; ++q) x(r.assembly.L[1][q]) *= 1.01;
  const ExtractedGains moved = extract_gains(r.assembly, x, r.blocks, r.lmi_options);
  for (int i = 0; i < 4; ++i) {
    if (i == 1)
      CHECK((moved.k[i] - base.k[i]).norm() > 0.0);
    else
      CHECK((moved.k[i] - base.k[i]).norm() == 0.0);
  }

  // L = 0 leaves A_D itself, which has the δ integrator at the origin: not Hurwitz
  Eigen::VectorXd zero_l = r.solution.x;
  for (const auto& l : r.assembly.L)
    for (int v : l) zero_l(v) = 0.0;
  CHECK_THROWS_AS(extract_gains(r.assembly, zero_l, r.blocks, r.lmi_options), NumericalError);
}

TEST_CASE("synthesis: single isolated machine") {
  const SynthesisResult r = design_controllers(testing::single_machine());
  REQUIRE(r.ok);
  REQUIRE(r.H.size() == 1);
  CHECK(r.H[0].rows() == 0);
  CHECK(r.gains.max_real_part < 0.0);
}

TEST_CASE("synthesis: subsets") {
  const PowerSystemCase& c = testing::bundled();
  SynthesisOptions opt;
  opt.subset = {1, 3, 4};
  const SynthesisResult r = design_controllers(c, opt);
  REQUIRE(r.ok);
  CHECK(r.machine_ids == std::vector<int>{1, 3, 4});
  CHECK(r.assembly.L.size() == 3);
  CHECK_FALSE(r.controllers.designed[1]);
  CHECK(r.controllers.gains.row(1).norm() == 0.0);
  CHECK(r.controllers.gains.row(0).norm() > 0.0);

  PowerSystemCase no_gov = c;
  no_gov.governors.erase(no_gov.governors.begin() + 1);
  SynthesisOptions two;
  two.subset = {2};
  CHECK_THROWS_WITH_AS(design_controllers(no_gov, two), doctest::Contains("machine 2"), InputError);
  two.subset = {1, 3};
  CHECK(design_controllers(no_gov, two).ok);
}

TEST_CASE("synthesis: beta and kappa options") {
  SynthesisOptions opt;
  opt.beta_bar[1] = 0.5;
  CHECK_THROWS_AS(prepare_design(testing::bundled(), opt), InputError);

  SynthesisOptions var;
  var.kappa_mode = KappaMode::Variable;
  const SynthesisResult r = prepare_design(testing::bundled(), var);
  CHECK(r.assembly.kappa_y.size() == 4);
  CHECK(r.assembly.kappa_y[0] >= 0);
  CHECK(r.assembly.problem.num_variables() == bundled_design().assembly.problem.num_variables() + 8);
}

TEST_CASE("nonlinear closed loop returns from random perturbations") {
  const PowerSystemCase& c = testing::bundled();
  const SynthesisResult& r = bundled_design();
  Scenario sc;
  sc.duration = 30.0;
  sc.dt = 0.01;
  ScenarioEvent on;
  on.time = 0.0;
  on.action = EventAction::ActivateControllers;
  sc.events = {on};

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> radius(0.01, 0.1);
  int converged = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    SimulationOptions so;
    so.initial_offset.resize(r.equilibrium.x.size());
    for (Eigen::Index k = 0; k < so.initial_offset.size(); ++k) so.initial_offset(k) = nd(rng);
    so.initial_offset *= radius(rng) / so.initial_offset.norm();
    const SimulationResult s = simulate(c, r.controllers, sc, so);
    REQUIRE_FALSE(s.diverged);
    const double dev = (s.states.row(s.samples() - 1).transpose() - s.initial_equilibrium).norm();
    worst = std::max(worst, dev);
    if (dev < 1e-3) ++converged;
  }
  INFO("worst final deviation " << worst);
  CHECK(converged == 50);
}

TEST_CASE("synthesis json") {
  const auto j = synthesis_json(bundled_design());
  CHECK(j["machines"].size() == 4);
  CHECK(j["h_rows"].size() == 4);
  CHECK(j.dump() == synthesis_json(bundled_design()).dump());
}
