#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "govdamp/errors.hpp"
#include "govdamp/smallsignal.hpp"
#include "support.hpp"

using namespace govdamp;

namespace {

constexpr double kPi = std::numbers::pi;

struct Linearized {
  Eigen::MatrixXd a;
  ModeTable table;
  StateLayout layout;
};

Linearized linearize_case(const PowerSystemCase& c) {
  testing::Operating op(c);
  const DynamicModel model = op.model(c);
  Linearized l;
  l.a = linearize(model, op.eq.x);
  l.layout = model.layout();
  l.table = modal_analysis(l.a, l.layout.names);
  std::vector<int> area;
  for (int i = 0; i < static_cast<int>(c.machines.size()); ++i) area.push_back(c.area_of_machine(i));
  classify_modes(l.table, l.layout.speed_indices(), area);
  return l;
}

const Linearized& bundled_linear() {
  static const Linearized l = linearize_case(testing::bundled());
  return l;
}

Mode mode_with_speeds(std::vector<std::complex<double>> speeds, int extra_states = 0) {
  Mode m;
  m.eigenvalue = {-0.2, 3.5};
  m.right = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(speeds.size()) + extra_states);
  for (size_t k = 0; k < speeds.size(); ++k) m.right(static_cast<Eigen::Index>(k)) = speeds[k];
  return m;
}

}  // namespace

TEST_CASE("linearize: linear system is recovered") {
  Eigen::MatrixXd m(3, 3);
  m << -1.0, 2.0, 0.5, 0.0, -3.0, 1.0, 4.0, 0.0, -0.1;
  const VectorField f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return m * x; };
  CHECK((linearize(f, Eigen::VectorXd::Zero(3)) - m).cwiseAbs().maxCoeff() < 1e-9);

  const VectorField g = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return m * x + Eigen::VectorXd::Ones(3); };
  CHECK_THROWS_AS(linearize(g, Eigen::VectorXd::Zero(3)), NumericalError);
}

TEST_CASE("linearize: isolated machine reproduces the design block") {
  const PowerSystemCase& c = testing::single_machine();
  const Linearized l = linearize_case(c);
  const auto idx = l.layout.design_indices(0);
  const DesignBlock d = build_design_matrices(c.machines[0], c.governors[0], c.omega0());
  Mat5 sub;
  for (int r = 0; r < 5; ++r)
    for (int k = 0; k < 5; ++k) sub(r, k) = l.a(idx[r], idx[k]);
  CHECK((sub - d.A).cwiseAbs().maxCoeff() <= 1e-6 * d.A.cwiseAbs().maxCoeff());
}

TEST_CASE("modal analysis: formula cases") {
  const double w = 2 * kPi * 0.6;
  Eigen::MatrixXd a(2, 2);
  a << -0.1, w, -w, -0.1;
  const ModeTable t = modal_analysis(a);
  REQUIRE(t.modes.size() == 1);
  CHECK(t.modes[0].frequency_hz == doctest::Approx(0.6));
  CHECK(t.modes[0].damping_ratio == doctest::Approx(0.1 / std::sqrt(0.01 + w * w)));
  CHECK(100 * t.modes[0].damping_ratio == doctest::Approx(2.65).epsilon(1e-3));

  Eigen::MatrixXd r(1, 1);
  r << -4.0;
  const ModeTable tr = modal_analysis(r);
  CHECK(tr.modes[0].damping_ratio == 1.0);
  CHECK(tr.modes[0].frequency_hz == 0.0);
  CHECK(tr.modes[0].cls == ModeClass::Real);

  Eigen::MatrixXd d = Eigen::Vector3d(-1.0, -2.0, -3.0).asDiagonal();
  const ModeTable td = modal_analysis(d);
  REQUIRE(td.modes.size() == 3);
  for (const auto& m : td.modes) {
    const int k = static_cast<int>(std::lround(-m.eigenvalue.real())) - 1;
    for (int s = 0; s < 3; ++s) CHECK(m.participation(s) == doctest::Approx(s == k ? 1.0 : 0.0));
  }
}

TEST_CASE("modal analysis: bundled case") {
  const Linearized& l = bundled_linear();
  const ModeTable& t = l.table;
  const double anorm = l.a.norm();
  bool inter_band = false;
  for (const auto& m : t.modes) {
    CHECK(m.residual <= 1e-8);
    const Eigen::VectorXcd res = l.a.cast<std::complex<double>>() * m.right - m.eigenvalue * m.right;
    CHECK(res.norm() <= 1e-8 * anorm * m.right.norm());
    CHECK(m.participation.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.damping_ratio >= -1.0);
    CHECK(m.damping_ratio <= 1.0);
    if (m.oscillatory() && m.frequency_hz >= 0.4 && m.frequency_hz <= 0.8) inter_band = true;
  }
  CHECK(inter_band);
  // sorted by damping, conjugates once
  for (size_t k = 1; k < t.modes.size(); ++k) CHECK(t.modes[k - 1].damping_ratio <= t.modes[k].damping_ratio);
  int count = 0;
  for (const auto& m : t.modes) count += m.oscillatory() ? 2 : 1;
  CHECK(count == l.a.rows());
}

TEST_CASE("damping ratio is invariant under time rescaling") {
  const Linearized& l = bundled_linear();
  const ModeTable scaled = modal_analysis(3.7 * l.a);
  REQUIRE(scaled.modes.size() == l.table.modes.size());
  for (size_t k = 0; k < scaled.modes.size(); ++k)
    CHECK(scaled.modes[k].damping_ratio == doctest::Approx(l.table.modes[k].damping_ratio).epsilon(1e-7));
}

TEST_CASE("classify_mode") {
  const std::vector<int> speeds{0, 1};
  CHECK(classify_mode(mode_with_speeds({{1, 0}, {-0.8, 0.1}}), speeds, {1, 2}) == ModeClass::InterArea);
  CHECK(classify_mode(mode_with_speeds({{1, 0}, {-0.8, 0.1}}), speeds, {1, 1}) == ModeClass::Local);
  CHECK(classify_mode(mode_with_speeds({{1, 0}, {0.8, 0.1}}), speeds, {1, 2}) == ModeClass::Local);

  // speed content below 10 % of the vector norm → control
  Mode ctl = mode_with_speeds({{0.01, 0}, {-0.01, 0}}, 1);
  ctl.right(2) = 1.0;
  CHECK(classify_mode(ctl, speeds, {1, 2}) == ModeClass::Control);

  // four machines: the two largest entries decide
  const std::vector<int> four{0, 1, 2, 3};
  CHECK(classify_mode(mode_with_speeds({{1, 0}, {0.9, 0}, {-0.2, 0}, {-0.1, 0}}), four, {1, 1, 2, 2}) ==
        ModeClass::Local);
  CHECK(classify_mode(mode_with_speeds({{1, 0}, {0.2, 0}, {-0.9, 0}, {-0.1, 0}}), four, {1, 1, 2, 2}) ==
        ModeClass::InterArea);

  // scale invariance
  Mode m = mode_with_speeds({{1, 0.3}, {-0.7, 0.2}, {0.1, 0}, {0.05, 0}});
  const ModeClass base = classify_mode(m, four, {1, 1, 2, 2});
  m.right *= std::complex<double>(-2.5, 7.0);
  CHECK(classify_mode(m, four, {1, 1, 2, 2}) == base);
}

TEST_CASE("classification of the bundled case") {
  const ModeTable& t = bundled_linear().table;
  const Mode& weakest = min_damping(t);
  CHECK(weakest.cls == ModeClass::InterArea);
  CHECK(weakest.frequency_hz > 0.4);
  CHECK(weakest.frequency_hz < 0.8);

  // lowest-frequency electromechanical mode in the default band
  const Mode* lowest = nullptr;
  for (const auto& m : t.modes)
    if (m.oscillatory() && m.frequency_hz >= 0.1 && m.cls != ModeClass::Control &&
        (!lowest || m.frequency_hz < lowest->frequency_hz))
      lowest = &m;
  REQUIRE(lowest);
  CHECK(lowest->cls == ModeClass::InterArea);

  // three electromechanical swing modes for four machines; the inter-area one is the slowest
  int swing = 0;
  for (const auto& m : t.modes)
    if (m.oscillatory() && m.cls != ModeClass::Control && m.frequency_hz > 0.3 && m.frequency_hz < 2.5) {
      ++swing;
      CHECK(m.frequency_hz >= weakest.frequency_hz);
    }
  CHECK(swing == 3);
}

TEST_CASE("min_damping") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  auto pair = [&](int k, double zeta, double hz) {
    const double wn = 2 * kPi * hz / std::sqrt(1 - zeta * zeta);
    const double s = -zeta * wn, wd = 2 * kPi * hz;
    a(k, k) = s;
    a(k + 1, k + 1) = s;
    a(k, k + 1) = wd;
    a(k + 1, k) = -wd;
  };
  pair(0, 0.05, 0.7);
  pair(2, 0.20, 1.2);
  const ModeTable t = modal_analysis(a);
  CHECK(min_damping(t).damping_ratio == doctest::Approx(0.05));
  CHECK(min_damping(t, 1.0, 2.0).damping_ratio == doctest::Approx(0.20));
  CHECK_THROWS_AS(min_damping(t, 2.0, 3.0), NumericalError);
  CHECK_THROWS_AS(min_damping(t, 3.0, 2.0), InputError);
}

TEST_CASE("mode table csv") {
  const std::string csv = mode_table_csv(bundled_linear().table);
  CHECK(csv.rfind("re,im,freq_hz,damping_pct,class,top_participant\n", 0) == 0);
  CHECK(csv.find("inter_area") != std::string::npos);
}

TEST_CASE("balancing uses powers of two") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = u(rng) * std::pow(10.0, 3 * (i - j));
  const Eigen::VectorXd d = balance_scaling(a);
  for (int i = 0; i < 5; ++i) {
    int e = 0;
    CHECK(std::frexp(d(i), &e) == 0.5);
  }
  const Eigen::MatrixXd b = d.cwiseInverse().asDiagonal() * a * d.asDiagonal();
  CHECK(b.norm() < a.norm());
}
