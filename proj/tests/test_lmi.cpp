#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <optional>

#include "govdamp/case_model.hpp"
#include "govdamp/errors.hpp"
#include "govdamp/lmi.hpp"
#include "govdamp/synthesis.hpp"
#include "support.hpp"

using namespace govdamp;

namespace {

// min t  s.t. [[t, 1], [1, t]] ⪰ 0  →  t* = 1
LmiProblem toy() {
  LmiProblem p;
  const int t = p.add_scalar("t");
  p.set_objective(t, 1.0);
  BlockBuilder b(2, "toy");
  b.add_term(0, 0, t, 1.0);
  b.add_term(1, 1, t, 1.0);
  b.add_constant(0, 1, 1.0);
  p.add_block(b.positive());
  return p;
}

// min ±x  s.t. lo <= x <= hi (either side optional)
LmiProblem interval(double sign, std::optional<double> lo, std::optional<double> hi) {
  LmiProblem p;
  const int x = p.add_scalar("x");
  p.set_objective(x, sign);
  if (lo) {
    BlockBuilder b(1, "lo");
    b.add_term(0, 0, x, 1.0);
    b.add_constant(0, 0, -*lo);
    p.add_block(b.positive());
  }
  if (hi) {
    BlockBuilder b(1, "hi");
    b.add_term(0, 0, x, -1.0);
    b.add_constant(0, 0, *hi);
    p.add_block(b.positive());
  }
  return p;
}

// min tr(P)  s.t.  AᵀP + PA ⪯ -I, P ⪰ 0 for a stable A: the optimum solves the Lyapunov equation.
LmiProblem lyapunov(const Eigen::Matrix2d& a, SymmetricVar& pv) {
  LmiProblem p;
  pv = p.add_symmetric("P", 2);
  for (int i = 0; i < 2; ++i) p.set_objective(pv.at(i, i), 1.0);
  BlockBuilder lyap(2, "lyap");
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      // (AᵀP + PA)_ij = Σ_k A_ki P_kj + P_ik A_kj
      for (int k = 0; k < 2; ++k) {
        lyap.add_term(i, j, pv.at(k, j), a(k, i));
        lyap.add_term(i, j, pv.at(i, k), a(k, j));
      }
      if (i == j) lyap.add_constant(i, i, 1.0);
    }
  p.add_block(lyap.negative());
  return p;
}

const SynthesisResult& bundled_prepared() {
  static const SynthesisResult r = prepare_design(testing::bundled());
  return r;
}

}  // namespace

TEST_CASE("solver: two-by-two toy") {
  const LmiSolution s = solve_sdp(toy());
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.min_eigenvalues[0] >= -1e-9);
}

TEST_CASE("solver: scalar bounds and infeasibility") {
  const LmiSolution lo = solve_sdp(interval(1.0, 2.0, std::nullopt));
  REQUIRE(lo.status == SdpStatus::Optimal);
  CHECK(lo.x(0) == doctest::Approx(2.0).epsilon(1e-7));

  const LmiSolution hi = solve_sdp(interval(-1.0, std::nullopt, 3.0));
  REQUIRE(hi.status == SdpStatus::Optimal);
  CHECK(hi.x(0) == doctest::Approx(3.0).epsilon(1e-7));

  const LmiSolution bad = solve_sdp(interval(1.0, 2.0, 1.0));
  CHECK(bad.status == SdpStatus::Infeasible);
  CHECK_FALSE(bad.message.empty());
}

TEST_CASE("solver: Lyapunov equation oracle") {
  Eigen::Matrix2d a;
  a << -1.0, 2.0, -3.0, -0.5;
  SymmetricVar pv;
  const LmiProblem p = lyapunov(a, pv);
  const LmiSolution s = solve_sdp(p);
  REQUIRE(s.status == SdpStatus::Optimal);

  // oracle: the Lyapunov equation AᵀP + PA = -I as a linear system in p11, p12, p22
  Eigen::Matrix3d m;
  Eigen::Vector3d rhs(-1.0, 0.0, -1.0);
  // (1,1): 2(a11 p11 + a21 p12); (1,2): a12 p11 + (a11 + a22) p12 + a21 p22; (2,2): 2(a12 p12 + a22 p22)
  m << 2 * a(0, 0), 2 * a(1, 0), 0.0, a(0, 1), a(0, 0) + a(1, 1), a(1, 0), 0.0, 2 * a(0, 1), 2 * a(1, 1);
  const Eigen::Vector3d exact = m.colPivHouseholderQr().solve(rhs);
  CHECK(s.x(pv.at(0, 0)) == doctest::Approx(exact(0)).epsilon(1e-6));
  CHECK(s.x(pv.at(0, 1)) == doctest::Approx(exact(1)).epsilon(1e-6));
  CHECK(s.x(pv.at(1, 1)) == doctest::Approx(exact(2)).epsilon(1e-6));
  CHECK(pv.at(0, 1) == pv.at(1, 0));
}

TEST_CASE("SDPA export: golden toy file") {
  const std::string golden = read_text_file(testing::test_data() / "toy.dat-s");
  CHECK(export_sdpa(toy()) == golden);
}

TEST_CASE("SDPA export: empty problem and scalar grouping") {
  const std::string empty = export_sdpa(LmiProblem{});
  CHECK(empty == "* govdamp LMI export\n0\n0\n\n\n");

  // two 1×1 blocks share one diagonal block of negative size
  const std::string s = export_sdpa(interval(1.0, 2.0, 3.0));
  CHECK(s.find("\n1\n-2\n") != std::string::npos);
  CHECK(s.find("0 1 1 1 2\n") != std::string::npos);
  CHECK(s.find("0 1 2 2 -3\n") != std::string::npos);
  CHECK(s.find("1 1 2 2 -1\n") != std::string::npos);
}

TEST_CASE("SDPA round trip") {
  for (const LmiProblem& p : {toy(), interval(1.0, 2.0, 3.0), bundled_prepared().assembly.problem}) {
    const std::string text = export_sdpa(p);
    const LmiProblem back = read_sdpa(text);
    CHECK(back.num_variables() == p.num_variables());
    CHECK(export_sdpa(back) == text);
  }
  CHECK_THROWS_AS(read_sdpa("1\n1\n2\n"), InputError);
  CHECK_THROWS_AS(read_sdpa("1\n1\n2\n1\n0 3 1 1 1\n"), InputError);
}

TEST_CASE("synthesis LMI: export is deterministic") {
  const SynthesisResult a = prepare_design(testing::bundled());
  const std::string ea = export_sdpa(a.assembly.problem);
  CHECK(ea == export_sdpa(bundled_prepared().assembly.problem));
  CHECK(fnv1a64(ea) == fnv1a64(export_sdpa(read_sdpa(ea))));
}

TEST_CASE("check_solution") {
  const LmiProblem t = toy();
  const LmiSolution s = solve_sdp(t);
  CHECK(check_solution(t, s.x).passed);

  // max x s.t. x <= 3; pushing past the bound shows up as a negative eigenvalue
  const LmiProblem p = interval(-1.0, std::nullopt, 3.0);
  Eigen::VectorXd x = solve_sdp(p).x;
  x(0) += 1.0;
  const ResidualReport r = check_solution(p, x);
  CHECK_FALSE(r.passed);
  CHECK(r.worst == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(r.objective == doctest::Approx(-4.0).epsilon(1e-6));

  // no variables, constant PSD block
  LmiProblem c;
  BlockBuilder b(2, "const");
  b.add_constant(0, 0, 2.0);
  b.add_constant(1, 1, 1.0);
  b.add_constant(0, 1, 0.5);
  c.add_block(b.positive());
  CHECK(check_solution(c, Eigen::VectorXd(0)).passed);
  CHECK(solve_sdp(c).status == SdpStatus::Optimal);

  CHECK_THROWS_AS(check_solution(t, Eigen::VectorXd::Zero(3)), InputError);
}

TEST_CASE("solver agrees with independent eigenvalue recheck") {
  const SynthesisResult& r = bundled_prepared();
  const LmiSolution s = solve_sdp(r.assembly.problem);
  REQUIRE(s.status == SdpStatus::Optimal);
  const ResidualReport rep = check_solution(r.assembly.problem, s.x);
  CHECK(rep.passed);
  REQUIRE(rep.min_eigenvalues.size() == s.min_eigenvalues.size());
  for (size_t k = 0; k < rep.min_eigenvalues.size(); ++k)
    CHECK(rep.min_eigenvalues[k] == doctest::Approx(s.min_eigenvalues[k]).epsilon(1e-6).scale(1e-6));
  CHECK(rep.objective == doctest::Approx(s.objective));
}

TEST_CASE("strict margin ε: larger margin never lowers the optimum") {
  // min t s.t. [[t,1],[1,t]] ⪰ ε I  →  t* = 1 + ε
  double previous = -1.0;
  for (double eps : {0.0, 1e-3, 1e-1, 0.5}) {
    LmiProblem p;
    const int t = p.add_scalar("t");
    p.set_objective(t, 1.0);
    BlockBuilder b(2, "toy");
    b.add_term(0, 0, t, 1.0);
    b.add_term(1, 1, t, 1.0);
    b.add_constant(0, 1, 1.0);
    p.add_block(b.positive(eps));
    const LmiSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(s.objective == doctest::Approx(1.0 + eps).epsilon(1e-7));
    CHECK(s.objective >= previous);
    previous = s.objective;
  }
}

TEST_CASE("solver is bitwise deterministic") {
  const LmiProblem& p = bundled_prepared().assembly.problem;
  const LmiSolution a = solve_sdp(p), b = solve_sdp(p);
  REQUIRE(a.x.size() == b.x.size());
  CHECK(std::memcmp(a.x.data(), b.x.data(), sizeof(double) * a.x.size()) == 0);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("solver: unconstrained objective variable") {
  LmiProblem p = toy();
  const int free = p.add_scalar("free");
  p.set_objective(free, 1.0);
  const LmiSolution s = solve_sdp(p);
  CHECK(s.status == SdpStatus::NumericalFailure);
  CHECK(s.message.find("free") != std::string::npos);
}
