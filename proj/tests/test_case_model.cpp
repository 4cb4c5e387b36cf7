#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"

#include "govdamp/case_model.hpp"
#include "govdamp/errors.hpp"
#include "support.hpp"

using namespace govdamp;
using nlohmann::json;

namespace {

json single_machine_json() { return json::parse(read_text_file(testing::test_data() / "single_machine.json")); }

double load_mw(const PowerSystemCase& c, int bus) {
  for (const auto& l : c.loads)
    if (l.bus == bus) return l.p * c.base_mva;
  FAIL("no load at bus " << bus);
  return 0.0;
}

}  // namespace

TEST_CASE("parse: minimal two-bus file") {
  const PowerSystemCase c = testing::single_machine();
  CHECK(c.buses.size() == 2);
  CHECK(c.branches.size() == 1);
  CHECK(c.machines.size() == 1);
  CHECK(c.psss.empty());
  CHECK(c.omega0() == doctest::Approx(2.0 * 3.14159265358979 * 60.0));
}

TEST_CASE("parse: bundled two-area case") {
  const PowerSystemCase& c = testing::bundled();
  CHECK(c.machines.size() == 4);
  CHECK(load_mw(c, 4) == doctest::Approx(976.0));
  CHECK(load_mw(c, 14) == doctest::Approx(1757.0));
  CHECK(c.governors.size() == 4);
  CHECK(c.psss.size() == 2);
}

TEST_CASE("parse: reference errors") {
  json j = single_machine_json();
  j["branches"][0]["to"] = 99;
  CHECK_THROWS_WITH_AS(parse_case(j.dump()), doctest::Contains("dangling reference to bus 99"), InputError);

  j = single_machine_json();
  j["buses"][1]["id"] = 1;
  CHECK_THROWS_AS(parse_case(j.dump()), InputError);

  j = single_machine_json();
  j["machines"][0]["colour"] = "red";
  CHECK_THROWS_WITH_AS(parse_case(j.dump()), doctest::Contains("unknown key 'colour'"), InputError);

  j = single_machine_json();
  j["machines"][0].erase("h");
  CHECK_THROWS_WITH_AS(parse_case(j.dump()), doctest::Contains("'h'"), InputError);

  CHECK_THROWS_WITH_AS(parse_case("{\n  \"base_mva\": 100,\n  oops\n}"), doctest::Contains("line"), InputError);
}

TEST_CASE("validate") {
  CHECK(validate_case(testing::bundled()).empty());
  CHECK(validate_case(testing::single_machine()).empty());

  PowerSystemCase two_slack = testing::single_machine();
  two_slack.buses[1].kind = BusKind::Slack;
  two_slack.buses[1].voltage_setpoint = 1.0;
  const auto v = validate_case(two_slack);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("buses 1, 2") != std::string::npos);

  PowerSystemCase no_droop = testing::single_machine();
  no_droop.governors[0].r = 0.0;
  const auto w = validate_case(no_droop);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("droop") != std::string::npos);

  PowerSystemCase low_emax = testing::single_machine();
  low_emax.machines[0].e_max = 0.9;
  CHECK(validate_case(low_emax).size() == 1);

  PowerSystemCase islanded = testing::single_machine();
  islanded.branches[0].in_service = false;
  CHECK_FALSE(is_connected(islanded));
  CHECK(validate_case(islanded).size() == 1);
}

TEST_CASE("scale_stress") {
  const PowerSystemCase& c = testing::bundled();
  CHECK(same_case(scale_stress_all(c, 1.0), c, 0.0));

  const PowerSystemCase s = scale_stress(c, 1.0558, {4, 14}, {1, 2, 3, 4});
  CHECK(load_mw(s, 4) == doctest::Approx(1030.4).epsilon(1e-4));
  CHECK(load_mw(s, 14) == doctest::Approx(1855.0).epsilon(1e-4));
  CHECK(s.machines[2].p_sched == doctest::Approx(c.machines[2].p_sched * 1.0558));
  CHECK(s.loads[0].q == doctest::Approx(c.loads[0].q * 1.0558));

  CHECK(load_mw(scale_stress(c, 0.5, {4}, {}), 4) == doctest::Approx(488.0));
  CHECK(load_mw(scale_stress(c, 0.5, {4}, {}), 14) == doctest::Approx(1757.0));

  CHECK_THROWS_AS(scale_stress(c, 1.1, {99}, {}), InputError);
  CHECK_THROWS_AS(scale_stress(c, 1.1, {4}, {42}), InputError);
  CHECK_THROWS_AS(scale_stress(c, 0.0, {4}, {}), InputError);
}

TEST_CASE("scale_stress composes multiplicatively") {
  const PowerSystemCase& c = testing::bundled();
  for (double a : {0.9, 1.03, 1.2})
    for (double b : {0.8, 1.0558}) {
      const auto ab = scale_stress_all(scale_stress_all(c, a), b);
      CHECK(same_case(ab, scale_stress_all(c, a * b), 1e-12));
    }
}

TEST_CASE("apply_line_trip") {
  const PowerSystemCase& c = testing::bundled();
  const std::string before = render_case(c);
  const PowerSystemCase t = apply_line_trip(c, 3, 101, 1);
  CHECK(t.in_service_branch_count() == c.in_service_branch_count() - 1);
  CHECK(render_case(c) == before);
  CHECK(c.in_service_branch_count() == 14);

  // reversed endpoints address the same branch
  CHECK(apply_line_trip(c, 101, 3, 2).in_service_branch_count() == 13);

  CHECK_THROWS_WITH_AS(apply_line_trip(c, 3, 101, 9), doctest::Contains("circuit 9"), InputError);
  CHECK_THROWS_AS(apply_line_trip(t, 3, 101, 1), InputError);
}

TEST_CASE("render/parse round trip") {
  for (const PowerSystemCase* c : {&testing::bundled(), &testing::single_machine()}) {
    const PowerSystemCase back = parse_case(render_case(*c));
    CHECK(same_case(back, *c, 1e-12));
    CHECK(render_case(back) == render_case(*c));
  }
  const PowerSystemCase tripped = apply_line_trip(testing::bundled(), 13, 101, 2);
  CHECK(same_case(parse_case(render_case(tripped)), tripped, 1e-12));
}

TEST_CASE("fnv1a64") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("ab") == fnv1a64("b", fnv1a64("a")));
}
