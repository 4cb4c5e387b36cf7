#pragma once

#include <filesystem>
#include <string>

#include "govdamp/case_model.hpp"
#include "govdamp/dynamics.hpp"
#include "govdamp/powerflow.hpp"

namespace testing {

inline std::filesystem::path repo_data() { return GOVDAMP_DATA_DIR; }
inline std::filesystem::path test_data() { return GOVDAMP_TEST_DATA_DIR; }

inline const govdamp::PowerSystemCase& bundled() {
  static const govdamp::PowerSystemCase c = govdamp::load_case(repo_data() / "two_area.json");
  return c;
}

inline const govdamp::PowerSystemCase& single_machine() {
  static const govdamp::PowerSystemCase c = govdamp::load_case(test_data() / "single_machine.json");
  return c;
}

// Power flow, equilibrium and the nonlinear model of a case, built the standard way.
struct Operating {
  govdamp::PowerFlowSolution pf;
  govdamp::Equilibrium eq;
  govdamp::ReducedNetwork net;

  explicit Operating(const govdamp::PowerSystemCase& c)
      : pf(govdamp::solve_power_flow(c)),
        eq(govdamp::initialize_from_power_flow(c, pf)),
        net(govdamp::kron_reduce(govdamp::build_ybus(c), c, pf)) {}

  govdamp::DynamicModel model(const govdamp::PowerSystemCase& c) const {
    return govdamp::DynamicModel(c, net, eq.setpoints);
  }
};

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("govdamp_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
