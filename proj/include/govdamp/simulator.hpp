#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "govdamp/case_model.hpp"
#include "govdamp/dynamics.hpp"

namespace govdamp {

enum class EventAction { TripLine, StepLoad, ActivateControllers, DeactivateControllers };
const char* event_action_name(EventAction a);

struct ScenarioEvent {
  double time = 0.0;
  EventAction action = EventAction::TripLine;
  int from = 0, to = 0, circuit = 1;  // trip_line
  int bus = 0;                        // step_load
  double dp = 0.0, dq = 0.0;          // p.u. system base
  std::vector<int> machines;          // controller events; empty = all
};

struct Scenario {
  double duration = 10.0;
  double dt = 0.005;
  std::vector<ScenarioEvent> events;  // sorted by time (stable)
  std::optional<double> stress_fraction;
};

// {duration, dt, events: [{time, action, ...}], stress_fraction?}; step_load uses dp_mw/dq_mvar.
Scenario parse_scenario(std::string_view text, double base_mva = 100.0);
Scenario load_scenario(const std::filesystem::path& path, double base_mva = 100.0);

struct EventLogEntry {
  double time = 0.0;
  std::string message;
};

struct SimulationResult {
  std::vector<double> time;
  Eigen::MatrixXd states;  // samples × states
  Eigen::MatrixXd pe, pm, u;  // samples × machines, machine base
  Eigen::VectorXd tie_mw;
  std::vector<std::string> state_names;
  std::vector<int> machine_ids;
  StateLayout layout;
  Eigen::VectorXd initial_equilibrium;
  bool diverged = false;
  double divergence_time = 0.0;
  std::vector<EventLogEntry> log;

  int samples() const { return static_cast<int>(time.size()); }
};

struct SimulationOptions {
  Eigen::VectorXd initial_offset;  // added to the equilibrium at t = 0 (empty = none)
  double settle_tol = 1e-4;        // ‖f(x)‖∞ below this counts as a settled equilibrium
  double divergence_limit = 1e6;
};

// Fixed-step RK4 of the case (after optional stress scaling) from its power-flow equilibrium.
// Controller references are re-snapshotted at activation; gains come from `controllers`.
SimulationResult simulate(const PowerSystemCase& c, const ControllerSet& controllers, const Scenario& scenario,
                          const SimulationOptions& opt = {});

// Channels: "delta:i-j", "delta:i", "omega:i", "pm:i", "pe:i", "u:i", "xe:i", "xm:i", "efd:i",
// "eq:i", "ed:i" (machine ids) and "tie".
Eigen::VectorXd measure(const SimulationResult& r, const std::string& channel);

std::string result_csv(const SimulationResult& r, const std::vector<std::string>& channels);

struct Ringdown {
  double frequency_hz = 0.0;
  double zeta = 0.0;
  int peaks = 0;
};

// Zero-phase Butterworth band-pass (second-order sections), then log decrement over positive peaks.
// Throws NumericalError when fewer than 3 peaks are found.
Ringdown ringdown_damping(const Eigen::VectorXd& series, double dt, double f_lo, double f_hi);

}  // namespace govdamp
