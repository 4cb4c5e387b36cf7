#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "govdamp/case_model.hpp"
#include "govdamp/dynamics.hpp"
#include "govdamp/smallsignal.hpp"
#include "govdamp/synthesis.hpp"

namespace govdamp {

enum class ExitCode : int { Ok = 0, InputError = 2, NumericalFailure = 3, Divergence = 4 };

// Which machines host controllers: none, all governor-equipped machines, or explicit ids.
struct ControllerChoice {
  enum class Kind { None, All, Ids } kind = Kind::None;
  std::vector<int> ids;

  static ControllerChoice parse(const std::string& text);
  std::string str() const;
};

struct RunConfig {
  std::string command;
  std::filesystem::path case_path;
  std::optional<ControllerChoice> controllers;  // command-specific default when unset
  std::vector<double> fractions;
  std::filesystem::path scenario_path;
  double band_lo = 0.1, band_hi = 3.0;
  std::filesystem::path out_dir;
  int workers = 1;
  std::uint64_t seed = 1;
  KappaMode kappa_mode = KappaMode::Fixed;
  int bound_samples = 100000;
};

struct Report {
  nlohmann::ordered_json json;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::vector<std::string> summary;
  ExitCode exit_code = ExitCode::Ok;
};

// "0.9,1.0,1.1" or "start:stop:count".
std::vector<double> parse_fractions(const std::string& text);
std::pair<double, double> parse_band(const std::string& text);

Report cmd_pf(const RunConfig& cfg);
Report cmd_modal(const RunConfig& cfg);
Report cmd_design(const RunConfig& cfg);
Report cmd_simulate(const RunConfig& cfg);
Report cmd_sweep(const RunConfig& cfg);
Report cmd_scan_n1(const RunConfig& cfg);
Report cmd_export_sdpa(const RunConfig& cfg);

// Dispatches on cfg.command; exceptions map to exit codes 2 / 3 with an "error" report.
Report run_command(const RunConfig& cfg);

// Writes report.json and side files into cfg.out_dir (created if needed).
void write_report(const Report& r, const std::filesystem::path& out_dir);

// Shared analysis used by modal/sweep/scan: power flow → equilibrium → (controllers) → modes.
struct ModalOutcome {
  bool converged = false;
  std::string status = "not_run";  // converged | islanded | pf_diverged | limit_violation | numerical
  std::string failure;             // reason when not converged
  double tie_flow_mw = 0.0;
  ModeTable table;
  std::optional<Mode> min_mode;
  double max_real_part = 0.0;
};

ModalOutcome analyze_modes(const PowerSystemCase& c, const ControllerSet* controllers, double band_lo,
                           double band_hi);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace govdamp
