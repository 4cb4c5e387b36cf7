#include <iostream>
#include <utility>

#include "CLI11.hpp"

#include "govdamp/commands.hpp"
#include "govdamp/errors.hpp"

using namespace govdamp;

int main(int argc, char** argv) {
  CLI::App app{"govdamp: governor-based inter-area damping analysis and controller synthesis"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string controllers, fractions, band, kappa = "fixed";
  std::string case_path, scenario_path, out_dir;

  app.add_option("--case", case_path, "case JSON file");
  app.add_option("--controllers", controllers, "ids (comma separated), all or none");
  app.add_option("--fractions", fractions, "stress fractions: a,b,c or start:stop:count");
  app.add_option("--scenario", scenario_path, "scenario JSON file (simulate)");
  app.add_option("--band", band, "modal frequency band lo,hi in Hz");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--kappa", kappa, "LMI conditioning bounds: fixed or variable")
      ->check(CLI::IsMember({"fixed", "variable"}));
  app.add_option("--bound-samples", cfg.bound_samples, "interconnection bound samples (design)")
      ->check(CLI::NonNegativeNumber);

  const std::pair<const char*, const char*> commands[] = {
      {"pf", "power flow and tie-line transfer"},
      {"modal", "linearized modes, damping and participation"},
      {"design", "synthesize governor damping controllers"},
      {"simulate", "nonlinear time-domain run of a scenario"},
      {"sweep", "modal damping across load/generation stress levels"},
      {"scan-n1", "single-branch outage scan, baseline vs robust"},
      {"export-sdpa", "write the synthesis LMI in SDPA sparse format"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::InputError);
  }

  cfg.command = app.get_subcommands().front()->get_name();
  cfg.case_path = case_path;
  cfg.scenario_path = scenario_path;
  cfg.out_dir = out_dir;
  cfg.kappa_mode = kappa == "variable" ? KappaMode::Variable : KappaMode::Fixed;

  Report r;
  try {
    if (!controllers.empty()) cfg.controllers = ControllerChoice::parse(controllers);
    if (!fractions.empty()) cfg.fractions = parse_fractions(fractions);
    if (!band.empty()) std::tie(cfg.band_lo, cfg.band_hi) = parse_band(band);
    r = run_command(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::InputError);
  }

  if (cfg.out_dir.empty()) {
    std::cout << r.json.dump(2) << '\n';
    for (const auto& line : r.summary) std::cerr << line << '\n';
  } else {
    try {
      write_report(r, cfg.out_dir);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return static_cast<int>(ExitCode::InputError);
    }
    for (const auto& line : r.summary) std::cout << line << '\n';
  }
  return static_cast<int>(r.exit_code);
}
