#include "govdamp/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"
#include "govdamp/lmi.hpp"
#include "govdamp/powerflow.hpp"
#include "govdamp/simulator.hpp"

namespace govdamp {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

ojson num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

ojson num_array(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v(k)));
  return a;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) s[k] = digits[v & 0xf];
  return s;
}

struct LoadedCase {
  PowerSystemCase c;
  std::string bytes;
};

LoadedCase load_checked(const RunConfig& cfg) {
  if (cfg.case_path.empty()) throw InputError("--case is required");
  LoadedCase lc;
  lc.bytes = read_text_file(cfg.case_path);
  lc.c = parse_case(lc.bytes);
  const auto violations = validate_case(lc.c);
  if (!violations.empty()) {
    std::string msg = "case is invalid:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw InputError(msg);
  }
  return lc;
}

ControllerChoice choice_or(const RunConfig& cfg, ControllerChoice::Kind fallback) {
  if (cfg.controllers) return *cfg.controllers;
  ControllerChoice c;
  c.kind = fallback;
  return c;
}

SynthesisOptions synthesis_options(const RunConfig& cfg, const ControllerChoice& choice, const PowerSystemCase& c) {
  SynthesisOptions o;
  o.kappa_mode = cfg.kappa_mode;
  if (choice.kind == ControllerChoice::Kind::Ids) {
    o.subset = choice.ids;
  } else {
    for (const auto& m : c.machines)
      if (c.governor_for(m.id)) o.subset.push_back(m.id);
    if (o.subset.empty()) throw InputError("no machine in the case has a steam governor");
  }
  return o;
}

ojson base_config(const RunConfig& cfg, const std::optional<ControllerChoice>& ctrl) {
  ojson j;
  j["command"] = cfg.command;
  j["case"] = cfg.case_path.string();
  if (ctrl) j["controllers"] = ctrl->str();
  j["band_hz"] = {cfg.band_lo, cfg.band_hi};
  j["seed"] = cfg.seed;
  j["kappa_mode"] = cfg.kappa_mode == KappaMode::Fixed ? "fixed" : "variable";
  return j;
}

Report start_report(const RunConfig& cfg, const LoadedCase& lc, ojson config) {
  Report r;
  r.json["tool"] = "govdamp";
  r.json["metadata"] = {{"version", kVersion}};
  std::uint64_t h = fnv1a64(lc.bytes);
  h = fnv1a64(config.dump(), h);
  r.json["fingerprint"] = hex64(h);
  r.json["config"] = std::move(config);
  (void)cfg;
  return r;
}

ojson mode_json(const ModeTable& t, const Mode& m) {
  return {{"re", num(m.eigenvalue.real())},
          {"im", num(m.eigenvalue.imag())},
          {"freq_hz", num(m.frequency_hz)},
          {"damping_pct", num(100.0 * m.damping_ratio)},
          {"class", mode_class_name(m.cls)},
          {"top_participant", t.top_participant(m)},
          {"residual", num(m.residual)}};
}

ojson modal_json(const ModalOutcome& o) {
  ojson j;
  j["converged"] = o.converged;
  if (!o.converged) {
    j["failure"] = o.failure;
    return j;
  }
  j["tie_flow_mw"] = num(o.tie_flow_mw);
  j["max_real_part"] = num(o.max_real_part);
  j["minimum_damping"] = o.min_mode ? mode_json(o.table, *o.min_mode) : ojson(nullptr);
  ojson inter = ojson::array();
  for (const auto& m : o.table.modes)
    if (m.cls == ModeClass::InterArea) inter.push_back(mode_json(o.table, m));
  j["inter_area_modes"] = inter;
  return j;
}

std::string mode_line(const std::string& label, const ModalOutcome& o) {
  if (!o.converged) return label + ": not converged (" + o.failure + ")";
  if (!o.min_mode) return label + ": no oscillatory mode in band";
  const Mode& m = *o.min_mode;
  std::ostringstream os;
  os << label << ": minimum damping " << fmt_num(std::round(m.damping_ratio * 1e5) / 1e3) << "% at "
     << fmt_num(std::round(m.frequency_hz * 1e4) / 1e4) << " Hz (" << mode_class_name(m.cls) << ")";
  return os.str();
}

template <class F>
void parallel_for(int n, int workers, F&& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

ControllerSet design_or_throw(const RunConfig& cfg, const ControllerChoice& choice, const PowerSystemCase& c,
                              ojson* design_json = nullptr) {
  SynthesisResult s = design_controllers(c, synthesis_options(cfg, choice, c));
  if (design_json) *design_json = synthesis_json(s);
  if (!s.ok) throw NumericalError("controller synthesis failed: " + s.message);
  return s.controllers;
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ':') ch = '_';
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

ControllerChoice ControllerChoice::parse(const std::string& text) {
  ControllerChoice c;
  if (text == "none") return c;
  if (text == "all") {
    c.kind = Kind::All;
    return c;
  }
  c.kind = Kind::Ids;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      const int id = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      c.ids.push_back(id);
    } catch (const std::exception&) {
      throw InputError("--controllers: expected 'all', 'none' or comma-separated machine ids, got '" + text + "'");
    }
  }
  if (c.ids.empty()) throw InputError("--controllers: empty id list");
  return c;
}

std::string ControllerChoice::str() const {
  if (kind == Kind::None) return "none";
  if (kind == Kind::All) return "all";
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    try {
      size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("--fractions: bad number '" + s + "'");
    }
  };
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto a = text.find(':'), b = text.rfind(':');
    const double lo = number(text.substr(0, a)), hi = number(text.substr(a + 1, b - a - 1));
    const double cnt = number(text.substr(b + 1));
    const int n = static_cast<int>(cnt);
    if (n < 1 || n != cnt) throw InputError("--fractions: count must be a positive integer");
    for (int k = 0; k < n; ++k) out.push_back(n == 1 ? lo : std::round((lo + (hi - lo) * k / (n - 1)) * 1e12) / 1e12);  // tidy grid values
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(number(tok));
  }
  if (out.empty()) throw InputError("--fractions: empty list");
  for (double f : out)
    if (!(f > 0.0)) throw InputError("--fractions: fractions must be positive");
  return out;
}

std::pair<double, double> parse_band(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw InputError("--band: expected 'lo,hi' in Hz");
  double lo, hi;
  try {
    lo = std::stod(text.substr(0, comma));
    hi = std::stod(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw InputError("--band: expected 'lo,hi' in Hz");
  }
  if (!(lo >= 0.0 && hi > lo)) throw InputError("--band: need 0 <= lo < hi");
  return {lo, hi};
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  if (n != b.size() || n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<size_t> idx(n);
    for (size_t k = 0; k < n; ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    for (size_t k = 0; k < n;) {
      size_t e = k;
      while (e + 1 < n && v[idx[e + 1]] == v[idx[k]]) ++e;
      for (size_t q = k; q <= e; ++q) r[idx[q]] = 0.5 * static_cast<double>(k + e) + 1.0;
      k = e + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = (n + 1) / 2.0;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t k = 0; k < n; ++k) {
    sab += (ra[k] - ma) * (rb[k] - ma);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - ma) * (rb[k] - ma);
  }
  return sab / std::sqrt(saa * sbb);
}

ModalOutcome analyze_modes(const PowerSystemCase& c, const ControllerSet* controllers, double band_lo,
                           double band_hi) {
  ModalOutcome o;
  if (!is_connected(c)) {
    o.status = "islanded";
    o.failure = "islanded network";
    return o;
  }
  try {
    const PowerFlowSolution pf = solve_power_flow(c);
    o.tie_flow_mw = tie_line_flow(c, pf.voltage());
    const Equilibrium eq = initialize_from_power_flow(c, pf);
    DynamicModel model(c, kron_reduce(build_ybus(c), c, pf), eq.setpoints);
    if (controllers) {
      model.set_controllers(*controllers);
      for (int i = 0; i < model.machine_count(); ++i)
        if (controllers->designed[i]) {
          model.set_reference(i, model.design_state(eq.x, i));
          model.set_active(i, true);
        }
    }
    const Eigen::MatrixXd a = linearize(model, eq.x);
    o.table = modal_analysis(a, model.layout().names);
    std::vector<int> area;
    for (int i = 0; i < model.machine_count(); ++i) area.push_back(c.area_of_machine(i));
    classify_modes(o.table, model.layout().speed_indices(), area);
    o.max_real_part = -std::numeric_limits<double>::infinity();
    for (const auto& m : o.table.modes) o.max_real_part = std::max(o.max_real_part, m.eigenvalue.real());
    try {
      o.min_mode = min_damping(o.table, band_lo, band_hi);
    } catch (const NumericalError&) {
    }
    o.converged = true;
    o.status = "converged";
  } catch (const PowerFlowDivergence& e) {
    o.status = "pf_diverged";
    o.failure = std::string("power flow diverged: ") + e.what();
  } catch (const IslandedNetwork& e) {
    o.status = "islanded";
    o.failure = e.what();
  } catch (const LimitViolation& e) {
    o.status = "limit_violation";
    o.failure = e.what();
  } catch (const NumericalError& e) {
    o.status = "numerical";
    o.failure = e.what();
  }
  return o;
}

// ---------------------------------------------------------------------------

Report cmd_pf(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  Report r = start_report(cfg, lc, base_config(cfg, std::nullopt));
  const PowerFlowSolution pf = solve_power_flow(lc.c);
  ojson res;
  res["converged"] = true;
  res["iterations"] = pf.iterations;
  res["max_mismatch_pu"] = num(pf.max_mismatch);
  res["tie_flow_mw"] = num(tie_line_flow(lc.c, pf.voltage()));
  res["losses_mw"] = num(network_losses(lc.c, pf) * lc.c.base_mva);
  ojson buses = ojson::array();
  for (size_t k = 0; k < lc.c.buses.size(); ++k)
    buses.push_back({{"bus", lc.c.buses[k].id},
                     {"vm_pu", num(pf.vm(k))},
                     {"va_rad", num(pf.va(k))},
                     {"p_pu", num(pf.p(k))},
                     {"q_pu", num(pf.q(k))}});
  res["buses"] = buses;
  r.json["result"] = res;
  r.files.emplace_back("powerflow.csv", power_flow_csv(lc.c, pf));
  r.summary.push_back("power flow converged in " + std::to_string(pf.iterations) + " iterations, tie-line flow " +
                      fmt_num(std::round(res["tie_flow_mw"].get<double>() * 100) / 100) + " MW");
  return r;
}

Report cmd_modal(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  const ControllerChoice choice = choice_or(cfg, ControllerChoice::Kind::None);
  Report r = start_report(cfg, lc, base_config(cfg, choice));
  std::optional<ControllerSet> ctrl;
  ojson design;
  if (choice.kind != ControllerChoice::Kind::None) ctrl = design_or_throw(cfg, choice, lc.c, &design);
  const ModalOutcome o = analyze_modes(lc.c, ctrl ? &*ctrl : nullptr, cfg.band_lo, cfg.band_hi);
  if (!o.converged) throw NumericalError(o.failure);
  ojson res = modal_json(o);
  if (ctrl) res["design"] = design;
  ojson modes = ojson::array();
  for (const auto& m : o.table.modes) modes.push_back(mode_json(o.table, m));
  res["modes"] = modes;
  r.json["result"] = res;
  r.files.emplace_back("modes.csv", mode_table_csv(o.table));
  r.summary.push_back(mode_line(ctrl ? "with controllers" : "baseline", o));
  return r;
}

Report cmd_design(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  const ControllerChoice choice = choice_or(cfg, ControllerChoice::Kind::All);
  if (choice.kind == ControllerChoice::Kind::None) throw InputError("design needs at least one controlled machine");
  ojson config = base_config(cfg, choice);
  config["bound_samples"] = cfg.bound_samples;
  Report r = start_report(cfg, lc, config);
  const SynthesisOptions opt = synthesis_options(cfg, choice, lc.c);
  const SynthesisResult s = design_controllers(lc.c, opt);
  ojson res = synthesis_json(s);
  r.files.emplace_back("design.dat-s", export_sdpa(s.assembly.problem));
  res["sdpa_file"] = "design.dat-s";
  if (!s.ok) {
    r.json["result"] = res;
    r.exit_code = ExitCode::NumericalFailure;
    r.summary.push_back("synthesis failed: " + s.message);
    return r;
  }
  const StateLayout layout = StateLayout::from_case(lc.c);
  Eigen::VectorXd delta_e(lc.c.machines.size());
  for (size_t k = 0; k < lc.c.machines.size(); ++k) delta_e(k) = s.equilibrium.x(layout.machines[k].delta);
  const BoundCheck bc =
      verify_bound(s.bounds, s.network, delta_e, cfg.bound_samples, std::numbers::pi / 3.0, cfg.seed);
  res["bound_check"] = {{"samples", bc.samples},
                        {"angle_range_rad", std::numbers::pi / 3.0},
                        {"violations", bc.violations},
                        {"max_ratio", num(bc.max_ratio)}};
  const ModalOutcome base = analyze_modes(lc.c, nullptr, cfg.band_lo, cfg.band_hi);
  const ModalOutcome robust = analyze_modes(lc.c, &s.controllers, cfg.band_lo, cfg.band_hi);
  res["modal_baseline"] = modal_json(base);
  res["modal_controlled"] = modal_json(robust);
  r.json["result"] = res;

  std::ostringstream csv;
  csv << "machine,k_delta,k_omega,k_pm,k_xm,k_xe,gamma\n";
  for (size_t a = 0; a < s.universe.size(); ++a) {
    csv << s.machine_ids[a];
    for (int q = 0; q < 5; ++q) csv << ',' << fmt_num(s.gains.k[a](q));
    csv << ',' << fmt_num(s.gains.gamma[a]) << '\n';
  }
  r.files.emplace_back("gains.csv", csv.str());
  r.summary.push_back("synthesis optimal (" + std::to_string(s.solution.iterations) + " Newton steps), design max Re " +
                      fmt_num(s.gains.max_real_part));
  r.summary.push_back("bound check: " + std::to_string(bc.violations) + " violations in " +
                      std::to_string(bc.samples) + " samples");
  r.summary.push_back(mode_line("baseline", base));
  r.summary.push_back(mode_line("with controllers", robust));
  return r;
}

Report cmd_export_sdpa(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  const ControllerChoice choice = choice_or(cfg, ControllerChoice::Kind::All);
  if (choice.kind == ControllerChoice::Kind::None) throw InputError("export-sdpa needs at least one controlled machine");
  Report r = start_report(cfg, lc, base_config(cfg, choice));
  const SynthesisResult s = prepare_design(lc.c, synthesis_options(cfg, choice, lc.c));
  const std::string text = export_sdpa(s.assembly.problem);
  r.json["result"] = {{"file", "problem.dat-s"},
                      {"variables", s.assembly.problem.num_variables()},
                      {"blocks", s.assembly.problem.blocks().size()},
                      {"bytes", text.size()},
                      {"fnv1a64", hex64(fnv1a64(text))}};
  r.files.emplace_back("problem.dat-s", text);
  r.summary.push_back("SDPA problem: " + std::to_string(s.assembly.problem.num_variables()) + " variables, " +
                      std::to_string(s.assembly.problem.blocks().size()) + " constraint blocks");
  return r;
}

Report cmd_simulate(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  if (cfg.scenario_path.empty()) throw InputError("--scenario is required for simulate");
  const std::string scenario_bytes = read_text_file(cfg.scenario_path);
  const Scenario sc = parse_scenario(scenario_bytes, lc.c.base_mva);
  // controllers are only designed by default when the scenario switches them
  bool switches = false;
  for (const auto& e : sc.events)
    switches |= e.action == EventAction::ActivateControllers || e.action == EventAction::DeactivateControllers;
  const ControllerChoice choice =
      choice_or(cfg, switches ? ControllerChoice::Kind::All : ControllerChoice::Kind::None);
  ojson config = base_config(cfg, choice);
  config["scenario"] = cfg.scenario_path.string();
  config["scenario_fnv1a64"] = hex64(fnv1a64(scenario_bytes));
  config["dt"] = sc.dt;
  config["duration"] = sc.duration;
  if (sc.stress_fraction) config["stress_fraction"] = *sc.stress_fraction;
  Report r = start_report(cfg, lc, config);

  ControllerSet ctrl = ControllerSet::none(static_cast<int>(lc.c.machines.size()));
  ojson design;
  if (choice.kind != ControllerChoice::Kind::None) ctrl = design_or_throw(cfg, choice, lc.c, &design);
  const SimulationResult sim = simulate(lc.c, ctrl, sc);

  std::vector<std::string> channels;
  const int first = sim.machine_ids.front();
  for (size_t k = 1; k < sim.machine_ids.size(); ++k)
    channels.push_back("delta:" + std::to_string(sim.machine_ids[k]) + "-" + std::to_string(first));
  const size_t n_delta = channels.size();
  for (const char* kind : {"omega", "pm", "pe", "u"})
    for (int id : sim.machine_ids) channels.push_back(std::string(kind) + ":" + std::to_string(id));
  channels.push_back("tie");

  ojson res;
  res["samples"] = sim.samples();
  res["diverged"] = sim.diverged;
  if (sim.diverged) res["divergence_time"] = sim.divergence_time;
  ojson log = ojson::array();
  for (const auto& e : sim.log) log.push_back({{"time", e.time}, {"message", e.message}});
  res["events"] = log;

  // ringdown per inter-event segment, skipping the first second after each event
  const double t_valid = sim.diverged ? sim.divergence_time - sc.dt : sc.duration;
  std::vector<double> cuts{0.0};
  for (const auto& e : sc.events)
    if (e.time > cuts.back()) cuts.push_back(e.time);
  cuts.push_back(t_valid);
  if (choice.kind != ControllerChoice::Kind::None) res["design"] = design;
  ojson rings = ojson::array();
  for (size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double t0 = s == 0 && sc.events.empty() ? 0.0 : (s == 0 ? cuts[0] : cuts[s] + 1.0);
    const double t1 = std::min(cuts[s + 1], t_valid);
    if (s == 0 && !sc.events.empty() && sc.events.front().time <= 0.0) continue;
    if (t1 - t0 < 3.0) continue;
    for (size_t k = 0; k < n_delta; ++k) {
      ojson item = {{"channel", channels[k]}, {"window_s", {t0, t1}}};
      try {
        const Eigen::VectorXd y = measure(sim, channels[k]);
        const Eigen::Index i0 = std::llround(t0 / sc.dt), i1 = std::llround(t1 / sc.dt);
        const Ringdown rd = ringdown_damping(y.segment(i0, i1 - i0 + 1), sc.dt, std::max(cfg.band_lo, 0.05),
                                             std::min(cfg.band_hi, 0.45 / sc.dt));
        item["frequency_hz"] = num(rd.frequency_hz);
        item["damping_pct"] = num(100.0 * rd.zeta);
        item["peaks"] = rd.peaks;
      } catch (const std::exception& e) {
        item["error"] = e.what();
      }
      rings.push_back(item);
    }
  }
  res["ringdown"] = rings;

  ojson series;
  series["time"] = sim.time;
  for (const auto& ch : channels) series[ch] = num_array(measure(sim, ch));
  res["series"] = series;
  r.json["result"] = res;

  r.files.emplace_back("channels.csv", result_csv(sim, channels));
  for (size_t k = 0; k < n_delta; ++k) {
    const Eigen::VectorXd y = measure(sim, channels[k]);
    std::ostringstream os;
    for (int i = 0; i < sim.samples(); ++i) os << fmt_num(sim.time[i]) << ' ' << fmt_num(y(i)) << '\n';
    r.files.emplace_back(sanitize(channels[k]) + ".dat", os.str());
  }
  if (sim.diverged) {
    r.exit_code = ExitCode::Divergence;
    r.summary.push_back("simulation diverged at t = " + fmt_num(sim.divergence_time) + " s");
  } else {
    r.summary.push_back("simulation completed: " + std::to_string(sim.samples()) + " samples");
  }
  for (const auto& e : sim.log) r.summary.push_back("  t = " + fmt_num(e.time) + " s: " + e.message);
  return r;
}

Report cmd_sweep(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  const ControllerChoice choice = choice_or(cfg, ControllerChoice::Kind::All);
  std::vector<double> fractions = cfg.fractions.empty() ? parse_fractions("0.9:1.1:9") : cfg.fractions;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  ojson config = base_config(cfg, choice);
  config["fractions"] = fractions;
  Report r = start_report(cfg, lc, config);

  std::optional<ControllerSet> ctrl;
  ojson design;
  if (choice.kind != ControllerChoice::Kind::None) ctrl = design_or_throw(cfg, choice, lc.c, &design);

  const int n = static_cast<int>(fractions.size());
  std::vector<ModalOutcome> base(n), robust(n);
  parallel_for(n, cfg.workers, [&](int i) {
    const PowerSystemCase c = scale_stress_all(lc.c, fractions[i]);
    base[i] = analyze_modes(c, nullptr, cfg.band_lo, cfg.band_hi);
    if (ctrl && base[i].converged) robust[i] = analyze_modes(c, &*ctrl, cfg.band_lo, cfg.band_hi);
  });

  ojson rows = ojson::array();
  std::ostringstream csv;
  csv << "fraction,converged,tie_flow_mw,zeta_baseline_pct,freq_baseline_hz,class_baseline,zeta_robust_pct,"
         "freq_robust_hz\n";
  std::vector<double> tie, zeta;
  bool robust_above = static_cast<bool>(ctrl);
  double robust_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    ojson row = {{"fraction", fractions[i]}, {"converged", base[i].converged}, {"status", base[i].status}};
    csv << fmt_num(fractions[i]) << ',' << (base[i].converged ? "true" : "false");
    if (!base[i].converged) {
      row["failure"] = base[i].failure;
      csv << ",,,,,,\n";
      rows.push_back(row);
      continue;
    }
    row["tie_flow_mw"] = num(base[i].tie_flow_mw);
    csv << ',' << fmt_num(base[i].tie_flow_mw);
    if (base[i].min_mode) {
      const Mode& m = *base[i].min_mode;
      row["zeta_baseline_pct"] = num(100.0 * m.damping_ratio);
      row["freq_baseline_hz"] = num(m.frequency_hz);
      row["class_baseline"] = mode_class_name(m.cls);
      csv << ',' << fmt_num(100.0 * m.damping_ratio) << ',' << fmt_num(m.frequency_hz) << ',' << mode_class_name(m.cls);
      tie.push_back(base[i].tie_flow_mw);
      zeta.push_back(m.damping_ratio);
    } else {
      csv << ",,,";
    }
    if (ctrl) {
      if (robust[i].converged && robust[i].min_mode) {
        const Mode& m = *robust[i].min_mode;
        row["zeta_robust_pct"] = num(100.0 * m.damping_ratio);
        row["freq_robust_hz"] = num(m.frequency_hz);
        csv << ',' << fmt_num(100.0 * m.damping_ratio) << ',' << fmt_num(m.frequency_hz);
        robust_min = std::min(robust_min, m.damping_ratio);
        if (!(m.damping_ratio >= 0.05)) robust_above = false;
      } else {
        csv << ",,";
        if (!robust[i].converged) robust_above = false;
      }
    } else {
      csv << ",,";
    }
    csv << '\n';
    rows.push_back(row);
  }
  ojson res;
  res["rows"] = rows;
  const double rho = spearman(tie, zeta);
  res["spearman_tie_vs_zeta_baseline"] = num(rho);
  if (ctrl) {
    res["design"] = design;
    res["robust_min_zeta_pct"] = num(100.0 * robust_min);
    res["robust_all_above_5pct"] = robust_above;
  }
  r.json["result"] = res;
  r.files.emplace_back("sweep.csv", csv.str());
  r.summary.push_back("sweep over " + std::to_string(n) + " points, Spearman(tie flow, baseline zeta) = " +
                      fmt_num(std::round(rho * 1e4) / 1e4));
  if (ctrl)
    r.summary.push_back("robust minimum zeta over sweep: " + fmt_num(std::round(robust_min * 1e5) / 1e3) + "%");
  return r;
}

Report cmd_scan_n1(const RunConfig& cfg) {
  const LoadedCase lc = load_checked(cfg);
  const ControllerChoice choice = choice_or(cfg, ControllerChoice::Kind::All);
  Report r = start_report(cfg, lc, base_config(cfg, choice));
  std::optional<ControllerSet> ctrl;
  ojson design;
  if (choice.kind != ControllerChoice::Kind::None) ctrl = design_or_throw(cfg, choice, lc.c, &design);

  std::vector<Branch> branches;
  for (const auto& b : lc.c.branches)
    if (b.in_service) branches.push_back(b);
  std::sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
    return std::tie(a.from, a.to, a.circuit) < std::tie(b.from, b.to, b.circuit);
  });
  const int n = static_cast<int>(branches.size());
  std::vector<ModalOutcome> base(n), robust(n);
  parallel_for(n, cfg.workers, [&](int i) {
    const PowerSystemCase c = apply_line_trip(lc.c, branches[i].from, branches[i].to, branches[i].circuit);
    base[i] = analyze_modes(c, nullptr, cfg.band_lo, cfg.band_hi);
    if (ctrl && base[i].converged) robust[i] = analyze_modes(c, &*ctrl, cfg.band_lo, cfg.band_hi);
  });

  ojson rows = ojson::array();
  std::ostringstream csv;
  csv << "from,to,circuit,converged,status,tie_flow_mw,zeta_baseline_pct,zeta_robust_pct,robust_better\n";
  int converged = 0, improved = 0;
  for (int i = 0; i < n; ++i) {
    const Branch& b = branches[i];
    ojson row = {{"from", b.from},
                 {"to", b.to},
                 {"circuit", b.circuit},
                 {"converged", base[i].converged},
                 {"status", base[i].status}};
    csv << b.from << ',' << b.to << ',' << b.circuit << ',' << (base[i].converged ? "true" : "false") << ','
        << base[i].status;
    if (!base[i].converged) {
      row["failure"] = base[i].failure;
      csv << ",,,,\n";
      rows.push_back(row);
      continue;
    }
    ++converged;
    row["tie_flow_mw"] = num(base[i].tie_flow_mw);
    csv << ',' << fmt_num(base[i].tie_flow_mw);
    const double zb = base[i].min_mode ? base[i].min_mode->damping_ratio : std::numeric_limits<double>::quiet_NaN();
    row["zeta_baseline_pct"] = num(100.0 * zb);
    csv << ',' << fmt_num(100.0 * zb);
    if (ctrl) {
      const double zr = robust[i].converged && robust[i].min_mode ? robust[i].min_mode->damping_ratio
                                                                   : std::numeric_limits<double>::quiet_NaN();
      const bool better = zr > zb;
      improved += better;
      row["zeta_robust_pct"] = num(100.0 * zr);
      row["robust_better"] = better;
      csv << ',' << fmt_num(100.0 * zr) << ',' << (better ? "true" : "false");
    } else {
      csv << ",,";
    }
    csv << '\n';
    rows.push_back(row);
  }
  ojson res;
  res["branches"] = n;
  res["converged"] = converged;
  if (ctrl) {
    res["robust_better"] = improved;
    res["design"] = design;
  }
  res["rows"] = rows;
  r.json["result"] = res;
  r.files.emplace_back("scan_n1.csv", csv.str());
  r.summary.push_back("N-1 scan: " + std::to_string(n) + " branches, " + std::to_string(converged) + " converged" +
                      (ctrl ? ", robust better in " + std::to_string(improved) : std::string()));
  return r;
}

Report run_command(const RunConfig& cfg) {
  auto fail = [&](ExitCode code, const std::string& kind, const std::string& msg) {
    Report r;
    r.json["tool"] = "govdamp";
    r.json["metadata"] = {{"version", kVersion}};
    r.json["command"] = cfg.command;
    r.json["error"] = {{"kind", kind}, {"message", msg}};
    r.exit_code = code;
    r.summary.push_back("error: " + msg);
    return r;
  };
  try {
    if (cfg.command == "pf") return cmd_pf(cfg);
    if (cfg.command == "modal") return cmd_modal(cfg);
    if (cfg.command == "design") return cmd_design(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "sweep") return cmd_sweep(cfg);
    if (cfg.command == "scan-n1") return cmd_scan_n1(cfg);
    if (cfg.command == "export-sdpa") return cmd_export_sdpa(cfg);
    return fail(ExitCode::InputError, "input", "unknown command '" + cfg.command + "'");
  } catch (const InputError& e) {
    return fail(ExitCode::InputError, "input", e.what());
  } catch (const NumericalError& e) {
    return fail(ExitCode::NumericalFailure, "numerical", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ExitCode::InputError, "input", e.what());
  }
}

void write_report(const Report& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw InputError("cannot write " + (out_dir / name).string());
    f << text;
  };
  put("report.json", r.json.dump(2) + "\n");
  for (const auto& [name, text] : r.files) put(name, text);
}

}  // namespace govdamp
