#include "govdamp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"
#include "govdamp/powerflow.hpp"
#include "json.hpp"

namespace govdamp {

const char* event_action_name(EventAction a) {
  switch (a) {
    case EventAction::TripLine: return "trip_line";
    case EventAction::StepLoad: return "step_load";
    case EventAction::ActivateControllers: return "activate_controllers";
    case EventAction::DeactivateControllers: return "deactivate_controllers";
  }
  return "trip_line";
}

namespace {

using json = nlohmann::json;

double get_number(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(path + ": missing '" + key + "'");
  if (!it->is_number()) throw InputError(path + "." + key + ": expected a number");
  return it->get<double>();
}

int get_int(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(path + ": missing '" + key + "'");
  if (!it->is_number_integer()) throw InputError(path + "." + key + ": expected an integer");
  return it->get<int>();
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw InputError(path + ": unknown key '" + k + "'");
}

}  // namespace

Scenario parse_scenario(std::string_view text, double base_mva) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("scenario: syntax error: ") + e.what());
  }
  if (!root.is_object()) throw InputError("scenario: top level must be an object");
  only_keys(root, {"duration", "dt", "events", "stress_fraction"}, "scenario");
  Scenario s;
  s.duration = get_number(root, "duration", "scenario");
  if (root.contains("dt")) s.dt = get_number(root, "dt", "scenario");
  if (root.contains("stress_fraction")) {
    s.stress_fraction = get_number(root, "stress_fraction", "scenario");
    if (!(*s.stress_fraction > 0.0)) throw InputError("scenario.stress_fraction must be positive");
  }
  if (!(s.dt > 0.0)) throw InputError("scenario.dt must be positive");
  if (!(s.duration > 0.0)) throw InputError("scenario.duration must be positive");
  if (root.contains("events")) {
    if (!root["events"].is_array()) throw InputError("scenario.events: expected an array");
    int i = 0;
    for (const auto& e : root["events"]) {
      const std::string path = "scenario.events[" + std::to_string(i++) + "]";
      if (!e.is_object()) throw InputError(path + ": expected an object");
      ScenarioEvent ev;
      ev.time = get_number(e, "time", path);
      if (!e.contains("action") || !e["action"].is_string()) throw InputError(path + ": missing 'action'");
      const std::string action = e["action"].get<std::string>();
      if (action == "trip_line") {
        only_keys(e, {"time", "action", "from", "to", "circuit"}, path);
        ev.action = EventAction::TripLine;
        ev.from = get_int(e, "from", path);
        ev.to = get_int(e, "to", path);
        ev.circuit = e.contains("circuit") ? get_int(e, "circuit", path) : 1;
      } else if (action == "step_load") {
        only_keys(e, {"time", "action", "bus", "dp_mw", "dq_mvar"}, path);
        ev.action = EventAction::StepLoad;
        ev.bus = get_int(e, "bus", path);
        ev.dp = (e.contains("dp_mw") ? get_number(e, "dp_mw", path) : 0.0) / base_mva;
        ev.dq = (e.contains("dq_mvar") ? get_number(e, "dq_mvar", path) : 0.0) / base_mva;
      } else if (action == "activate_controllers" || action == "deactivate_controllers") {
        only_keys(e, {"time", "action", "machines"}, path);
        ev.action = action[0] == 'a' ? EventAction::ActivateControllers : EventAction::DeactivateControllers;
        if (e.contains("machines")) {
          const auto& m = e["machines"];
          if (m.is_string()) {
            if (m.get<std::string>() != "all") throw InputError(path + ".machines: expected \"all\" or a list of ids");
          } else if (m.is_array()) {
            for (const auto& id : m) {
              if (!id.is_number_integer()) throw InputError(path + ".machines: ids must be integers");
              ev.machines.push_back(id.get<int>());
            }
            if (ev.machines.empty()) throw InputError(path + ".machines: empty list");
          } else {
            throw InputError(path + ".machines: expected \"all\" or a list of ids");
          }
        }
      } else {
        throw InputError(path + ": unknown action '" + action + "'");
      }
      if (!(ev.time >= 0.0 && ev.time <= s.duration))
        throw InputError(path + ": event time outside [0, duration]");
      s.events.push_back(ev);
    }
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.time < b.time; });
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, double base_mva) {
  return parse_scenario(read_text_file(path), base_mva);
}

// ---------------------------------------------------------------------------

namespace {

class Integrator {
 public:
  explicit Integrator(const DynamicModel& m) : m_(m) {}

  void step(Eigen::VectorXd& x, double h) {
    m_.rhs(x, k1_);
    tmp_ = x + 0.5 * h * k1_;
    m_.rhs(tmp_, k2_);
    tmp_ = x + 0.5 * h * k2_;
    m_.rhs(tmp_, k3_);
    tmp_ = x + h * k3_;
    m_.rhs(tmp_, k4_);
    x += h / 6.0 * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    // valve limit
    for (const auto& l : m_.layout().machines)
      if (l.xe >= 0) x(l.xe) = std::clamp(x(l.xe), 0.0, 1.0);
  }

 private:
  const DynamicModel& m_;
  Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace

SimulationResult simulate(const PowerSystemCase& c_in, const ControllerSet& controllers, const Scenario& sc,
                          const SimulationOptions& opt) {
  if (!(sc.dt > 0.0) || !(sc.duration > 0.0)) throw InputError("scenario needs positive dt and duration");
  const double ratio = sc.duration / sc.dt;
  const long long nsteps = std::llround(ratio);
  if (nsteps < 1 || std::abs(ratio - static_cast<double>(nsteps)) > 1e-9 * ratio)
    throw InputError("scenario duration must be an integer multiple of dt");
  for (const auto& e : sc.events)
    if (!(e.time >= 0.0 && e.time <= sc.duration)) throw InputError("event time outside [0, duration]");

  PowerSystemCase c = sc.stress_fraction ? scale_stress_all(c_in, *sc.stress_fraction) : c_in;
  const int n = static_cast<int>(c.machines.size());
  if (controllers.gains.rows() != n || controllers.gains.cols() != 5 ||
      static_cast<int>(controllers.designed.size()) != n)
    throw InputError("controller set does not match the case machines");

  const PowerFlowSolution pf = solve_power_flow(c);
  const Equilibrium eq = initialize_from_power_flow(c, pf);
  Eigen::VectorXcd y_load = load_admittances(c, pf);
  DynamicModel model(c, reduce_network(build_ybus(c), c, y_load), eq.setpoints);
  model.set_controllers(controllers);

  SimulationResult r;
  r.layout = model.layout();
  r.state_names = r.layout.names;
  for (const auto& m : c.machines) r.machine_ids.push_back(m.id);
  r.initial_equilibrium = eq.x;
  const Eigen::Index ns = static_cast<Eigen::Index>(nsteps) + 1;
  r.time.resize(ns);
  for (Eigen::Index k = 0; k < ns; ++k) r.time[k] = static_cast<double>(k) * sc.dt;
  r.states.setConstant(ns, r.layout.size, std::numeric_limits<double>::quiet_NaN());
  r.pe.setConstant(ns, n, std::numeric_limits<double>::quiet_NaN());
  r.pm = r.pe;
  r.u = r.pe;
  r.tie_mw.setConstant(ns, std::numeric_limits<double>::quiet_NaN());

  Eigen::VectorXd x = eq.x;
  if (opt.initial_offset.size()) {
    if (opt.initial_offset.size() != x.size()) throw InputError("initial offset has the wrong dimension");
    x += opt.initial_offset;
    for (const auto& l : r.layout.machines)
      if (l.xe >= 0) x(l.xe) = std::clamp(x(l.xe), 0.0, 1.0);
  }
  Eigen::VectorXd snapshot = eq.x;  // last known equilibrium
  std::vector<bool> emf_logged(n, false);

  auto record = [&](Eigen::Index k) {
    r.states.row(k) = x.transpose();
    const MachineOutputs o = model.outputs(x);
    r.pe.row(k) = o.pe.transpose();
    r.u.row(k) = o.u.transpose();
    for (int i = 0; i < n; ++i) {
      const auto& l = r.layout.machines[i];
      r.pm(k, i) = l.pm >= 0 ? x(l.pm) : eq.setpoints.pm_fixed(i);
      if (!emf_logged[i] && o.emf(i) > c.machines[i].e_max) {
        emf_logged[i] = true;
        r.log.push_back({r.time[k], "machine " + std::to_string(c.machines[i].id) + " |E'| = " + fmt_num(o.emf(i)) +
                                        " exceeds e_max " + fmt_num(c.machines[i].e_max)});
      }
    }
    r.tie_mw(k) = tie_line_flow(c, model.bus_voltages(x));
  };

  auto settled = [&]() { return model.rhs(x).lpNorm<Eigen::Infinity>() < opt.settle_tol; };

  auto targets = [&](const ScenarioEvent& e) {
    std::vector<int> out;
    if (e.machines.empty()) {
      for (int i = 0; i < n; ++i)
        if (controllers.designed[i]) out.push_back(i);
    } else {
      for (int id : e.machines) {
        const int i = c.machine_index(id);
        if (!controllers.designed[i]) throw InputError("machine " + std::to_string(id) + " has no designed controller");
        out.push_back(i);
      }
    }
    if (out.empty())
      throw InputError(std::string(event_action_name(e.action)) + " at t = " + fmt_num(e.time) +
                       " s: no designed controllers to switch");
    return out;
  };

  auto apply = [&](const ScenarioEvent& e, double t) {
    switch (e.action) {
      case EventAction::TripLine:
      case EventAction::StepLoad: {
        if (settled()) snapshot = x;
        std::string what;
        if (e.action == EventAction::TripLine) {
          c = apply_line_trip(c, e.from, e.to, e.circuit);
          if (!is_connected(c))
            throw IslandedNetwork("tripping line " + std::to_string(e.from) + "-" + std::to_string(e.to) +
                                  " at t = " + fmt_num(t) + " s islands the network");
          what = "tripped line " + std::to_string(e.from) + "-" + std::to_string(e.to) + " circuit " +
                 std::to_string(e.circuit);
        } else {
          const int b = c.bus_index(e.bus);
          const Eigen::VectorXcd v = model.bus_voltages(x);
          y_load(b) += Complex(e.dp, -e.dq) / std::norm(v(b));
          what = "load step at bus " + std::to_string(e.bus) + ": " + fmt_num(e.dp * c.base_mva) + " MW, " +
                 fmt_num(e.dq * c.base_mva) + " MVAr";
        }
        model.set_network(reduce_network(build_ybus(c), c, y_load));
        r.log.push_back({t, what});
        break;
      }
      case EventAction::ActivateControllers: {
        const bool fresh = settled();
        const Eigen::VectorXd& xd = fresh ? x : snapshot;
        if (fresh) snapshot = x;
        std::string ids;
        for (int i : targets(e)) {
          model.set_reference(i, model.design_state(xd, i));
          model.set_active(i, true);
          ids += (ids.empty() ? "" : ",") + std::to_string(c.machines[i].id);
        }
        r.log.push_back({t, "controllers activated on [" + ids + "], reference = " +
                                (fresh ? "current settled state" : "last pre-disturbance equilibrium")});
        break;
      }
      case EventAction::DeactivateControllers: {
        std::string ids;
        for (int i : targets(e)) {
          model.set_active(i, false);
          ids += (ids.empty() ? "" : ",") + std::to_string(c.machines[i].id);
        }
        r.log.push_back({t, "controllers deactivated on [" + ids + "]"});
        break;
      }
    }
  };

  Integrator rk(model);
  size_t ev = 0;
  const double tiny = 1e-9 * sc.dt;
  record(0);
  for (long long step = 0; step < nsteps; ++step) {
    const double t0 = r.time[step], t1 = r.time[step + 1];
    while (ev < sc.events.size() && sc.events[ev].time <= t0 + tiny) apply(sc.events[ev++], t0);
    double t = t0;
    // events strictly inside the step split it
    while (ev < sc.events.size() && sc.events[ev].time < t1 - tiny) {
      rk.step(x, sc.events[ev].time - t);
      t = sc.events[ev].time;
      while (ev < sc.events.size() && sc.events[ev].time <= t + tiny) apply(sc.events[ev++], t);
    }
    rk.step(x, t1 - t);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > opt.divergence_limit) {
      r.diverged = true;
      r.divergence_time = t1;
      r.log.push_back({t1, "state diverged"});
      return r;
    }
    record(step + 1);
  }
  while (ev < sc.events.size()) apply(sc.events[ev++], sc.duration);
  return r;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd measure(const SimulationResult& r, const std::string& channel) {
  if (channel == "tie") return r.tie_mw;
  const auto colon = channel.find(':');
  if (colon == std::string::npos) throw InputError("unknown channel '" + channel + "'");
  const std::string kind = channel.substr(0, colon);
  const std::string arg = channel.substr(colon + 1);
  auto machine = [&](const std::string& s) {
    int id;
    try {
      size_t used = 0;
      id = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw InputError("channel '" + channel + "': bad machine id '" + s + "'");
    }
    auto it = std::find(r.machine_ids.begin(), r.machine_ids.end(), id);
    if (it == r.machine_ids.end()) throw InputError("channel '" + channel + "': unknown machine " + s);
    return static_cast<int>(it - r.machine_ids.begin());
  };
  auto state = [&](int i, int MachineLayout::*field) -> Eigen::VectorXd {
    const int idx = r.layout.machines[i].*field;
    if (idx < 0) throw InputError("channel '" + channel + "': machine has no such state");
    return r.states.col(idx);
  };
  if (kind == "delta") {
    const auto dash = arg.find('-', 1);
    if (dash != std::string::npos) {
      const int i = machine(arg.substr(0, dash)), j = machine(arg.substr(dash + 1));
      return state(i, &MachineLayout::delta) - state(j, &MachineLayout::delta);
    }
    return state(machine(arg), &MachineLayout::delta);
  }
  const int i = machine(arg);
  if (kind == "omega") return state(i, &MachineLayout::omega);
  if (kind == "eq") return state(i, &MachineLayout::eq);
  if (kind == "ed") return state(i, &MachineLayout::ed);
  if (kind == "xe") return state(i, &MachineLayout::xe);
  if (kind == "xm") return state(i, &MachineLayout::xm);
  if (kind == "efd") return state(i, &MachineLayout::efd);
  if (kind == "pm") return r.pm.col(i);
  if (kind == "pe") return r.pe.col(i);
  if (kind == "u") return r.u.col(i);
  throw InputError("unknown channel '" + channel + "'");
}

std::string result_csv(const SimulationResult& r, const std::vector<std::string>& channels) {
  std::vector<Eigen::VectorXd> cols;
  for (const auto& ch : channels) cols.push_back(measure(r, ch));
  std::ostringstream os;
  os << "time";
  for (const auto& ch : channels) os << ',' << ch;
  os << '\n';
  for (int k = 0; k < r.samples(); ++k) {
    os << fmt_num(r.time[k]);
    for (const auto& col : cols) os << ',' << fmt_num(col(k));
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  void run(std::vector<double>& y) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double out = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
};

// Second-order Butterworth sections by the bilinear transform with prewarping.
Biquad butter2(double fc, double fs, bool highpass) {
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  Biquad q;
  if (highpass) {
    q.b0 = norm;
    q.b1 = -2.0 * norm;
  } else {
    q.b0 = k * k * norm;
    q.b1 = 2.0 * q.b0;
  }
  q.b2 = q.b0;
  q.a1 = 2.0 * (k * k - 1.0) * norm;
  q.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  return q;
}

}  // namespace

Ringdown ringdown_damping(const Eigen::VectorXd& series, double dt, double f_lo, double f_hi) {
  if (!(dt > 0.0) || !(f_lo > 0.0) || !(f_hi > f_lo)) throw InputError("ringdown: invalid dt or band");
  const double fs = 1.0 / dt;
  if (f_hi >= 0.5 * fs) throw InputError("ringdown: band above Nyquist");
  const Eigen::Index n = series.size();
  if (n < 8 || !series.allFinite()) throw NumericalError("ringdown: series too short or not finite");

  // odd reflection padding, then forward-backward filtering
  const Eigen::Index pad = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(3.0 * fs / f_lo));
  std::vector<double> y;
  y.reserve(n + 2 * pad);
  const double mean = series.mean();
  for (Eigen::Index k = pad; k >= 1; --k) y.push_back(2.0 * (series(0) - mean) - (series(k) - mean));
  for (Eigen::Index k = 0; k < n; ++k) y.push_back(series(k) - mean);
  for (Eigen::Index k = 1; k <= pad; ++k) y.push_back(2.0 * (series(n - 1) - mean) - (series(n - 1 - k) - mean));
  const Biquad hp = butter2(f_lo, fs, true), lp = butter2(f_hi, fs, false);
  for (int pass = 0; pass < 2; ++pass) {
    hp.run(y);
    lp.run(y);
    std::reverse(y.begin(), y.end());
  }

  std::vector<double> pt, pv;
  double biggest = 0.0;
  for (Eigen::Index k = pad + 1; k + 1 < pad + n; ++k) {
    const double a = y[k - 1], b = y[k], c = y[k + 1];
    if (b > 0.0 && b > a && b >= c) {
      const double den = a - 2.0 * b + c;
      const double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
      pt.push_back((static_cast<double>(k - pad) + off) * dt);
      pv.push_back(b - 0.25 * (a - c) * off);
      biggest = std::max(biggest, pv.back());
    }
  }
  // discard peaks buried in round-off
  std::vector<double> t, lv;
  for (size_t k = 0; k < pt.size(); ++k)
    if (pv[k] > 1e-6 * biggest) {
      t.push_back(pt[k]);
      lv.push_back(std::log(pv[k]));
    }
  if (t.size() < 3) throw NumericalError("ringdown: fewer than 3 peaks found");

  const double m = static_cast<double>(t.size());
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    st += t[k];
    sl += lv[k];
    stt += t[k] * t[k];
    stl += t[k] * lv[k];
  }
  const double slope = (m * stl - st * sl) / (m * stt - st * st);
  const double period = (t.back() - t.front()) / (m - 1.0);
  const double wd = 2.0 * std::numbers::pi / period;
  const double sigma = -slope;
  Ringdown out;
  out.frequency_hz = 1.0 / period;
  out.zeta = sigma / std::sqrt(sigma * sigma + wd * wd);
  out.peaks = static_cast<int>(t.size());
  return out;
}

}  // namespace govdamp
