#include "govdamp/case_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "govdamp/errors.hpp"
#include "json.hpp"

namespace govdamp {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double PowerSystemCase::omega0() const { return 2.0 * std::numbers::pi * base_frequency_hz; }

int PowerSystemCase::bus_index(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  throw InputError("unknown bus id " + std::to_string(bus_id));
}

int PowerSystemCase::machine_index(int machine_id) const {
  for (size_t i = 0; i < machines.size(); ++i)
    if (machines[i].id == machine_id) return static_cast<int>(i);
  throw InputError("unknown machine id " + std::to_string(machine_id));
}

template <class T>
static const T* find_by_machine(const std::vector<T>& v, int machine_id) {
  for (const auto& e : v)
    if (e.machine == machine_id) return &e;
  return nullptr;
}

const GovernorParams* PowerSystemCase::governor_for(int id) const { return find_by_machine(governors, id); }
const ExciterParams* PowerSystemCase::exciter_for(int id) const { return find_by_machine(exciters, id); }
const PssParams* PowerSystemCase::pss_for(int id) const { return find_by_machine(psss, id); }

int PowerSystemCase::area_of_machine(int mi) const { return buses[bus_index(machines[mi].bus)].area; }

std::optional<double> PowerSystemCase::scheduled_voltage(int bi) const {
  if (buses[bi].voltage_setpoint) return buses[bi].voltage_setpoint;
  for (const auto& m : machines)
    if (m.bus == buses[bi].id) return m.v_sched;
  return std::nullopt;
}

int PowerSystemCase::in_service_branch_count() const {
  return static_cast<int>(std::count_if(branches.begin(), branches.end(),
                                        [](const Branch& b) { return b.in_service; }));
}

// ---------------------------------------------------------------------------
// parsing

namespace {

// Wraps one JSON object; tracks the field path and rejects unknown keys.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(path_ + ": expected an object");
  }

  double number(const char* key) {
    const json& v = at(key);
    if (!v.is_number()) throw InputError(path_ + "." + key + ": expected a number");
    return v.get<double>();
  }
  double number_or(const char* key, double fallback) { return has(key) ? number(key) : fallback; }
  std::optional<double> optional_number(const char* key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  int integer(const char* key) {
    const json& v = at(key);
    if (!v.is_number_integer()) throw InputError(path_ + "." + key + ": expected an integer");
    return v.get<int>();
  }
  int integer_or(const char* key, int fallback) { return has(key) ? integer(key) : fallback; }
  std::string string(const char* key) {
    const json& v = at(key);
    if (!v.is_string()) throw InputError(path_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }
  bool boolean_or(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw InputError(path_ + "." + key + ": expected true/false");
    return v.get<bool>();
  }
  const json& array(const char* key) {
    const json& v = at(key);
    if (!v.is_array()) throw InputError(path_ + "." + key + ": expected an array");
    return v;
  }
  bool has(const char* key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw InputError(path_ + ": unknown key '" + it.key() + "'");
  }
  const std::string& path() const { return path_; }

 private:
  const json& at(const char* key) {
    if (!j_.contains(key)) throw InputError(path_ + ": missing required key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string item_path(const char* section, size_t i) {
  return std::string(section) + "[" + std::to_string(i) + "]";
}

BusKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "slack") return BusKind::Slack;
  if (s == "pv") return BusKind::PV;
  if (s == "pq") return BusKind::PQ;
  throw InputError(path + ".kind: expected slack|pv|pq, got '" + s + "'");
}

const char* kind_name(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "pv";
    case BusKind::PQ: return "pq";
  }
  return "pq";
}

template <class F>
void each(Fields& top, const char* section, bool required, F&& f) {
  if (!required && !top.has(section)) return;
  const json& arr = top.array(section);
  for (size_t i = 0; i < arr.size(); ++i) {
    Fields e(arr[i], item_path(section, i));
    f(e);
    e.finish();
  }
}

}  // namespace

PowerSystemCase parse_case(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    size_t line = 1 + static_cast<size_t>(std::count(text.begin(),
                                                     text.begin() + std::min(byte, text.size()), '\n'));
    throw InputError("case syntax error at line " + std::to_string(line) + ": " + e.what());
  }

  PowerSystemCase c;
  Fields top(root, "case");
  c.base_mva = top.number("base_mva");
  c.base_frequency_hz = top.number("base_frequency_hz");
  if (c.base_mva <= 0) throw InputError("case.base_mva: must be positive");
  const double base = c.base_mva;

  each(top, "buses", true, [&](Fields& f) {
    Bus b;
    b.id = f.integer("id");
    b.kind = parse_kind(f.string("kind"), f.path());
    b.voltage_setpoint = f.optional_number("voltage_setpoint");
    b.shunt_susceptance = f.number_or("shunt_susceptance", 0.0);
    b.area = f.integer_or("area", 1);
    c.buses.push_back(b);
  });
  each(top, "branches", true, [&](Fields& f) {
    Branch br;
    br.from = f.integer("from");
    br.to = f.integer("to");
    br.circuit = f.integer("circuit");
    br.r = f.number("r");
    br.x = f.number("x");
    br.b = f.number("b");
    br.in_service = f.boolean_or("in_service", true);
    c.branches.push_back(br);
  });
  each(top, "machines", true, [&](Fields& f) {
    Machine m;
    m.id = f.integer("id");
    m.bus = f.integer("bus");
    m.mva = f.number("mva");
    m.h = f.number("h");
    m.d = f.number("d");
    m.xd = f.number("xd");
    m.xq = f.number("xq");
    m.xdp = f.number("xdp");
    m.xqp = f.number("xqp");
    m.td0p = f.number("td0p");
    m.tq0p = f.number("tq0p");
    m.e_max = f.number("e_max");
    m.p_sched = f.number("p_sched_mw") / base;
    m.v_sched = f.number("v_sched");
    c.machines.push_back(m);
  });
  each(top, "governors", false, [&](Fields& f) {
    GovernorParams g;
    g.machine = f.integer("machine");
    g.ke = f.number("ke");
    g.te = f.number("te");
    g.t3 = f.number("t3");
    g.t4 = f.number("t4");
    g.t5 = f.number("t5");
    g.tm = f.number("tm");
    g.r = f.number("r");
    c.governors.push_back(g);
  });
  each(top, "exciters", false, [&](Fields& f) {
    ExciterParams e;
    e.machine = f.integer("machine");
    e.ka = f.number("ka");
    e.ta = f.number("ta");
    e.efd_min = f.number("efd_min");
    e.efd_max = f.number("efd_max");
    c.exciters.push_back(e);
  });
  each(top, "psss", false, [&](Fields& f) {
    PssParams p;
    p.machine = f.integer("machine");
    p.ks = f.number("ks");
    p.tw = f.number("tw");
    p.t1 = f.number("t1");
    p.t2 = f.number("t2");
    p.t3 = f.number("t3");
    p.t4 = f.number("t4");
    p.v_min = f.number("v_min");
    p.v_max = f.number("v_max");
    c.psss.push_back(p);
  });
  each(top, "loads", true, [&](Fields& f) {
    Load l;
    l.bus = f.integer("bus");
    l.p = f.number("p_mw") / base;
    l.q = f.number("q_mvar") / base;
    c.loads.push_back(l);
  });
  top.finish();

  // Reference resolution: duplicates and dangling ids are hard errors.
  std::set<int> bus_ids, machine_ids;
  for (size_t i = 0; i < c.buses.size(); ++i)
    if (!bus_ids.insert(c.buses[i].id).second)
      throw InputError(item_path("buses", i) + ": duplicate bus id " + std::to_string(c.buses[i].id));
  for (size_t i = 0; i < c.machines.size(); ++i)
    if (!machine_ids.insert(c.machines[i].id).second)
      throw InputError(item_path("machines", i) + ": duplicate machine id " +
                       std::to_string(c.machines[i].id));
  auto need_bus = [&](int id, const std::string& where) {
    if (!bus_ids.count(id))
      throw InputError(where + ": dangling reference to bus " + std::to_string(id));
  };
  auto need_machine = [&](int id, const std::string& where) {
    if (!machine_ids.count(id))
      throw InputError(where + ": dangling reference to machine " + std::to_string(id));
  };
  std::set<std::tuple<int, int, int>> circuits;
  for (size_t i = 0; i < c.branches.size(); ++i) {
    const auto& br = c.branches[i];
    need_bus(br.from, item_path("branches", i) + ".from");
    need_bus(br.to, item_path("branches", i) + ".to");
    auto key = std::make_tuple(std::min(br.from, br.to), std::max(br.from, br.to), br.circuit);
    if (!circuits.insert(key).second)
      throw InputError(item_path("branches", i) + ": duplicate circuit " + std::to_string(br.circuit) +
                       " between buses " + std::to_string(br.from) + " and " + std::to_string(br.to));
  }
  for (size_t i = 0; i < c.machines.size(); ++i) need_bus(c.machines[i].bus, item_path("machines", i) + ".bus");
  for (size_t i = 0; i < c.loads.size(); ++i) need_bus(c.loads[i].bus, item_path("loads", i) + ".bus");
  auto need_unique_machine = [&](const char* section, auto& v) {
    std::set<int> seen;
    for (size_t i = 0; i < v.size(); ++i) {
      need_machine(v[i].machine, item_path(section, i) + ".machine");
      if (!seen.insert(v[i].machine).second)
        throw InputError(item_path(section, i) + ": duplicate entry for machine " +
                         std::to_string(v[i].machine));
    }
  };
  need_unique_machine("governors", c.governors);
  need_unique_machine("exciters", c.exciters);
  need_unique_machine("psss", c.psss);
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PowerSystemCase load_case(const std::filesystem::path& path) { return parse_case(read_text_file(path)); }

std::string render_case(const PowerSystemCase& c) {
  const double base = c.base_mva;
  ordered_json root;
  root["base_mva"] = c.base_mva;
  root["base_frequency_hz"] = c.base_frequency_hz;
  root["buses"] = ordered_json::array();
  for (const auto& b : c.buses) {
    ordered_json e;
    e["id"] = b.id;
    e["kind"] = kind_name(b.kind);
    if (b.voltage_setpoint) e["voltage_setpoint"] = *b.voltage_setpoint;
    e["shunt_susceptance"] = b.shunt_susceptance;
    e["area"] = b.area;
    root["buses"].push_back(e);
  }
  root["branches"] = ordered_json::array();
  for (const auto& br : c.branches) {
    ordered_json e;
    e["from"] = br.from;
    e["to"] = br.to;
    e["circuit"] = br.circuit;
    e["r"] = br.r;
    e["x"] = br.x;
    e["b"] = br.b;
    e["in_service"] = br.in_service;
    root["branches"].push_back(e);
  }
  root["machines"] = ordered_json::array();
  for (const auto& m : c.machines) {
    ordered_json e;
    e["id"] = m.id;
    e["bus"] = m.bus;
    e["mva"] = m.mva;
    e["h"] = m.h;
    e["d"] = m.d;
    e["xd"] = m.xd;
    e["xq"] = m.xq;
    e["xdp"] = m.xdp;
    e["xqp"] = m.xqp;
    e["td0p"] = m.td0p;
    e["tq0p"] = m.tq0p;
    e["e_max"] = m.e_max;
    e["p_sched_mw"] = m.p_sched * base;
    e["v_sched"] = m.v_sched;
    root["machines"].push_back(e);
  }
  root["governors"] = ordered_json::array();
  for (const auto& g : c.governors)
    root["governors"].push_back({{"machine", g.machine}, {"ke", g.ke}, {"te", g.te}, {"t3", g.t3},
                                 {"t4", g.t4}, {"t5", g.t5}, {"tm", g.tm}, {"r", g.r}});
  root["exciters"] = ordered_json::array();
  for (const auto& e : c.exciters)
    root["exciters"].push_back({{"machine", e.machine}, {"ka", e.ka}, {"ta", e.ta},
                                {"efd_min", e.efd_min}, {"efd_max", e.efd_max}});
  root["psss"] = ordered_json::array();
  for (const auto& p : c.psss)
    root["psss"].push_back({{"machine", p.machine}, {"ks", p.ks}, {"tw", p.tw}, {"t1", p.t1},
                            {"t2", p.t2}, {"t3", p.t3}, {"t4", p.t4}, {"v_min", p.v_min},
                            {"v_max", p.v_max}});
  root["loads"] = ordered_json::array();
  for (const auto& l : c.loads)
    root["loads"].push_back({{"bus", l.bus}, {"p_mw", l.p * base}, {"q_mvar", l.q * base}});
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// validation

bool is_connected(const PowerSystemCase& c) {
  const size_t n = c.buses.size();
  if (n == 0) return true;
  std::map<int, size_t> idx;
  for (size_t i = 0; i < n; ++i) idx[c.buses[i].id] = i;
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& br : c.branches) {
    if (!br.in_service || !idx.count(br.from) || !idx.count(br.to)) continue;
    parent[find(idx[br.from])] = find(idx[br.to]);
  }
  const size_t root = find(0);
  for (size_t i = 1; i < n; ++i)
    if (find(i) != root) return false;
  return true;
}

std::vector<std::string> validate_case(const PowerSystemCase& c) {
  std::vector<std::string> v;
  auto num = [](double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  };
  if (!(c.base_mva > 0)) v.push_back("base_mva must be positive");
  if (!(c.base_frequency_hz > 0)) v.push_back("base_frequency_hz must be positive");

  std::set<int> bus_ids, machine_ids;
  std::vector<int> slacks;
  for (const auto& b : c.buses) {
    if (!bus_ids.insert(b.id).second) v.push_back("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::Slack) slacks.push_back(b.id);
  }
  if (slacks.size() != 1) {
    std::string names;
    for (int id : slacks) names += (names.empty() ? "" : ", ") + std::to_string(id);
    v.push_back("expected exactly one slack bus, found " + std::to_string(slacks.size()) +
                (names.empty() ? "" : " (buses " + names + ")"));
  }
  for (const auto& br : c.branches) {
    std::string tag = "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " circuit " +
                      std::to_string(br.circuit);
    if (!bus_ids.count(br.from) || !bus_ids.count(br.to)) v.push_back(tag + ": unknown bus");
    if (br.from == br.to) v.push_back(tag + ": from and to bus are equal");
    if (br.x == 0.0) v.push_back(tag + ": zero reactance");
  }
  for (const auto& m : c.machines) {
    std::string tag = "machine " + std::to_string(m.id);
    if (!machine_ids.insert(m.id).second) v.push_back("duplicate machine id " + std::to_string(m.id));
    if (!bus_ids.count(m.bus)) {
      v.push_back(tag + ": unknown bus " + std::to_string(m.bus));
    } else {
      const Bus& b = c.buses[c.bus_index(m.bus)];
      if (b.kind == BusKind::PQ) v.push_back(tag + ": attached to PQ bus " + std::to_string(m.bus));
    }
    if (!(m.mva > 0)) v.push_back(tag + ": rating must be positive");
    if (!(m.h > 0)) v.push_back(tag + ": inertia H must be positive");
    if (m.d < 0) v.push_back(tag + ": damping D must be non-negative");
    if (!(m.xdp > 0) || m.xd < m.xdp) v.push_back(tag + ": requires xd >= xd' > 0");
    if (!(m.xqp > 0) || m.xq < m.xqp) v.push_back(tag + ": requires xq >= xq' > 0");
    if (!(m.td0p > 0)) v.push_back(tag + ": Td0' must be positive");
    if (!(m.tq0p > 0)) v.push_back(tag + ": Tq0' must be positive");
    if (!(m.e_max >= 1.0)) v.push_back(tag + ": E_max must be >= 1 (got " + num(m.e_max) + ")");
  }
  for (const auto& g : c.governors) {
    std::string tag = "governor of machine " + std::to_string(g.machine);
    if (!machine_ids.count(g.machine)) v.push_back(tag + ": unknown machine");
    if (!(g.te > 0 && g.t3 > 0 && g.t4 > 0 && g.t5 > 0 && g.tm > 0))
      v.push_back(tag + ": time constants must be positive");
    if (!(g.r > 0)) v.push_back(tag + ": droop R must be positive (got " + num(g.r) + ")");
  }
  for (const auto& e : c.exciters) {
    std::string tag = "exciter of machine " + std::to_string(e.machine);
    if (!machine_ids.count(e.machine)) v.push_back(tag + ": unknown machine");
    if (!(e.ta > 0)) v.push_back(tag + ": Ta must be positive");
    if (!(e.efd_min < e.efd_max)) v.push_back(tag + ": limits must satisfy efd_min < efd_max");
  }
  for (const auto& p : c.psss) {
    std::string tag = "pss of machine " + std::to_string(p.machine);
    if (!machine_ids.count(p.machine)) v.push_back(tag + ": unknown machine");
    if (!(p.tw > 0)) v.push_back(tag + ": Tw must be positive");
    if (!(p.t2 > 0 && p.t4 > 0)) v.push_back(tag + ": lag time constants must be positive");
    if (!(p.v_min < p.v_max)) v.push_back(tag + ": limits must satisfy v_min < v_max");
    if (!c.exciter_for(p.machine)) v.push_back(tag + ": machine has no exciter");
  }
  for (const auto& l : c.loads)
    if (!bus_ids.count(l.bus)) v.push_back("load at unknown bus " + std::to_string(l.bus));
  for (size_t i = 0; i < c.buses.size(); ++i)
    if (c.buses[i].kind != BusKind::PQ && !c.scheduled_voltage(static_cast<int>(i)))
      v.push_back("bus " + std::to_string(c.buses[i].id) + ": no voltage setpoint");
  if (!is_connected(c)) v.push_back("network is not connected over in-service branches");
  return v;
}

// ---------------------------------------------------------------------------
// transformations

PowerSystemCase scale_stress(const PowerSystemCase& c, double fraction, const std::vector<int>& load_buses,
                             const std::vector<int>& machine_ids) {
  if (!(fraction > 0)) throw InputError("stress fraction must be positive");
  PowerSystemCase out = c;
  for (int bus : load_buses) {
    c.bus_index(bus);
    bool found = false;
    for (auto& l : out.loads)
      if (l.bus == bus) {
        l.p *= fraction;
        l.q *= fraction;
        found = true;
      }
    if (!found) throw InputError("no load at bus " + std::to_string(bus));
  }
  for (int id : machine_ids) out.machines[c.machine_index(id)].p_sched *= fraction;
  return out;
}

PowerSystemCase scale_stress_all(const PowerSystemCase& c, double fraction) {
  std::set<int> buses;
  for (const auto& l : c.loads) buses.insert(l.bus);
  std::vector<int> ids;
  for (const auto& m : c.machines) ids.push_back(m.id);
  return scale_stress(c, fraction, {buses.begin(), buses.end()}, ids);
}

PowerSystemCase apply_line_trip(const PowerSystemCase& c, int from_bus, int to_bus, int circuit) {
  PowerSystemCase out = c;
  for (auto& br : out.branches) {
    bool match = br.circuit == circuit && ((br.from == from_bus && br.to == to_bus) ||
                                           (br.from == to_bus && br.to == from_bus));
    if (!match) continue;
    if (!br.in_service)
      throw InputError("branch " + std::to_string(from_bus) + "-" + std::to_string(to_bus) + " circuit " +
                       std::to_string(circuit) + " is already out of service");
    br.in_service = false;
    return out;
  }
  throw InputError("branch " + std::to_string(from_bus) + "-" + std::to_string(to_bus) + " circuit " +
                   std::to_string(circuit) + " not found");
}

// ---------------------------------------------------------------------------

bool same_case(const PowerSystemCase& a, const PowerSystemCase& b, double rel_tol) {
  auto eq = [rel_tol](double x, double y) {
    return std::abs(x - y) <= rel_tol * std::max({1.0, std::abs(x), std::abs(y)});
  };
  if (!eq(a.base_mva, b.base_mva) || !eq(a.base_frequency_hz, b.base_frequency_hz)) return false;
  if (a.buses.size() != b.buses.size() || a.branches.size() != b.branches.size() ||
      a.machines.size() != b.machines.size() || a.governors.size() != b.governors.size() ||
      a.exciters.size() != b.exciters.size() || a.psss.size() != b.psss.size() ||
      a.loads.size() != b.loads.size())
    return false;
  for (size_t i = 0; i < a.buses.size(); ++i) {
    const auto &x = a.buses[i], &y = b.buses[i];
    if (x.id != y.id || x.kind != y.kind || x.area != y.area || !eq(x.shunt_susceptance, y.shunt_susceptance) ||
        x.voltage_setpoint.has_value() != y.voltage_setpoint.has_value() ||
        (x.voltage_setpoint && !eq(*x.voltage_setpoint, *y.voltage_setpoint)))
      return false;
  }
  for (size_t i = 0; i < a.branches.size(); ++i) {
    const auto &x = a.branches[i], &y = b.branches[i];
    if (x.from != y.from || x.to != y.to || x.circuit != y.circuit || x.in_service != y.in_service ||
        !eq(x.r, y.r) || !eq(x.x, y.x) || !eq(x.b, y.b))
      return false;
  }
  for (size_t i = 0; i < a.machines.size(); ++i) {
    const auto &x = a.machines[i], &y = b.machines[i];
    if (x.id != y.id || x.bus != y.bus) return false;
    for (auto [p, q] : {std::pair{x.mva, y.mva}, {x.h, y.h}, {x.d, y.d}, {x.xd, y.xd}, {x.xq, y.xq},
                        {x.xdp, y.xdp}, {x.xqp, y.xqp}, {x.td0p, y.td0p}, {x.tq0p, y.tq0p},
                        {x.e_max, y.e_max}, {x.p_sched, y.p_sched}, {x.v_sched, y.v_sched}})
      if (!eq(p, q)) return false;
  }
  for (size_t i = 0; i < a.governors.size(); ++i) {
    const auto &x = a.governors[i], &y = b.governors[i];
    if (x.machine != y.machine) return false;
    for (auto [p, q] : {std::pair{x.ke, y.ke}, {x.te, y.te}, {x.t3, y.t3}, {x.t4, y.t4}, {x.t5, y.t5},
                        {x.tm, y.tm}, {x.r, y.r}})
      if (!eq(p, q)) return false;
  }
  for (size_t i = 0; i < a.exciters.size(); ++i) {
    const auto &x = a.exciters[i], &y = b.exciters[i];
    if (x.machine != y.machine || !eq(x.ka, y.ka) || !eq(x.ta, y.ta) || !eq(x.efd_min, y.efd_min) ||
        !eq(x.efd_max, y.efd_max))
      return false;
  }
  for (size_t i = 0; i < a.psss.size(); ++i) {
    const auto &x = a.psss[i], &y = b.psss[i];
    if (x.machine != y.machine) return false;
    for (auto [p, q] : {std::pair{x.ks, y.ks}, {x.tw, y.tw}, {x.t1, y.t1}, {x.t2, y.t2}, {x.t3, y.t3},
                        {x.t4, y.t4}, {x.v_min, y.v_min}, {x.v_max, y.v_max}})
      if (!eq(p, q)) return false;
  }
  for (size_t i = 0; i < a.loads.size(); ++i) {
    const auto &x = a.loads[i], &y = b.loads[i];
    if (x.bus != y.bus || !eq(x.p, y.p) || !eq(x.q, y.q)) return false;
  }
  return true;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t h) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace govdamp
