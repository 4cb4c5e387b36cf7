#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace govdamp {

enum class BusKind { Slack, PV, PQ };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  std::optional<double> voltage_setpoint;  // p.u., PV/slack
  double shunt_susceptance = 0.0;          // p.u. on system base
  int area = 1;
};

struct Branch {
  int from = 0;
  int to = 0;
  int circuit = 1;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total line charging
  bool in_service = true;
};

// Machine impedances, H and D are on the machine's own MVA rating.
struct Machine {
  int id = 0;
  int bus = 0;
  double mva = 100.0;
  double h = 0.0;
  double d = 0.0;
  double xd = 0.0, xq = 0.0, xdp = 0.0, xqp = 0.0;
  double td0p = 0.0, tq0p = 0.0;
  double e_max = 1.0;
  double p_sched = 0.0;  // p.u. on system base
  double v_sched = 1.0;
};

struct GovernorParams {
  int machine = 0;
  double ke = 1.0, te = 0.2, t3 = 0.3, t4 = 0.3, t5 = 8.0, tm = 1.0, r = 0.05;
};

struct ExciterParams {
  int machine = 0;
  double ka = 0.0, ta = 0.0;
  double efd_min = -5.0, efd_max = 5.0;
};

struct PssParams {
  int machine = 0;
  double ks = 0.0, tw = 10.0;
  double t1 = 0.0, t2 = 1.0, t3 = 0.0, t4 = 1.0;
  double v_min = -0.1, v_max = 0.1;
};

struct Load {
  int bus = 0;
  double p = 0.0;  // p.u. on system base
  double q = 0.0;
};

struct PowerSystemCase {
  double base_mva = 100.0;
  double base_frequency_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Machine> machines;
  std::vector<GovernorParams> governors;
  std::vector<ExciterParams> exciters;
  std::vector<PssParams> psss;
  std::vector<Load> loads;

  double omega0() const;
  // Index lookups throw InputError for unknown ids.
  int bus_index(int bus_id) const;
  int machine_index(int machine_id) const;
  const GovernorParams* governor_for(int machine_id) const;
  const ExciterParams* exciter_for(int machine_id) const;
  const PssParams* pss_for(int machine_id) const;
  int area_of_machine(int machine_index) const;
  // Voltage magnitude held at a PV/slack bus: bus setpoint, else the machine schedule.
  std::optional<double> scheduled_voltage(int bus_index) const;
  int in_service_branch_count() const;
};

PowerSystemCase parse_case(std::string_view text);
PowerSystemCase load_case(const std::filesystem::path& path);
std::string render_case(const PowerSystemCase& c);

std::vector<std::string> validate_case(const PowerSystemCase& c);
bool is_connected(const PowerSystemCase& c);

PowerSystemCase scale_stress(const PowerSystemCase& c, double fraction,
                             const std::vector<int>& load_buses,
                             const std::vector<int>& machine_ids);
// Scales every load and every machine schedule.
PowerSystemCase scale_stress_all(const PowerSystemCase& c, double fraction);

PowerSystemCase apply_line_trip(const PowerSystemCase& c, int from_bus, int to_bus, int circuit);

// Structural equality with relative tolerance on every real field.
bool same_case(const PowerSystemCase& a, const PowerSystemCase& b, double rel_tol = 1e-12);

std::string read_text_file(const std::filesystem::path& path);
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ULL);

}  // namespace govdamp
