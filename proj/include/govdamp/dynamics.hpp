#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "govdamp/case_model.hpp"
#include "govdamp/powerflow.hpp"

namespace govdamp {

// Index map of one machine's states inside the full state vector; -1 if absent.
struct MachineLayout {
  int delta = -1, omega = -1, eq = -1, ed = -1;
  int pm = -1, xm = -1, xe = -1;
  int efd = -1;
  int pss_w = -1, pss_l1 = -1, pss_l2 = -1;
};

// Machine-major layout: [δ, ω_r, E'q, E'd, Pm, Xm, Xe, Efd, w, l1, l2] with
// governor/exciter/PSS entries only for machines that have them.
struct StateLayout {
  std::vector<MachineLayout> machines;
  std::vector<std::string> names;
  int size = 0;

  static StateLayout from_case(const PowerSystemCase& c);
  std::vector<int> speed_indices() const;
  // [δ, ω_r, Pm, Xm, Xe]; requires a governor.
  std::array<int, 5> design_indices(int machine) const;
};

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// (dδ/dt, dω_r/dt); Pm, Pe on machine base.
std::pair<double, double> rotor_rhs(double omega_r, double pm, double pe, const Machine& m, double omega0);

// (dPm, dXm, dXe) of the steam governor/turbine chain. No valve limiting here.
std::array<double, 3> governor_turbine_rhs(double pm, double xm, double xe, double omega_r, double pc,
                                           const GovernorParams& g, double omega0);

// (dE'q, dE'd) with Id, Iq on machine base.
std::pair<double, double> two_axis_rhs(double eq, double ed, double id, double iq, double efd, const Machine& m);

// Electrical power of each machine (system base) from the four EMF product terms.
Eigen::VectorXd electrical_power(const ReducedNetwork& net, const Eigen::VectorXd& delta, const Eigen::VectorXd& eq,
                                 const Eigen::VectorXd& ed);

struct DesignBlock {
  Mat5 A;
  Vec5 B;
  Vec5 G;
};

DesignBlock build_design_matrices(const Machine& m, const GovernorParams& g, double omega0);

// Gains over [δ, ω_r, Pm, Xm, Xe] for every machine in case order (zero rows when uncontrolled).
struct ControllerSet {
  Eigen::MatrixXd gains;      // N × 5
  Eigen::MatrixXd reference;  // N × 5, x^d
  std::vector<bool> designed;

  static ControllerSet none(int machines);
  bool any() const;
  double signal(int machine, const Vec5& x5) const;
};

struct Setpoints {
  Eigen::VectorXd pc_ref;     // machine base
  Eigen::VectorXd v_ref;      // exciter reference
  Eigen::VectorXd pm_fixed;   // used when a machine has no governor
  Eigen::VectorXd efd_fixed;  // used when a machine has no exciter
};

struct MachineOutputs {
  Eigen::VectorXd pe;  // machine base
  Eigen::VectorXd vt;
  Eigen::VectorXd u;
  Eigen::VectorXd emf;  // |E'|
};

class DynamicModel {
 public:
  DynamicModel(const PowerSystemCase& c, ReducedNetwork net, Setpoints sp);

  Eigen::VectorXd rhs(const Eigen::VectorXd& x) const;
  void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const;
  MachineOutputs outputs(const Eigen::VectorXd& x) const;
  // Full-network bus voltages reconstructed from the internal EMFs.
  Eigen::VectorXcd bus_voltages(const Eigen::VectorXd& x) const;
  Vec5 design_state(const Eigen::VectorXd& x, int machine) const;

  void set_network(ReducedNetwork net) {
    net_ = std::move(net);
    y_ = net_.Y();
  }
  void set_controllers(ControllerSet k) { ctrl_ = std::move(k); }
  void set_active(int machine, bool on) { active_[machine] = on; }
  void set_all_active(bool on);
  void set_reference(int machine, const Vec5& xd) { ctrl_.reference.row(machine) = xd.transpose(); }

  const StateLayout& layout() const { return layout_; }
  const ReducedNetwork& network() const { return net_; }
  const ControllerSet& controllers() const { return ctrl_; }
  const Setpoints& setpoints() const { return sp_; }
  bool active(int machine) const { return active_[machine]; }
  int machine_count() const { return static_cast<int>(machines_.size()); }
  double omega0() const { return omega0_; }
  bool has_governor(int machine) const { return gov_[machine].has_value(); }
  const Machine& machine(int i) const { return machines_[i]; }
  double base_scale(int i) const { return scale_[i]; }

 private:
  void currents(const Eigen::VectorXd& x, Eigen::VectorXcd& e, Eigen::VectorXcd& i) const;

  std::vector<Machine> machines_;
  std::vector<std::optional<GovernorParams>> gov_;
  std::vector<std::optional<ExciterParams>> exc_;
  std::vector<std::optional<PssParams>> pss_;
  std::vector<double> scale_;  // system base / machine rating
  double omega0_;
  ReducedNetwork net_;
  Eigen::MatrixXcd y_;
  Setpoints sp_;
  StateLayout layout_;
  ControllerSet ctrl_;
  std::vector<bool> active_;
};

struct Equilibrium {
  Eigen::VectorXd x;
  Setpoints setpoints;
  std::vector<bool> valve_at_bound;  // Xe exactly on 0 (or 1)
};

// Throws LimitViolation when a machine would need a valve opening outside [0, 1].
Equilibrium initialize_from_power_flow(const PowerSystemCase& c, const PowerFlowSolution& pf);

}  // namespace govdamp
