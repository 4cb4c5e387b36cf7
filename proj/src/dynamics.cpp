#include "govdamp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "govdamp/errors.hpp"

namespace govdamp {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr Complex kJ{0.0, 1.0};

// Rotation from the network frame into machine (d, q) coordinates.
Complex to_dq(double delta) { return std::polar(1.0, -(delta - kHalfPi)); }
}  // namespace

StateLayout StateLayout::from_case(const PowerSystemCase& c) {
  StateLayout l;
  int k = 0;
  for (const auto& m : c.machines) {
    MachineLayout ml;
    const std::string tag = std::to_string(m.id);
    auto add = [&](int& slot, const char* name) {
      slot = k++;
      l.names.push_back(std::string(name) + ":" + tag);
    };
    add(ml.delta, "delta");
    add(ml.omega, "omega");
    add(ml.eq, "eq");
    add(ml.ed, "ed");
    if (c.governor_for(m.id)) {
      add(ml.pm, "pm");
      add(ml.xm, "xm");
      add(ml.xe, "xe");
    }
    if (c.exciter_for(m.id)) add(ml.efd, "efd");
    if (c.pss_for(m.id)) {
      add(ml.pss_w, "pss_w");
      add(ml.pss_l1, "pss_l1");
      add(ml.pss_l2, "pss_l2");
    }
    l.machines.push_back(ml);
  }
  l.size = k;
  return l;
}

std::vector<int> StateLayout::speed_indices() const {
  std::vector<int> out;
  for (const auto& m : machines) out.push_back(m.omega);
  return out;
}

std::array<int, 5> StateLayout::design_indices(int i) const {
  const auto& m = machines[i];
  if (m.pm < 0) throw InputError("machine index " + std::to_string(i) + " has no governor states");
  return {m.delta, m.omega, m.pm, m.xm, m.xe};
}

std::pair<double, double> rotor_rhs(double omega_r, double pm, double pe, const Machine& m, double omega0) {
  return {omega_r, -m.d / (2.0 * m.h) * omega_r + omega0 / (2.0 * m.h) * (pm - pe)};
}

std::array<double, 3> governor_turbine_rhs(double pm, double xm, double xe, double omega_r, double pc,
                                           const GovernorParams& g, double omega0) {
  const double droop = g.ke / (g.r * omega0);
  const double d_xe = (-droop * omega_r - xe + pc) / g.te;
  const double d_xm = (-g.t3 / g.te * droop * omega_r - xm + (1.0 - g.t3 / g.te) * xe + g.t3 / g.te * pc) / g.tm;
  const double d_pm = -g.t3 * g.t4 / (g.tm * g.te * g.t5) * droop * omega_r - pm / g.t5 +
                      (1.0 - g.t4 / g.tm) * xm / g.t5 + g.t3 * g.t4 / (g.tm * g.te * g.t5) * pc +
                      g.t4 / (g.tm * g.t5) * (1.0 - g.t3 / g.te) * xe;
  return {d_pm, d_xm, d_xe};
}

std::pair<double, double> two_axis_rhs(double eq, double ed, double id, double iq, double efd, const Machine& m) {
  return {(-eq - (m.xd - m.xdp) * id + efd) / m.td0p, (-ed + (m.xq - m.xqp) * iq) / m.tq0p};
}

Eigen::VectorXd electrical_power(const ReducedNetwork& net, const Eigen::VectorXd& delta, const Eigen::VectorXd& eq,
                                 const Eigen::VectorXd& ed) {
  const Eigen::Index n = delta.size();
  Eigen::VectorXd pe = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = net.G(i, j), b = net.B(i, j);
      const double c = std::cos(delta(i) - delta(j)), s = std::sin(delta(i) - delta(j));
      pe(i) += eq(i) * eq(j) * (g * c + b * s) + eq(i) * ed(j) * (b * c - g * s) +
               ed(i) * eq(j) * (-b * c + g * s) + ed(i) * ed(j) * (g * c + b * s);
    }
  return pe;
}

DesignBlock build_design_matrices(const Machine& m, const GovernorParams& g, double omega0) {
  const double ke = g.ke, te = g.te, t3 = g.t3, t4 = g.t4, t5 = g.t5, tm = g.tm, r = g.r;
  DesignBlock d;
  d.A.setZero();
  d.A(0, 1) = 1.0;
  d.A(1, 1) = -m.d / (2.0 * m.h);
  d.A(1, 2) = omega0 / (2.0 * m.h);
  d.A(2, 1) = -ke * t3 * t4 / (tm * te * t5 * r * omega0);
  d.A(2, 2) = -1.0 / t5;
  d.A(2, 3) = (tm - t4) / (t5 * tm);
  d.A(2, 4) = t4 * (te - t3) / (tm * t5 * te);
  d.A(3, 1) = -ke * t3 / (tm * te * r * omega0);
  d.A(3, 3) = -1.0 / tm;
  d.A(3, 4) = (te - t3) / (tm * te);
  d.A(4, 1) = -ke / (te * r * omega0);
  d.A(4, 4) = -1.0 / te;
  d.B << 0.0, 0.0, t3 * t4 / (tm * te * t5), t3 / (tm * te), 1.0 / te;
  d.G << 0.0, -omega0 / (2.0 * m.h), 0.0, 0.0, 0.0;
  return d;
}

ControllerSet ControllerSet::none(int machines) {
  ControllerSet k;
  k.gains = Eigen::MatrixXd::Zero(machines, 5);
  k.reference = Eigen::MatrixXd::Zero(machines, 5);
  k.designed.assign(machines, false);
  return k;
}

bool ControllerSet::any() const { return std::find(designed.begin(), designed.end(), true) != designed.end(); }

double ControllerSet::signal(int i, const Vec5& x5) const {
  if (!designed[i]) return 0.0;
  return gains.row(i).dot((x5 - reference.row(i).transpose()));
}

// ---------------------------------------------------------------------------

DynamicModel::DynamicModel(const PowerSystemCase& c, ReducedNetwork net, Setpoints sp)
    : machines_(c.machines), omega0_(c.omega0()), net_(std::move(net)), sp_(std::move(sp)) {
  const int n = static_cast<int>(machines_.size());
  if (net_.size() != n) throw InputError("reduced network size does not match machine count");
  for (const auto& m : machines_) {
    auto g = c.governor_for(m.id);
    auto e = c.exciter_for(m.id);
    auto p = c.pss_for(m.id);
    gov_.push_back(g ? std::optional(*g) : std::nullopt);
    exc_.push_back(e ? std::optional(*e) : std::nullopt);
    pss_.push_back(p ? std::optional(*p) : std::nullopt);
    scale_.push_back(c.base_mva / m.mva);
  }
  y_ = net_.Y();
  layout_ = StateLayout::from_case(c);
  ctrl_ = ControllerSet::none(n);
  active_.assign(n, false);
}

void DynamicModel::set_all_active(bool on) { std::fill(active_.begin(), active_.end(), on); }

Vec5 DynamicModel::design_state(const Eigen::VectorXd& x, int i) const {
  const auto& l = layout_.machines[i];
  Vec5 v;
  v << x(l.delta), x(l.omega), l.pm >= 0 ? x(l.pm) : 0.0, l.xm >= 0 ? x(l.xm) : 0.0, l.xe >= 0 ? x(l.xe) : 0.0;
  return v;
}

void DynamicModel::currents(const Eigen::VectorXd& x, Eigen::VectorXcd& e, Eigen::VectorXcd& i) const {
  const int n = machine_count();
  e.resize(n);
  for (int k = 0; k < n; ++k) {
    const auto& l = layout_.machines[k];
    e(k) = Complex(x(l.ed), x(l.eq)) * std::polar(1.0, x(l.delta) - kHalfPi);
  }
  i = y_ * e;
}

Eigen::VectorXd DynamicModel::rhs(const Eigen::VectorXd& x) const {
  Eigen::VectorXd dx(x.size());
  rhs(x, dx);
  return dx;
}

void DynamicModel::rhs(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const {
  const int n = machine_count();
  dx.setZero(x.size());
  Eigen::VectorXcd e, cur;
  currents(x, e, cur);
  for (int k = 0; k < n; ++k) {
    const Machine& m = machines_[k];
    const auto& l = layout_.machines[k];
    const double sc = scale_[k];
    const double pe = (e(k) * std::conj(cur(k))).real() * sc;
    const Complex idq = cur(k) * to_dq(x(l.delta)) * sc;
    const double omega = x(l.omega);

    const double pm = l.pm >= 0 ? x(l.pm) : sp_.pm_fixed(k);
    auto [d_delta, d_omega] = rotor_rhs(omega, pm, pe, m, omega0_);
    dx(l.delta) = d_delta;
    dx(l.omega) = d_omega;

    const double efd = l.efd >= 0 ? x(l.efd) : sp_.efd_fixed(k);
    auto [d_eq, d_ed] = two_axis_rhs(x(l.eq), x(l.ed), idq.real(), idq.imag(), efd, m);
    dx(l.eq) = d_eq;
    dx(l.ed) = d_ed;

    if (gov_[k]) {
      double pc = sp_.pc_ref(k);
      if (active_[k]) pc += ctrl_.signal(k, design_state(x, k));
      auto d = governor_turbine_rhs(x(l.pm), x(l.xm), x(l.xe), omega, pc, *gov_[k], omega0_);
      // Anti-windup: a valve pinned on a limit cannot move further out.
      if ((x(l.xe) >= 1.0 && d[2] > 0.0) || (x(l.xe) <= 0.0 && d[2] < 0.0)) d[2] = 0.0;
      dx(l.pm) = d[0];
      dx(l.xm) = d[1];
      dx(l.xe) = d[2];
    }

    double vpss = 0.0;
    if (pss_[k]) {
      const PssParams& p = *pss_[k];
      const double y1 = p.ks * omega / omega0_ - x(l.pss_w);
      dx(l.pss_w) = y1 / p.tw;
      dx(l.pss_l1) = (y1 - x(l.pss_l1)) / p.t2;
      const double y2 = x(l.pss_l1) + p.t1 / p.t2 * (y1 - x(l.pss_l1));
      dx(l.pss_l2) = (y2 - x(l.pss_l2)) / p.t4;
      const double y3 = x(l.pss_l2) + p.t3 / p.t4 * (y2 - x(l.pss_l2));
      vpss = std::clamp(y3, p.v_min, p.v_max);
    }
    if (exc_[k]) {
      const ExciterParams& ex = *exc_[k];
      const double vt = std::abs(e(k) - kJ * (m.xdp * sc) * cur(k));
      const double target = std::clamp(ex.ka * (sp_.v_ref(k) - vt + vpss), ex.efd_min, ex.efd_max);
      dx(l.efd) = (target - x(l.efd)) / ex.ta;
    }
  }
}

Eigen::VectorXcd DynamicModel::bus_voltages(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd e, cur;
  currents(x, e, cur);
  return net_.recovery * e;
}

MachineOutputs DynamicModel::outputs(const Eigen::VectorXd& x) const {
  const int n = machine_count();
  Eigen::VectorXcd e, cur;
  currents(x, e, cur);
  MachineOutputs o;
  o.pe.resize(n);
  o.vt.resize(n);
  o.u.resize(n);
  o.emf.resize(n);
  for (int k = 0; k < n; ++k) {
    o.pe(k) = (e(k) * std::conj(cur(k))).real() * scale_[k];
    o.vt(k) = std::abs(e(k) - kJ * (machines_[k].xdp * scale_[k]) * cur(k));
    o.u(k) = gov_[k] && active_[k] ? ctrl_.signal(k, design_state(x, k)) : 0.0;
    o.emf(k) = std::abs(e(k));
  }
  return o;
}

// ---------------------------------------------------------------------------

Equilibrium initialize_from_power_flow(const PowerSystemCase& c, const PowerFlowSolution& pf) {
  const int n = static_cast<int>(c.machines.size());
  const StateLayout layout = StateLayout::from_case(c);
  const auto s_mach = machine_power(c, pf);
  const Eigen::VectorXcd v_bus = pf.voltage();

  Equilibrium eq;
  eq.x = Eigen::VectorXd::Zero(layout.size);
  eq.setpoints.pc_ref = Eigen::VectorXd::Zero(n);
  eq.setpoints.v_ref = Eigen::VectorXd::Zero(n);
  eq.setpoints.pm_fixed = Eigen::VectorXd::Zero(n);
  eq.setpoints.efd_fixed = Eigen::VectorXd::Zero(n);
  eq.valve_at_bound.assign(n, false);

  for (int k = 0; k < n; ++k) {
    const Machine& m = c.machines[k];
    const auto& l = layout.machines[k];
    const double sc = c.base_mva / m.mva;
    const Complex v = v_bus(c.bus_index(m.bus));
    const Complex i_sys = std::conj(s_mach[k] / v);
    const double x_eff = (m.xq - m.xqp + m.xdp) * sc;
    const double delta = std::arg(v + kJ * x_eff * i_sys);
    const Complex vdq = v * to_dq(delta);
    const Complex idq = i_sys * to_dq(delta) * sc;
    const double e_q = vdq.imag() + m.xdp * idq.real();
    const double e_d = vdq.real() - m.xdp * idq.imag();
    const double efd = e_q + (m.xd - m.xdp) * idq.real();
    const double pm = s_mach[k].real() * sc;

    eq.x(l.delta) = delta;
    eq.x(l.eq) = e_q;
    eq.x(l.ed) = e_d;
    eq.setpoints.pm_fixed(k) = pm;
    eq.setpoints.efd_fixed(k) = efd;
    if (l.pm >= 0) {
      constexpr double kTol = 1e-12;
      if (pm > 1.0 + kTol || pm < -kTol)
        throw LimitViolation("machine " + std::to_string(m.id) + " needs valve opening " + std::to_string(pm) +
                             " outside [0, 1]");
      double pc = std::clamp(pm, 0.0, 1.0);
      eq.valve_at_bound[k] = pc == 0.0 || pc == 1.0 || std::abs(pm) <= kTol;
      if (std::abs(pm) <= kTol) pc = 0.0;
      eq.x(l.pm) = pc;
      eq.x(l.xm) = pc;
      eq.x(l.xe) = pc;
      eq.setpoints.pc_ref(k) = pc;
    }
    if (l.efd >= 0) {
      const ExciterParams& ex = *c.exciter_for(m.id);
      if (efd < ex.efd_min || efd > ex.efd_max)
        throw LimitViolation("machine " + std::to_string(m.id) + " needs field voltage " + std::to_string(efd) +
                             " outside its exciter limits");
      eq.x(l.efd) = efd;
      eq.setpoints.v_ref(k) = std::abs(v) + efd / ex.ka;
    }
  }
  return eq;
}

}  // namespace govdamp
