#include "govdamp/powerflow.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"

namespace govdamp {

namespace {
constexpr Complex kJ{0.0, 1.0};
}

Eigen::MatrixXcd build_ybus(const PowerSystemCase& c) {
  const int n = static_cast<int>(c.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const int i = c.bus_index(br.from), k = c.bus_index(br.to);
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh = kJ * (br.b / 2.0);
    y(i, i) += ys + ysh;
    y(k, k) += ys + ysh;
    y(i, k) -= ys;
    y(k, i) -= ys;
  }
  for (int i = 0; i < n; ++i) y(i, i) += kJ * c.buses[i].shunt_susceptance;
  return y;
}

Eigen::VectorXcd PowerFlowSolution::voltage() const {
  Eigen::VectorXcd v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
  return v;
}

PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PowerFlowOptions& opt) {
  if (!(opt.tol > 0)) throw InputError("power flow tolerance must be positive");
  if (!is_connected(c)) throw IslandedNetwork("network is islanded; power flow not attempted");
  const int n = static_cast<int>(c.buses.size());
  const Eigen::MatrixXcd ybus = build_ybus(c);

  Eigen::VectorXcd s_spec = Eigen::VectorXcd::Zero(n);
  int slack = -1;
  for (int i = 0; i < n; ++i)
    if (c.buses[i].kind == BusKind::Slack) {
      if (slack >= 0) throw InputError("more than one slack bus");
      slack = i;
    }
  if (slack < 0) throw InputError("no slack bus");
  for (const auto& m : c.machines) s_spec(c.bus_index(m.bus)) += m.p_sched;
  for (const auto& l : c.loads) s_spec(c.bus_index(l.bus)) -= Complex(l.p, l.q);

  Eigen::VectorXd vm = Eigen::VectorXd::Ones(n), va = Eigen::VectorXd::Zero(n);
  if (opt.warm_start) {
    vm = opt.warm_start->vm;
    va = opt.warm_start->va;
  }
  std::vector<int> pvpq, pq;
  for (int i = 0; i < n; ++i) {
    if (c.buses[i].kind != BusKind::PQ) vm(i) = *c.scheduled_voltage(i);
    if (i != slack) pvpq.push_back(i);
    if (c.buses[i].kind == BusKind::PQ) pq.push_back(i);
  }
  va(slack) = 0.0;
  const int npv = static_cast<int>(pvpq.size()), npq = static_cast<int>(pq.size());

  PowerFlowSolution sol;
  auto mismatch = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd& s) {
    s = v.array() * (ybus * v).conjugate().array();
    Eigen::VectorXd f(npv + npq);
    for (int a = 0; a < npv; ++a) f(a) = s(pvpq[a]).real() - s_spec(pvpq[a]).real();
    for (int a = 0; a < npq; ++a) f(npv + a) = s(pq[a]).imag() - s_spec(pq[a]).imag();
    return f;
  };

  Eigen::VectorXcd v(n), s(n);
  for (int i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
  Eigen::VectorXd f = mismatch(v, s);
  int it = 0;
  for (;; ++it) {
    const double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(norm)) throw PowerFlowDivergence("power flow produced non-finite mismatch");
    sol.mismatch_history.push_back(norm);
    if (norm <= opt.tol) break;
    if (it >= opt.max_iter)
      throw PowerFlowDivergence("power flow did not converge in " + std::to_string(opt.max_iter) +
                                " iterations (mismatch " + std::to_string(norm) + ")");

    // Complex-form derivatives of S with respect to angle and magnitude.
    const Eigen::VectorXcd ibus = ybus * v;
    Eigen::MatrixXcd ds_dva = ybus * v.asDiagonal();
    ds_dva = -ds_dva;
    ds_dva.diagonal() += ibus;
    ds_dva = (kJ * v).asDiagonal() * ds_dva.conjugate();
    Eigen::VectorXcd vnorm(n);
    for (int i = 0; i < n; ++i) vnorm(i) = v(i) / std::abs(v(i));
    Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate();
    for (int i = 0; i < n; ++i) ds_dvm(i, i) += std::conj(ibus(i)) * vnorm(i);

    Eigen::MatrixXd jac(npv + npq, npv + npq);
    for (int a = 0; a < npv; ++a) {
      for (int b = 0; b < npv; ++b) jac(a, b) = ds_dva(pvpq[a], pvpq[b]).real();
      for (int b = 0; b < npq; ++b) jac(a, npv + b) = ds_dvm(pvpq[a], pq[b]).real();
    }
    for (int a = 0; a < npq; ++a) {
      for (int b = 0; b < npv; ++b) jac(npv + a, b) = ds_dva(pq[a], pvpq[b]).imag();
      for (int b = 0; b < npq; ++b) jac(npv + a, npv + b) = ds_dvm(pq[a], pq[b]).imag();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) throw PowerFlowDivergence("singular power-flow Jacobian");
    const Eigen::VectorXd dx = lu.solve(-f);
    for (int a = 0; a < npv; ++a) va(pvpq[a]) += dx(a);
    for (int a = 0; a < npq; ++a) vm(pq[a]) += dx(npv + a);
    for (int i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
    f = mismatch(v, s);
  }

  sol.vm = vm;
  sol.va = va;
  sol.p = s.real();
  sol.q = s.imag();
  sol.iterations = it;
  sol.max_mismatch = sol.mismatch_history.back();
  return sol;
}

std::vector<Complex> machine_power(const PowerSystemCase& c, const PowerFlowSolution& pf) {
  const int n = static_cast<int>(c.buses.size());
  Eigen::VectorXcd s_gen(n);
  for (int i = 0; i < n; ++i) s_gen(i) = Complex(pf.p(i), pf.q(i));
  for (const auto& l : c.loads) s_gen(c.bus_index(l.bus)) += Complex(l.p, l.q);

  std::map<int, double> mva_at_bus, psched_at_bus;
  for (const auto& m : c.machines) {
    mva_at_bus[m.bus] += m.mva;
    psched_at_bus[m.bus] += m.p_sched;
  }
  std::vector<Complex> out;
  for (const auto& m : c.machines) {
    const int bi = c.bus_index(m.bus);
    const double share = m.mva / mva_at_bus[m.bus];
    const double p = c.buses[bi].kind == BusKind::Slack || psched_at_bus[m.bus] == 0.0
                         ? s_gen(bi).real() * share
                         : s_gen(bi).real() * m.p_sched / psched_at_bus[m.bus];
    out.emplace_back(p, s_gen(bi).imag() * share);
  }
  return out;
}

Eigen::VectorXcd load_admittances(const PowerSystemCase& c, const PowerFlowSolution& pf) {
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(c.buses.size()));
  for (const auto& l : c.loads) {
    const int i = c.bus_index(l.bus);
    y(i) += Complex(l.p, -l.q) / (pf.vm(i) * pf.vm(i));
  }
  return y;
}

double tie_line_flow(const PowerSystemCase& c, const Eigen::VectorXcd& v) {
  double total = 0.0;
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    int f = c.bus_index(br.from), t = c.bus_index(br.to);
    if (c.buses[f].area == c.buses[t].area) continue;
    if (c.buses[f].area > c.buses[t].area) std::swap(f, t);
    const Complex i_from = (v(f) - v(t)) / Complex(br.r, br.x) + v(f) * kJ * (br.b / 2.0);
    total += (v(f) * std::conj(i_from)).real();
  }
  return total * c.base_mva;
}

double network_losses(const PowerSystemCase&, const PowerFlowSolution& pf) { return pf.p.sum(); }

Eigen::MatrixXcd ReducedNetwork::Y() const {
  Eigen::MatrixXcd y(G.rows(), G.cols());
  y.real() = G;
  y.imag() = B;
  return y;
}

ReducedNetwork reduce_network(const Eigen::MatrixXcd& ybus, const PowerSystemCase& c,
                              const Eigen::VectorXcd& y_load) {
  const int n = static_cast<int>(ybus.rows());
  const int nm = static_cast<int>(c.machines.size());
  Eigen::MatrixXcd ybb = ybus;
  ybb.diagonal() += y_load;
  Eigen::MatrixXcd ybk = Eigen::MatrixXcd::Zero(n, nm);
  Eigen::MatrixXcd ykk = Eigen::MatrixXcd::Zero(nm, nm);
  for (int k = 0; k < nm; ++k) {
    const Machine& m = c.machines[k];
    const Complex yint = 1.0 / (kJ * (m.xdp * c.base_mva / m.mva));
    const int b = c.bus_index(m.bus);
    ykk(k, k) += yint;
    ybb(b, b) += yint;
    ybk(b, k) -= yint;
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(ybb);
  if (n > 0 && !(lu.rcond() > 1e-13))
    throw IslandedNetwork("singular elimination block in network reduction (islanded node)");
  ReducedNetwork red;
  red.recovery = n > 0 ? Eigen::MatrixXcd(-lu.solve(ybk)) : Eigen::MatrixXcd(0, nm);
  Eigen::MatrixXcd yr = ykk + ybk.transpose() * red.recovery;
  yr = 0.5 * (yr + yr.transpose()).eval();
  red.G = yr.real();
  red.B = yr.imag();
  for (const auto& m : c.machines) red.machine_ids.push_back(m.id);
  return red;
}

ReducedNetwork kron_reduce(const Eigen::MatrixXcd& ybus, const PowerSystemCase& c,
                           const PowerFlowSolution& pf) {
  return reduce_network(ybus, c, load_admittances(c, pf));
}

std::string power_flow_csv(const PowerSystemCase& c, const PowerFlowSolution& pf) {
  std::ostringstream os;
  os << "bus,vm_pu,va_rad,p_pu,q_pu\n";
  for (size_t i = 0; i < c.buses.size(); ++i)
    os << c.buses[i].id << ',' << fmt_num(pf.vm(i)) << ',' << fmt_num(pf.va(i)) << ',' << fmt_num(pf.p(i))
       << ',' << fmt_num(pf.q(i)) << '\n';
  return os.str();
}

}  // namespace govdamp
