#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "govdamp/case_model.hpp"

namespace govdamp {

using Complex = std::complex<double>;

// Dense bus admittance matrix in case bus order (system base).
Eigen::MatrixXcd build_ybus(const PowerSystemCase& c);

struct PowerFlowSolution {
  Eigen::VectorXd vm;  // p.u.
  Eigen::VectorXd va;  // rad, slack = 0
  Eigen::VectorXd p;   // net injection p.u.
  Eigen::VectorXd q;
  int iterations = 0;
  double max_mismatch = 0.0;
  std::vector<double> mismatch_history;  // ‖mismatch‖∞ before each correction

  Eigen::VectorXcd voltage() const;
};

struct PowerFlowOptions {
  double tol = 1e-10;
  int max_iter = 30;
  const PowerFlowSolution* warm_start = nullptr;
};

// Newton-Raphson in polar coordinates. Throws IslandedNetwork or PowerFlowDivergence.
PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PowerFlowOptions& opt = {});

// Complex power delivered by each machine (system base), split by schedule at shared buses.
std::vector<Complex> machine_power(const PowerSystemCase& c, const PowerFlowSolution& pf);

// Constant-impedance equivalent of each bus's load at the solved voltage.
Eigen::VectorXcd load_admittances(const PowerSystemCase& c, const PowerFlowSolution& pf);

// Real power (MW) crossing area boundaries, measured at the lower-numbered-area end.
double tie_line_flow(const PowerSystemCase& c, const Eigen::VectorXcd& v);

double network_losses(const PowerSystemCase& c, const PowerFlowSolution& pf);

struct ReducedNetwork {
  Eigen::MatrixXd G;  // machine internal nodes, system base
  Eigen::MatrixXd B;
  std::vector<int> machine_ids;
  // Bus voltages from internal EMFs: V_bus = recovery * E.
  Eigen::MatrixXcd recovery;

  Eigen::MatrixXcd Y() const;
  int size() const { return static_cast<int>(G.rows()); }
};

// Loads as shunt admittances from the solved voltages; machines behind j·x'd.
ReducedNetwork kron_reduce(const Eigen::MatrixXcd& ybus, const PowerSystemCase& c,
                           const PowerFlowSolution& pf);
// Same reduction with explicitly supplied per-bus load admittances.
ReducedNetwork reduce_network(const Eigen::MatrixXcd& ybus, const PowerSystemCase& c,
                              const Eigen::VectorXcd& y_load);

std::string power_flow_csv(const PowerSystemCase& c, const PowerFlowSolution& pf);

}  // namespace govdamp
