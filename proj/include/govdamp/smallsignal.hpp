#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "govdamp/dynamics.hpp"

namespace govdamp {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central-difference Jacobian, step h·max(1, |x_k|). Throws NumericalError if ‖f(x0)‖∞ > eq_tol.
Eigen::MatrixXd linearize(const VectorField& f, const Eigen::VectorXd& x0, double step = 1e-6,
                          double eq_tol = 1e-6);
Eigen::MatrixXd linearize(const DynamicModel& model, const Eigen::VectorXd& x0, double step = 1e-6);

enum class ModeClass { InterArea, Local, Control, Real };
const char* mode_class_name(ModeClass c);

struct Mode {
  std::complex<double> eigenvalue;
  double frequency_hz = 0.0;
  double damping_ratio = 0.0;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;
  Eigen::VectorXd participation;  // sums to 1
  ModeClass cls = ModeClass::Real;
  int top_state = -1;
  double residual = 0.0;  // ‖Av − λv‖ / (‖A‖‖v‖)

  bool oscillatory() const { return eigenvalue.imag() > 0.0; }
};

struct ModeTable {
  std::vector<Mode> modes;  // ascending damping ratio
  std::vector<std::string> state_names;
  std::string fingerprint;

  std::string top_participant(const Mode& m) const;
};

// Balancing + Hessenberg/shifted QR; one entry per conjugate pair (Im > 0) plus real modes.
ModeTable modal_analysis(const Eigen::MatrixXd& a, std::vector<std::string> state_names = {});

// area_of_speed[k] is the area of the machine whose speed sits at speed_indices[k].
ModeClass classify_mode(const Mode& m, const std::vector<int>& speed_indices, const std::vector<int>& area_of_speed);
void classify_modes(ModeTable& t, const std::vector<int>& speed_indices, const std::vector<int>& area_of_speed);

// Least-damped oscillatory mode in [min_hz, max_hz]; throws NumericalError if none.
const Mode& min_damping(const ModeTable& t, double min_hz = 0.1, double max_hz = 3.0);

std::string mode_table_csv(const ModeTable& t);

// LAPACK-style diagonal scaling: returns d with D⁻¹AD balanced (D = diag(d), powers of two).
Eigen::VectorXd balance_scaling(const Eigen::MatrixXd& a);

}  // namespace govdamp
