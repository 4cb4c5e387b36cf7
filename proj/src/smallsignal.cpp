#include "govdamp/smallsignal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"

namespace govdamp {

Eigen::MatrixXd linearize(const VectorField& f, const Eigen::VectorXd& x0, double step, double eq_tol) {
  const Eigen::VectorXd f0 = f(x0);
  const double r = f0.size() ? f0.lpNorm<Eigen::Infinity>() : 0.0;
  if (!(r <= eq_tol))
    throw NumericalError("linearization point is not an equilibrium (|f| = " + fmt_num(r) + ")");
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd a(f0.size(), n);
  Eigen::VectorXd xp = x0, xm = x0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = step * std::max(1.0, std::abs(x0(k)));
    xp(k) = x0(k) + h;
    xm(k) = x0(k) - h;
    a.col(k) = (f(xp) - f(xm)) / (xp(k) - xm(k));
    xp(k) = x0(k);
    xm(k) = x0(k);
  }
  return a;
}

Eigen::MatrixXd linearize(const DynamicModel& model, const Eigen::VectorXd& x0, double step) {
  return linearize([&model](const Eigen::VectorXd& x) { return model.rhs(x); }, x0, step);
}

const char* mode_class_name(ModeClass c) {
  switch (c) {
    case ModeClass::InterArea: return "inter_area";
    case ModeClass::Local: return "local";
    case ModeClass::Control: return "control";
    case ModeClass::Real: return "real";
  }
  return "real";
}

Eigen::VectorXd balance_scaling(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd b = a;
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  constexpr double radix = 2.0;
  bool changed = true;
  for (int sweep = 0; changed && sweep < 100; ++sweep) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(b(j, i));
        r += std::abs(b(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0, g = r / radix;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
        g /= radix * radix;
      }
      g = r * radix;
      while (c >= g) {
        f /= radix;
        c /= radix * radix;
        g *= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        changed = true;
        d(i) *= f;
        b.row(i) /= f;
        b.col(i) *= f;
      }
    }
  }
  return d;
}

std::string ModeTable::top_participant(const Mode& m) const {
  if (m.top_state < 0) return "";
  if (m.top_state < static_cast<int>(state_names.size())) return state_names[m.top_state];
  return "x" + std::to_string(m.top_state);
}

ModeTable modal_analysis(const Eigen::MatrixXd& a, std::vector<std::string> state_names) {
  if (a.rows() != a.cols()) throw InputError("modal analysis needs a square matrix");
  const Eigen::Index n = a.rows();
  ModeTable table;
  table.state_names = std::move(state_names);
  if (n == 0) return table;

  const Eigen::VectorXd d = balance_scaling(a);
  const Eigen::MatrixXd ab = d.cwiseInverse().asDiagonal() * a * d.asDiagonal();
  Eigen::EigenSolver<Eigen::MatrixXd> es(ab, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue QR iteration did not converge");

  Eigen::MatrixXcd v = d.cast<std::complex<double>>().asDiagonal() * es.eigenvectors();
  for (Eigen::Index k = 0; k < n; ++k) v.col(k).normalize();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(v);
  Eigen::MatrixXcd w = lu.isInvertible() ? Eigen::MatrixXcd(lu.inverse())
                                         : Eigen::MatrixXcd(v.completeOrthogonalDecomposition().pseudoInverse());
  const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
  const double anorm = std::max(a.norm(), 1e-300);

  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lam = es.eigenvalues()(k);
    if (lam.imag() < 0.0) continue;
    Mode m;
    m.eigenvalue = lam;
    m.frequency_hz = lam.imag() / (2.0 * std::numbers::pi);
    const double mag = std::abs(lam);
    m.damping_ratio = mag > 0.0 ? -lam.real() / mag : 0.0;
    m.right = v.col(k);
    m.left = w.row(k).transpose();
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = std::abs(m.right(i) * m.left(i));
    const double sum = p.sum();
    if (sum > 0.0) p /= sum;
    m.participation = p;
    p.maxCoeff(&m.top_state);
    m.residual = (ac * m.right - lam * m.right).norm() / (anorm * m.right.norm());
    m.cls = lam.imag() > 0.0 ? ModeClass::Local : ModeClass::Real;
    table.modes.push_back(std::move(m));
  }
  std::stable_sort(table.modes.begin(), table.modes.end(), [](const Mode& x, const Mode& y) {
    if (x.damping_ratio != y.damping_ratio) return x.damping_ratio < y.damping_ratio;
    return x.frequency_hz < y.frequency_hz;
  });
  return table;
}

ModeClass classify_mode(const Mode& m, const std::vector<int>& speed_indices, const std::vector<int>& area) {
  if (!(m.eigenvalue.imag() > 0.0)) return ModeClass::Real;
  const double total = m.right.norm();
  double speed2 = 0.0;
  for (int idx : speed_indices) speed2 += std::norm(m.right(idx));
  if (total == 0.0 || std::sqrt(speed2) < 0.1 * total) return ModeClass::Control;
  if (speed_indices.size() < 2) return ModeClass::Local;

  int first = -1, second = -1;
  for (int k = 0; k < static_cast<int>(speed_indices.size()); ++k) {
    const double mag = std::abs(m.right(speed_indices[k]));
    if (first < 0 || mag > std::abs(m.right(speed_indices[first]))) {
      second = first;
      first = k;
    } else if (second < 0 || mag > std::abs(m.right(speed_indices[second]))) {
      second = k;
    }
  }
  if (area[first] == area[second]) return ModeClass::Local;
  double diff = std::arg(m.right(speed_indices[first])) - std::arg(m.right(speed_indices[second]));
  diff = std::fmod(diff * 180.0 / std::numbers::pi + 720.0, 360.0);
  return diff > 90.0 && diff < 270.0 ? ModeClass::InterArea : ModeClass::Local;
}

void classify_modes(ModeTable& t, const std::vector<int>& speed_indices, const std::vector<int>& area) {
  for (auto& m : t.modes) m.cls = classify_mode(m, speed_indices, area);
}

const Mode& min_damping(const ModeTable& t, double min_hz, double max_hz) {
  if (!(min_hz <= max_hz)) throw InputError("invalid frequency band");
  const Mode* best = nullptr;
  for (const auto& m : t.modes) {
    if (!m.oscillatory() || m.frequency_hz < min_hz || m.frequency_hz > max_hz) continue;
    if (!best || m.damping_ratio < best->damping_ratio) best = &m;
  }
  if (!best)
    throw NumericalError("no oscillatory mode in band [" + fmt_num(min_hz) + ", " + fmt_num(max_hz) + "] Hz");
  return *best;
}

std::string mode_table_csv(const ModeTable& t) {
  std::ostringstream os;
  os << "re,im,freq_hz,damping_pct,class,top_participant\n";
  for (const auto& m : t.modes)
    os << fmt_num(m.eigenvalue.real()) << ',' << fmt_num(m.eigenvalue.imag()) << ',' << fmt_num(m.frequency_hz)
       << ',' << fmt_num(100.0 * m.damping_ratio) << ',' << mode_class_name(m.cls) << ',' << t.top_participant(m)
       << '\n';
  return os.str();
}

}  // namespace govdamp
