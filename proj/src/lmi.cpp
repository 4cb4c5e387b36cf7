#include "govdamp/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"

namespace govdamp {

Eigen::MatrixXd LmiBlock::dense(int dim, const std::vector<SymEntry>& entries) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& e : entries) {
    m(e.i, e.j) += e.value;
    if (e.i != e.j) m(e.j, e.i) += e.value;
  }
  return m;
}

Eigen::MatrixXd LmiBlock::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd f = dense(dim, constant);
  for (const auto& [var, entries] : coefficients)
    for (const auto& e : entries) {
      f(e.i, e.j) += x(var) * e.value;
      if (e.i != e.j) f(e.j, e.i) += x(var) * e.value;
    }
  return f;
}

int SymmetricVar::at(int i, int j) const {
  if (i > j) std::swap(i, j);
  // row-major packed upper triangle
  return index[i * dim - i * (i - 1) / 2 + (j - i)];
}

int LmiProblem::add_scalar(std::string name) {
  names_.push_back(std::move(name));
  c_.conservativeResize(static_cast<Eigen::Index>(names_.size()));
  c_(c_.size() - 1) = 0.0;
  return static_cast<int>(names_.size()) - 1;
}

SymmetricVar LmiProblem::add_symmetric(const std::string& name, int dim) {
  SymmetricVar v;
  v.dim = dim;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      v.index.push_back(add_scalar(name + "[" + std::to_string(i) + "," + std::to_string(j) + "]"));
  return v;
}

void LmiProblem::set_objective(int var, double coefficient) { c_(var) = coefficient; }

int LmiProblem::add_block(LmiBlock block) {
  for (const auto& [var, entries] : block.coefficients) {
    if (var < 0 || var >= num_variables()) throw InputError("LMI block references unknown variable");
    for (const auto& e : entries)
      if (e.i < 0 || e.j < e.i || e.j >= block.dim) throw InputError("LMI entry outside block dimensions");
  }
  for (const auto& e : block.constant)
    if (e.i < 0 || e.j < e.i || e.j >= block.dim) throw InputError("LMI entry outside block dimensions");
  blocks_.push_back(std::move(block));
  return static_cast<int>(blocks_.size()) - 1;
}

BlockBuilder::BlockBuilder(int dim, std::string label) : dim_(dim), label_(std::move(label)) {}

void BlockBuilder::add_constant(int i, int j, double v) {
  if (i > j) std::swap(i, j);
  constant_[{i, j}] += v;
}

void BlockBuilder::add_term(int i, int j, int var, double coefficient) {
  if (i > j) std::swap(i, j);
  terms_[var][{i, j}] += coefficient;
}

LmiBlock BlockBuilder::make(double sign, double eps) const {
  LmiBlock b;
  b.dim = dim_;
  b.label = label_;
  std::map<std::pair<int, int>, double> c;
  for (const auto& [ij, v] : constant_) c[ij] += sign * v;
  if (eps != 0.0)
    for (int i = 0; i < dim_; ++i) c[{i, i}] -= eps;
  for (const auto& [ij, v] : c)
    if (v != 0.0) b.constant.push_back({ij.first, ij.second, v});
  for (const auto& [var, entries] : terms_) {
    std::vector<SymEntry> out;
    for (const auto& [ij, v] : entries)
      if (v != 0.0) out.push_back({ij.first, ij.second, sign * v});
    if (!out.empty()) b.coefficients[var] = std::move(out);
  }
  return b;
}

LmiBlock BlockBuilder::positive(double eps) const { return make(1.0, eps); }
LmiBlock BlockBuilder::negative(double eps) const { return make(-1.0, eps); }

const char* sdp_status_name(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::IterationLimit: return "iteration_limit";
    case SdpStatus::NumericalFailure: return "numerical_failure";
  }
  return "numerical_failure";
}

// ---------------------------------------------------------------------------
// log-barrier path following

namespace {

struct CoreBlock {
  int dim = 0;
  Eigen::MatrixXd f0;
  std::vector<std::pair<int, std::vector<SymEntry>>> terms;  // (reduced variable, entries)
};

struct Core {
  int m = 0;
  Eigen::VectorXd c;
  std::vector<CoreBlock> blocks;
  int total_dim = 0;

  bool evaluate(const Eigen::VectorXd& x, std::vector<Eigen::MatrixXd>& f) const {
    f.resize(blocks.size());
    for (size_t k = 0; k < blocks.size(); ++k) {
      const auto& b = blocks[k];
      f[k] = b.f0;
      for (const auto& [v, entries] : b.terms)
        for (const auto& e : entries) {
          f[k](e.i, e.j) += x(v) * e.value;
          if (e.i != e.j) f[k](e.j, e.i) += x(v) * e.value;
        }
      for (int i = 0; i < b.dim; ++i)
        if (!std::isfinite(f[k](i, i))) return false;
    }
    return true;
  }
};

// tr(S·F) for F given by upper-triangle entries.
double trace_with(const Eigen::MatrixXd& s, const std::vector<SymEntry>& entries) {
  double t = 0.0;
  for (const auto& e : entries) t += e.i == e.j ? s(e.i, e.i) * e.value : 2.0 * s(e.i, e.j) * e.value;
  return t;
}

bool all_pd(const Core& core, const Eigen::VectorXd& x) {
  std::vector<Eigen::MatrixXd> f;
  if (!core.evaluate(x, f)) return false;
  for (const auto& fk : f) {
    Eigen::LLT<Eigen::MatrixXd> llt(fk);
    if (llt.info() != Eigen::Success) return false;
  }
  return true;
}

enum class NewtonResult { Ok, NotPd, Singular };

// Gradient and Hessian of t·cᵀx − Σ log det F_k(x).
NewtonResult newton_system(const Core& core, const Eigen::VectorXd& x, double t, Eigen::VectorXd& g,
                           Eigen::MatrixXd& h) {
  std::vector<Eigen::MatrixXd> f;
  if (!core.evaluate(x, f)) return NewtonResult::NotPd;
  g = t * core.c;
  h = Eigen::MatrixXd::Zero(core.m, core.m);
  for (size_t k = 0; k < core.blocks.size(); ++k) {
    const auto& b = core.blocks[k];
    if (b.terms.empty()) continue;
    Eigen::LLT<Eigen::MatrixXd> llt(f[k]);
    if (llt.info() != Eigen::Success) return NewtonResult::NotPd;
    const Eigen::MatrixXd s = llt.solve(Eigen::MatrixXd::Identity(b.dim, b.dim));
    Eigen::MatrixXd msf(b.dim, b.dim);
    for (size_t a = 0; a < b.terms.size(); ++a) {
      const auto& [va, ea] = b.terms[a];
      g(va) -= trace_with(s, ea);
      msf.setZero();
      for (const auto& e : ea) {
        if (e.i == e.j) {
          msf.noalias() += e.value * s.col(e.i) * s.row(e.i);
        } else {
          msf.noalias() += e.value * s.col(e.i) * s.row(e.j);
          msf.noalias() += e.value * s.col(e.j) * s.row(e.i);
        }
      }
      for (size_t bb = a; bb < b.terms.size(); ++bb) {
        const auto& [vb, eb] = b.terms[bb];
        double tr = 0.0;
        for (const auto& e : eb) tr += e.i == e.j ? msf(e.i, e.i) * e.value : (msf(e.i, e.j) + msf(e.j, e.i)) * e.value;
        h(va, vb) += tr;
        if (va != vb) h(vb, va) += tr;
      }
    }
  }
  return NewtonResult::Ok;
}

bool solve_newton(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, Eigen::VectorXd& dx) {
  const Eigen::Index m = h.rows();
  Eigen::VectorXd d(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(h(i, i) > 0.0) || !std::isfinite(h(i, i))) return false;
    d(i) = 1.0 / std::sqrt(h(i, i));
  }
  const Eigen::MatrixXd hs = d.asDiagonal() * h * d.asDiagonal();
  const Eigen::VectorXd gs = d.cwiseProduct(g);
  // Flat directions (e.g. a phase-I slack that only ever appears next to another variable's identity
  // term) make the Hessian singular; a small diagonal shift gives a long step along them.
  for (double shift : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
    Eigen::LLT<Eigen::MatrixXd> llt(hs + shift * Eigen::MatrixXd::Identity(m, m));
    if (llt.info() != Eigen::Success) continue;
    dx = d.cwiseProduct(llt.solve(-gs));
    if (dx.allFinite()) return true;
  }
  return false;
}

struct PathState {
  Eigen::VectorXd x;
  double t = 1.0;
  int newton = 0;
};

enum class PathResult { Converged, EarlyStop, IterationLimit, NumericalFailure };

// Follows the central path; `stop` is checked after each Newton step.
template <class Stop>
PathResult follow_path(const Core& core, PathState& st, const SdpOptions& opt, double gap_target_rel,
                       Stop&& stop, std::string& msg) {
  Eigen::VectorXd g, dx;
  Eigen::MatrixXd h;
  for (;;) {
    for (int inner = 0;; ++inner) {
      if (st.newton >= opt.max_newton) return PathResult::IterationLimit;
      if (newton_system(core, st.x, st.t, g, h) != NewtonResult::Ok) {
        msg = "iterate left the interior";
        return PathResult::NumericalFailure;
      }
      if (!solve_newton(h, g, dx)) {
        msg = "Cholesky breakdown in Newton system";
        return PathResult::NumericalFailure;
      }
      ++st.newton;
      const double lambda2 = std::max(0.0, -g.dot(dx));
      if (lambda2 / 2.0 <= opt.centering_tol || inner >= 200) break;
      const double lambda = std::sqrt(lambda2);
      double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
      int halvings = 0;
      while (!all_pd(core, st.x + alpha * dx)) {
        alpha *= 0.5;
        if (++halvings > 60) {
          msg = "line search could not stay interior";
          return PathResult::NumericalFailure;
        }
      }
      st.x += alpha * dx;
      if (stop(st.x)) return PathResult::EarlyStop;
      if (alpha * lambda < 1e-14 * (1.0 + st.x.norm())) break;
    }
    if (stop(st.x)) return PathResult::EarlyStop;
    const double gap = core.total_dim / st.t;
    if (gap <= gap_target_rel * (1.0 + std::abs(core.c.dot(st.x)))) return PathResult::Converged;
    st.t *= opt.mu;
  }
}

// Initial barrier weight that best balances the objective against the barrier gradient.
double initial_t(const Core& core, const Eigen::VectorXd& x) {
  Eigen::VectorXd g, hc, hg;
  Eigen::MatrixXd h;
  if (newton_system(core, x, 0.0, g, h) != NewtonResult::Ok) return 1.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success) return 1.0;
  hc = ldlt.solve(core.c);
  const double den = core.c.dot(hc);
  if (!(den > 0.0)) return 1.0;
  const double t = -g.dot(hc) / den;
  return std::isfinite(t) && t > 0.0 ? std::clamp(t, 1e-6, 1e6) : 1.0;
}

}  // namespace

LmiSolution solve_sdp(const LmiProblem& problem, const SdpOptions& opt) {
  LmiSolution sol;
  const int n = problem.num_variables();
  sol.x = Eigen::VectorXd::Zero(n);

  // Variables that appear in no block are left at zero (or make the problem unbounded).
  std::vector<int> reduced(n, -1), original;
  for (const auto& b : problem.blocks())
    for (const auto& [v, entries] : b.coefficients)
      if (!entries.empty() && reduced[v] < 0) {
        reduced[v] = static_cast<int>(original.size());
        original.push_back(v);
      }
  for (int v = 0; v < n; ++v)
    if (reduced[v] < 0 && problem.objective()(v) != 0.0) {
      sol.status = SdpStatus::NumericalFailure;
      sol.message = "objective variable '" + problem.variable_names()[v] + "' is unconstrained (unbounded)";
      return sol;
    }

  Core core;
  core.m = static_cast<int>(original.size());
  core.c.resize(core.m);
  for (int r = 0; r < core.m; ++r) core.c(r) = problem.objective()(original[r]);
  for (const auto& b : problem.blocks()) {
    CoreBlock cb;
    cb.dim = b.dim;
    cb.f0 = LmiBlock::dense(b.dim, b.constant);
    for (const auto& [v, entries] : b.coefficients)
      if (!entries.empty()) cb.terms.emplace_back(reduced[v], entries);
    core.total_dim += b.dim;
    core.blocks.push_back(std::move(cb));
  }
  auto finish = [&](const Eigen::VectorXd& xr) {
    for (int r = 0; r < core.m; ++r) sol.x(original[r]) = xr(r);
    sol.objective = problem.objective_value(sol.x);
    sol.min_eigenvalues = check_solution(problem, sol.x).min_eigenvalues;
  };

  // Phase I: minimize s subject to F_k(x) + s·I ⪰ 0, stop as soon as s < 0.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(core.m);
  if (!all_pd(core, x)) {
    Core ph1 = core;
    ph1.m = core.m + 1;
    ph1.c = Eigen::VectorXd::Zero(ph1.m);
    ph1.c(core.m) = 1.0;
    std::vector<Eigen::MatrixXd> f;
    core.evaluate(x, f);
    double worst = 0.0;
    for (size_t k = 0; k < ph1.blocks.size(); ++k) {
      auto& b = ph1.blocks[k];
      std::vector<SymEntry> eye;
      for (int i = 0; i < b.dim; ++i) eye.push_back({i, i, 1.0});
      b.terms.emplace_back(core.m, eye);
      if (b.dim > 0) worst = std::min(worst, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f[k]).eigenvalues()(0));
    }
    PathState st;
    st.x = Eigen::VectorXd::Zero(ph1.m);
    st.x(core.m) = -worst + 1.0;
    st.t = initial_t(ph1, st.x);
    auto feasible = [&](const Eigen::VectorXd& z) { return z(core.m) < 0.0 && all_pd(core, z.head(core.m)); };
    std::string msg;
    PathResult r = follow_path(ph1, st, opt, opt.gap_tol, feasible, msg);
    sol.iterations = st.newton;
    if (r == PathResult::EarlyStop) {
      x = st.x.head(core.m);
    } else if (r == PathResult::Converged) {
      finish(st.x.head(core.m));
      sol.status = SdpStatus::Infeasible;
      sol.message = "no strictly feasible point (phase-I optimum " + fmt_num(st.x(core.m)) + " >= 0)";
      return sol;
    } else {
      finish(st.x.head(core.m));
      sol.status = r == PathResult::IterationLimit ? SdpStatus::IterationLimit : SdpStatus::NumericalFailure;
      sol.message = "phase I: " + (msg.empty() ? std::string("iteration cap reached") : msg);
      return sol;
    }
  }

  if (core.m == 0) {
    finish(x);
    sol.status = SdpStatus::Optimal;
    return sol;
  }

  PathState st;
  st.x = x;
  st.newton = sol.iterations;
  st.t = initial_t(core, x);
  std::string msg;
  PathResult r = follow_path(core, st, opt, opt.gap_tol, [](const Eigen::VectorXd&) { return false; }, msg);
  sol.iterations = st.newton;
  sol.gap = core.total_dim / st.t;
  finish(st.x);
  switch (r) {
    case PathResult::Converged:
    case PathResult::EarlyStop: sol.status = SdpStatus::Optimal; break;
    case PathResult::IterationLimit:
      sol.status = SdpStatus::IterationLimit;
      sol.message = "Newton iteration cap reached";
      break;
    case PathResult::NumericalFailure:
      // A failure after the gap is already tiny still leaves a certified point.
      if (sol.gap <= 1e-7 * (1.0 + std::abs(sol.objective))) {
        sol.status = SdpStatus::Optimal;
      } else {
        sol.status = SdpStatus::NumericalFailure;
        sol.message = msg;
      }
      break;
  }
  return sol;
}

ResidualReport check_solution(const LmiProblem& problem, const Eigen::VectorXd& x, double tol) {
  if (x.size() != problem.num_variables()) throw InputError("solution vector has the wrong dimension");
  ResidualReport rep;
  rep.objective = problem.objective_value(x);
  rep.worst = std::numeric_limits<double>::infinity();
  // Extended precision: blocks with large constant entries (e.g. κ bounds of 1e7) would otherwise
  // carry eigenvalue noise of order ‖F‖·2⁻⁵³, comparable to the 1e-9 acceptance threshold.
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  for (const auto& b : problem.blocks()) {
    double lo = std::numeric_limits<double>::infinity();
    if (b.dim > 0) {
      MatL f = MatL::Zero(b.dim, b.dim);
      auto add = [&f](const std::vector<SymEntry>& entries, long double w) {
        for (const auto& e : entries) {
          f(e.i, e.j) += w * e.value;
          if (e.i != e.j) f(e.j, e.i) += w * e.value;
        }
      };
      add(b.constant, 1.0L);
      for (const auto& [var, entries] : b.coefficients) add(entries, static_cast<long double>(x(var)));
      Eigen::SelfAdjointEigenSolver<MatL> es(f, Eigen::EigenvaluesOnly);
      lo = static_cast<double>(es.eigenvalues()(0));
    }
    rep.min_eigenvalues.push_back(lo);
    rep.worst = std::min(rep.worst, lo);
  }
  rep.passed = !(rep.worst < -tol);
  return rep;
}

// ---------------------------------------------------------------------------
// SDPA sparse format: X = Σ F_i x_i − F_0 ⪰ 0, so F_0 = −(our constant).

std::string export_sdpa(const LmiProblem& problem) {
  const auto& blocks = problem.blocks();
  std::vector<int> matrix_blocks, scalar_blocks;
  for (int k = 0; k < static_cast<int>(blocks.size()); ++k)
    (blocks[k].dim == 1 ? scalar_blocks : matrix_blocks).push_back(k);
  const int nblocks = static_cast<int>(matrix_blocks.size()) + (scalar_blocks.empty() ? 0 : 1);

  std::ostringstream os;
  os << "* govdamp LMI export\n";
  os << problem.num_variables() << "\n" << nblocks << "\n";
  {
    std::string sep;
    for (int k : matrix_blocks) {
      os << sep << blocks[k].dim;
      sep = " ";
    }
    if (!scalar_blocks.empty()) os << sep << -static_cast<int>(scalar_blocks.size());
    os << "\n";
  }
  for (int v = 0; v < problem.num_variables(); ++v) os << (v ? " " : "") << fmt_num(problem.objective()(v));
  os << "\n";

  auto emit = [&](int matno, auto&& entries_of) {
    int blkno = 1;
    for (int k : matrix_blocks) {
      auto entries = entries_of(blocks[k]);
      std::sort(entries.begin(), entries.end(),
                [](const SymEntry& a, const SymEntry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
      for (const auto& e : entries)
        if (e.value != 0.0)
          os << matno << ' ' << blkno << ' ' << e.i + 1 << ' ' << e.j + 1 << ' ' << fmt_num(e.value) << "\n";
      ++blkno;
    }
    for (size_t s = 0; s < scalar_blocks.size(); ++s) {
      double v = 0.0;
      for (const auto& e : entries_of(blocks[scalar_blocks[s]])) v += e.value;
      if (v != 0.0) os << matno << ' ' << blkno << ' ' << s + 1 << ' ' << s + 1 << ' ' << fmt_num(v) << "\n";
    }
  };
  emit(0, [](const LmiBlock& b) {
    std::vector<SymEntry> out;
    for (auto e : b.constant) {
      e.value = -e.value;
      out.push_back(e);
    }
    return out;
  });
  for (int v = 0; v < problem.num_variables(); ++v)
    emit(v + 1, [v](const LmiBlock& b) {
      auto it = b.coefficients.find(v);
      return it == b.coefficients.end() ? std::vector<SymEntry>{} : it->second;
    });
  return os.str();
}

LmiProblem read_sdpa(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, body;
  bool header = true;
  while (std::getline(in, line)) {
    if (header && !line.empty() && (line[0] == '"' || line[0] == '*')) continue;
    header = false;
    for (char& ch : line)
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    body += line + "\n";
  }
  std::istringstream tok(body);
  auto next_int = [&](const char* what) {
    long long v;
    if (!(tok >> v)) throw InputError(std::string("SDPA: cannot read ") + what);
    return static_cast<int>(v);
  };
  auto next_double = [&](const char* what) {
    std::string s;
    if (!(tok >> s)) throw InputError(std::string("SDPA: cannot read ") + what);
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw InputError("SDPA: bad number '" + s + "'");
    }
  };
  const int m = next_int("variable count");
  const int nblocks = next_int("block count");
  if (m < 0 || nblocks < 0) throw InputError("SDPA: negative counts");
  std::vector<int> sizes(nblocks);
  for (auto& s : sizes) s = next_int("block size");

  LmiProblem p;
  for (int v = 0; v < m; ++v) p.add_scalar("x" + std::to_string(v + 1));
  for (int v = 0; v < m; ++v) p.set_objective(v, next_double("objective"));

  // Each SDPA block expands to one matrix block or |size| scalar blocks.
  std::vector<int> first(nblocks);
  std::vector<BlockBuilder> builders;
  for (int b = 0; b < nblocks; ++b) {
    first[b] = static_cast<int>(builders.size());
    if (sizes[b] > 0) {
      builders.emplace_back(sizes[b], "block " + std::to_string(b + 1));
    } else {
      for (int s = 0; s < -sizes[b]; ++s)
        builders.emplace_back(1, "block " + std::to_string(b + 1) + "." + std::to_string(s + 1));
    }
  }
  long long matno;
  while (tok >> matno) {
    const int blk = next_int("block number") - 1;
    const int i = next_int("row") - 1;
    const int j = next_int("column") - 1;
    const double v = next_double("value");
    if (matno < 0 || matno > m || blk < 0 || blk >= nblocks) throw InputError("SDPA: entry out of range");
    const int dim = std::abs(sizes[blk]);
    if (i < 0 || j < 0 || i >= dim || j >= dim) throw InputError("SDPA: entry index out of range");
    BlockBuilder* b;
    int bi = i, bj = j;
    if (sizes[blk] > 0) {
      b = &builders[first[blk]];
    } else {
      if (i != j) throw InputError("SDPA: off-diagonal entry in diagonal block");
      b = &builders[first[blk] + i];
      bi = bj = 0;
    }
    if (matno == 0)
      b->add_constant(bi, bj, -v);
    else
      b->add_term(bi, bj, static_cast<int>(matno - 1), v);
  }
  if (!tok.eof()) throw InputError("SDPA: trailing garbage");
  for (const auto& b : builders) p.add_block(b.positive(0.0));
  return p;
}

}  // namespace govdamp
