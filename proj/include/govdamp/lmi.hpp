#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace govdamp {

// Upper-triangle entry (i <= j, 0-based) of a symmetric matrix.
struct SymEntry {
  int i = 0;
  int j = 0;
  double value = 0.0;
};

// One constraint F(x) = F0 + Σ x_k F_k ⪰ 0, symmetric blocks stored as upper triangles.
struct LmiBlock {
  int dim = 0;
  std::string label;
  std::vector<SymEntry> constant;
  std::map<int, std::vector<SymEntry>> coefficients;  // variable index -> entries

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
  static Eigen::MatrixXd dense(int dim, const std::vector<SymEntry>& entries);
};

struct SymmetricVar {
  int dim = 0;
  std::vector<int> index;  // packed upper triangle, row-major
  int at(int i, int j) const;
};

class LmiProblem {
 public:
  int add_scalar(std::string name);
  SymmetricVar add_symmetric(const std::string& name, int dim);
  void set_objective(int var, double coefficient);
  int add_block(LmiBlock block);

  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& variable_names() const { return names_; }
  const std::vector<LmiBlock>& blocks() const { return blocks_; }
  const Eigen::VectorXd& objective() const { return c_; }
  double objective_value(const Eigen::VectorXd& x) const { return c_.dot(x); }

 private:
  std::vector<std::string> names_;
  Eigen::VectorXd c_ = Eigen::VectorXd(0);
  std::vector<LmiBlock> blocks_;
};

// Accumulates a symmetric affine matrix expression M(x) entry by entry.
class BlockBuilder {
 public:
  BlockBuilder(int dim, std::string label);
  // Both add to entry (i, j) and its mirror.
  void add_constant(int i, int j, double v);
  void add_term(int i, int j, int var, double coefficient);
  // M(x) ⪰ eps·I  ->  F = M - eps·I.
  LmiBlock positive(double eps = 0.0) const;
  // M(x) ⪯ -eps·I ->  F = -M - eps·I.
  LmiBlock negative(double eps = 0.0) const;
  int dim() const { return dim_; }

 private:
  LmiBlock make(double sign, double eps) const;
  int dim_;
  std::string label_;
  std::map<std::pair<int, int>, double> constant_;
  std::map<int, std::map<std::pair<int, int>, double>> terms_;
};

enum class SdpStatus { Optimal, Infeasible, IterationLimit, NumericalFailure };
const char* sdp_status_name(SdpStatus s);

struct SdpOptions {
  double gap_tol = 1e-9;      // relative: gap <= gap_tol·(1 + |objective|)
  double mu = 10.0;           // barrier parameter growth
  int max_newton = 3000;      // total Newton steps (both phases)
  double centering_tol = 1e-9;  // Newton decrement² / 2
};

struct LmiSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<double> min_eigenvalues;  // per block
  double gap = 0.0;
  int iterations = 0;
  std::string message;
};

LmiSolution solve_sdp(const LmiProblem& problem, const SdpOptions& options = {});

struct ResidualReport {
  std::vector<double> min_eigenvalues;
  double worst = 0.0;
  double objective = 0.0;
  bool passed = true;
};

// Recomputes every block's smallest eigenvalue at x, independent of the solver.
ResidualReport check_solution(const LmiProblem& problem, const Eigen::VectorXd& x, double tol = 1e-9);

std::string export_sdpa(const LmiProblem& problem);
LmiProblem read_sdpa(std::string_view text);

}  // namespace govdamp
