#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "govdamp/case_model.hpp"
#include "govdamp/dynamics.hpp"
#include "govdamp/lmi.hpp"
#include "govdamp/powerflow.hpp"

namespace govdamp {

// d_ij for each variant; row i holds the diagonal of 𝒟ᵢ. Machine-base scaling already applied.
struct InterconnectionBounds {
  Eigen::VectorXd eq_bar, ed_bar;
  Eigen::VectorXd scale;  // system base / machine rating
  Eigen::MatrixXd qq, qd, dq, dd;

  Eigen::MatrixXd total() const { return qq + qd + dq + dd; }
  int size() const { return static_cast<int>(qq.rows()); }
};

InterconnectionBounds compute_d_matrices(const ReducedNetwork& net, const Eigen::VectorXd& eq_bar,
                                         const Eigen::VectorXd& ed_bar, const Eigen::VectorXd& scale);

// 𝓗ᵢ over the stacked design state of `universe` (indices into the case machine list).
// Row √d_ij·(e_δi − e_δj) for each j with d_ij > 0; when j lies outside the universe
// the row keeps only the e_δi part (Δδ_j enters as an exogenous signal).
std::vector<Eigen::MatrixXd> build_H(const InterconnectionBounds& b, const std::vector<int>& universe);

// Σ_j d_ij (Δδ_i − Δδ_j)², i.e. 4yᵢᵀ𝒟ᵢyᵢ.
double bound_quadratic(const InterconnectionBounds& b, int i, const Eigen::VectorXd& ddelta);

// Exact disturbance hᵢ (machine base) for absolute angles delta against equilibrium angles delta_e.
double disturbance_h(const ReducedNetwork& net, const Eigen::VectorXd& scale, int i, const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& delta_e, const Eigen::VectorXd& eq, const Eigen::VectorXd& ed);

struct BoundCheck {
  int samples = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max hᵢ² / bound over samples with nonzero bound
  bool extrapolated = false;
};

// Monte Carlo: Δδ uniform in ±angle_range, E'q, E'd uniform within ±Ē.
BoundCheck verify_bound(const InterconnectionBounds& b, const ReducedNetwork& net, const Eigen::VectorXd& delta_e,
                        int samples, double angle_range, std::uint64_t seed);

enum class KappaMode { Fixed, Variable };

struct LmiOptions {
  double eps = 1e-6;
  std::vector<double> beta_bar;  // per universe machine
  KappaMode kappa_mode = KappaMode::Fixed;
  double kappa_y = 20.0;
  double kappa_l = 1e7;
};

struct LmiAssembly {
  LmiProblem problem;
  std::vector<SymmetricVar> Y;
  std::vector<std::array<int, 5>> L;
  std::vector<int> gamma, kappa_y, kappa_l;  // -1 when fixed
};

LmiAssembly assemble_lmi(const std::vector<DesignBlock>& blocks, const std::vector<Eigen::MatrixXd>& H,
                         const LmiOptions& opt);

struct ExtractedGains {
  std::vector<Mat5> Y;
  std::vector<Vec5> L;
  std::vector<Vec5> k;
  std::vector<double> gamma, kappa_y, kappa_l;
  Eigen::VectorXcd closed_loop_eigenvalues;
  double max_real_part = 0.0;
};

// kᵢ = Lᵢ Yᵢ⁻¹; throws NumericalError if a Yᵢ is singular or A_D + B_D K_D is not Hurwitz.
ExtractedGains extract_gains(const LmiAssembly& a, const Eigen::VectorXd& x, const std::vector<DesignBlock>& blocks,
                             const LmiOptions& opt);

struct SynthesisOptions {
  std::vector<int> subset;                // machine ids; empty = every machine
  std::map<int, double> beta_bar;         // per machine id, default 1
  double eps = 1e-6;
  KappaMode kappa_mode = KappaMode::Fixed;
  double kappa_y = 20.0;
  double kappa_l = 1e7;
  double e_bar_factor = 1.3;
  double ed_bar_floor = 0.1;
  SdpOptions sdp;
};

struct SynthesisResult {
  std::vector<int> universe;  // machine indices
  std::vector<int> machine_ids;
  Equilibrium equilibrium;
  ReducedNetwork network;
  InterconnectionBounds bounds;
  std::vector<Eigen::MatrixXd> H;
  std::vector<DesignBlock> blocks;
  LmiOptions lmi_options;
  LmiAssembly assembly;
  LmiSolution solution;
  ResidualReport residuals;
  bool ok = false;
  ExtractedGains gains;
  ControllerSet controllers;
  std::string message;
};

// Everything up to the assembled LMI (no solve).
SynthesisResult prepare_design(const PowerSystemCase& c, const SynthesisOptions& opt = {});

// Power flow → equilibrium → reduction → bounds → LMI → gains. Subset machines must have governors
// (InputError otherwise). A non-optimal solve is returned with ok = false.
SynthesisResult design_controllers(const PowerSystemCase& c, const SynthesisOptions& opt = {});

nlohmann::ordered_json synthesis_json(const SynthesisResult& r);

}  // namespace govdamp
