#include "govdamp/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "govdamp/errors.hpp"
#include "govdamp/format.hpp"

namespace govdamp {

InterconnectionBounds compute_d_matrices(const ReducedNetwork& net, const Eigen::VectorXd& eq_bar,
                                         const Eigen::VectorXd& ed_bar, const Eigen::VectorXd& scale) {
  const int n = net.size();
  if (eq_bar.size() != n || ed_bar.size() != n || scale.size() != n)
    throw InputError("bound inputs do not match the reduced network size");
  InterconnectionBounds b;
  b.eq_bar = eq_bar;
  b.ed_bar = ed_bar;
  b.scale = scale;
  const Eigen::MatrixXd ym = (net.G.array().square() + net.B.array().square()).sqrt().matrix();

  // d_ij = 4·a_i²·c_j·|Y_ij|·Σ_k e_k|Y_ik|, (a, c, e) per variant.
  auto variant = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& c, const Eigen::VectorXd& e) {
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i) {
      const double row = ym.row(i).dot(e);
      for (int j = 0; j < n; ++j) d(i, j) = 4.0 * a(i) * a(i) * c(j) * ym(i, j) * row * scale(i) * scale(i);
    }
    return d;
  };
  b.qq = variant(eq_bar, eq_bar, eq_bar);
  b.qd = variant(eq_bar, ed_bar, ed_bar);
  b.dq = variant(ed_bar, eq_bar, eq_bar);
  b.dd = variant(ed_bar, ed_bar, ed_bar);
  return b;
}

std::vector<Eigen::MatrixXd> build_H(const InterconnectionBounds& b, const std::vector<int>& universe) {
  const Eigen::MatrixXd d = b.total();
  const int n = static_cast<int>(universe.size());
  std::vector<int> pos(b.size(), -1);
  for (int a = 0; a < n; ++a) pos[universe[a]] = a;

  std::vector<Eigen::MatrixXd> out;
  for (int a = 0; a < n; ++a) {
    const int i = universe[a];
    std::vector<Eigen::RowVectorXd> rows;
    for (int j = 0; j < b.size(); ++j) {
      if (j == i || !(d(i, j) > 0.0)) continue;
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(5 * n);
      const double s = std::sqrt(d(i, j));
      r(5 * a) = s;
      if (pos[j] >= 0) r(5 * pos[j]) = -s;
      rows.push_back(r);
    }
    Eigen::MatrixXd h(static_cast<Eigen::Index>(rows.size()), 5 * n);
    for (size_t r = 0; r < rows.size(); ++r) h.row(static_cast<Eigen::Index>(r)) = rows[r];
    out.push_back(std::move(h));
  }
  return out;
}

double bound_quadratic(const InterconnectionBounds& b, int i, const Eigen::VectorXd& ddelta) {
  const Eigen::MatrixXd d = b.total();
  double s = 0.0;
  for (int j = 0; j < b.size(); ++j) {
    const double y = ddelta(i) - ddelta(j);
    s += d(i, j) * y * y;
  }
  return s;
}

double disturbance_h(const ReducedNetwork& net, const Eigen::VectorXd& scale, int i, const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& delta_e, const Eigen::VectorXd& eq, const Eigen::VectorXd& ed) {
  double h = 0.0;
  for (int j = 0; j < net.size(); ++j) {
    const double dij = delta(i) - delta(j), dije = delta_e(i) - delta_e(j);
    const double cc = std::cos(dij) - std::cos(dije);
    const double ss = std::sin(dij) - std::sin(dije);
    const double g = net.G(i, j), bb = net.B(i, j);
    h += eq(i) * eq(j) * (g * cc + bb * ss) + eq(i) * ed(j) * (bb * cc - g * ss) +
         ed(i) * eq(j) * (-bb * cc + g * ss) + ed(i) * ed(j) * (g * cc + bb * ss);
  }
  return h * scale(i);
}

BoundCheck verify_bound(const InterconnectionBounds& b, const ReducedNetwork& net, const Eigen::VectorXd& delta_e,
                        int samples, double angle_range, std::uint64_t seed) {
  if (samples <= 0) throw InputError("verify_bound needs a positive sample count");
  const int n = b.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  BoundCheck out;
  out.samples = samples;
  out.extrapolated = angle_range > std::acos(-1.0) / 3.0 + 1e-12;
  Eigen::VectorXd dd(n), eq(n), ed(n);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < n; ++k) {
      dd(k) = angle_range * unit(rng);
      eq(k) = b.eq_bar(k) * unit(rng);
      ed(k) = b.ed_bar(k) * unit(rng);
    }
    const Eigen::VectorXd delta = delta_e + dd;
    for (int i = 0; i < n; ++i) {
      const double h = disturbance_h(net, b.scale, i, delta, delta_e, eq, ed);
      const double rhs = bound_quadratic(b, i, dd);
      if (h * h > rhs * (1.0 + 1e-12) + 1e-300) ++out.violations;
      if (rhs > 0.0) out.max_ratio = std::max(out.max_ratio, h * h / rhs);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

LmiAssembly assemble_lmi(const std::vector<DesignBlock>& blocks, const std::vector<Eigen::MatrixXd>& H,
                         const LmiOptions& opt) {
  const int n = static_cast<int>(blocks.size());
  if (n == 0) throw InputError("controller subset is empty");
  if (static_cast<int>(H.size()) != n) throw InputError("one H matrix per designed machine is required");
  for (const auto& h : H)
    if (h.cols() != 5 * n) throw InputError("H matrix has the wrong number of columns");
  if (!opt.beta_bar.empty() && static_cast<int>(opt.beta_bar.size()) != n)
    throw InputError("beta_bar must list one value per designed machine");
  const double eps = opt.eps;

  LmiAssembly a;
  LmiProblem& p = a.problem;
  for (int i = 0; i < n; ++i) {
    const std::string tag = std::to_string(i + 1);
    a.Y.push_back(p.add_symmetric("Y" + tag, 5));
    std::array<int, 5> l;
    for (int q = 0; q < 5; ++q) l[q] = p.add_scalar("L" + tag + "[" + std::to_string(q) + "]");
    a.L.push_back(l);
    a.gamma.push_back(p.add_scalar("gamma" + tag));
    p.set_objective(a.gamma.back(), 1.0);
    if (opt.kappa_mode == KappaMode::Variable) {
      a.kappa_y.push_back(p.add_scalar("kappaY" + tag));
      a.kappa_l.push_back(p.add_scalar("kappaL" + tag));
      p.set_objective(a.kappa_y.back(), 1.0);
      p.set_objective(a.kappa_l.back(), 1.0);
    } else {
      a.kappa_y.push_back(-1);
      a.kappa_l.push_back(-1);
    }
  }

  // Large block: [[W_D, G_D, Y_D𝓗ᵢᵀ…], [G_Dᵀ, −I, 0], [𝓗ᵢY_D, 0, −γᵢI]] ⪯ −εI.
  std::vector<int> offset(n);
  int dim = 6 * n;
  for (int i = 0; i < n; ++i) {
    offset[i] = dim;
    dim += static_cast<int>(H[i].rows());
  }
  BlockBuilder big(dim, "closed-loop");
  for (int i = 0; i < n; ++i) {
    const auto& blk = blocks[i];
    const auto& y = a.Y[i];
    const int o = 5 * i;
    for (int r = 0; r < 5; ++r)
      for (int c = r; c < 5; ++c) {
        // (AY + YAᵀ)(r, c) = Σ_s A(r,s)Y(s,c) + Y(r,s)A(c,s)
        for (int s = 0; s < 5; ++s) {
          if (blk.A(r, s) != 0.0) big.add_term(o + r, o + c, y.at(s, c), blk.A(r, s));
          if (blk.A(c, s) != 0.0) big.add_term(o + r, o + c, y.at(r, s), blk.A(c, s));
        }
        if (blk.B(r) != 0.0) big.add_term(o + r, o + c, a.L[i][c], blk.B(r));
        if (blk.B(c) != 0.0) big.add_term(o + r, o + c, a.L[i][r], blk.B(c));
      }
    for (int r = 0; r < 5; ++r)
      if (blk.G(r) != 0.0) big.add_constant(o + r, 5 * n + i, blk.G(r));
    big.add_constant(5 * n + i, 5 * n + i, -1.0);
  }
  for (int i = 0; i < n; ++i) {
    const auto& h = H[i];
    for (int row = 0; row < h.rows(); ++row) {
      // (𝓗ᵢY_D)(row, 5b+q) = Σ_s 𝓗ᵢ(row, 5b+s)·Y_b(s, q)
      for (int b = 0; b < n; ++b)
        for (int s = 0; s < 5; ++s) {
          const double coef = h(row, 5 * b + s);
          if (coef == 0.0) continue;
          for (int q = 0; q < 5; ++q) big.add_term(offset[i] + row, 5 * b + q, a.Y[b].at(s, q), coef);
        }
      big.add_term(offset[i] + row, offset[i] + row, a.gamma[i], -1.0);
    }
  }
  p.add_block(big.negative(eps));

  for (int i = 0; i < n; ++i) {
    const std::string tag = std::to_string(i + 1);
    BlockBuilder yb(5, "Y" + tag + " > 0");
    for (int r = 0; r < 5; ++r)
      for (int c = r; c < 5; ++c) yb.add_term(r, c, a.Y[i].at(r, c), 1.0);
    p.add_block(yb.positive(eps));

    // [[−κ_L I, Lᵀ], [L, −1]] ⪯ −εI
    BlockBuilder kl(6, "kappaL" + tag);
    for (int r = 0; r < 5; ++r) {
      if (a.kappa_l[i] >= 0)
        kl.add_term(r, r, a.kappa_l[i], -1.0);
      else
        kl.add_constant(r, r, -opt.kappa_l);
      kl.add_term(r, 5, a.L[i][r], 1.0);
    }
    kl.add_constant(5, 5, -1.0);
    p.add_block(kl.negative(eps));

    // [[Y, I], [I, κ_Y I]] ⪰ εI
    BlockBuilder ky(10, "kappaY" + tag);
    for (int r = 0; r < 5; ++r) {
      for (int c = r; c < 5; ++c) ky.add_term(r, c, a.Y[i].at(r, c), 1.0);
      ky.add_constant(r, 5 + r, 1.0);
      if (a.kappa_y[i] >= 0)
        ky.add_term(5 + r, 5 + r, a.kappa_y[i], 1.0);
      else
        ky.add_constant(5 + r, 5 + r, opt.kappa_y);
    }
    p.add_block(ky.positive(eps));

    const double beta = opt.beta_bar.empty() ? 1.0 : opt.beta_bar[i];
    if (!(beta >= 1.0)) throw InputError("beta_bar must be at least 1");
    BlockBuilder gb(1, "gamma" + tag + " bound");
    gb.add_constant(0, 0, 1.0 / (beta * beta));
    gb.add_term(0, 0, a.gamma[i], -1.0);
    p.add_block(gb.positive(eps));
    if (H[i].rows() == 0) {
      // γ only appears in its upper bound here; keep the objective bounded.
      BlockBuilder g0(1, "gamma" + tag + " floor");
      g0.add_term(0, 0, a.gamma[i], 1.0);
      p.add_block(g0.positive(eps));
    }
  }
  return a;
}

ExtractedGains extract_gains(const LmiAssembly& a, const Eigen::VectorXd& x, const std::vector<DesignBlock>& blocks,
                             const LmiOptions& opt) {
  const int n = static_cast<int>(blocks.size());
  ExtractedGains g;
  Eigen::MatrixXd acl = Eigen::MatrixXd::Zero(5 * n, 5 * n);
  for (int i = 0; i < n; ++i) {
    Mat5 y;
    Vec5 l;
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) y(r, c) = x(a.Y[i].at(r, c));
      l(r) = x(a.L[i][r]);
    }
    Eigen::LLT<Mat5> llt(y);
    if (llt.info() != Eigen::Success || y.diagonal().minCoeff() <= 0.0)
      throw NumericalError("Y block " + std::to_string(i + 1) + " is not positive definite");
    Eigen::SelfAdjointEigenSolver<Mat5> es(y, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 1e-14 * es.eigenvalues()(4))
      throw NumericalError("Y block " + std::to_string(i + 1) + " is numerically singular");
    // k = L·Y⁻¹ (row vector): solve Y kᵀ = Lᵀ
    const Vec5 k = llt.solve(l);
    g.Y.push_back(y);
    g.L.push_back(l);
    g.k.push_back(k);
    g.gamma.push_back(x(a.gamma[i]));
    g.kappa_y.push_back(a.kappa_y[i] >= 0 ? x(a.kappa_y[i]) : opt.kappa_y);
    g.kappa_l.push_back(a.kappa_l[i] >= 0 ? x(a.kappa_l[i]) : opt.kappa_l);
    acl.block<5, 5>(5 * i, 5 * i) = blocks[i].A + blocks[i].B * k.transpose();
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(acl, false);
  if (es.info() != Eigen::Success) throw NumericalError("closed-loop eigenvalues did not converge");
  g.closed_loop_eigenvalues = es.eigenvalues();
  g.max_real_part = n ? g.closed_loop_eigenvalues.real().maxCoeff() : 0.0;
  if (!(g.max_real_part < 0.0))
    throw NumericalError("closed loop A_D + B_D K_D is not Hurwitz (max real part " + fmt_num(g.max_real_part) + ")");
  return g;
}

SynthesisResult prepare_design(const PowerSystemCase& c, const SynthesisOptions& opt) {
  SynthesisResult r;
  const int nm = static_cast<int>(c.machines.size());
  if (opt.subset.empty()) {
    for (int k = 0; k < nm; ++k) r.universe.push_back(k);
  } else {
    for (int id : opt.subset) r.universe.push_back(c.machine_index(id));
    std::sort(r.universe.begin(), r.universe.end());
    r.universe.erase(std::unique(r.universe.begin(), r.universe.end()), r.universe.end());
  }
  for (int k : r.universe) {
    const Machine& m = c.machines[k];
    if (!c.governor_for(m.id))
      throw InputError("machine " + std::to_string(m.id) + " has no steam governor and cannot host a controller");
    r.machine_ids.push_back(m.id);
  }

  const PowerFlowSolution pf = solve_power_flow(c);
  r.equilibrium = initialize_from_power_flow(c, pf);
  r.network = kron_reduce(build_ybus(c), c, pf);
  const StateLayout layout = StateLayout::from_case(c);

  Eigen::VectorXd eq_bar(nm), ed_bar(nm), scale(nm);
  for (int k = 0; k < nm; ++k) {
    const auto& l = layout.machines[k];
    eq_bar(k) = opt.e_bar_factor * std::abs(r.equilibrium.x(l.eq));
    ed_bar(k) = std::max(opt.ed_bar_floor, opt.e_bar_factor * std::abs(r.equilibrium.x(l.ed)));
    scale(k) = c.base_mva / c.machines[k].mva;
  }
  r.bounds = compute_d_matrices(r.network, eq_bar, ed_bar, scale);
  r.H = build_H(r.bounds, r.universe);

  r.lmi_options.eps = opt.eps;
  r.lmi_options.kappa_mode = opt.kappa_mode;
  r.lmi_options.kappa_y = opt.kappa_y;
  r.lmi_options.kappa_l = opt.kappa_l;
  for (int k : r.universe) {
    const Machine& m = c.machines[k];
    r.blocks.push_back(build_design_matrices(m, *c.governor_for(m.id), c.omega0()));
    auto it = opt.beta_bar.find(m.id);
    r.lmi_options.beta_bar.push_back(it == opt.beta_bar.end() ? 1.0 : it->second);
  }
  r.assembly = assemble_lmi(r.blocks, r.H, r.lmi_options);
  return r;
}

SynthesisResult design_controllers(const PowerSystemCase& c, const SynthesisOptions& opt) {
  SynthesisResult r = prepare_design(c, opt);
  const int nm = static_cast<int>(c.machines.size());
  const StateLayout layout = StateLayout::from_case(c);
  r.solution = solve_sdp(r.assembly.problem, opt.sdp);
  r.residuals = check_solution(r.assembly.problem, r.solution.x);
  r.controllers = ControllerSet::none(nm);
  if (r.solution.status != SdpStatus::Optimal) {
    r.message = std::string("LMI solve ended with status ") + sdp_status_name(r.solution.status) +
                (r.solution.message.empty() ? "" : ": " + r.solution.message);
    return r;
  }
  r.gains = extract_gains(r.assembly, r.solution.x, r.blocks, r.lmi_options);
  const auto idx = [&](int k) { return layout.design_indices(k); };
  for (size_t a = 0; a < r.universe.size(); ++a) {
    const int k = r.universe[a];
    r.controllers.gains.row(k) = r.gains.k[a].transpose();
    const auto d = idx(k);
    for (int q = 0; q < 5; ++q) r.controllers.reference(k, q) = r.equilibrium.x(d[q]);
    r.controllers.designed[k] = true;
  }
  r.ok = true;
  return r;
}

namespace {

nlohmann::ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt_num(v);
}

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v(k)));
  return a;
}

nlohmann::ordered_json mat_json(const Eigen::MatrixXd& m) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

}  // namespace

nlohmann::ordered_json synthesis_json(const SynthesisResult& r) {
  nlohmann::ordered_json j;
  j["machines"] = r.machine_ids;
  j["config"] = {{"epsilon", r.lmi_options.eps},
                 {"kappa_mode", r.lmi_options.kappa_mode == KappaMode::Fixed ? "fixed" : "variable"},
                 {"kappa_y_fixed", r.lmi_options.kappa_y},
                 {"kappa_l_fixed", r.lmi_options.kappa_l},
                 {"beta_bar", r.lmi_options.beta_bar}};
  j["e_bar"] = {{"eq", vec_json(r.bounds.eq_bar)}, {"ed", vec_json(r.bounds.ed_bar)}};
  j["d_matrix"] = mat_json(r.bounds.total());
  auto h_rows = nlohmann::ordered_json::array();
  for (const auto& h : r.H) h_rows.push_back(h.rows());
  j["h_rows"] = h_rows;
  j["solver"] = {{"status", sdp_status_name(r.solution.status)},
                 {"objective", num(r.solution.objective)},
                 {"gap", num(r.solution.gap)},
                 {"newton_steps", r.solution.iterations},
                 {"message", r.solution.message},
                 {"variables", r.assembly.problem.num_variables()},
                 {"blocks", r.assembly.problem.blocks().size()}};
  auto res = nlohmann::ordered_json::array();
  for (size_t b = 0; b < r.residuals.min_eigenvalues.size(); ++b)
    res.push_back({{"block", r.assembly.problem.blocks()[b].label}, {"min_eigenvalue", num(r.residuals.min_eigenvalues[b])}});
  j["residuals"] = res;
  j["residuals_pass"] = r.residuals.passed;
  j["ok"] = r.ok;
  if (!r.ok) {
    j["message"] = r.message;
    return j;
  }
  auto per = nlohmann::ordered_json::array();
  for (size_t a = 0; a < r.universe.size(); ++a) {
    per.push_back({{"machine", r.machine_ids[a]},
                   {"gain", vec_json(r.gains.k[a])},
                   {"reference", vec_json(r.controllers.reference.row(r.universe[a]).transpose())},
                   {"gamma", num(r.gains.gamma[a])},
                   {"kappa_y", num(r.gains.kappa_y[a])},
                   {"kappa_l", num(r.gains.kappa_l[a])},
                   {"L", vec_json(r.gains.L[a])},
                   {"Y", mat_json(r.gains.Y[a])}});
  }
  j["controllers"] = per;
  auto eig = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < r.gains.closed_loop_eigenvalues.size(); ++k)
    eig.push_back({num(r.gains.closed_loop_eigenvalues(k).real()), num(r.gains.closed_loop_eigenvalues(k).imag())});
  j["design_closed_loop_eigenvalues"] = eig;
  j["design_max_real_part"] = num(r.gains.max_real_part);
  return j;
}

}  // namespace govdamp
