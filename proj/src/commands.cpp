#include "tdmpc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace tdmpc {

namespace {

using nlohmann::json;

constexpr double kDecaySlack = 1e-8;
constexpr double kTransitionSlack = 1e-6;
constexpr double kThetaThreshold = 1e-3;

json num12(double v) {
  if (!std::isfinite(v)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

double w_norm(const Vector& x, const Matrix& w) { return std::sqrt(std::max(0.0, x.dot(w * x))); }

std::string hint_for(const CertificateSet& cert, int ell) {
  return "budget " + std::to_string(ell) + " is not above ell*(N=" + std::to_string(cert.N) +
         ") = " + std::to_string(cert.ell_star) + "; increase ell above ell* (auto budget " +
         (cert.ell_star < 1e9 ? std::to_string(auto_budget(cert)) : std::string("out of range")) +
         ") or set allow_uncertified";
}

CertificateSet certify_design(const Design& d) {
  try {
    return compute_certificates(d.model, d.cost, d.qp, d.spectral, d.box);
  } catch (const Error& e) {
    fail(e.code(), std::string("N=") + std::to_string(d.N()) + ": " + e.what() +
                       "; remediation: check that Q, R are positive definite and W dominates P and Q");
  }
}

json budget_json(const CertificateSet& cert) {
  return {{"ell_min", cert.ell_min},
          {"ell0", cert.ell0},
          {"certified", true},
          {"tau", num12(cert.tau)},
          {"tau_interval", {num12(cert.tau_lo), num12(cert.tau_hi)}},
          {"epsilon", num12(cert.epsilon)},
          {"h0", num12(cert.h0)},
          {"c_delta_mu", num12(cert.c_delta_mu)},
          {"b0", num12(cert.b0)},
          {"cbar", num12(cert.cbar)}};
}

// Budget block of one design: certified constants, or the refusal hint when overrides are allowed.
json design_report(const Design& d, int ell_min, int ell0, bool allow_uncertified, CertificateSet* certified) {
  const CertificateSet cert = certify_design(d);
  json out = certificate_to_json(cert);
  out["minimum_certified_budget"] = cert.ell_star < 1e9 ? json(minimum_certified_budget(cert)) : json(nullptr);
  if (ell_min <= 0) return out;
  if (ell_min > cert.ell_star) {
    const CertificateSet b = with_budget(cert, ell_min, ell0);
    out["budget"] = budget_json(b);
    if (certified != nullptr) *certified = b;
  } else {
    require(allow_uncertified, ErrorCode::kCertificate, hint_for(cert, ell_min));
    out["budget"] = {{"ell_min", ell_min}, {"certified", false}, {"hint", hint_for(cert, ell_min)}};
  }
  return out;
}

std::vector<std::string> csv_comments(const ScenarioConfig& c) {
  std::vector<std::string> out{"config_hash " + config_hash(c)};
  for (const std::string& d : decisions(c)) out.push_back("decision " + d);
  return out;
}

std::string trajectory_csv(const ScenarioConfig& c, const Trajectory& t, const Trajectory* opt) {
  std::ostringstream ss;
  write_trajectory_csv(ss, t, opt, csv_comments(c));
  return ss.str();
}

json switches_json(const Trajectory& t) {
  json out = json::array();
  for (const SwitchRecord& s : t.switches) {
    out.push_back({{"k", s.k},
                   {"horizon_prev", s.horizon_prev},
                   {"horizon_next", s.horizon_next},
                   {"V_prev", s.V_prev},
                   {"V_next", s.V_next},
                   {"level", s.level}});
  }
  return out;
}

std::vector<int> min_phase_budgets(const ScenarioRun& run, const Trajectory& t) {
  std::vector<int> out(run.schedule.horizons.size(), std::numeric_limits<int>::max());
  std::size_t phase = 0;
  for (int k = 0; k < t.T; ++k) {
    while (phase + 1 < run.schedule.horizons.size() && t.horizon_at_step[k] != run.schedule.horizons[phase]) ++phase;
    out[phase] = std::min(out[phase], t.iter_counts[k]);
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (out[j] == std::numeric_limits<int>::max()) out[j] = run.schedule.phase_budgets[j];
  }
  return out;
}

json report_json(const BoundReport& r) {
  json out = {{"kind", to_string(r.kind)},
              {"satisfied", r.satisfied},
              {"margin", r.margin},
              {"first_violation", r.first_violation}};
  if (r.first_violation >= 0) {
    out["theoretical_at_violation"] = r.theoretical[r.first_violation];
    out["empirical_at_violation"] = r.empirical[r.first_violation];
  }
  out["theoretical"] = r.theoretical;
  out["empirical"] = r.empirical;
  return out;
}

json decay_json(const DecayCheck& d) {
  return {{"checked", d.checked},
          {"skipped", d.skipped},
          {"max_excess", d.max_excess},
          {"first_violation", d.first_violation},
          {"satisfied", d.satisfied}};
}

void same_setup(const ScenarioConfig& a, const ScenarioConfig& b) {
  auto same = [](const json& x, const json& y, const char* what) {
    require(x == y, ErrorCode::kConfig, std::string("compare: scenarios differ in ") + what);
  };
  const json ja = to_json(a);
  const json jb = to_json(b);
  same(ja["model"], jb["model"], "model");
  same(ja["cost"], jb["cost"], "cost");
  same(ja["box"], jb["box"], "box");
  same(ja["x0"], jb["x0"], "x0");
  same(ja["T"], jb["T"], "T");
}

}  // namespace

std::vector<std::string> decisions(const ScenarioConfig& c) {
  std::vector<std::string> out{
      "pgm_step=nu-2*alpha*(H*nu+G*x),alpha=1/(lamH_max+lamH_min)",
      "W=Ahat'*Hhat*Ahat",
      std::string("discretization=") +
          (c.model.continuous ? (c.model.method == Discretization::kZeroOrderHold ? "zoh" : "euler") : "discrete"),
      "dare=fixed_point_iteration",
      "optimal_solver=active_set+pgm_residual",
      "kappa=sym(G*Bbar),clamped_at_0",
      "diagnostics_excluded_from_timing_and_flop_proxy",
      std::string("allow_uncertified=") + (c.allow_uncertified ? "true" : "false"),
  };
  if (c.mode == Mode::kDimSumpc) {
    const char* kj = c.switch_kind == SwitchKind::kExplicit ? "explicit"
                     : c.switch_kind == SwitchKind::kAuto   ? "offline_from_x0"
                                                            : "online";
    out.push_back(std::string("switch_times=") + kj);
    out.push_back(std::string("k_j_h=") +
                  (c.kj_variant == KjVariant::kPreviousHorizon ? "h(N_{j-1})" : "h(N_j)"));
    out.push_back(std::string("warm_start=") + to_string(c.warm_start));
  }
  return out;
}

json certificate_to_json(const CertificateSet& c) {
  return {{"N", c.N},
          {"alpha", num12(c.alpha)},
          {"eta", num12(c.eta)},
          {"L", num12(c.L)},
          {"lamH_min", num12(c.lamH_min)},
          {"lamH_max", num12(c.lamH_max)},
          {"beta", num12(c.beta)},
          {"lambda_W_Q_min", num12(c.lam_W_Q_min)},
          {"sigma", num12(c.sigma)},
          {"omega", num12(c.omega)},
          {"kappa", num12(c.kappa)},
          {"lambda_H_GBbar_max", num12(c.lam_H_GB_max)},
          {"GBbar_symmetrized", c.gb_symmetrized},
          {"GBbar_clamped", c.gb_clamped},
          {"lambda_P_W_max", num12(c.lam_P_W_max)},
          {"lambda_W_P_min", num12(c.lam_W_P_min)},
          {"c_terminal", num12(c.c_terminal)},
          {"d", num12(c.d)},
          {"r_N", num12(c.r_N)},
          {"ell_star", num12(c.ell_star)}};
}

ScenarioRun run_scenario(const ScenarioConfig& c) {
  LtiModel model = build_model(c);
  CostSpec cost = build_cost(c, model);
  BoxSet box = build_box(c);
  const Design d0 = make_design(model, cost, box, initial_horizon(c));
  ScenarioRun run{model, cost, box, {}, {}, {}, {}};
  run.optimal = run_optimal(d0, c.x0, c.T, c.optimal_tol);
  switch (c.mode) {
    case Mode::kOptimal:
      run.trajectory = run.optimal;
      break;
    case Mode::kTdmpc: {
      run.budgets = resolve_budgets(c, d0);
      SimOptions opts;
      opts.diagnostic_tol = c.optimal_tol;
      const int ell_min = *std::min_element(run.budgets.begin(), run.budgets.end());
      CertificateSet cert;
      bool certified = false;
      try {
        cert = compute_certificates(model, cost, d0.qp, d0.spectral, box);
        if (ell_min > cert.ell_star) {
          cert = with_budget(cert, ell_min, run.budgets[0]);
          opts.tau = cert.tau;
          certified = true;
        } else {
          require(c.allow_uncertified, ErrorCode::kCertificate, hint_for(cert, ell_min));
        }
      } catch (const Error& e) {
        if (!c.allow_uncertified || e.code() != ErrorCode::kCertificate) throw;
      }
      run.trajectory = run_tdmpc(d0, c.x0, Vector::Zero(d0.qp.size()), c.T, run.budgets, opts);
      if (certified) {
        for (int k = 0; k < c.T; ++k) run.trajectory.epsilon_at_step[k] = epsilon_rate(cert, run.budgets[k]);
      } else {
        run.trajectory.uncertified = true;
        run.trajectory.warnings.push_back("budgets are not certified (allow_uncertified)");
      }
      break;
    }
    case Mode::kDimSumpc: {
      run.schedule = resolve_schedule(c, model, cost, box);
      SimOptions opts;
      opts.diagnostic_tol = c.optimal_tol;
      run.trajectory = run_dim_sumpc(model, cost, box, c.x0, run.schedule, c.T, opts);
      break;
    }
  }
  return run;
}

DecayCheck check_lyapunov_decay(const Trajectory& t, const CertificateSet& cert) {
  require(cert.has_budget, ErrorCode::kInvalidArgument, "Lyapunov check needs a certified budget");
  DecayCheck out;
  out.max_excess = -std::numeric_limits<double>::infinity();
  const double band = 1e-8 * std::max(1.0, cert.r_N);
  const double d_radius = (1.0 - cert.beta) * cert.r_N / cert.sigma;
  for (int k = 0; k + 1 < static_cast<int>(t.psi_values.size()); ++k) {
    const bool boundary = std::abs(t.psi_values[k] - cert.r_N) <= band;
    if (boundary || t.psi_values[k] > cert.r_N || t.d_norms[k] > d_radius) {
      ++out.skipped;
      continue;
    }
    const double lk = t.psi_values[k] + cert.tau * t.d_norms[k];
    const double lk1 = t.psi_values[k + 1] + cert.tau * t.d_norms[k + 1];
    const double excess = lk1 - epsilon_rate(cert, t.iter_counts[k + 1]) * lk;
    ++out.checked;
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > kDecaySlack && out.first_violation < 0) {
      out.first_violation = k;
      out.satisfied = false;
    }
  }
  if (out.checked == 0) out.max_excess = 0.0;
  return out;
}

DecayCheck check_auxiliary_dynamics(const Trajectory& t, const CertificateSet& cert) {
  DecayCheck out;
  out.max_excess = -std::numeric_limits<double>::infinity();
  const double band = 1e-8 * std::max(1.0, cert.r_N);
  for (int k = 0; k + 1 < static_cast<int>(t.psi_values.size()); ++k) {
    if (t.psi_values[k] > cert.r_N || std::abs(t.psi_values[k] - cert.r_N) <= band) {
      ++out.skipped;
      continue;
    }
    const double q = std::pow(cert.eta, t.iter_counts[k + 1]);
    const double e1 = t.psi_values[k + 1] - (cert.beta * t.psi_values[k] + cert.sigma * t.d_norms[k]);
    const double e2 = t.d_norms[k + 1] - q * (cert.kappa * t.psi_values[k] + cert.omega * t.d_norms[k]);
    const double excess = std::max(e1, e2);
    ++out.checked;
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > kDecaySlack && out.first_violation < 0) {
      out.first_violation = k;
      out.satisfied = false;
    }
  }
  if (out.checked == 0) out.max_excess = 0.0;
  return out;
}

ValueDecayCheck check_value_decay(const Design& d, const CertificateSet& cert, int samples, std::uint64_t seed) {
  require(samples >= 0, ErrorCode::kInvalidArgument, "sample count must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int n = d.qp.n;
  const Matrix p_is = sym_inv_sqrt(d.cost.P);
  const double beta2 = cert.beta * cert.beta;
  ValueDecayCheck out;
  const int max_attempts = 50 * samples + 100;
  while (out.samples < samples) {
    require(out.attempts < max_attempts, ErrorCode::kNumerical, "value-decay sampling rejected too many points");
    ++out.attempts;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    const double u = uniform(rng);
    if (v.norm() == 0.0) continue;
    const Vector x = p_is * (v / v.norm()) * (cert.r_N * std::pow(u, 1.0 / n));
    const ValueResult vx = value_function(d.qp, d.spectral, x, d.box);
    if (std::sqrt(std::max(0.0, vx.V)) > cert.r_N) continue;
    ++out.samples;
    const Vector x1 = d.model.step(x, vx.mu.head(d.qp.m));
    const ValueResult v1 = value_function(d.qp, d.spectral, x1, d.box);
    out.max_lower_excess = std::max(out.max_lower_excess, x.dot(d.cost.P * x) - vx.V);
    out.max_upper_excess = std::max(out.max_upper_excess, vx.V - x.dot(d.qp.W * x));
    out.max_decay_excess = std::max(out.max_decay_excess, v1.V - beta2 * vx.V);
  }
  out.satisfied = out.max_lower_excess <= kDecaySlack && out.max_upper_excess <= kDecaySlack &&
                  out.max_decay_excess <= kDecaySlack;
  return out;
}

CommandOutput cmd_certify(const ScenarioConfig& c) {
  const LtiModel model = build_model(c);
  const CostSpec cost = build_cost(c, model);
  const BoxSet box = build_box(c);
  json rep = {{"command", "certify"},
              {"name", c.name},
              {"config_hash", config_hash(c)},
              {"decisions", decisions(c)},
              {"mode", to_string(c.mode)}};
  rep["model"] = {{"A", matrix_to_json(model.A())},
                  {"B", matrix_to_json(model.B())},
                  {"stabilizable", model.stabilizable()},
                  {"P", matrix_to_json(cost.P)},
                  {"K", matrix_to_json(cost.K)},
                  {"dare_iterations", cost.dare_iterations},
                  {"dare_residual", num12(cost.dare_residual)}};
  json designs = json::array();
  if (c.mode == Mode::kDimSumpc) {
    const DimSchedule s = resolve_schedule(c, model, cost, box);
    for (std::size_t j = 0; j < s.horizons.size(); ++j) {
      const Design d = make_design(model, cost, box, s.horizons[j]);
      designs.push_back(design_report(d, s.phase_budgets[j], s.phase_budgets[j], c.allow_uncertified, nullptr));
    }
    rep["switch_times"] = s.online_switching ? json("online") : json(s.switch_times);
  } else {
    const Design d = make_design(model, cost, box, c.horizon);
    int ell_min = 0;
    int ell0 = 0;
    if (c.mode == Mode::kTdmpc) {
      const std::vector<int> budgets = resolve_budgets(c, d);
      ell_min = *std::min_element(budgets.begin(), budgets.end());
      ell0 = budgets[0];
    }
    designs.push_back(design_report(d, ell_min, ell0, c.allow_uncertified, nullptr));
  }
  rep["designs"] = designs;
  return {rep, {}};
}

CommandOutput cmd_simulate(const ScenarioConfig& c, int repeat) {
  require(repeat >= 1, ErrorCode::kInvalidArgument, "repeat must be at least 1");
  ScenarioRun run = run_scenario(c);
  std::vector<double> mean_time = run.trajectory.step_wall_time;
  for (int r = 1; r < repeat; ++r) {
    const ScenarioRun again = run_scenario(c);
    for (int k = 0; k <= c.T; ++k) {
      require(again.trajectory.states[k] == run.trajectory.states[k], ErrorCode::kNumerical,
              "repeated run diverged at step " + std::to_string(k));
    }
    for (int k = 0; k < c.T; ++k) mean_time[k] += again.trajectory.step_wall_time[k];
  }
  for (double& v : mean_time) v /= repeat;
  run.trajectory.step_wall_time = mean_time;

  const Trajectory& t = run.trajectory;
  const bool is_optimal = c.mode == Mode::kOptimal;
  json rep = {{"command", "simulate"},
              {"name", c.name},
              {"config_hash", config_hash(c)},
              {"decisions", decisions(c)},
              {"mode", to_string(c.mode)},
              {"T", c.T},
              {"repeat", repeat},
              {"J_T", t.total_cost()},
              {"J_T_optimal", run.optimal.total_cost()},
              {"incurred_suboptimality", incurred_suboptimality(t, run.optimal)},
              {"settling_step_x1", t.settling_step(0, kThetaThreshold)},
              {"final_state", std::vector<double>(t.states.back().data(), t.states.back().data() + t.x0.size())},
              {"cumulative_flop_proxy", t.cumulative_flops()},
              {"uncertified", t.uncertified},
              {"warnings", t.warnings},
              {"switches", switches_json(t)}};
  double total_time = 0.0;
  for (double v : mean_time) total_time += v;
  rep["mean_step_wall_time_us"] = total_time / c.T;

  if (c.mode == Mode::kTdmpc && !t.uncertified) {
    const Design d = make_design(run.model, run.cost, run.box, c.horizon);
    CertificateSet cert = compute_certificates(run.model, run.cost, d.qp, d.spectral, run.box);
    cert = with_budget(cert, *std::min_element(run.budgets.begin(), run.budgets.end()), run.budgets[0]);
    const SuboptimalityBound b = bound_suboptimality(cert, w_norm(c.x0, d.qp.W), run.budgets, c.T);
    rep["certificate"] = budget_json(cert);
    rep["bounds"] = {{"suboptimality_finite_sum", b.finite_sum}, {"suboptimality_geometric", b.geometric}};
  }
  CommandOutput out{rep, {}};
  out.files.push_back({".csv", trajectory_csv(c, t, is_optimal ? nullptr : &run.optimal)});
  if (!is_optimal) out.files.push_back({"_optimal.csv", trajectory_csv(c, run.optimal, nullptr)});
  return out;
}

CommandOutput cmd_compare(const ScenarioConfig& a, const ScenarioConfig& b) {
  same_setup(a, b);
  const ScenarioRun ra = run_scenario(a);
  const ScenarioRun rb = run_scenario(b);
  const Trajectory& ta = ra.trajectory;
  const Trajectory& tb = rb.trajectory;
  const std::vector<double> ca = cumulative_suboptimality_curve(ta, ra.optimal);
  const std::vector<double> cb = cumulative_suboptimality_curve(tb, rb.optimal);
  json rep = {{"command", "compare"},
              {"config_hash_a", config_hash(a)},
              {"config_hash_b", config_hash(b)},
              {"name_a", a.name},
              {"name_b", b.name},
              {"decisions_a", decisions(a)},
              {"decisions_b", decisions(b)},
              {"J_T_a", ta.total_cost()},
              {"J_T_b", tb.total_cost()},
              {"delta_J_T", tb.total_cost() - ta.total_cost()},
              {"R_a", ca.back()},
              {"R_b", cb.back()},
              {"cumulative_flop_proxy_a", ta.cumulative_flops()},
              {"cumulative_flop_proxy_b", tb.cumulative_flops()},
              {"flop_ratio_b_over_a", ta.cumulative_flops() > 0.0 ? json(tb.cumulative_flops() / ta.cumulative_flops())
                                                                   : json(nullptr)},
              {"settling_step_x1_a", ta.settling_step(0, kThetaThreshold)},
              {"settling_step_x1_b", tb.settling_step(0, kThetaThreshold)},
              {"uncertified_a", ta.uncertified},
              {"uncertified_b", tb.uncertified}};
  std::ostringstream csv;
  csv << "# config_hash_a " << config_hash(a) << "\n# config_hash_b " << config_hash(b) << '\n';
  for (const std::string& d : decisions(a)) csv << "# decision " << d << '\n';
  csv << "k,cum_suboptimality_a,cum_suboptimality_b,flop_proxy_a,flop_proxy_b,cum_flop_proxy_a,cum_flop_proxy_b\n";
  double fa = 0.0;
  double fb = 0.0;
  char buf[256];
  for (int k = 0; k <= a.T; ++k) {
    const double pa = k < a.T ? ta.flop_proxy[k] : 0.0;
    const double pb = k < a.T ? tb.flop_proxy[k] : 0.0;
    fa += pa;
    fb += pb;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k, ca[k], cb[k], pa, pb, fa, fb);
    csv << buf;
  }
  return {rep, {{".csv", csv.str()}}};
}

CommandOutput cmd_verify_bounds(const ScenarioConfig& c) {
  require(c.mode != Mode::kOptimal, ErrorCode::kConfig, "mode: verify-bounds needs tdmpc or dimsumpc");
  require(!c.allow_uncertified, ErrorCode::kCertificate,
          "allow_uncertified: bounds hold only for certified budgets; verify-bounds refuses overrides");
  const ScenarioRun run = run_scenario(c);
  const Trajectory& t = run.trajectory;
  require(!t.uncertified, ErrorCode::kCertificate, "run is not certified");
  const double R = incurred_suboptimality(t, run.optimal);

  json rep = {{"command", "verify-bounds"},
              {"name", c.name},
              {"config_hash", config_hash(c)},
              {"decisions", decisions(c)},
              {"mode", to_string(c.mode)},
              {"incurred_suboptimality", R},
              {"warnings", t.warnings}};
  json reports = json::array();
  bool all = true;
  auto add = [&](const BoundReport& r) {
    all = all && r.satisfied;
    reports.push_back(report_json(r));
  };

  const Design d0 = make_design(run.model, run.cost, run.box, initial_horizon(c));
  const double x0w = w_norm(c.x0, d0.qp.W);
  if (c.mode == Mode::kTdmpc) {
    CertificateSet cert = compute_certificates(run.model, run.cost, d0.qp, d0.spectral, run.box);
    cert = with_budget(cert, *std::min_element(run.budgets.begin(), run.budgets.end()), run.budgets[0]);
    rep["certificate"] = budget_json(cert);
    const RegionStatus rs = region_membership(cert, d0.qp, d0.spectral, c.x0, t.z_history[0], run.box);
    rep["initial_in_sigma"] = rs.in_sigma;
    std::vector<double> th_mu;
    std::vector<double> em_mu;
    std::vector<double> th_x;
    std::vector<double> em_x;
    for (int k = 0; k < c.T; ++k) {
      th_mu.push_back(bound_delta_mu(cert, x0w, run.budgets, k));
      em_mu.push_back((t.z_history[k] - run.optimal.z_history[k]).norm());
      th_x.push_back(bound_state(cert, x0w, run.budgets, k));
      em_x.push_back(t.states[k].norm());
    }
    add(make_bound_report(BoundKind::kDeltaMu, th_mu, em_mu));
    add(make_bound_report(BoundKind::kStateNorm, th_x, em_x));
    const SuboptimalityBound sb = bound_suboptimality(cert, x0w, run.budgets, c.T);
    const bool fixed = std::adjacent_find(run.budgets.begin(), run.budgets.end(), std::not_equal_to<>()) ==
                       run.budgets.end();
    add(make_bound_report(fixed ? BoundKind::kSuboptimalityFixed : BoundKind::kSuboptimalityVarying,
                          {sb.finite_sum, sb.geometric}, {R, R}));
    const DecayCheck lyap = check_lyapunov_decay(t, cert);
    const DecayCheck aux = check_auxiliary_dynamics(t, cert);
    const ValueDecayCheck vd = check_value_decay(d0, cert, c.samples, c.seed);
    rep["lyapunov_decay"] = decay_json(lyap);
    rep["auxiliary_dynamics"] = decay_json(aux);
    rep["value_decay_samples"] = {{"samples", vd.samples},
                                  {"attempts", vd.attempts},
                                  {"seed", c.seed},
                                  {"max_lower_excess", vd.max_lower_excess},
                                  {"max_upper_excess", vd.max_upper_excess},
                                  {"max_decay_excess", vd.max_decay_excess},
                                  {"satisfied", vd.satisfied}};
    all = all && lyap.satisfied && aux.satisfied && vd.satisfied;
  } else {
    std::vector<CertificateSet> certs;
    const std::vector<int> ells = min_phase_budgets(run, t);
    for (std::size_t j = 0; j < run.schedule.horizons.size(); ++j) {
      const Design d = make_design(run.model, run.cost, run.box, run.schedule.horizons[j]);
      certs.push_back(with_budget(compute_certificates(run.model, run.cost, d.qp, d.spectral, run.box), ells[j], ells[j]));
    }
    std::vector<DimPhase> phases;
    for (std::size_t j = 0; j < certs.size(); ++j) {
      const int kj = j == 0 ? 0 : (j - 1 < t.switches.size() ? t.switches[j - 1].k : c.T);
      phases.push_back({&certs[j], kj, ells[j]});
    }
    const DimBound db = bound_dim_sumpc(phases, x0w, c.T);
    add(make_bound_report(BoundKind::kDimSumpc, {db.value}, {R}));
    rep["dim_bound"] = {{"cbar_m", db.cbar_m}, {"eps_under", db.eps_under}, {"dbar", db.dbar},
                        {"phases_used", db.phases_used}};
    json transitions = json::array();
    for (const SwitchRecord& s : t.switches) {
      const bool ok = s.V_prev <= s.level + kTransitionSlack && s.V_next <= s.level + kTransitionSlack;
      all = all && ok;
      transitions.push_back({{"k", s.k}, {"V_prev", s.V_prev}, {"V_next", s.V_next}, {"level", s.level},
                             {"satisfied", ok}});
    }
    rep["transitions"] = transitions;
  }
  rep["reports"] = reports;
  rep["all_satisfied"] = all;
  return {rep, {}};
}

void write_outputs(const CommandOutput& output, const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::pair<fs::path, std::string>> files{{fs::path(dir) / (stem + ".json"), output.report.dump(2) + "\n"}};
  for (const OutputFile& f : output.files) files.push_back({fs::path(dir) / (stem + f.suffix), f.content});
  std::vector<fs::path> staged;
  for (const auto& [path, content] : files) {
    const fs::path tmp = path.string() + ".partial";
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    out.close();
    if (!out) {
      for (const fs::path& p : staged) fs::remove(p, ec);
      fs::remove(tmp, ec);
      fail(ErrorCode::kIo, "cannot write " + tmp.string());
    }
    staged.push_back(tmp);
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::rename(staged[i], files[i].first, ec);
    require(!ec, ErrorCode::kIo, "cannot move " + staged[i].string() + " into place: " + ec.message());
  }
}

}  // namespace tdmpc
