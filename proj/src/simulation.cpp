#include "tdmpc/simulation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace tdmpc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double quad(const Vector& v, const Matrix& m) { return v.dot(m * v); }

Trajectory start_trajectory(const std::string& mode, const CostSpec& cost, const Vector& x0, int T) {
  require(T >= 1, ErrorCode::kInvalidArgument, "simulation length T must be at least 1");
  Trajectory t;
  t.mode = mode;
  t.x0 = x0;
  t.T = T;
  t.Q = cost.Q;
  t.R = cost.R;
  t.P = cost.P;
  t.states.reserve(T + 1);
  t.states.push_back(x0);
  return t;
}

void finish_trajectory(Trajectory& t) { t.terminal_cost = quad(t.states.back(), t.P); }

// mu*(x), V, psi and d = z - mu* for step k; never part of the timed path.
struct Diagnostics {
  Vector mu;
  double V = 0.0;
};

Diagnostics diagnose(const Design& d, const Vector& x, double tol, OptimalMethod method, const Vector* warm) {
  Diagnostics out;
  SolveStats stats;
  out.mu = solve_optimal(d.qp, d.spectral, x, d.box, tol, method, &stats, warm);
  out.V = std::max(0.0, d.qp.cost(x, out.mu));
  return out;
}

void record_step(Trajectory& t, const Design& d, const Vector& x, const Vector& z, const Vector& u,
                 const Diagnostics& diag, double tau, double eps) {
  t.z_history.push_back(z);
  t.inputs.push_back(u);
  t.stage_costs.push_back(quad(x, t.Q) + quad(u, t.R));
  t.mu_star.push_back(diag.mu);
  t.V_values.push_back(diag.V);
  const double psi = std::sqrt(diag.V);
  const double dn = (z - diag.mu).norm();
  t.psi_values.push_back(psi);
  t.d_norms.push_back(dn);
  t.lyapunov_values.push_back(std::isnan(tau) ? kNaN : psi + tau * dn);
  t.epsilon_at_step.push_back(eps);
  t.horizon_at_step.push_back(d.N());
  t.states.push_back(d.model.step(x, u));
}

std::string step_context(int k) { return " at step " + std::to_string(k); }

// Rethrows with the failing step index appended.
template <typename F>
auto at_step(int k, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), e.what() + step_context(k));
  }
}

struct PhaseCert {
  bool ok = false;
  bool certified = false;
  CertificateSet cert;
};

PhaseCert certify_phase(const Design& d, int ell, bool allow_uncertified, Trajectory& t) {
  PhaseCert pc;
  try {
    pc.cert = compute_certificates(d.model, d.cost, d.qp, d.spectral, d.box);
    pc.ok = true;
  } catch (const Error& e) {
    if (!allow_uncertified) throw;
    t.warnings.push_back("N=" + std::to_string(d.N()) + ": certificates unavailable: " + e.what());
    return pc;
  }
  if (static_cast<double>(ell) > pc.cert.ell_star) {
    pc.cert = with_budget(pc.cert, ell, ell);
    pc.certified = true;
    return pc;
  }
  const std::string msg = "budget " + std::to_string(ell) + " not above ell*(N=" + std::to_string(d.N()) +
                          ") = " + std::to_string(pc.cert.ell_star);
  require(allow_uncertified, ErrorCode::kCertificate, msg + "; set allow_uncertified to run anyway");
  t.warnings.push_back(msg);
  return pc;
}

}  // namespace

Design make_design(const LtiModel& model, const CostSpec& cost, const BoxSet& box, int horizon) {
  require(box.m() == model.m(), ErrorCode::kInvalidArgument, "box dimension does not match the input dimension");
  CondensedQp qp = build_condensed(model, cost, horizon);
  SpectralData spectral = compute_spectral(qp);
  return Design{model, cost, box, std::move(qp), spectral};
}

const char* to_string(WarmStart ws) {
  switch (ws) {
    case WarmStart::kTruncate:
      return "truncate";
    case WarmStart::kCold:
      return "cold";
    case WarmStart::kZeroPad:
      return "zero_pad";
  }
  return "unknown";
}

double Trajectory::total_cost() const {
  double s = terminal_cost;
  for (double c : stage_costs) s += c;
  return s;
}

double Trajectory::cumulative_flops() const {
  double s = 0.0;
  for (double f : flop_proxy) s += f;
  return s;
}

int Trajectory::settling_step(int component, double threshold) const {
  int first = -1;
  for (int k = static_cast<int>(states.size()) - 1; k >= 0; --k) {
    if (std::abs(states[k](component)) > threshold) break;
    first = k;
  }
  return first;
}

TimeDistributedController::TimeDistributedController(const LtiModel& model, const CostSpec& cost, const BoxSet& box,
                                                     int horizon)
    : design_(make_design(model, cost, box, horizon)), z_(Vector::Zero(design_.qp.size())) {}

void TimeDistributedController::reset() { z_.setZero(design_.qp.size()); }

void TimeDistributedController::set_iterate(const Vector& z) {
  require(z.size() == design_.qp.size(), ErrorCode::kInvalidArgument, "iterate length does not match N m");
  require(design_.box.contains(z), ErrorCode::kInvalidArgument, "iterate violates the input box");
  z_ = z;
}

void TimeDistributedController::set_horizon(int horizon, WarmStart warm_start) {
  if (horizon == design_.N()) return;
  const int m = design_.qp.m;
  Design next = make_design(design_.model, design_.cost, design_.box, horizon);
  Vector z = Vector::Zero(next.qp.size());
  const int keep = std::min<int>(z.size(), z_.size());
  switch (warm_start) {
    case WarmStart::kTruncate:
      z.head(keep) = z_.head(keep);
      break;
    case WarmStart::kZeroPad:
      z.head(m) = z_.head(m);
      break;
    case WarmStart::kCold:
      break;
  }
  design_ = std::move(next);
  z_ = std::move(z);
}

Vector TimeDistributedController::step(const Vector& x, int ell) {
  require(ell >= 1, ErrorCode::kInvalidArgument, "iteration budget must be positive");
  z_ = pgm_iterate(design_.qp, design_.spectral, x, z_, design_.box, ell);
  const double nm = design_.qp.size();
  last_h_flops_ = ell * nm * nm;
  last_flops_ = last_h_flops_ + nm * design_.qp.n;
  return z_.head(design_.qp.m);
}

Trajectory run_optimal(const Design& design, const Vector& x0, int T, double tol, OptimalMethod method) {
  require(x0.size() == design.qp.n, ErrorCode::kInvalidArgument, "x0 length does not match the state dimension");
  Trajectory t = start_trajectory("optimal", design.cost, x0, T);
  const Vector* warm = nullptr;
  for (int k = 0; k < T; ++k) {
    const Vector x = t.states.back();
    Diagnostics diag = at_step(k, [&] { return diagnose(design, x, tol, method, warm); });
    const Vector u = diag.mu.head(design.qp.m);
    record_step(t, design, x, diag.mu, u, diag, 0.0, kNaN);
    t.iter_counts.push_back(0);
    t.step_wall_time.push_back(0.0);
    t.flop_proxy.push_back(0.0);
    t.flop_h_term.push_back(0.0);
    warm = &t.mu_star.back();
  }
  finish_trajectory(t);
  return t;
}

Trajectory run_tdmpc(const Design& design, const Vector& x0, const Vector& z_init, int T,
                     std::span<const int> budgets, const SimOptions& options) {
  require(x0.size() == design.qp.n, ErrorCode::kInvalidArgument, "x0 length does not match the state dimension");
  require(static_cast<int>(budgets.size()) == T, ErrorCode::kInvalidArgument, "budget list length must equal T");
  Trajectory t = start_trajectory("tdmpc", design.cost, x0, T);
  TimeDistributedController ctrl(design.model, design.cost, design.box, design.N());
  ctrl.set_iterate(z_init);
  const Vector* warm = nullptr;
  for (int k = 0; k < T; ++k) {
    const Vector x = t.states.back();
    const auto t0 = std::chrono::steady_clock::now();
    const Vector u = at_step(k, [&] { return ctrl.step(x, budgets[k]); });
    const auto t1 = std::chrono::steady_clock::now();
    Diagnostics diag =
        at_step(k, [&] { return diagnose(design, x, options.diagnostic_tol, options.optimal_method, warm); });
    record_step(t, design, x, ctrl.iterate(), u, diag, options.tau, kNaN);
    t.iter_counts.push_back(budgets[k]);
    t.step_wall_time.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    t.flop_proxy.push_back(ctrl.last_flop_proxy());
    t.flop_h_term.push_back(ctrl.last_flop_h_term());
    warm = &t.mu_star.back();
  }
  finish_trajectory(t);
  return t;
}

void validate_schedule(const DimSchedule& s, int T) {
  require(!s.horizons.empty(), ErrorCode::kConfig, "schedule.horizons: at least one horizon required");
  for (std::size_t j = 0; j < s.horizons.size(); ++j) {
    require(s.horizons[j] >= 1, ErrorCode::kConfig, "schedule.horizons: every horizon must be >= 1");
    if (j > 0) {
      require(s.horizons[j] < s.horizons[j - 1], ErrorCode::kConfig,
              "schedule.horizons: horizons must be strictly decreasing");
    }
  }
  const std::size_t p = s.horizons.size() - 1;
  if (!s.online_switching) {
    require(s.switch_times.size() == p, ErrorCode::kConfig,
            "schedule.switch_times: need one switch time per horizon after the first");
    for (std::size_t j = 0; j < p; ++j) {
      require(s.switch_times[j] >= 1, ErrorCode::kConfig, "schedule.switch_times: switch times must be >= 1");
      if (j > 0) {
        require(s.switch_times[j] > s.switch_times[j - 1], ErrorCode::kConfig,
                "schedule.switch_times: switch times must be strictly increasing");
      }
    }
  }
  require(s.phase_budgets.size() == s.horizons.size(), ErrorCode::kConfig,
          "schedule.budgets: need one budget per phase");
  for (int ell : s.phase_budgets) require(ell >= 1, ErrorCode::kConfig, "schedule.budgets: budgets must be >= 1");
  if (!s.step_budgets.empty()) {
    require(static_cast<int>(s.step_budgets.size()) == T, ErrorCode::kConfig,
            "schedule.step_budgets: length must equal T");
    for (int ell : s.step_budgets) {
      require(ell >= 1, ErrorCode::kConfig, "schedule.step_budgets: budgets must be >= 1");
    }
  }
}

std::vector<int> lemma_switch_times(const LtiModel& model, const CostSpec& cost, const BoxSet& box,
                                    const DimSchedule& schedule, const Vector& x0) {
  require(schedule.phase_budgets.size() == schedule.horizons.size(), ErrorCode::kConfig,
          "schedule.budgets: need one budget per phase");
  std::vector<CertificateSet> certs;
  std::vector<Matrix> weights;
  for (std::size_t j = 0; j < schedule.horizons.size(); ++j) {
    Design d = make_design(model, cost, box, schedule.horizons[j]);
    CertificateSet c = compute_certificates(model, cost, d.qp, d.spectral, box);
    const int ell = schedule.phase_budgets[j];
    require(ell > c.ell_star, ErrorCode::kCertificate,
            "switch times from the transition lemma need certified budgets; budget " + std::to_string(ell) +
                " not above ell*(N=" + std::to_string(d.N()) + ") = " + std::to_string(c.ell_star));
    certs.push_back(with_budget(c, ell, ell));
    weights.push_back(d.qp.W);
  }
  std::vector<int> out;
  int prev = 0;
  for (std::size_t j = 1; j < certs.size(); ++j) {
    const double x_norm = std::sqrt(std::max(0.0, quad(x0, weights[j - 1])));
    const int k = switch_time(certs[j - 1], schedule.horizons[j], x_norm, schedule.phase_budgets[j - 1],
                              schedule.kj_variant, &certs[j]);
    prev = std::max(prev + 1, k);
    out.push_back(prev);
  }
  return out;
}

Trajectory run_dim_sumpc(const LtiModel& model, const CostSpec& cost, const BoxSet& box, const Vector& x0,
                         const DimSchedule& schedule, int T, const SimOptions& options) {
  validate_schedule(schedule, T);
  require(x0.size() == model.n(), ErrorCode::kInvalidArgument, "x0 length does not match the state dimension");
  Trajectory t = start_trajectory("dimsumpc", cost, x0, T);
  const int phases = static_cast<int>(schedule.horizons.size());

  TimeDistributedController ctrl(model, cost, box, schedule.horizons[0]);
  std::vector<PhaseCert> certs;
  certs.reserve(phases);
  for (int j = 0; j < phases; ++j) {
    const Design d = j == 0 ? ctrl.design() : make_design(model, cost, box, schedule.horizons[j]);
    certs.push_back(certify_phase(d, schedule.phase_budgets[j], schedule.allow_uncertified, t));
    if (!certs.back().certified) t.uncertified = true;
  }
  if (!schedule.step_budgets.empty()) {
    for (int k = 0; k < T; ++k) {
      // Per-step budgets are certified only if they do not undercut the phase budget tau was chosen for.
      if (schedule.step_budgets[k] < schedule.phase_budgets[0] || t.uncertified) {
        t.uncertified = true;
        break;
      }
    }
    if (t.uncertified && !schedule.allow_uncertified) {
      fail(ErrorCode::kCertificate, "per-step budgets undercut the certified phase budgets");
    }
  }

  std::vector<int> switch_times = schedule.switch_times;
  int phase = 0;
  const Vector* warm = nullptr;
  Vector next_warm;
  auto budget_at = [&](int k) {
    return schedule.step_budgets.empty() ? schedule.phase_budgets[phase] : schedule.step_budgets[k];
  };
  auto online_next = [&](int k_entry, const Vector& x) {
    const PhaseCert& pc = certs[phase];
    require(pc.certified, ErrorCode::kCertificate, "online switching needs certified phase budgets");
    const double xn = std::sqrt(std::max(0.0, quad(x, ctrl.design().qp.W)));
    const CertificateSet* next = certs[phase + 1].certified ? &certs[phase + 1].cert : nullptr;
    const int dk = switch_time(pc.cert, schedule.horizons[phase + 1], xn, schedule.phase_budgets[phase],
                               schedule.kj_variant, next);
    return k_entry + std::max(1, dk);
  };
  if (schedule.online_switching) {
    switch_times.clear();
    if (phases > 1) switch_times.push_back(online_next(0, x0));
  }

  for (int k = 0; k < T; ++k) {
    const Vector x = t.states.back();
    if (phase + 1 < phases && k >= switch_times[phase]) {
      SwitchRecord rec;
      rec.k = k;
      rec.horizon_prev = ctrl.horizon();
      rec.V_prev = diagnose(ctrl.design(), x, options.diagnostic_tol, options.optimal_method, nullptr).V;
      at_step(k, [&] {
        ctrl.set_horizon(schedule.horizons[phase + 1], schedule.warm_start);
        return 0;
      });
      ++phase;
      rec.horizon_next = ctrl.horizon();
      const Diagnostics dn = diagnose(ctrl.design(), x, options.diagnostic_tol, options.optimal_method, nullptr);
      rec.V_next = dn.V;
      if (certs[phase].ok) rec.level = rec.horizon_next * certs[phase].cert.d + certs[phase].cert.c_terminal;
      t.switches.push_back(rec);
      next_warm = dn.mu;
      warm = &next_warm;
      if (schedule.online_switching && phase + 1 < phases) switch_times.push_back(online_next(k, x));
    }
    const Design& design = ctrl.design();
    const int ell = budget_at(k);
    const auto t0 = std::chrono::steady_clock::now();
    const Vector u = at_step(k, [&] { return ctrl.step(x, ell); });
    const auto t1 = std::chrono::steady_clock::now();
    Diagnostics diag =
        at_step(k, [&] { return diagnose(design, x, options.diagnostic_tol, options.optimal_method, warm); });
    const PhaseCert& pc = certs[phase];
    const bool certified_step = pc.certified && ell >= pc.cert.ell_min;
    const double tau = certified_step ? pc.cert.tau : options.tau;
    const double eps = certified_step ? epsilon_rate(pc.cert, ell) : kNaN;
    record_step(t, design, x, ctrl.iterate(), u, diag, tau, eps);
    t.iter_counts.push_back(ell);
    t.step_wall_time.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    t.flop_proxy.push_back(ctrl.last_flop_proxy());
    t.flop_h_term.push_back(ctrl.last_flop_h_term());
    next_warm = t.mu_star.back();
    warm = &next_warm;

    if (k == 0 && certs[0].certified) {
      const RegionStatus rs = region_membership(certs[0].cert, design.qp, design.spectral, x0, ctrl.iterate(), box);
      if (!rs.in_sigma) {
        t.warnings.push_back("initial combined state outside Sigma_N0 (psi = " + std::to_string(rs.psi) +
                             ", r_N = " + std::to_string(certs[0].cert.r_N) + ")");
      }
    }
  }
  finish_trajectory(t);
  return t;
}

namespace {

void check_comparable(const Trajectory& a, const Trajectory& b) {
  require(a.T == b.T, ErrorCode::kInvalidArgument, "trajectories differ in T");
  require(a.x0.size() == b.x0.size() && a.x0 == b.x0, ErrorCode::kInvalidArgument, "trajectories differ in x0");
  auto same = [](const Matrix& p, const Matrix& q) {
    return p.rows() == q.rows() && p.cols() == q.cols() && (p - q).norm() <= 1e-12 * std::max(1.0, p.norm());
  };
  require(same(a.Q, b.Q) && same(a.R, b.R) && same(a.P, b.P), ErrorCode::kInvalidArgument,
          "trajectories differ in the cost matrices Q, R or P");
  require(static_cast<int>(a.stage_costs.size()) == a.T && static_cast<int>(b.stage_costs.size()) == b.T,
          ErrorCode::kInvalidArgument, "trajectory is incomplete");
}

}  // namespace

double incurred_suboptimality(const Trajectory& sub, const Trajectory& opt) {
  check_comparable(sub, opt);
  return sub.total_cost() - opt.total_cost();
}

std::vector<double> cumulative_suboptimality_curve(const Trajectory& sub, const Trajectory& opt) {
  check_comparable(sub, opt);
  std::vector<double> out;
  out.reserve(sub.T + 1);
  double acc = 0.0;
  for (int k = 0; k < sub.T; ++k) {
    acc += sub.stage_costs[k] - opt.stage_costs[k];
    out.push_back(acc);
  }
  out.push_back(acc + sub.terminal_cost - opt.terminal_cost);
  return out;
}

double reconstruction_error(const Trajectory& traj, const LtiModel& model) {
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
    const Vector r = traj.states[k + 1] - model.A() * traj.states[k] - model.B() * traj.inputs[k];
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const Trajectory* opt,
                          const std::vector<std::string>& comments) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  const int n = static_cast<int>(traj.x0.size());
  const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= m; ++i) out << ",u_" << i;
  out << ",V,psi,lyapunov,d_norm,ell_k,horizon,stage_cost,cum_cost,cum_suboptimality,flop_proxy,wall_time_us\n";

  std::vector<double> curve;
  if (opt != nullptr) curve = cumulative_suboptimality_curve(traj, *opt);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  double cum = 0.0;
  for (int k = 0; k <= traj.T; ++k) {
    out << k;
    for (int i = 0; i < n; ++i) num(traj.states[k](i));
    if (k < traj.T) {
      for (int i = 0; i < m; ++i) num(traj.inputs[k](i));
      num(traj.V_values[k]);
      num(traj.psi_values[k]);
      num(traj.lyapunov_values[k]);
      num(traj.d_norms[k]);
      out << ',' << traj.iter_counts[k] << ',' << traj.horizon_at_step[k];
      cum += traj.stage_costs[k];
      num(traj.stage_costs[k]);
      num(cum);
      num(curve.empty() ? kNaN : curve[k]);
      num(traj.flop_proxy[k]);
      num(traj.step_wall_time[k]);
    } else {
      for (int i = 0; i < m; ++i) out << ',';
      out << ",,,,,,";
      cum += traj.terminal_cost;
      num(traj.terminal_cost);
      num(cum);
      num(curve.empty() ? kNaN : curve[k]);
      out << ",,";
    }
    out << '\n';
  }
}

}  // namespace tdmpc
