#include "tdmpc/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tdmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sym_min_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double sym_max_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double eta_power(double eta, int ell) { return ell <= 0 ? 1.0 : std::pow(eta, ell); }

// eps_i for i = -1..k-1 as schedule entries; eps_{-1} = 1.
double rate_product(const CertificateSet& cert, std::span<const int> schedule, int last) {
  double prod = 1.0;
  for (int i = 0; i <= last; ++i) {
    require(i < static_cast<int>(schedule.size()), ErrorCode::kInvalidArgument,
            "budget schedule shorter than the bound index");
    prod *= epsilon_rate(cert, schedule[i]);
  }
  return prod;
}

void require_budget(const CertificateSet& cert) {
  require(cert.has_budget, ErrorCode::kInvalidArgument, "certificate has no budget; call with_budget first");
}

}  // namespace

CertificateSet compute_certificates(const LtiModel& model, const CostSpec& cost, const CondensedQp& qp,
                                    const SpectralData& spectral, const BoxSet& box) {
  require(box.m() == qp.m, ErrorCode::kInvalidArgument, "box dimension does not match the input dimension");
  require(model.n() == qp.n && model.m() == qp.m, ErrorCode::kInvalidArgument,
          "condensed problem does not match the model");
  CertificateSet c;
  c.N = qp.N;
  c.alpha = spectral.alpha;
  c.eta = spectral.eta;
  c.L = spectral.L;
  c.lamH_min = spectral.lamH_min;
  c.lamH_max = spectral.lamH_max;

  c.lam_W_Q_min = weighted_eig_bounds(qp.W, cost.Q).lo;
  require(c.lam_W_Q_min > 0.0 && c.lam_W_Q_min < 1.0, ErrorCode::kCertificate,
          "lambda_W^-(Q) = " + std::to_string(c.lam_W_Q_min) + " outside (0, 1)");
  c.beta = std::sqrt(1.0 - c.lam_W_Q_min);

  const Matrix w_sqrt = sym_sqrt(qp.W);
  c.sigma = spectral_norm(w_sqrt * qp.Bbar);

  const Matrix h_is = sym_inv_sqrt(qp.H);
  const Matrix p_is = sym_inv_sqrt(cost.P);
  c.norm_H_inv_sqrt = spectral_norm(h_is);
  c.norm_P_inv_sqrt = spectral_norm(p_is);
  c.norm_W_inv_sqrt = spectral_norm(sym_inv_sqrt(qp.W));
  const Matrix gb = qp.G * qp.Bbar;
  c.omega = 1.0 + c.norm_H_inv_sqrt * spectral_norm(h_is * gb);

  const EigBounds gb_bounds = weighted_eig_bounds(qp.H, gb);
  c.lam_H_GB_max = gb_bounds.hi;
  c.gb_symmetrized = gb_bounds.symmetrized;
  c.gb_clamped = gb_bounds.hi < 0.0;
  c.lam_P_W_max = weighted_eig_bounds(cost.P, qp.W).hi;
  c.lam_W_P_min = weighted_eig_bounds(qp.W, cost.P).lo;
  const Matrix a_minus_i = model.A() - Matrix::Identity(qp.n, qp.n);
  const double cross = std::sqrt(std::max(0.0, c.lam_H_GB_max) * std::max(0.0, c.lam_P_W_max - 1.0));
  c.kappa = c.norm_H_inv_sqrt * spectral_norm(h_is * qp.G * a_minus_i * p_is) + c.norm_H_inv_sqrt * cross;

  const Matrix p_inv = cost.P.inverse();
  double c_term = kInf;
  for (int i = 0; i < qp.m; ++i) {
    const Vector k_i = cost.K.row(i).transpose();
    const double denom = k_i.dot(p_inv * k_i);
    if (denom <= 0.0) continue;
    const double u = std::min(box.upper()(i), -box.lower()(i));
    c_term = std::min(c_term, u * u / denom);
  }
  require(c_term > 0.0, ErrorCode::kCertificate, "terminal level c is zero: the box touches the origin");
  require(std::isfinite(c_term), ErrorCode::kCertificate, "terminal level c is unbounded: K = 0");
  c.c_terminal = c_term;

  c.lam_P_min = sym_min_eig(cost.P);
  c.lam_P_max = sym_max_eig(cost.P);
  c.lam_Q_min = sym_min_eig(cost.Q);
  c.lam_W_max = sym_max_eig(qp.W);
  c.norm_Q = spectral_norm(cost.Q);
  c.norm_P = spectral_norm(cost.P);
  c.norm_R = spectral_norm(cost.R);
  c.norm_H_inv_sqrt_G_P_inv_sqrt = spectral_norm(h_is * qp.G * p_is);

  c.d = c.c_terminal * c.lam_Q_min / c.lam_P_max;
  c.r_N = std::sqrt(c.N * c.d + c.c_terminal);

  const double denom = c.sigma * c.kappa + c.omega * (1.0 - c.beta);
  require(denom > 0.0, ErrorCode::kCertificate, "sigma kappa + omega (1 - beta) is not positive");
  if (c.eta <= 0.0) {
    c.ell_star = 0.0;
  } else {
    require(c.eta < 1.0, ErrorCode::kCertificate, "PGM contraction factor eta is not below 1");
    c.ell_star = (std::log(1.0 - c.beta) - std::log(denom)) / std::log(c.eta);
  }
  return c;
}

int minimum_certified_budget(const CertificateSet& cert) {
  const double next = std::floor(cert.ell_star) + 1.0;
  require(next < static_cast<double>(std::numeric_limits<int>::max()), ErrorCode::kCertificate,
          "ell* exceeds the representable budget range");
  return std::max(1, static_cast<int>(next));
}

double epsilon_for(const ContractionConstants& k, double tau, int ell) {
  const double q = eta_power(k.eta, ell);
  return std::max(k.beta + tau * k.kappa * q, (k.sigma + tau * q * k.omega) / tau);
}

TauChoice select_tau(const ContractionConstants& k, int ell) {
  require(ell >= 1, ErrorCode::kInvalidArgument, "budget must be a positive integer");
  const double q = eta_power(k.eta, ell);
  require(q * (k.sigma * k.kappa + k.omega * (1.0 - k.beta)) < 1.0 - k.beta, ErrorCode::kCertificate,
          "budget " + std::to_string(ell) + " below ell*: no admissible tau");
  TauChoice t;
  t.lo = k.sigma / (1.0 - q * k.omega);
  t.hi = k.kappa * q > 0.0 ? (1.0 - k.beta) / (q * k.kappa) : kInf;
  // f(tau) = (beta + tau kappa q) - (sigma / tau + q omega) is increasing; its root balances the max.
  auto f = [&](double tau) { return k.beta + tau * k.kappa * q - k.sigma / tau - q * k.omega; };
  double a = t.lo;
  double b = t.hi;
  if (!std::isfinite(b)) {
    b = 2.0 * a;
    for (int i = 0; i < 60 && f(b) < 0.0; ++i) b *= 2.0;
  }
  if (f(b) <= 0.0) {
    t.tau = b;
  } else {
    while (b - a > 1e-12 * b) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (f(mid) < 0.0 ? a : b) = mid;
    }
    t.tau = 0.5 * (a + b);
  }
  if (std::isfinite(t.hi)) {
    const double shrink = 1e-9 * (t.hi - t.lo);
    t.tau = std::clamp(t.tau, t.lo + shrink, t.hi - shrink);
  } else {
    t.tau = std::max(t.tau, t.lo * (1.0 + 1e-9));
  }
  t.epsilon = epsilon_for(k, t.tau, ell);
  return t;
}

double h_factor(const CertificateSet& cert, int ell) {
  require_budget(cert);
  return 1.0 + cert.tau * eta_power(cert.eta, ell) * cert.L * cert.norm_W_inv_sqrt;
}

double c_delta_mu(const CertificateSet& cert) {
  require_budget(cert);
  return std::max(1.0 / cert.tau, cert.norm_H_inv_sqrt * cert.norm_H_inv_sqrt_G_P_inv_sqrt);
}

double cbar_constant(const CertificateSet& cert, double h) {
  const double c4 = c_delta_mu(cert);
  const double b0 = c4 * h;
  const double s = b0 + c4;
  const double input_part = cert.norm_R * s * (s + 2.0 * cert.L / std::sqrt(cert.lam_P_min));
  const double state_part = std::max(cert.norm_Q, cert.norm_P) *
                            (cert.norm_P_inv_sqrt * cert.norm_P_inv_sqrt * h * h + 1.0 / cert.lam_P_min);
  return std::max(input_part, state_part);
}

CertificateSet with_budget(const CertificateSet& cert, int ell_min, int ell0) {
  require(ell0 >= ell_min, ErrorCode::kInvalidArgument, "first-step budget below the minimum budget");
  const TauChoice t = select_tau(contraction_constants(cert), ell_min);
  CertificateSet out = cert;
  out.has_budget = true;
  out.ell_min = ell_min;
  out.ell0 = ell0;
  out.tau = t.tau;
  out.tau_lo = t.lo;
  out.tau_hi = t.hi;
  out.epsilon = t.epsilon;
  out.h0 = h_factor(out, ell0);
  out.c_delta_mu = c_delta_mu(out);
  out.b0 = out.c_delta_mu * out.h0;
  out.cbar = cbar_constant(out, out.h0);
  return out;
}

double epsilon_rate(const CertificateSet& cert, int ell_k) {
  require_budget(cert);
  require(ell_k >= cert.ell_min, ErrorCode::kCertificate,
          "step budget " + std::to_string(ell_k) + " below the certified minimum " + std::to_string(cert.ell_min));
  return epsilon_for(contraction_constants(cert), cert.tau, ell_k);
}

RegionStatus region_membership(const CertificateSet& cert, const CondensedQp& qp, const SpectralData& spectral,
                               const Vector& x, const Vector& z, const BoxSet& box) {
  require(z.size() == qp.size(), ErrorCode::kInvalidArgument, "input vector length does not match N m");
  RegionStatus s;
  const ValueResult v = value_function(qp, spectral, x, box, 1e-10);
  s.mu = v.mu;
  s.psi = std::sqrt(std::max(0.0, v.V));
  s.dist = (z - v.mu).norm();
  s.in_gamma = s.psi <= cert.r_N;
  const double band = 1e-8 * std::max(1.0, cert.r_N);
  if (std::abs(s.psi - cert.r_N) <= band) {
    s.gamma = Membership::kBoundary;
  } else {
    s.gamma = s.in_gamma ? Membership::kInside : Membership::kOutside;
  }
  s.in_sigma = s.in_gamma && s.dist <= (1.0 - cert.beta) * cert.r_N / cert.sigma;
  return s;
}

double switch_time_raw(double lam_w_p_min, double level, double h, double x0_norm, double eps) {
  require(eps > 0.0 && eps < 1.0, ErrorCode::kCertificate, "switch time needs a rate in (0, 1)");
  require(lam_w_p_min > 0.0 && level > 0.0, ErrorCode::kInvalidArgument, "switch time needs positive levels");
  if (x0_norm <= 0.0 || h <= 0.0) return 0.0;
  return (std::log(lam_w_p_min * level) - 2.0 * std::log(h * x0_norm)) / (2.0 * std::log(eps));
}

int switch_time(const CertificateSet& prev, int next_horizon, double x0_norm_w_prev, int ell, KjVariant variant,
                const CertificateSet* next) {
  require(next_horizon >= 1, ErrorCode::kInvalidArgument, "next horizon must be positive");
  const double eps = epsilon_rate(prev, ell);
  double h = h_factor(prev, ell);
  if (variant == KjVariant::kNextHorizon) {
    require(next != nullptr, ErrorCode::kInvalidArgument, "next-horizon variant needs the next certificate");
    h = h_factor(*next, std::max(ell, next->ell_min));
  }
  const double level = next_horizon * prev.d + prev.c_terminal;
  const double raw = switch_time_raw(prev.lam_W_P_min, level, h, x0_norm_w_prev, eps);
  const double k = std::ceil(std::max(0.0, raw));
  require(k < static_cast<double>(std::numeric_limits<int>::max()), ErrorCode::kCertificate,
          "switch time exceeds the representable range");
  return static_cast<int>(k);
}

double bound_delta_mu(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule, int k) {
  require_budget(cert);
  require(k >= 0, ErrorCode::kInvalidArgument, "bound index must be non-negative");
  require(!schedule.empty(), ErrorCode::kInvalidArgument, "budget schedule is empty");
  const double b0 = cert.c_delta_mu * h_factor(cert, schedule[0]);
  return b0 * x0_norm_w * rate_product(cert, schedule, k - 1) +
         cert.c_delta_mu * x0_norm_w * std::pow(cert.beta, k);
}

double bound_state(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule, int k) {
  require_budget(cert);
  require(k >= 0, ErrorCode::kInvalidArgument, "bound index must be non-negative");
  require(!schedule.empty(), ErrorCode::kInvalidArgument, "budget schedule is empty");
  return h_factor(cert, schedule[0]) * cert.norm_P_inv_sqrt * x0_norm_w * rate_product(cert, schedule, k);
}

SuboptimalityBound bound_suboptimality(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule,
                                       int horizon_T) {
  require_budget(cert);
  require(horizon_T >= 1, ErrorCode::kInvalidArgument, "simulation length must be positive");
  require(static_cast<int>(schedule.size()) >= horizon_T, ErrorCode::kInvalidArgument,
          "budget schedule shorter than the simulation length");
  SuboptimalityBound b;
  b.cbar = cbar_constant(cert, h_factor(cert, schedule[0]));
  const double scale = b.cbar * x0_norm_w * x0_norm_w;
  double prod = 1.0;  // prod_{i=0}^{k} eps_{i-1}^2
  double sum = 0.0;
  b.eps_bar = 0.0;
  for (int k = 0; k <= horizon_T; ++k) {
    if (k >= 1) {
      const double e = epsilon_rate(cert, schedule[k - 1]);
      prod *= e * e;
      b.eps_bar = std::max(b.eps_bar, e);
    }
    sum += prod;
  }
  b.finite_sum = scale * sum;
  b.geometric = scale / (1.0 - b.eps_bar * b.eps_bar);
  return b;
}

DimBound bound_dim_sumpc(std::span<const DimPhase> phases, double x0_norm_w0, int horizon_T) {
  require(!phases.empty(), ErrorCode::kInvalidArgument, "no phases");
  require(phases[0].switch_time == 0, ErrorCode::kInvalidArgument, "first phase must start at k = 0");
  DimBound out;
  int used = 0;
  for (const DimPhase& p : phases) {
    require(p.cert != nullptr, ErrorCode::kInvalidArgument, "phase without certificate");
    require_budget(*p.cert);
    if (p.switch_time >= horizon_T && used > 0) break;
    ++used;
  }
  double prod_d = 1.0;
  double sum = 0.0;
  for (int j = 0; j < used; ++j) {
    const DimPhase& p = phases[j];
    const double h = h_factor(*p.cert, p.ell);
    const double eps = epsilon_rate(*p.cert, p.ell);
    out.cbar_m = std::max(out.cbar_m, cbar_constant(*p.cert, h));
    out.eps_under = std::max(out.eps_under, eps);
    if (j >= 1) {
      const double dbar = h * h * p.cert->lam_W_max * p.cert->norm_P_inv_sqrt * p.cert->norm_P_inv_sqrt;
      out.dbar.push_back(dbar);
      prod_d *= dbar;
    }
    sum += std::pow(eps, 2.0 * p.switch_time) * prod_d;
  }
  out.sum = sum;
  out.phases_used = used;
  out.value = out.cbar_m * x0_norm_w0 * x0_norm_w0 / (1.0 - out.eps_under) * sum;
  return out;
}

const char* to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::kDeltaMu:
      return "delta_mu";
    case BoundKind::kStateNorm:
      return "state_norm";
    case BoundKind::kSuboptimalityFixed:
      return "suboptimality_fixed";
    case BoundKind::kSuboptimalityVarying:
      return "suboptimality_varying";
    case BoundKind::kDimSumpc:
      return "dim_sumpc";
  }
  return "unknown";
}

BoundReport make_bound_report(BoundKind kind, std::vector<double> theoretical, std::vector<double> empirical) {
  require(theoretical.size() == empirical.size(), ErrorCode::kInvalidArgument, "bound and sample lengths differ");
  BoundReport r;
  r.kind = kind;
  r.margin = kInf;
  for (std::size_t i = 0; i < theoretical.size(); ++i) {
    const double gap = theoretical[i] - empirical[i];
    r.margin = std::min(r.margin, gap);
    if (empirical[i] > theoretical[i] + 1e-9 && r.first_violation < 0) {
      r.first_violation = static_cast<int>(i);
      r.satisfied = false;
    }
  }
  if (theoretical.empty()) r.margin = 0.0;
  r.theoretical = std::move(theoretical);
  r.empirical = std::move(empirical);
  return r;
}

}  // namespace tdmpc
