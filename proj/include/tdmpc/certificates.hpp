#pragma once

#include <span>
#include <string>
#include <vector>

#include "tdmpc/pgm.hpp"

namespace tdmpc {

/**
 * Stability and suboptimality constants of one horizon-N design.
 *
 * The structural part (beta .. ell_star and the auxiliary norms) depends only on
 * plant, cost, box and N. The budget part (tau and everything after it) is
 * filled by with_budget() for a declared minimum iteration budget.
 */
struct CertificateSet {
  int N = 0;
  double alpha = 0.0;
  double eta = 0.0;
  double L = 0.0;
  double lamH_min = 0.0;
  double lamH_max = 0.0;

  double beta = 0.0;
  double lam_W_Q_min = 0.0;  // lambda_W^-(Q)
  double sigma = 0.0;
  double omega = 0.0;
  double kappa = 0.0;
  double lam_H_GB_max = 0.0;  // lambda_H^+(G Bbar) before clamping at zero
  bool gb_symmetrized = false;
  bool gb_clamped = false;
  double lam_P_W_max = 0.0;  // lambda_P^+(W)
  double lam_W_P_min = 0.0;  // lambda_W^-(P)

  double c_terminal = 0.0;
  double d = 0.0;
  double r_N = 0.0;
  double ell_star = 0.0;

  double norm_H_inv_sqrt = 0.0;
  double norm_W_inv_sqrt = 0.0;
  double norm_P_inv_sqrt = 0.0;
  double norm_H_inv_sqrt_G_P_inv_sqrt = 0.0;
  double lam_P_min = 0.0;
  double lam_P_max = 0.0;
  double lam_Q_min = 0.0;
  double lam_W_max = 0.0;
  double norm_Q = 0.0;
  double norm_P = 0.0;
  double norm_R = 0.0;

  bool has_budget = false;
  int ell_min = 0;  // budget tau was selected for
  int ell0 = 0;     // first-step budget used in h0
  double tau = 0.0;
  double tau_lo = 0.0;
  double tau_hi = 0.0;
  double epsilon = 0.0;  // rate at ell_min
  double h0 = 0.0;
  double c_delta_mu = 0.0;
  double b0 = 0.0;
  double cbar = 0.0;
};

struct ContractionConstants {
  double beta = 0.0;
  double sigma = 0.0;
  double omega = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
};

inline ContractionConstants contraction_constants(const CertificateSet& c) {
  return {c.beta, c.sigma, c.omega, c.kappa, c.eta};
}

CertificateSet compute_certificates(const LtiModel& model, const CostSpec& cost, const CondensedQp& qp,
                                    const SpectralData& spectral, const BoxSet& box);

/// Smallest integer budget strictly above ell_star (at least 1).
int minimum_certified_budget(const CertificateSet& cert);

struct TauChoice {
  double tau = 0.0;
  double lo = 0.0;  // open feasible interval
  double hi = 0.0;
  double epsilon = 0.0;
};

/**
 * Picks tau in the open interval (sigma / (1 - eta^l omega), (1 - beta) / (eta^l kappa))
 * minimizing max{beta + tau kappa eta^l, (sigma + tau eta^l omega) / tau}.
 * Throws kCertificate ("budget below ell*") when the interval is empty.
 */
TauChoice select_tau(const ContractionConstants& k, int ell);

/// max{beta + tau kappa eta^l, (sigma + tau eta^l omega) / tau}.
double epsilon_for(const ContractionConstants& k, double tau, int ell);

/// Copy of cert with tau chosen for ell_min and the derived h0, c_delta_mu, b0, cbar.
CertificateSet with_budget(const CertificateSet& cert, int ell_min, int ell0);

/// Certified rate for a step budget ell_k >= the budget tau was chosen for.
double epsilon_rate(const CertificateSet& cert, int ell_k);

/// 1 + tau eta^ell L ||W^{-1/2}||. With ell = ell_0 this is h0.
double h_factor(const CertificateSet& cert, int ell);

/// max{tau^-1, ||H^{-1/2}|| ||H^{-1/2} G P^{-1/2}||}.
double c_delta_mu(const CertificateSet& cert);

/// Incurred-suboptimality constant built from a given h (h0 or the fixed-budget h).
double cbar_constant(const CertificateSet& cert, double h);

enum class Membership { kInside, kOutside, kBoundary };

struct RegionStatus {
  bool in_gamma = false;
  bool in_sigma = false;
  double psi = 0.0;
  double dist = 0.0;  // ||z - mu*(x)||
  Membership gamma = Membership::kOutside;
  Vector mu;
};

/// psi(x) <= r_N and ||z - mu*(x)|| <= (1 - beta) r_N / sigma; 1e-8 band around r_N reported as kBoundary.
RegionStatus region_membership(const CertificateSet& cert, const CondensedQp& qp, const SpectralData& spectral,
                               const Vector& x, const Vector& z, const BoxSet& box);

enum class KjVariant {
  kPreviousHorizon,  // h(N_{j-1}), the sufficient condition derived for the transition
  kNextHorizon,      // h(N_j), the variant written in the closed-form expression
};

/// [log(lam (N_j d + c)) - 2 log(h ||x0||)] / (2 log eps), before rounding.
double switch_time_raw(double lam_w_p_min, double level, double h, double x0_norm, double eps);

/**
 * Steps needed for the N_{j-1} design to enter the level set {V <= N_j d + c}.
 * prev must carry a budget. Returns ceil(max(0, k)).
 */
int switch_time(const CertificateSet& prev, int next_horizon, double x0_norm_w_prev, int ell,
                KjVariant variant = KjVariant::kPreviousHorizon, const CertificateSet* next = nullptr);

/// b0 ||x0||_W prod_{i=-1}^{k-1} eps_i + c ||x0||_W beta^k, eps_{-1} = 1.
double bound_delta_mu(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule, int k);

/// h0 ||P^{-1/2}|| ||x0||_W prod_{i=-1}^{k} eps_i.
double bound_state(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule, int k);

struct SuboptimalityBound {
  double finite_sum = 0.0;
  double geometric = 0.0;
  double cbar = 0.0;
  double eps_bar = 0.0;
};

/// cbar ||x0||^2_W sum_{k=0}^{T} prod_{i=0}^{k} eps_{i-1}^2 and its geometric closed form.
SuboptimalityBound bound_suboptimality(const CertificateSet& cert, double x0_norm_w, std::span<const int> schedule,
                                       int horizon_T);

struct DimPhase {
  const CertificateSet* cert = nullptr;  // with budget
  int switch_time = 0;                   // k_j, zero for the first phase
  int ell = 0;
};

struct DimBound {
  double value = 0.0;
  double cbar_m = 0.0;
  double eps_under = 0.0;  // max_j eps_{k_j}
  double sum = 0.0;
  std::vector<double> dbar;  // dbar_i for i = 1..p
  int phases_used = 0;
};

/// Phases with k_j >= T never start within the run and are left out.
DimBound bound_dim_sumpc(std::span<const DimPhase> phases, double x0_norm_w0, int horizon_T);

enum class BoundKind { kDeltaMu, kStateNorm, kSuboptimalityFixed, kSuboptimalityVarying, kDimSumpc };

const char* to_string(BoundKind kind);

struct BoundReport {
  BoundKind kind = BoundKind::kDeltaMu;
  std::vector<double> theoretical;
  std::vector<double> empirical;
  bool satisfied = true;
  double margin = 0.0;       // min_k (theoretical - empirical)
  int first_violation = -1;  // index of the first empirical > theoretical + 1e-9
};

BoundReport make_bound_report(BoundKind kind, std::vector<double> theoretical, std::vector<double> empirical);

}  // namespace tdmpc
