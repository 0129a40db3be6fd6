#pragma once

#include "json.hpp"

#include "tdmpc/lti.hpp"

namespace tdmpc {

/// Prediction matrices stacking xi_0..xi_N = Ahat x + Bhat nu, and the stage weight Hhat = diag(I_N (x) Q, P).
struct CondensingBlocks {
  Matrix Ahat;  // (N+1)n x n
  Matrix Bhat;  // (N+1)n x Nm
  Matrix Hhat;  // (N+1)n x (N+1)n
};

CondensingBlocks build_condensing_blocks(const LtiModel& model, const CostSpec& cost, int horizon);

/**
 * Horizon-N condensed problem: J_N(x, nu) = x'Wx + 2 nu'Gx + nu'H nu = ||(x, nu)||^2_M.
 */
struct CondensedQp {
  int N = 0;
  int n = 0;
  int m = 0;
  Matrix H;     // Nm x Nm
  Matrix G;     // Nm x n
  Matrix W;     // n x n
  Matrix Bbar;  // n x Nm, B times the first-input selector
  Matrix M;     // (n+Nm) x (n+Nm), [[W, G'], [G, H]]

  int size() const { return N * m; }
  /// ||(x, nu)||^2_M.
  double cost(const Vector& x, const Vector& nu) const;
};

/**
 * Builds H = Bhat' Hhat Bhat + I_N (x) R, G = Bhat' Hhat Ahat and W = Ahat' Hhat Ahat.
 *
 * Ahat' Hhat Ahat already carries the stage weight Q of xi_0, so W equals the
 * cost of the zero input sequence. Throws kInvalidArgument for N < 1 and
 * kCertificate if W - Q or W - P is not positive semidefinite.
 */
CondensedQp build_condensed(const LtiModel& model, const CostSpec& cost, int horizon);

/// Step size, contraction factor and Lipschitz constant derived from the spectrum of H.
struct SpectralData {
  double alpha = 0.0;  // 1 / (lamH_max + lamH_min), applied to grad J_N = 2(H nu + G x)
  double eta = 0.0;    // (lamH_max - lamH_min) / (lamH_max + lamH_min)
  double lamH_min = 0.0;
  double lamH_max = 0.0;
  double L = 0.0;  // ||H^{-1/2}|| ||H^{-1/2} G||
};

SpectralData compute_spectral(const CondensedQp& qp);

struct EigBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool symmetrized = false;  // true when X was replaced by (X + X')/2
};

/// Extreme eigenvalues of Mw^{-1/2} sym(X) Mw^{-1/2}.
EigBounds weighted_eig_bounds(const Matrix& mw, const Matrix& x);

/// Symmetric X with X Mw X = I. Throws kNumerical when lambda_min(Mw) <= 1e-12 lambda_max(Mw).
Matrix sym_inv_sqrt(const Matrix& mw);

/// Symmetric square root of a positive semidefinite matrix.
Matrix sym_sqrt(const Matrix& mw);

double spectral_norm(const Matrix& m);

/// Debug dump; matrices as row-major nested arrays.
nlohmann::json to_json(const CondensedQp& qp);

nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace tdmpc
