#pragma once

#include <Eigen/Dense>

#include "tdmpc/error.hpp"

namespace tdmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Discrete-time plant x_{k+1} = A x_k + B u_k.
 *
 * Stabilizability of (A, B) is decided once at construction with a PBH rank
 * test on every eigenvalue of A outside the open unit disc.
 */
class LtiModel {
 public:
  LtiModel(Matrix a, Matrix b);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  int n() const { return static_cast<int>(a_.rows()); }
  int m() const { return static_cast<int>(b_.cols()); }
  bool stabilizable() const { return stabilizable_; }

  Vector step(const Vector& x, const Vector& u) const { return a_ * x + b_ * u; }

 private:
  Matrix a_;
  Matrix b_;
  bool stabilizable_ = false;
};

enum class Discretization { kZeroOrderHold, kForwardEuler };

/// Exact zero-order-hold discretization via the exponential of [[Ac, Bc], [0, 0]] * Ts.
LtiModel discretize_zoh(const Matrix& ac, const Matrix& bc, double ts);

/// A = I + Ac Ts, B = Bc Ts. Only for comparison against the exact hold.
LtiModel discretize_euler(const Matrix& ac, const Matrix& bc, double ts);

LtiModel discretize(const Matrix& ac, const Matrix& bc, double ts, Discretization method);

/// Scaling-and-squaring Pade exponential.
Matrix matrix_exponential(const Matrix& m);

/// PBH test: rank [A - lambda I, B] = n for every eigenvalue with |lambda| >= 1.
bool is_stabilizable(const Matrix& a, const Matrix& b, double tol = 1e-9);

double spectral_radius(const Matrix& m);

/// Quadratic weights together with the DARE terminal weight P and LQR gain K.
struct CostSpec {
  Matrix Q;
  Matrix R;
  Matrix P;
  Matrix K;
  int dare_iterations = 0;
  double dare_residual = 0.0;  // relative, ||P - (Q + K'RK + Acl'P Acl)|| / ||P||
};

struct DareOptions {
  double relative_tolerance = 1e-12;
  int max_iterations = 100000;
  double residual_tolerance = 1e-9;
};

/**
 * Solves the standard discrete algebraic Riccati equation by the fixed-point
 * recursion P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA started from P = Q.
 *
 * Throws kCertificate for unstabilizable plants or when the recursion does not
 * meet the residual tolerance within the iteration cap, and kInvalidArgument
 * when Q or R is not symmetric positive definite.
 */
CostSpec solve_dare(const LtiModel& model, const Matrix& q, const Matrix& r, const DareOptions& options = {});

/// Relative residual of the standard DARE written with the gain K.
double dare_residual(const LtiModel& model, const Matrix& q, const Matrix& r, const Matrix& p, const Matrix& k);

bool is_symmetric_positive_definite(const Matrix& m, double tol = 1e-12);

}  // namespace tdmpc
