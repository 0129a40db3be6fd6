#pragma once

#include <vector>

#include "tdmpc/condensed.hpp"

namespace tdmpc {

/// Per-input interval constraint U = [lower, upper]; must contain the origin.
class BoxSet {
 public:
  BoxSet(Vector lower, Vector upper);

  static BoxSet symmetric(int m, double bound);

  int m() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  /// Clamps each m-block of a stacked input vector. Length must be a multiple of m.
  Vector project(const Vector& nu) const;
  bool contains(const Vector& nu, double tol = 1e-12) const;

  double lower_at(Eigen::Index stacked_index) const { return lower_(stacked_index % lower_.size()); }
  double upper_at(Eigen::Index stacked_index) const { return upper_(stacked_index % upper_.size()); }

 private:
  Vector lower_;
  Vector upper_;
};

inline Vector project(const Vector& nu, const BoxSet& box) { return box.project(nu); }

/// One projected-gradient step T(x, nu) = Pi[nu - alpha * 2(H nu + G x)].
Vector pgm_step(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu,
                const BoxSet& box);

/// l-fold composition of pgm_step.
Vector pgm_iterate(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu0,
                   const BoxSet& box, int ell);

struct PgmTrace {
  Vector nu;
  std::vector<double> step_norms;  // ||nu_{i+1} - nu_i|| for each iteration
};

/// pgm_iterate that also returns the iterate-distance sequence.
PgmTrace pgm_iterate_traced(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu0,
                            const BoxSet& box, int ell);

/// Fixed-point residual ||T(x, nu) - nu||.
double fixed_point_residual(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu,
                            const BoxSet& box);

enum class OptimalMethod {
  kActiveSetPolish,    // primal active-set solve, certified by the PGM residual, PGM fallback
  kProjectedGradient,  // PGM until the fixed-point residual meets tol
};

struct SolveStats {
  long pgm_iterations = 0;
  int active_set_iterations = 0;
  double residual = 0.0;
  bool active_set_converged = false;
};

/**
 * Computes mu*(x) to fixed-point tolerance tol.
 *
 * The PGM continuation is capped at ceil(log(tol/D)/log(eta)) + 1e4 iterations,
 * D being the initial residual; exceeding the cap throws a ResidualError.
 */
Vector solve_optimal(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const BoxSet& box,
                     double tol, OptimalMethod method = OptimalMethod::kActiveSetPolish, SolveStats* stats = nullptr,
                     const Vector* warm_start = nullptr);

/**
 * Primal active-set method for min nu'H nu + 2 nu'g over the box, started from
 * a feasible point. Terminates at an exact KKT point or throws kNumerical when
 * the iteration cap is reached.
 */
Vector box_qp_active_set(const Matrix& h, const Vector& g, const BoxSet& box, const Vector& start,
                         int* iterations = nullptr);

/**
 * Exhaustive KKT enumeration over {lower, free, upper}^{Nm}; Nm <= 12.
 * Ties in objective (within 1e-10) are broken by the lexicographically smallest nu.
 */
Vector active_set_enumerate(const CondensedQp& qp, const Vector& x, const BoxSet& box);

/// V(x) = J_N(x, mu*(x)) together with the minimizer.
struct ValueResult {
  double V = 0.0;
  Vector mu;
};

ValueResult value_function(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const BoxSet& box,
                           double tol = 1e-10);

}  // namespace tdmpc
