#include "tdmpc/pgm.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace tdmpc {

namespace {

constexpr double kProjectionSlack = 1e-12;

Vector stacked(const Vector& block, int copies) { return block.replicate(copies, 1); }

void check_qp_args(const CondensedQp& qp, const Vector& x, const Vector& nu, const BoxSet& box) {
  require(x.size() == qp.n, ErrorCode::kInvalidArgument, "state has length " + std::to_string(x.size()) +
                                                             ", expected " + std::to_string(qp.n));
  require(nu.size() == qp.size(), ErrorCode::kInvalidArgument, "input vector has length " +
                                                                   std::to_string(nu.size()) + ", expected " +
                                                                   std::to_string(qp.size()));
  require(box.m() == qp.m, ErrorCode::kInvalidArgument, "box dimension does not match the input dimension");
}

// Shared inner loop; the gradient offset G x is formed once per call.
class PgmKernel {
 public:
  PgmKernel(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const BoxSet& box)
      : h_(qp.H),
        gx_(qp.G * x),
        lo_(stacked(box.lower(), qp.N)),
        hi_(stacked(box.upper(), qp.N)),
        step_(2.0 * spectral.alpha),
        scratch_(qp.size()) {}

  void apply(Vector& nu) {
    scratch_.noalias() = h_ * nu;
    scratch_ += gx_;
    nu -= step_ * scratch_;
    nu = nu.cwiseMax(lo_).cwiseMin(hi_);
  }

  Vector project(const Vector& nu) const { return nu.cwiseMax(lo_).cwiseMin(hi_); }

 private:
  const Matrix& h_;
  Vector gx_;
  Vector lo_;
  Vector hi_;
  double step_;
  Vector scratch_;
};

Vector feasible_start(const Vector& nu, const BoxSet& box) {
  return box.contains(nu, kProjectionSlack) ? nu : box.project(nu);
}

}  // namespace

BoxSet::BoxSet(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(lower_.size() >= 1 && lower_.size() == upper_.size(), ErrorCode::kInvalidArgument,
          "box bounds must be non-empty and of equal length");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    require(!std::isnan(lower_(i)) && !std::isnan(upper_(i)), ErrorCode::kInvalidArgument, "box bound is NaN");
    require(lower_(i) <= 0.0 && upper_(i) >= 0.0, ErrorCode::kInvalidArgument,
            "box must contain the origin (component " + std::to_string(i) + ")");
    require(lower_(i) < upper_(i), ErrorCode::kInvalidArgument,
            "box lower bound must be below the upper bound (component " + std::to_string(i) + ")");
  }
}

BoxSet BoxSet::symmetric(int m, double bound) {
  return BoxSet(Vector::Constant(m, -bound), Vector::Constant(m, bound));
}

Vector BoxSet::project(const Vector& nu) const {
  require(nu.size() % m() == 0, ErrorCode::kInvalidArgument, "stacked input length is not a multiple of m");
  const int copies = static_cast<int>(nu.size() / m());
  return nu.cwiseMax(stacked(lower_, copies)).cwiseMin(stacked(upper_, copies));
}

bool BoxSet::contains(const Vector& nu, double tol) const {
  if (nu.size() % m() != 0) return false;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (nu(i) < lower_at(i) - tol || nu(i) > upper_at(i) + tol) return false;
  }
  return true;
}

Vector pgm_step(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu,
                const BoxSet& box) {
  return pgm_iterate(qp, spectral, x, nu, box, 1);
}

Vector pgm_iterate(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu0,
                   const BoxSet& box, int ell) {
  check_qp_args(qp, x, nu0, box);
  require(ell >= 1, ErrorCode::kInvalidArgument, "iteration count must be at least 1");
  PgmKernel kernel(qp, spectral, x, box);
  Vector nu = feasible_start(nu0, box);
  for (int i = 0; i < ell; ++i) kernel.apply(nu);
  return nu;
}

PgmTrace pgm_iterate_traced(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu0,
                            const BoxSet& box, int ell) {
  check_qp_args(qp, x, nu0, box);
  require(ell >= 1, ErrorCode::kInvalidArgument, "iteration count must be at least 1");
  PgmKernel kernel(qp, spectral, x, box);
  PgmTrace trace;
  trace.nu = feasible_start(nu0, box);
  trace.step_norms.reserve(static_cast<std::size_t>(ell));
  Vector previous;
  for (int i = 0; i < ell; ++i) {
    previous = trace.nu;
    kernel.apply(trace.nu);
    trace.step_norms.push_back((trace.nu - previous).norm());
  }
  return trace;
}

double fixed_point_residual(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const Vector& nu,
                            const BoxSet& box) {
  check_qp_args(qp, x, nu, box);
  PgmKernel kernel(qp, spectral, x, box);
  Vector next = nu;
  kernel.apply(next);
  return (next - nu).norm();
}

Vector box_qp_active_set(const Matrix& h, const Vector& g, const BoxSet& box, const Vector& start, int* iterations) {
  enum State : signed char { kLower = -1, kFree = 0, kUpper = 1 };
  const Eigen::Index size = g.size();
  Vector nu = box.project(start);
  std::vector<State> state(static_cast<std::size_t>(size), kFree);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (nu(i) <= box.lower_at(i)) state[i] = kLower;
    else if (nu(i) >= box.upper_at(i)) state[i] = kUpper;
  }

  const double scale = 1.0 + g.lpNorm<Eigen::Infinity>() + h.lpNorm<Eigen::Infinity>();
  const int max_iterations = 10 * static_cast<int>(size) + 100;
  bool stationary = false;
  std::vector<Eigen::Index> free_idx;
  for (int it = 0; it < max_iterations; ++it) {
    if (iterations) *iterations = it + 1;
    if (!stationary) {
      free_idx.clear();
      for (Eigen::Index i = 0; i < size; ++i)
        if (state[i] == kFree) free_idx.push_back(i);
      if (free_idx.empty()) {
        stationary = true;
      } else {
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        Matrix hff(nf, nf);
        Vector rhs(nf);
        const Vector grad = h * nu + g;
        for (Eigen::Index a = 0; a < nf; ++a) {
          rhs(a) = -grad(free_idx[a]);
          for (Eigen::Index b = 0; b < nf; ++b) hff(a, b) = h(free_idx[a], free_idx[b]);
        }
        Eigen::LLT<Matrix> llt(hff);
        require(llt.info() == Eigen::Success, ErrorCode::kNumerical, "reduced Hessian is not positive definite");
        const Vector p = llt.solve(rhs);

        double t = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
          const Eigen::Index i = free_idx[a];
          double ti = std::numeric_limits<double>::infinity();
          if (p(a) < 0.0 && std::isfinite(box.lower_at(i))) ti = (box.lower_at(i) - nu(i)) / p(a);
          else if (p(a) > 0.0 && std::isfinite(box.upper_at(i))) ti = (box.upper_at(i) - nu(i)) / p(a);
          if (ti < t) {
            t = std::max(ti, 0.0);
            blocking = a;
          }
        }
        for (Eigen::Index a = 0; a < nf; ++a) nu(free_idx[a]) += t * p(a);
        if (blocking >= 0) {
          const Eigen::Index i = free_idx[blocking];
          const bool low = p(blocking) < 0.0;
          nu(i) = low ? box.lower_at(i) : box.upper_at(i);
          state[i] = low ? kLower : kUpper;
          continue;
        }
        stationary = true;
      }
    }

    // Stationary on the working set: release the bound with the most negative multiplier.
    const Vector grad = h * nu + g;
    const double tol = 1e-12 * (scale + h.lpNorm<Eigen::Infinity>() * nu.lpNorm<Eigen::Infinity>());
    Eigen::Index release = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < size; ++i) {
      const double multiplier = state[i] == kLower ? grad(i) : state[i] == kUpper ? -grad(i) : 0.0;
      if (multiplier < worst) {
        worst = multiplier;
        release = i;
      }
    }
    if (release < 0) return nu;
    state[release] = kFree;
    stationary = false;
  }
  fail(ErrorCode::kNumerical, "active-set iteration cap reached");
}

Vector solve_optimal(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const BoxSet& box,
                     double tol, OptimalMethod method, SolveStats* stats, const Vector* warm_start) {
  require(tol > 0.0, ErrorCode::kInvalidArgument, "solver tolerance must be positive");
  const Vector zero = Vector::Zero(qp.size());
  check_qp_args(qp, x, warm_start ? *warm_start : zero, box);
  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  st = SolveStats{};

  PgmKernel kernel(qp, spectral, x, box);
  Vector nu = kernel.project(warm_start ? *warm_start : zero);
  if (method == OptimalMethod::kActiveSetPolish) {
    try {
      nu = box_qp_active_set(qp.H, qp.G * x, box, nu, &st.active_set_iterations);
      st.active_set_converged = true;
    } catch (const Error&) {
      st.active_set_converged = false;
    }
  }

  Vector next = nu;
  kernel.apply(next);
  double residual = (next - nu).norm();
  st.residual = residual;
  if (residual <= tol) return st.active_set_converged ? nu : next;

  const double log_eta = std::log(spectral.eta);
  long cap = 10000;
  if (spectral.eta < 1.0 - 1e-12 && std::isfinite(log_eta)) {
    cap += static_cast<long>(std::ceil(std::max(0.0, std::log(tol / residual) / log_eta)));
  }
  for (long it = 0; it < cap; ++it) {
    nu = next;
    kernel.apply(next);
    ++st.pgm_iterations;
    residual = (next - nu).norm();
    if (residual <= tol) {
      st.residual = residual;
      return next;
    }
  }
  st.residual = residual;
  throw ResidualError(ErrorCode::kNumerical,
                      "projected gradient did not reach tolerance within " + std::to_string(cap) + " iterations",
                      residual);
}

Vector active_set_enumerate(const CondensedQp& qp, const Vector& x, const BoxSet& box) {
  const int size = qp.size();
  require(size <= 12, ErrorCode::kInvalidArgument,
          "enumeration oracle refuses Nm = " + std::to_string(size) + " (limit 12)");
  check_qp_args(qp, x, Vector::Zero(size), box);
  const Vector g = qp.G * x;
  const double scale = 1.0 + g.lpNorm<Eigen::Infinity>() + qp.H.lpNorm<Eigen::Infinity>();
  const double feas_tol = 1e-9;
  const double mult_tol = 1e-9 * scale;

  long total = 1;
  for (int i = 0; i < size; ++i) total *= 3;

  bool found = false;
  Vector best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> code(static_cast<std::size_t>(size));
  std::vector<Eigen::Index> free_idx;
  for (long c = 0; c < total; ++c) {
    long rest = c;
    bool valid = true;
    Vector nu = Vector::Zero(size);
    free_idx.clear();
    for (int i = 0; i < size; ++i) {
      code[i] = static_cast<int>(rest % 3);
      rest /= 3;
      if (code[i] == 0) {
        if (!std::isfinite(box.lower_at(i))) valid = false;
        nu(i) = box.lower_at(i);
      } else if (code[i] == 2) {
        if (!std::isfinite(box.upper_at(i))) valid = false;
        nu(i) = box.upper_at(i);
      } else {
        free_idx.push_back(i);
      }
    }
    if (!valid) continue;

    if (!free_idx.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Matrix hff(nf, nf);
      Vector rhs(nf);
      const Vector partial = qp.H * nu + g;  // nu is zero on the free coordinates here
      for (Eigen::Index a = 0; a < nf; ++a) {
        rhs(a) = -partial(free_idx[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hff(a, b) = qp.H(free_idx[a], free_idx[b]);
      }
      const Vector sol = hff.llt().solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a) nu(free_idx[a]) = sol(a);
    }

    bool kkt = true;
    const Vector grad = qp.H * nu + g;
    for (int i = 0; i < size && kkt; ++i) {
      if (code[i] == 1) {
        kkt = nu(i) >= box.lower_at(i) - feas_tol * (1.0 + std::abs(box.lower_at(i))) &&
              nu(i) <= box.upper_at(i) + feas_tol * (1.0 + std::abs(box.upper_at(i)));
      } else if (code[i] == 0) {
        kkt = grad(i) >= -mult_tol;
      } else {
        kkt = grad(i) <= mult_tol;
      }
    }
    if (!kkt) continue;

    const double obj = nu.dot(qp.H * nu) + 2.0 * nu.dot(g);
    const bool better = !found || obj < best_obj - 1e-10 ||
                        (std::abs(obj - best_obj) <= 1e-10 &&
                         std::lexicographical_compare(nu.data(), nu.data() + size, best.data(), best.data() + size));
    if (better) {
      best = nu;
      best_obj = std::min(obj, best_obj);
      found = true;
    }
  }
  require(found, ErrorCode::kOracle, "no active-set candidate satisfies the KKT conditions");
  return best;
}

ValueResult value_function(const CondensedQp& qp, const SpectralData& spectral, const Vector& x, const BoxSet& box,
                           double tol) {
  ValueResult out;
  out.mu = solve_optimal(qp, spectral, x, box, tol);
  out.V = qp.cost(x, out.mu);
  return out;
}

}  // namespace tdmpc
