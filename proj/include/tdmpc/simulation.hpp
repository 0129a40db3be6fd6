#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tdmpc/certificates.hpp"

namespace tdmpc {

/// Plant, cost, box and the horizon-N condensed problem built from them.
struct Design {
  LtiModel model;
  CostSpec cost;
  BoxSet box;
  CondensedQp qp;
  SpectralData spectral;

  int N() const { return qp.N; }
};

Design make_design(const LtiModel& model, const CostSpec& cost, const BoxSet& box, int horizon);

enum class WarmStart {
  kTruncate,  // keep the first N_j m entries
  kCold,      // restart from zero
  kZeroPad,   // keep the first input block, zero the rest
};

const char* to_string(WarmStart ws);

/// Horizon switch of a Dim-SuMPC run, with the value at the switch against the target level N_j d + c.
struct SwitchRecord {
  int k = 0;
  int horizon_prev = 0;
  int horizon_next = 0;
  double V_prev = 0.0;  // V_{N_{j-1}}(x_k)
  double V_next = 0.0;  // V_{N_j}(x_k)
  double level = 0.0;
};

struct Trajectory {
  std::string mode;
  Vector x0;
  int T = 0;
  Matrix Q;
  Matrix R;
  Matrix P;

  std::vector<Vector> states;     // x_0..x_T
  std::vector<Vector> inputs;     // u_0..u_{T-1}
  std::vector<Vector> z_history;  // z_0..z_{T-1}; mu*(x_k) for optimal runs
  std::vector<double> stage_costs;
  double terminal_cost = 0.0;

  std::vector<double> V_values;
  std::vector<double> psi_values;
  std::vector<double> lyapunov_values;  // psi + tau ||d||; NaN without a certified tau
  std::vector<double> d_norms;
  std::vector<Vector> mu_star;  // mu*(x_k)
  std::vector<int> iter_counts;
  std::vector<int> horizon_at_step;
  std::vector<double> step_wall_time;  // microseconds
  std::vector<double> flop_proxy;      // l (Nm)^2 + Nm n
  std::vector<double> flop_h_term;     // l (Nm)^2
  std::vector<double> epsilon_at_step;  // certified rate in force, NaN when uncertified
  std::vector<SwitchRecord> switches;

  bool uncertified = false;
  std::vector<std::string> warnings;

  double total_cost() const;
  double cumulative_flops() const;
  /// First k with |x_k(i)| <= threshold for all later steps, or -1.
  int settling_step(int component, double threshold) const;
};

struct SimOptions {
  double tau = std::numeric_limits<double>::quiet_NaN();  // Lyapunov weight for the diagnostics
  double diagnostic_tol = 1e-10;
  OptimalMethod optimal_method = OptimalMethod::kActiveSetPolish;
};

Trajectory run_optimal(const Design& design, const Vector& x0, int T, double tol,
                       OptimalMethod method = OptimalMethod::kActiveSetPolish);

/// z_k = T^{l_k}(x_k, z_{k-1}), u_k = first block of z_k. budgets has length T.
Trajectory run_tdmpc(const Design& design, const Vector& x0, const Vector& z_init, int T,
                     std::span<const int> budgets, const SimOptions& options = {});

struct DimSchedule {
  std::vector<int> horizons;      // N_0 > N_1 > ... > N_p
  std::vector<int> switch_times;  // k_1 < ... < k_p
  std::vector<int> phase_budgets;  // one l per phase
  std::vector<int> step_budgets;   // optional per-step override, length T
  bool allow_uncertified = false;
  WarmStart warm_start = WarmStart::kTruncate;
  bool online_switching = false;  // recompute k_j from the state at phase entry
  KjVariant kj_variant = KjVariant::kPreviousHorizon;
};

/// Checks ordering and lengths; throws kConfig naming the violated constraint.
void validate_schedule(const DimSchedule& schedule, int T);

/**
 * Switch times from the transition lemma with every k_j evaluated from x0
 * (offline schedule). Each phase budget must exceed its phase's ell*.
 */
std::vector<int> lemma_switch_times(const LtiModel& model, const CostSpec& cost, const BoxSet& box,
                                    const DimSchedule& schedule, const Vector& x0);

Trajectory run_dim_sumpc(const LtiModel& model, const CostSpec& cost, const BoxSet& box, const Vector& x0,
                         const DimSchedule& schedule, int T, const SimOptions& options = {});

/// J_T(sub) - J_T(opt). Throws kInvalidArgument when x0, T, Q, R or P differ.
double incurred_suboptimality(const Trajectory& sub, const Trajectory& opt);

/// Partial differences of the costs through step k, k = 0..T; the last element equals the incurred suboptimality.
std::vector<double> cumulative_suboptimality_curve(const Trajectory& sub, const Trajectory& opt);

/// Largest |x_{k+1} - A x_k - B u_k| over the run.
double reconstruction_error(const Trajectory& traj, const LtiModel& model);

/**
 * CSV with columns k, x_1..x_n, u_1..u_m, V, psi, lyapunov, d_norm, ell_k, horizon,
 * stage_cost, cum_cost, cum_suboptimality, flop_proxy, wall_time_us. The row k = T
 * carries x_T and the terminal cost. Lines in comments are prefixed with "# ".
 */
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const Trajectory* opt,
                          const std::vector<std::string>& comments);

/**
 * Controller state for time-distributed MPC: the warm-started iterate z and
 * the horizon-N design it iterates on.
 */
class TimeDistributedController {
 public:
  TimeDistributedController(const LtiModel& model, const CostSpec& cost, const BoxSet& box, int horizon);

  const Design& design() const { return design_; }
  int horizon() const { return design_.N(); }
  const Vector& iterate() const { return z_; }

  void reset();
  void set_iterate(const Vector& z);
  void set_horizon(int horizon, WarmStart warm_start);

  /// Runs l PGM iterations from the stored iterate and returns the first input block.
  Vector step(const Vector& x, int ell);

  double last_flop_proxy() const { return last_flops_; }
  double last_flop_h_term() const { return last_h_flops_; }

 private:
  Design design_;
  Vector z_;
  double last_flops_ = 0.0;
  double last_h_flops_ = 0.0;
};

}  // namespace tdmpc
