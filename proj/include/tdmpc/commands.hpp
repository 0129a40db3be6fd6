#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "tdmpc/scenario.hpp"

namespace tdmpc {

struct OutputFile {
  std::string suffix;  // appended to the stem, e.g. ".csv"
  std::string content;
};

struct CommandOutput {
  nlohmann::json report;
  std::vector<OutputFile> files;
};

/// Everything one scenario run produces: the controlled trajectory and its optimal benchmark.
struct ScenarioRun {
  LtiModel model;
  CostSpec cost;
  BoxSet box;
  std::vector<int> budgets;  // TD-MPC budgets
  DimSchedule schedule;      // Dim-SuMPC schedule
  Trajectory trajectory;
  Trajectory optimal;
};

ScenarioRun run_scenario(const ScenarioConfig& config);

/// Per-step inequality check along a trajectory; steps outside Sigma_N (or on its boundary band) are skipped.
struct DecayCheck {
  int checked = 0;
  int skipped = 0;
  double max_excess = 0.0;  // max of lhs - rhs over checked steps, before the 1e-8 slack
  int first_violation = -1;
  bool satisfied = true;
};

/// L(s_{k+1}) <= eps_k L(s_k) + 1e-8 with L = psi + tau ||d||, eps_k from the budget that produced z_{k+1}.
DecayCheck check_lyapunov_decay(const Trajectory& traj, const CertificateSet& cert);

/// psi(x_{k+1}) <= beta psi(x_k) + sigma ||d_k|| and ||d_{k+1}|| <= eta^l (kappa psi(x_k) + omega ||d_k||), slack 1e-8.
DecayCheck check_auxiliary_dynamics(const Trajectory& traj, const CertificateSet& cert);

struct ValueDecayCheck {
  int samples = 0;
  int attempts = 0;
  double max_lower_excess = -1.0;  // ||x||_P^2 - V(x)
  double max_upper_excess = -1.0;  // V(x) - ||x||_W^2
  double max_decay_excess = -1.0;  // V(f(x)) - beta^2 V(x)
  bool satisfied = true;
};

/**
 * Samples x in Gamma_N by rejection from the ellipsoid ||x||_P <= r_N (seeded
 * mt19937_64, Gaussian directions, radius r_N u^{1/n}) and checks the value
 * function sandwich and its one-step decay under the optimal loop, slack 1e-8.
 */
ValueDecayCheck check_value_decay(const Design& design, const CertificateSet& cert, int samples,
                                  std::uint64_t seed);

/// Short identifiers of the modelling decisions baked into every report.
std::vector<std::string> decisions(const ScenarioConfig& config);

/// Constants rounded to 12 significant digits; non-finite values become null.
nlohmann::json certificate_to_json(const CertificateSet& cert);

CommandOutput cmd_certify(const ScenarioConfig& config);
CommandOutput cmd_simulate(const ScenarioConfig& config, int repeat = 1);
CommandOutput cmd_compare(const ScenarioConfig& a, const ScenarioConfig& b);
CommandOutput cmd_verify_bounds(const ScenarioConfig& config);

/// Writes <stem>.json and every <stem><suffix>; all files are staged first so a failure leaves none behind.
void write_outputs(const CommandOutput& output, const std::string& dir, const std::string& stem);

}  // namespace tdmpc
