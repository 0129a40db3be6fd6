#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "tdmpc/simulation.hpp"

namespace tdmpc {

enum class Mode { kOptimal, kTdmpc, kDimSumpc };

const char* to_string(Mode mode);

enum class BudgetKind {
  kFixed,    // one l for every step
  kPerStep,  // explicit list of length T
  kAuto,     // ceil(ell*) + 1 of the design
};

enum class SwitchKind {
  kExplicit,  // listed switch times
  kAuto,      // transition lemma evaluated offline from x0
  kOnline,    // transition lemma re-evaluated at each phase entry
};

struct ModelSource {
  bool continuous = true;
  Matrix A;
  Matrix B;
  double Ts = 0.0;
  Discretization method = Discretization::kZeroOrderHold;
};

/**
 * One scenario document. Matrices are row-major nested arrays; every field is
 * validated on parse and errors name the offending field.
 */
struct ScenarioConfig {
  std::string name;
  ModelSource model;
  Matrix Q;
  Matrix R;
  Vector lower;
  Vector upper;
  Mode mode = Mode::kOptimal;

  int horizon = 0;
  BudgetKind budget_kind = BudgetKind::kFixed;
  int budget = 0;
  std::vector<int> step_budgets;

  std::vector<int> horizons;
  SwitchKind switch_kind = SwitchKind::kExplicit;
  std::vector<int> switch_times;
  bool phase_budgets_auto = false;
  std::vector<int> phase_budgets;
  std::vector<int> schedule_step_budgets;
  WarmStart warm_start = WarmStart::kTruncate;
  KjVariant kj_variant = KjVariant::kPreviousHorizon;

  Vector x0;
  int T = 0;
  bool allow_uncertified = false;
  std::uint64_t seed = 0;
  int samples = 200;
  double optimal_tol = 1e-10;
  std::string output_dir;
  std::string output_stem;

  bool operator==(const ScenarioConfig& other) const;
};

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig parse_scenario_text(const std::string& text);
ScenarioConfig load_scenario_file(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& config);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

LtiModel build_model(const ScenarioConfig& config);
CostSpec build_cost(const ScenarioConfig& config, const LtiModel& model);
BoxSet build_box(const ScenarioConfig& config);

/// Largest horizon used by the scenario (N or N_0).
int initial_horizon(const ScenarioConfig& config);

/// ceil(ell*) + 1.
int auto_budget(const CertificateSet& cert);

/// Per-step budgets of a TD-MPC scenario, resolving "auto" against the design.
std::vector<int> resolve_budgets(const ScenarioConfig& config, const Design& design);

/// Dim-SuMPC schedule with "auto" budgets and switch times resolved.
DimSchedule resolve_schedule(const ScenarioConfig& config, const LtiModel& model, const CostSpec& cost,
                             const BoxSet& box);

}  // namespace tdmpc
