#include "tdmpc/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tdmpc {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  fail(ErrorCode::kConfig, field + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) bad(path + key, "missing required field");
  return *it;
}

void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) bad(path + key, "unknown field");
  }
}

double get_number(const json& v, const std::string& name) {
  if (!v.is_number()) bad(name, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(name, "must be finite");
  return d;
}

int get_int(const json& v, const std::string& name, int min_value) {
  if (!v.is_number_integer()) bad(name, "must be an integer");
  const long long i = v.get<long long>();
  if (i < min_value || i > std::numeric_limits<int>::max()) {
    bad(name, "must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<int>(i);
}

std::vector<int> get_int_list(const json& v, const std::string& name, int min_value) {
  if (!v.is_array() || v.empty()) bad(name, "must be a non-empty array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(get_int(v[i], name + "[" + std::to_string(i) + "]", min_value));
  }
  return out;
}

Vector get_vector(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) bad(name, "must be a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = get_number(v[i], name + "[" + std::to_string(i) + "]");
  return out;
}

Matrix get_matrix(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) bad(name, "must be a non-empty array of rows");
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty()) bad(name, "rows must be non-empty arrays");
  const std::size_t cols = v[0].size();
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) bad(name, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = get_number(v[i][j], name + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  }
  return out;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void check_spd(const Matrix& m, const std::string& name) {
  if (m.rows() != m.cols()) bad(name, "must be square");
  if (!is_symmetric_positive_definite(m)) bad(name, "must be symmetric positive definite");
}

Mode parse_mode(const json& v) {
  const std::string s = v.is_string() ? v.get<std::string>() : "";
  if (s == "optimal") return Mode::kOptimal;
  if (s == "tdmpc") return Mode::kTdmpc;
  if (s == "dimsumpc") return Mode::kDimSumpc;
  bad("mode", "must be one of optimal, tdmpc, dimsumpc");
}

WarmStart parse_warm_start(const json& v, const std::string& name) {
  const std::string s = v.is_string() ? v.get<std::string>() : "";
  if (s == "truncate") return WarmStart::kTruncate;
  if (s == "cold") return WarmStart::kCold;
  if (s == "zero_pad") return WarmStart::kZeroPad;
  bad(name, "must be one of truncate, cold, zero_pad");
}

KjVariant parse_kj(const json& v, const std::string& name) {
  const std::string s = v.is_string() ? v.get<std::string>() : "";
  if (s == "previous_horizon") return KjVariant::kPreviousHorizon;
  if (s == "next_horizon") return KjVariant::kNextHorizon;
  bad(name, "must be previous_horizon or next_horizon");
}

const char* kj_name(KjVariant v) { return v == KjVariant::kPreviousHorizon ? "previous_horizon" : "next_horizon"; }

ModelSource parse_model(const json& v) {
  if (!v.is_object()) bad("model", "must be an object");
  ModelSource m;
  const json& type = field(v, "type", "model.");
  if (type == "continuous") {
    only_keys(v, {"type", "A", "B", "Ts", "discretization"}, "model.");
    m.continuous = true;
    m.Ts = get_number(field(v, "Ts", "model."), "model.Ts");
    if (m.Ts <= 0.0) bad("model.Ts", "must be positive");
    if (v.contains("discretization")) {
      const json& d = v["discretization"];
      if (d == "zoh") {
        m.method = Discretization::kZeroOrderHold;
      } else if (d == "euler") {
        m.method = Discretization::kForwardEuler;
      } else {
        bad("model.discretization", "must be zoh or euler");
      }
    }
  } else if (type == "discrete") {
    only_keys(v, {"type", "A", "B"}, "model.");
    m.continuous = false;
  } else {
    bad("model.type", "must be continuous or discrete");
  }
  m.A = get_matrix(field(v, "A", "model."), "model.A");
  m.B = get_matrix(field(v, "B", "model."), "model.B");
  if (m.A.rows() != m.A.cols()) bad("model.A", "must be square");
  if (m.B.rows() != m.A.rows()) bad("model.B", "must have as many rows as model.A");
  return m;
}

void parse_tdmpc_budget(const json& doc, ScenarioConfig& c) {
  const json& b = field(doc, "budget", "");
  if (b.is_string()) {
    if (b != "auto") bad("budget", "must be an integer, a list of integers, or \"auto\"");
    c.budget_kind = BudgetKind::kAuto;
  } else if (b.is_array()) {
    c.budget_kind = BudgetKind::kPerStep;
    c.step_budgets = get_int_list(b, "budget", 1);
    if (static_cast<int>(c.step_budgets.size()) != c.T) bad("budget", "per-step list must have length T");
  } else {
    c.budget_kind = BudgetKind::kFixed;
    c.budget = get_int(b, "budget", 1);
  }
}

void parse_schedule(const json& s, ScenarioConfig& c) {
  if (!s.is_object()) bad("schedule", "must be an object");
  only_keys(s, {"horizons", "switch_times", "budgets", "step_budgets", "warm_start", "kj_variant"}, "schedule.");
  c.horizons = get_int_list(field(s, "horizons", "schedule."), "schedule.horizons", 1);
  for (std::size_t j = 1; j < c.horizons.size(); ++j) {
    if (c.horizons[j] >= c.horizons[j - 1]) bad("schedule.horizons", "must be strictly decreasing");
  }
  const std::size_t p = c.horizons.size() - 1;
  const json& st = field(s, "switch_times", "schedule.");
  if (st == "auto") {
    c.switch_kind = SwitchKind::kAuto;
  } else if (st == "online") {
    c.switch_kind = SwitchKind::kOnline;
  } else if (st.is_array()) {
    c.switch_kind = SwitchKind::kExplicit;
    if (p == 0) {
      if (!st.empty()) bad("schedule.switch_times", "must be empty for a single horizon");
    } else {
      c.switch_times = get_int_list(st, "schedule.switch_times", 1);
    }
    if (c.switch_times.size() != p) {
      bad("schedule.switch_times", "need exactly " + std::to_string(p) + " switch times");
    }
    for (std::size_t j = 1; j < p; ++j) {
      if (c.switch_times[j] <= c.switch_times[j - 1]) bad("schedule.switch_times", "must be strictly increasing");
    }
  } else {
    bad("schedule.switch_times", "must be a list of integers, \"auto\" or \"online\"");
  }
  const json& b = field(s, "budgets", "schedule.");
  if (b == "auto") {
    c.phase_budgets_auto = true;
  } else {
    c.phase_budgets = get_int_list(b, "schedule.budgets", 1);
    if (c.phase_budgets.size() != c.horizons.size()) bad("schedule.budgets", "need one budget per horizon");
  }
  if (s.contains("step_budgets")) {
    c.schedule_step_budgets = get_int_list(s["step_budgets"], "schedule.step_budgets", 1);
    if (static_cast<int>(c.schedule_step_budgets.size()) != c.T) bad("schedule.step_budgets", "length must equal T");
  }
  if (s.contains("warm_start")) c.warm_start = parse_warm_start(s["warm_start"], "schedule.warm_start");
  if (s.contains("kj_variant")) c.kj_variant = parse_kj(s["kj_variant"], "schedule.kj_variant");
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kOptimal:
      return "optimal";
    case Mode::kTdmpc:
      return "tdmpc";
    case Mode::kDimSumpc:
      return "dimsumpc";
  }
  return "unknown";
}

ScenarioConfig parse_scenario(const json& doc) {
  if (!doc.is_object()) bad("(root)", "scenario must be a JSON object");
  only_keys(doc,
            {"name", "model", "cost", "box", "mode", "horizon", "budget", "schedule", "x0", "T", "allow_uncertified",
             "seed", "samples", "optimal_tol", "output"},
            "");
  ScenarioConfig c;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) bad("name", "must be a string");
    c.name = doc["name"].get<std::string>();
  }
  c.model = parse_model(field(doc, "model", ""));
  const int n = static_cast<int>(c.model.A.rows());
  const int m = static_cast<int>(c.model.B.cols());

  const json& cost = field(doc, "cost", "");
  if (!cost.is_object()) bad("cost", "must be an object");
  only_keys(cost, {"Q", "R"}, "cost.");
  c.Q = get_matrix(field(cost, "Q", "cost."), "cost.Q");
  c.R = get_matrix(field(cost, "R", "cost."), "cost.R");
  if (c.Q.rows() != n) bad("cost.Q", "must be " + std::to_string(n) + "x" + std::to_string(n));
  if (c.R.rows() != m) bad("cost.R", "must be " + std::to_string(m) + "x" + std::to_string(m));
  check_spd(c.Q, "cost.Q");
  check_spd(c.R, "cost.R");

  const json& box = field(doc, "box", "");
  if (!box.is_object()) bad("box", "must be an object");
  only_keys(box, {"lower", "upper"}, "box.");
  c.lower = get_vector(field(box, "lower", "box."), "box.lower");
  c.upper = get_vector(field(box, "upper", "box."), "box.upper");
  if (c.lower.size() != m || c.upper.size() != m) bad("box", "bounds must have " + std::to_string(m) + " entries");
  for (int i = 0; i < m; ++i) {
    if (!(c.lower(i) < 0.0 && c.upper(i) > 0.0)) bad("box", "bounds must contain the origin in their interior");
  }

  c.mode = parse_mode(field(doc, "mode", ""));
  c.T = get_int(field(doc, "T", ""), "T", 1);
  c.x0 = get_vector(field(doc, "x0", ""), "x0");
  if (c.x0.size() != n) bad("x0", "must have " + std::to_string(n) + " entries");

  if (c.mode == Mode::kDimSumpc) {
    if (doc.contains("horizon") || doc.contains("budget")) bad("horizon", "dimsumpc scenarios use schedule instead");
    parse_schedule(field(doc, "schedule", ""), c);
  } else {
    if (doc.contains("schedule")) bad("schedule", "only valid for mode dimsumpc");
    c.horizon = get_int(field(doc, "horizon", ""), "horizon", 1);
    if (c.mode == Mode::kTdmpc) {
      parse_tdmpc_budget(doc, c);
    } else if (doc.contains("budget")) {
      bad("budget", "not used by mode optimal");
    }
  }

  if (doc.contains("allow_uncertified")) {
    if (!doc["allow_uncertified"].is_boolean()) bad("allow_uncertified", "must be a boolean");
    c.allow_uncertified = doc["allow_uncertified"].get<bool>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
      bad("seed", "must be a non-negative integer");
    }
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("samples")) c.samples = get_int(doc["samples"], "samples", 0);
  if (doc.contains("optimal_tol")) {
    c.optimal_tol = get_number(doc["optimal_tol"], "optimal_tol");
    if (c.optimal_tol <= 0.0 || c.optimal_tol > 1e-3) bad("optimal_tol", "must lie in (0, 1e-3]");
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    if (!o.is_object()) bad("output", "must be an object");
    only_keys(o, {"dir", "stem"}, "output.");
    if (o.contains("dir")) {
      if (!o["dir"].is_string()) bad("output.dir", "must be a string");
      c.output_dir = o["dir"].get<std::string>();
    }
    if (o.contains("stem")) {
      if (!o["stem"].is_string()) bad("output.stem", "must be a string");
      c.output_stem = o["stem"].get<std::string>();
    }
  }
  return c;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("(root): invalid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

json to_json(const ScenarioConfig& c) {
  json doc;
  if (!c.name.empty()) doc["name"] = c.name;
  json model = {{"type", c.model.continuous ? "continuous" : "discrete"},
                {"A", matrix_to_json(c.model.A)},
                {"B", matrix_to_json(c.model.B)}};
  if (c.model.continuous) {
    model["Ts"] = c.model.Ts;
    model["discretization"] = c.model.method == Discretization::kZeroOrderHold ? "zoh" : "euler";
  }
  doc["model"] = model;
  doc["cost"] = {{"Q", matrix_to_json(c.Q)}, {"R", matrix_to_json(c.R)}};
  doc["box"] = {{"lower", vector_to_json(c.lower)}, {"upper", vector_to_json(c.upper)}};
  doc["mode"] = to_string(c.mode);
  if (c.mode == Mode::kDimSumpc) {
    json s;
    s["horizons"] = c.horizons;
    switch (c.switch_kind) {
      case SwitchKind::kExplicit:
        s["switch_times"] = c.switch_times;
        break;
      case SwitchKind::kAuto:
        s["switch_times"] = "auto";
        break;
      case SwitchKind::kOnline:
        s["switch_times"] = "online";
        break;
    }
    if (c.phase_budgets_auto) {
      s["budgets"] = "auto";
    } else {
      s["budgets"] = c.phase_budgets;
    }
    if (!c.schedule_step_budgets.empty()) s["step_budgets"] = c.schedule_step_budgets;
    s["warm_start"] = to_string(c.warm_start);
    s["kj_variant"] = kj_name(c.kj_variant);
    doc["schedule"] = s;
  } else {
    doc["horizon"] = c.horizon;
    if (c.mode == Mode::kTdmpc) {
      switch (c.budget_kind) {
        case BudgetKind::kFixed:
          doc["budget"] = c.budget;
          break;
        case BudgetKind::kPerStep:
          doc["budget"] = c.step_budgets;
          break;
        case BudgetKind::kAuto:
          doc["budget"] = "auto";
          break;
      }
    }
  }
  doc["x0"] = vector_to_json(c.x0);
  doc["T"] = c.T;
  doc["allow_uncertified"] = c.allow_uncertified;
  doc["seed"] = c.seed;
  doc["samples"] = c.samples;
  doc["optimal_tol"] = c.optimal_tol;
  json out = json::object();
  if (!c.output_dir.empty()) out["dir"] = c.output_dir;
  if (!c.output_stem.empty()) out["stem"] = c.output_stem;
  if (!out.empty()) doc["output"] = out;
  return doc;
}

bool ScenarioConfig::operator==(const ScenarioConfig& other) const {
  return to_json(*this) == to_json(other);
}

std::string config_hash(const ScenarioConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

const char* kPendulumBase = R"({
  "model": {"type": "continuous", "A": [[0, 1], [14.715, 0]], "B": [[0], [30]], "Ts": 0.1, "discretization": "zoh"},
  "cost": {"Q": [[1, 0], [0, 1]], "R": [[1]]},
  "box": {"lower": [-1], "upper": [1]},
  "x0": [-0.7853981633974483, 0.6283185307179586],
  "T": 150,
  "seed": 7
})";

json with_base(const char* base, json extra) {
  json doc = json::parse(base);
  doc.update(extra);
  return doc;
}

const std::map<std::string, std::string>& preset_table() {
  static const std::map<std::string, std::string> table = [] {
    std::map<std::string, std::string> t;
    auto add = [&](const std::string& name, json doc) {
      doc["name"] = name;
      t[name] = to_json(parse_scenario(doc)).dump(2);
    };
    add("pendulum_optimal", with_base(kPendulumBase, {{"mode", "optimal"}, {"horizon", 15}}));
    add("pendulum_tdmpc", with_base(kPendulumBase, {{"mode", "tdmpc"},
                                                    {"horizon", 15},
                                                    {"budget", 5000},
                                                    {"allow_uncertified", true}}));
    add("pendulum_dimsumpc",
        with_base(kPendulumBase, {{"mode", "dimsumpc"},
                                  {"schedule",
                                   {{"horizons", {15, 10, 8, 2}},
                                    {"switch_times", {15, 25, 40}},
                                    {"budgets", {5000, 5000, 5000, 5000}}}},
                                  {"allow_uncertified", true}}));
    add("pendulum_dimsumpc_budget",
        with_base(kPendulumBase, {{"mode", "dimsumpc"},
                                  {"schedule",
                                   {{"horizons", {15, 2}}, {"switch_times", {15}}, {"budgets", {5000, 6500}}}},
                                  {"allow_uncertified", true}}));
    add("pendulum_certified", with_base(kPendulumBase, {{"mode", "tdmpc"},
                                                        {"horizon", 2},
                                                        {"budget", "auto"},
                                                        {"x0", {-0.2, 0.25}},
                                                        {"T", 100}}));
    const char* scalar = R"({
      "model": {"type": "discrete", "A": [[1.05]], "B": [[1]]},
      "cost": {"Q": [[1]], "R": [[1]]},
      "box": {"lower": [-1], "upper": [1]},
      "x0": [0.8],
      "T": 60,
      "seed": 11
    })";
    add("scalar_certified", with_base(scalar, {{"mode", "tdmpc"}, {"horizon", 3}, {"budget", "auto"}}));
    const char* unstable = R"({
      "model": {"type": "discrete", "A": [[1.2]], "B": [[1]]},
      "cost": {"Q": [[1]], "R": [[1]]},
      "box": {"lower": [-1], "upper": [1]},
      "x0": [1.5],
      "T": 150,
      "seed": 13
    })";
    add("scalar_dimsumpc_certified",
        with_base(unstable, {{"mode", "dimsumpc"},
                             {"schedule", {{"horizons", {5, 3, 2}}, {"switch_times", "auto"}, {"budgets", {300, 100, 60}}}}}));
    add("double_integrator", json::parse(R"({
      "model": {"type": "discrete", "A": [[1, 1], [0, 1]], "B": [[0.5], [1]]},
      "cost": {"Q": [[1, 0], [0, 1]], "R": [[1]]},
      "box": {"lower": [-1], "upper": [1]},
      "mode": "tdmpc",
      "horizon": 5,
      "budget": "auto",
      "x0": [1.0, -0.5],
      "T": 60,
      "seed": 3
    })"));
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : preset_table()) out.push_back(name);
  return out;
}

ScenarioConfig preset(const std::string& name) {
  const auto& table = preset_table();
  const auto it = table.find(name);
  if (it == table.end()) fail(ErrorCode::kConfig, "preset: unknown preset '" + name + "'");
  return parse_scenario_text(it->second);
}

LtiModel build_model(const ScenarioConfig& c) {
  if (c.model.continuous) return discretize(c.model.A, c.model.B, c.model.Ts, c.model.method);
  return LtiModel(c.model.A, c.model.B);
}

CostSpec build_cost(const ScenarioConfig& c, const LtiModel& model) { return solve_dare(model, c.Q, c.R); }

BoxSet build_box(const ScenarioConfig& c) { return BoxSet(c.lower, c.upper); }

int initial_horizon(const ScenarioConfig& c) { return c.mode == Mode::kDimSumpc ? c.horizons.front() : c.horizon; }

int auto_budget(const CertificateSet& cert) {
  const double next = std::ceil(cert.ell_star) + 1.0;
  require(next < 1e9, ErrorCode::kCertificate,
          "ell* = " + std::to_string(cert.ell_star) + " is too large for an automatic budget");
  return std::max(1, static_cast<int>(next));
}

std::vector<int> resolve_budgets(const ScenarioConfig& c, const Design& d) {
  switch (c.budget_kind) {
    case BudgetKind::kFixed:
      return std::vector<int>(c.T, c.budget);
    case BudgetKind::kPerStep:
      return c.step_budgets;
    case BudgetKind::kAuto: {
      const CertificateSet cert = compute_certificates(d.model, d.cost, d.qp, d.spectral, d.box);
      return std::vector<int>(c.T, auto_budget(cert));
    }
  }
  return {};
}

DimSchedule resolve_schedule(const ScenarioConfig& c, const LtiModel& model, const CostSpec& cost,
                             const BoxSet& box) {
  DimSchedule s;
  s.horizons = c.horizons;
  s.allow_uncertified = c.allow_uncertified;
  s.warm_start = c.warm_start;
  s.kj_variant = c.kj_variant;
  s.step_budgets = c.schedule_step_budgets;
  if (c.phase_budgets_auto) {
    for (int N : c.horizons) {
      const Design d = make_design(model, cost, box, N);
      s.phase_budgets.push_back(auto_budget(compute_certificates(model, cost, d.qp, d.spectral, box)));
    }
  } else {
    s.phase_budgets = c.phase_budgets;
  }
  switch (c.switch_kind) {
    case SwitchKind::kExplicit:
      s.switch_times = c.switch_times;
      break;
    case SwitchKind::kAuto:
      s.switch_times = lemma_switch_times(model, cost, box, s, c.x0);
      break;
    case SwitchKind::kOnline:
      s.online_switching = true;
      break;
  }
  return s;
}

}  // namespace tdmpc
