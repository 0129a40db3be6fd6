#include <string>

#include "doctest.h"
#include "tdmpc/scenario.hpp"

using namespace tdmpc;
using nlohmann::json;

namespace {

json scalar_doc() {
  return json::parse(R"({
    "model": {"type": "discrete", "A": [[1.05]], "B": [[1]]},
    "cost": {"Q": [[1]], "R": [[1]]},
    "box": {"lower": [-1], "upper": [1]},
    "mode": "tdmpc",
    "horizon": 3,
    "budget": 20,
    "x0": [0.8],
    "T": 10
  })");
}

std::string config_error(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("every preset round-trips through JSON") {
    const auto names = preset_names();
    CHECK(names.size() == 8);
    for (const std::string& name : names) {
      const ScenarioConfig c = preset(name);
      CHECK(c.name == name);
      const ScenarioConfig back = parse_scenario(to_json(c));
      CHECK(back == c);
      CHECK(config_hash(back) == config_hash(c));
    }
  }

  TEST_CASE("config hash is FNV-1a 64 of the canonical dump") {
    const ScenarioConfig c = parse_scenario(scalar_doc());
    const std::string text = to_json(c).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    CHECK(config_hash(c) == std::string(buf));
    ScenarioConfig d = c;
    d.T = 11;
    CHECK(config_hash(d) != config_hash(c));
  }

  TEST_CASE("budget forms") {
    json doc = scalar_doc();
    CHECK(parse_scenario(doc).budget_kind == BudgetKind::kFixed);
    doc["budget"] = "auto";
    CHECK(parse_scenario(doc).budget_kind == BudgetKind::kAuto);
    doc["budget"] = json::array();
    for (int k = 0; k < 10; ++k) doc["budget"].push_back(20 + k);
    const ScenarioConfig c = parse_scenario(doc);
    CHECK(c.budget_kind == BudgetKind::kPerStep);
    CHECK(c.step_budgets.back() == 29);
    const LtiModel model = build_model(c);
    const Design d = make_design(model, build_cost(c, model), build_box(c), c.horizon);
    CHECK(resolve_budgets(c, d) == c.step_budgets);
  }

  TEST_CASE("auto budget is ceil(ell*) + 1") {
    json doc = scalar_doc();
    doc["budget"] = "auto";
    const ScenarioConfig c = parse_scenario(doc);
    const LtiModel model = build_model(c);
    const CostSpec cost = build_cost(c, model);
    const Design d = make_design(model, cost, build_box(c), 3);
    const CertificateSet cert = compute_certificates(model, cost, d.qp, d.spectral, d.box);
    const std::vector<int> b = resolve_budgets(c, d);
    CHECK(b.size() == 10);
    CHECK(b[0] == static_cast<int>(std::ceil(cert.ell_star)) + 1);
    CHECK(b[0] == 13);
  }

  TEST_CASE("errors name the offending field") {
    json doc = scalar_doc();
    doc["extra"] = 1;
    CHECK(config_error(doc).find("extra") != std::string::npos);

    doc = scalar_doc();
    doc["cost"]["Q"] = json::parse("[[-1]]");
    CHECK(config_error(doc).find("cost.Q") != std::string::npos);

    doc = scalar_doc();
    doc["box"]["lower"] = json::parse("[0.5]");
    CHECK(config_error(doc).find("box") != std::string::npos);

    doc = scalar_doc();
    doc["x0"] = json::parse("[1, 2]");
    CHECK(config_error(doc).find("x0") != std::string::npos);

    doc = scalar_doc();
    doc["budget"] = json::parse("[1, 2]");
    CHECK(config_error(doc).find("budget") != std::string::npos);

    doc = scalar_doc();
    doc["mode"] = "fast";
    CHECK(config_error(doc).find("mode") != std::string::npos);

    doc = scalar_doc();
    doc["schedule"] = json::object();
    CHECK(config_error(doc).find("schedule") != std::string::npos);

    doc = scalar_doc();
    doc["model"]["A"] = json::parse("[[1, 2]]");
    CHECK_FALSE(config_error(doc).empty());

    doc = scalar_doc();
    doc.erase("T");
    CHECK(config_error(doc).find("T") != std::string::npos);
  }

  TEST_CASE("invalid JSON text") {
    try {
      parse_scenario_text("{ not json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
    try {
      load_scenario_file("/nonexistent/scenario.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
    }
  }

  TEST_CASE("schedule parsing") {
    const ScenarioConfig c = preset("pendulum_dimsumpc");
    CHECK(c.mode == Mode::kDimSumpc);
    CHECK(c.horizons == std::vector<int>{15, 10, 8, 2});
    CHECK(c.switch_times == std::vector<int>{15, 25, 40});
    CHECK(c.switch_kind == SwitchKind::kExplicit);
    CHECK(initial_horizon(c) == 15);
    const ScenarioConfig a = preset("scalar_dimsumpc_certified");
    CHECK(a.switch_kind == SwitchKind::kAuto);
    const LtiModel model = build_model(a);
    const DimSchedule s = resolve_schedule(a, model, build_cost(a, model), build_box(a));
    CHECK(s.switch_times == std::vector<int>{104, 105});
    CHECK(s.phase_budgets == std::vector<int>{300, 100, 60});
  }

  TEST_CASE("continuous pendulum model") {
    const ScenarioConfig c = preset("pendulum_optimal");
    CHECK(c.model.continuous);
    CHECK(c.model.Ts == 0.1);
    const LtiModel m = build_model(c);
    CHECK(m.A()(0, 0) == doctest::Approx(std::cosh(std::sqrt(14.715) * 0.1)).epsilon(1e-13));
    CHECK(c.x0(0) == doctest::Approx(-M_PI / 4));
    CHECK(c.T == 150);
  }

  TEST_CASE("unknown preset") {
    CHECK_THROWS_AS(preset("nope"), Error);
  }
}
