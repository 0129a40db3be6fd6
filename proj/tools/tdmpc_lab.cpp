#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdmpc/tdmpc.h"

namespace {

// 0 ok, 1 configuration or input, 2 certificate refusal, 3 numerical failure, 4 bound violated.
int exit_code(tdmpc_status st) {
  switch (st) {
    case TDMPC_OK:
      return 0;
    case TDMPC_ERR_INVALID_ARGUMENT:
    case TDMPC_ERR_CONFIG:
    case TDMPC_ERR_IO:
      return 1;
    case TDMPC_ERR_CERTIFICATE:
      return 2;
    default:
      return 3;
  }
}

int report_error(tdmpc_status st) {
  std::cerr << "tdmpc-lab: " << tdmpc_status_string(st) << ": " << tdmpc_last_error() << '\n';
  return exit_code(st);
}

struct Scenario {
  tdmpc_scenario* handle = nullptr;
  ~Scenario() { tdmpc_scenario_free(handle); }
};

struct Result {
  tdmpc_result* handle = nullptr;
  ~Result() { tdmpc_result_free(handle); }
};

tdmpc_status load(const std::string& config, const std::string& preset, Scenario& out) {
  if (!preset.empty()) return tdmpc_scenario_from_preset(preset.c_str(), &out.handle);
  return tdmpc_scenario_from_file(config.c_str(), &out.handle);
}

int emit(const Result& r, const Scenario& s, const std::string& out_dir, const std::string& fallback_stem) {
  std::string dir = out_dir.empty() ? tdmpc_scenario_output_dir(s.handle) : out_dir;
  if (dir.empty()) {
    std::cout << tdmpc_result_report(r.handle) << '\n';
    return 0;
  }
  std::string stem = tdmpc_scenario_output_stem(s.handle);
  if (stem.empty()) stem = tdmpc_scenario_name(s.handle);
  if (stem.empty()) stem = fallback_stem;
  const tdmpc_status st = tdmpc_result_write(r.handle, dir.c_str(), stem.c_str());
  if (st != TDMPC_OK) return report_error(st);
  std::cout << dir << '/' << stem << ".json\n";
  for (size_t i = 0; i < tdmpc_result_file_count(r.handle); ++i) {
    std::cout << dir << '/' << stem << tdmpc_result_file_suffix(r.handle, i) << '\n';
  }
  return 0;
}

int list_presets(const std::string& out_dir) {
  for (size_t i = 0; i < tdmpc_preset_count(); ++i) {
    const std::string name = tdmpc_preset_name(i);
    if (out_dir.empty()) {
      std::cout << name << '\n';
      continue;
    }
    Scenario s;
    const tdmpc_status st = tdmpc_scenario_from_preset(name.c_str(), &s.handle);
    if (st != TDMPC_OK) return report_error(st);
    const std::string path = out_dir + "/" + name + ".json";
    std::ofstream f(path);
    f << tdmpc_scenario_json(s.handle) << '\n';
    if (!f) {
      std::cerr << "tdmpc-lab: cannot write " << path << '\n';
      return 1;
    }
    std::cout << path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-distributed MPC laboratory"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::vector<std::string> presets;
  std::string out_dir;
  int repeat = 1;
  bool dump_qp = false;

  auto add_common = [&](CLI::App* sub, bool two) {
    auto* c = sub->add_option("--config", configs, "Scenario JSON file")->check(CLI::ExistingFile);
    auto* p = sub->add_option("--preset", presets, "Built-in scenario name");
    if (!two) {
      c->expected(0, 1);
      p->expected(0, 1);
    }
    sub->add_option("--out", out_dir, "Output directory (default: the scenario's output.dir, else stdout)");
  };

  CLI::App* certify = app.add_subcommand("certify", "Compute the certificate report");
  add_common(certify, false);
  certify->add_flag("--dump-qp", dump_qp, "Emit the condensed matrices instead");
  CLI::App* simulate = app.add_subcommand("simulate", "Run the scenario's closed loop");
  add_common(simulate, false);
  simulate->add_option("--repeat", repeat, "Repetitions for the timing average")->check(CLI::PositiveNumber);
  CLI::App* dimsumpc = app.add_subcommand("dimsumpc", "Alias of simulate for dimsumpc scenarios");
  add_common(dimsumpc, false);
  dimsumpc->add_option("--repeat", repeat, "Repetitions for the timing average")->check(CLI::PositiveNumber);
  CLI::App* compare = app.add_subcommand("compare", "Compare two scenarios (give two --config/--preset)");
  add_common(compare, true);
  CLI::App* verify = app.add_subcommand("verify-bounds", "Check the theoretical bounds against a fresh run");
  add_common(verify, false);
  CLI::App* list = app.add_subcommand("presets", "List presets, or write them as JSON into --out");
  list->add_option("--out", out_dir, "Directory for the preset files");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) return list_presets(out_dir);

  std::vector<Scenario> scenarios(configs.size() + presets.size());
  size_t idx = 0;
  for (const std::string& c : configs) {
    const tdmpc_status st = load(c, "", scenarios[idx++]);
    if (st != TDMPC_OK) return report_error(st);
  }
  for (const std::string& p : presets) {
    const tdmpc_status st = load("", p, scenarios[idx++]);
    if (st != TDMPC_OK) return report_error(st);
  }
  const size_t needed = compare->parsed() ? 2 : 1;
  if (scenarios.size() != needed) {
    std::cerr << "tdmpc-lab: expected " << needed << " scenario(s) via --config/--preset, got " << scenarios.size()
              << '\n';
    return 1;
  }

  Result r;
  tdmpc_status st = TDMPC_OK;
  std::string stem;
  if (certify->parsed()) {
    st = dump_qp ? tdmpc_condensed_json(scenarios[0].handle, &r.handle)
                 : tdmpc_certify(scenarios[0].handle, &r.handle);
    stem = dump_qp ? "condensed" : "certificate";
  } else if (simulate->parsed() || dimsumpc->parsed()) {
    st = tdmpc_simulate(scenarios[0].handle, repeat, &r.handle);
    stem = "trajectory";
  } else if (compare->parsed()) {
    st = tdmpc_compare(scenarios[0].handle, scenarios[1].handle, &r.handle);
    stem = "comparison";
  } else {
    st = tdmpc_verify_bounds(scenarios[0].handle, &r.handle);
    stem = "bounds";
  }
  if (st != TDMPC_OK) return report_error(st);
  const int rc = emit(r, scenarios[0], out_dir, stem);
  if (rc != 0) return rc;
  if (tdmpc_result_bounds_satisfied(r.handle) == 0) {
    std::cerr << "tdmpc-lab: at least one bound check failed\n";
    return 4;
  }
  return 0;
}
