#include "tdmpc/tdmpc.h"

#include <memory>
#include <new>
#include <string>

#include "tdmpc/commands.hpp"

struct tdmpc_scenario {
  tdmpc::ScenarioConfig config;
  std::string json;
  std::string hash;
};

struct tdmpc_result {
  tdmpc::CommandOutput output;
  std::string report;
};

struct tdmpc_controller {
  tdmpc::TimeDistributedController controller;
  tdmpc::WarmStart warm_start;
};

namespace {

thread_local std::string last_error;

tdmpc_status to_status(tdmpc::ErrorCode code) {
  switch (code) {
    case tdmpc::ErrorCode::kInvalidArgument:
      return TDMPC_ERR_INVALID_ARGUMENT;
    case tdmpc::ErrorCode::kConfig:
      return TDMPC_ERR_CONFIG;
    case tdmpc::ErrorCode::kCertificate:
      return TDMPC_ERR_CERTIFICATE;
    case tdmpc::ErrorCode::kNumerical:
      return TDMPC_ERR_NUMERICAL;
    case tdmpc::ErrorCode::kOracle:
      return TDMPC_ERR_ORACLE;
    case tdmpc::ErrorCode::kIo:
      return TDMPC_ERR_IO;
  }
  return TDMPC_ERR_INTERNAL;
}

template <typename F>
tdmpc_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return TDMPC_OK;
  } catch (const tdmpc::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TDMPC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TDMPC_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* what) {
  tdmpc::require(p != nullptr, tdmpc::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

void make_scenario(tdmpc::ScenarioConfig config, tdmpc_scenario** out) {
  auto s = std::make_unique<tdmpc_scenario>();
  s->json = tdmpc::to_json(config).dump(2);
  s->hash = tdmpc::config_hash(config);
  s->config = std::move(config);
  *out = s.release();
}

void make_result(tdmpc::CommandOutput output, tdmpc_result** out) {
  auto r = std::make_unique<tdmpc_result>();
  r->report = output.report.dump(2);
  r->output = std::move(output);
  *out = r.release();
}

}  // namespace

extern "C" {

const char* tdmpc_version(void) { return "0.1.0"; }

const char* tdmpc_status_string(tdmpc_status status) {
  switch (status) {
    case TDMPC_OK:
      return "ok";
    case TDMPC_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case TDMPC_ERR_CONFIG:
      return "configuration error";
    case TDMPC_ERR_CERTIFICATE:
      return "certificate error";
    case TDMPC_ERR_NUMERICAL:
      return "numerical error";
    case TDMPC_ERR_ORACLE:
      return "oracle error";
    case TDMPC_ERR_IO:
      return "i/o error";
    case TDMPC_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* tdmpc_last_error(void) { return last_error.c_str(); }

size_t tdmpc_preset_count(void) { return tdmpc::preset_names().size(); }

const char* tdmpc_preset_name(size_t index) {
  static const std::vector<std::string> names = tdmpc::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

tdmpc_status tdmpc_scenario_from_json(const char* text, tdmpc_scenario** out) {
  return guarded([&] {
    require_ptr(text, "text");
    require_ptr(out, "out");
    *out = nullptr;
    make_scenario(tdmpc::parse_scenario_text(text), out);
  });
}

tdmpc_status tdmpc_scenario_from_file(const char* path, tdmpc_scenario** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = nullptr;
    make_scenario(tdmpc::load_scenario_file(path), out);
  });
}

tdmpc_status tdmpc_scenario_from_preset(const char* name, tdmpc_scenario** out) {
  return guarded([&] {
    require_ptr(name, "name");
    require_ptr(out, "out");
    *out = nullptr;
    make_scenario(tdmpc::preset(name), out);
  });
}

void tdmpc_scenario_free(tdmpc_scenario* scenario) { delete scenario; }

const char* tdmpc_scenario_json(const tdmpc_scenario* s) { return s ? s->json.c_str() : nullptr; }
const char* tdmpc_scenario_hash(const tdmpc_scenario* s) { return s ? s->hash.c_str() : nullptr; }
const char* tdmpc_scenario_name(const tdmpc_scenario* s) { return s ? s->config.name.c_str() : nullptr; }
const char* tdmpc_scenario_output_dir(const tdmpc_scenario* s) { return s ? s->config.output_dir.c_str() : nullptr; }
const char* tdmpc_scenario_output_stem(const tdmpc_scenario* s) {
  return s ? s->config.output_stem.c_str() : nullptr;
}

tdmpc_status tdmpc_certify(const tdmpc_scenario* scenario, tdmpc_result** out) {
  return guarded([&] {
    require_ptr(scenario, "scenario");
    require_ptr(out, "out");
    *out = nullptr;
    make_result(tdmpc::cmd_certify(scenario->config), out);
  });
}

tdmpc_status tdmpc_simulate(const tdmpc_scenario* scenario, int repeat, tdmpc_result** out) {
  return guarded([&] {
    require_ptr(scenario, "scenario");
    require_ptr(out, "out");
    *out = nullptr;
    make_result(tdmpc::cmd_simulate(scenario->config, repeat), out);
  });
}

tdmpc_status tdmpc_compare(const tdmpc_scenario* a, const tdmpc_scenario* b, tdmpc_result** out) {
  return guarded([&] {
    require_ptr(a, "scenario a");
    require_ptr(b, "scenario b");
    require_ptr(out, "out");
    *out = nullptr;
    make_result(tdmpc::cmd_compare(a->config, b->config), out);
  });
}

tdmpc_status tdmpc_verify_bounds(const tdmpc_scenario* scenario, tdmpc_result** out) {
  return guarded([&] {
    require_ptr(scenario, "scenario");
    require_ptr(out, "out");
    *out = nullptr;
    make_result(tdmpc::cmd_verify_bounds(scenario->config), out);
  });
}

tdmpc_status tdmpc_condensed_json(const tdmpc_scenario* scenario, tdmpc_result** out) {
  return guarded([&] {
    require_ptr(scenario, "scenario");
    require_ptr(out, "out");
    *out = nullptr;
    const tdmpc::LtiModel model = tdmpc::build_model(scenario->config);
    const tdmpc::CostSpec cost = tdmpc::build_cost(scenario->config, model);
    const tdmpc::CondensedQp qp = tdmpc::build_condensed(model, cost, tdmpc::initial_horizon(scenario->config));
    tdmpc::CommandOutput output;
    output.report = tdmpc::to_json(qp);
    output.report["config_hash"] = scenario->hash;
    make_result(std::move(output), out);
  });
}

const char* tdmpc_result_report(const tdmpc_result* r) { return r ? r->report.c_str() : nullptr; }

size_t tdmpc_result_file_count(const tdmpc_result* r) { return r ? r->output.files.size() : 0; }

const char* tdmpc_result_file_suffix(const tdmpc_result* r, size_t index) {
  return r && index < r->output.files.size() ? r->output.files[index].suffix.c_str() : nullptr;
}

const char* tdmpc_result_file_content(const tdmpc_result* r, size_t index) {
  return r && index < r->output.files.size() ? r->output.files[index].content.c_str() : nullptr;
}

int tdmpc_result_bounds_satisfied(const tdmpc_result* r) {
  if (r == nullptr) return -1;
  const auto it = r->output.report.find("all_satisfied");
  if (it == r->output.report.end() || !it->is_boolean()) return -1;
  return it->get<bool>() ? 1 : 0;
}

tdmpc_status tdmpc_result_write(const tdmpc_result* result, const char* dir, const char* stem) {
  return guarded([&] {
    require_ptr(result, "result");
    require_ptr(dir, "dir");
    require_ptr(stem, "stem");
    tdmpc::require(*stem != '\0', tdmpc::ErrorCode::kInvalidArgument, "stem is empty");
    tdmpc::write_outputs(result->output, dir, stem);
  });
}

void tdmpc_result_free(tdmpc_result* result) { delete result; }

tdmpc_status tdmpc_controller_create(const tdmpc_scenario* scenario, int horizon, tdmpc_controller** out) {
  return guarded([&] {
    require_ptr(scenario, "scenario");
    require_ptr(out, "out");
    *out = nullptr;
    const tdmpc::ScenarioConfig& c = scenario->config;
    const tdmpc::LtiModel model = tdmpc::build_model(c);
    const tdmpc::CostSpec cost = tdmpc::build_cost(c, model);
    const int N = horizon > 0 ? horizon : tdmpc::initial_horizon(c);
    *out = new tdmpc_controller{tdmpc::TimeDistributedController(model, cost, tdmpc::build_box(c), N), c.warm_start};
  });
}

size_t tdmpc_controller_state_dim(const tdmpc_controller* c) {
  return c ? static_cast<size_t>(c->controller.design().qp.n) : 0;
}

size_t tdmpc_controller_input_dim(const tdmpc_controller* c) {
  return c ? static_cast<size_t>(c->controller.design().qp.m) : 0;
}

int tdmpc_controller_horizon(const tdmpc_controller* c) { return c ? c->controller.horizon() : 0; }

tdmpc_status tdmpc_controller_step(tdmpc_controller* c, const double* x, size_t n, int ell, double* u, size_t m) {
  return guarded([&] {
    require_ptr(c, "controller");
    require_ptr(x, "x");
    require_ptr(u, "u");
    tdmpc::require(n == tdmpc_controller_state_dim(c), tdmpc::ErrorCode::kInvalidArgument, "x has the wrong length");
    tdmpc::require(m == tdmpc_controller_input_dim(c), tdmpc::ErrorCode::kInvalidArgument, "u has the wrong length");
    const tdmpc::Vector xv = Eigen::Map<const tdmpc::Vector>(x, static_cast<Eigen::Index>(n));
    const tdmpc::Vector uv = c->controller.step(xv, ell);
    Eigen::Map<tdmpc::Vector>(u, static_cast<Eigen::Index>(m)) = uv;
  });
}

tdmpc_status tdmpc_controller_set_horizon(tdmpc_controller* c, int horizon) {
  return guarded([&] {
    require_ptr(c, "controller");
    c->controller.set_horizon(horizon, c->warm_start);
  });
}

tdmpc_status tdmpc_controller_reset(tdmpc_controller* c) {
  return guarded([&] {
    require_ptr(c, "controller");
    c->controller.reset();
  });
}

void tdmpc_controller_free(tdmpc_controller* controller) { delete controller; }

}  // extern "C"
