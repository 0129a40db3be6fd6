#ifndef TDMPC_TDMPC_H
#define TDMPC_TDMPC_H

#include <stddef.h>

#if defined(_WIN32)
#if defined(TDMPC_BUILDING_LIBRARY)
#define TDMPC_API __declspec(dllexport)
#else
#define TDMPC_API __declspec(dllimport)
#endif
#else
#define TDMPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tdmpc_status {
  TDMPC_OK = 0,
  TDMPC_ERR_INVALID_ARGUMENT = 1,
  TDMPC_ERR_CONFIG = 2,
  TDMPC_ERR_CERTIFICATE = 3,
  TDMPC_ERR_NUMERICAL = 4,
  TDMPC_ERR_ORACLE = 5,
  TDMPC_ERR_IO = 6,
  TDMPC_ERR_INTERNAL = 7
} tdmpc_status;

typedef struct tdmpc_scenario tdmpc_scenario;
typedef struct tdmpc_result tdmpc_result;
typedef struct tdmpc_controller tdmpc_controller;

TDMPC_API const char* tdmpc_version(void);
TDMPC_API const char* tdmpc_status_string(tdmpc_status status);

/* Message of the last failing call on this thread; empty after a success. */
TDMPC_API const char* tdmpc_last_error(void);

TDMPC_API size_t tdmpc_preset_count(void);
TDMPC_API const char* tdmpc_preset_name(size_t index);

TDMPC_API tdmpc_status tdmpc_scenario_from_json(const char* text, tdmpc_scenario** out);
TDMPC_API tdmpc_status tdmpc_scenario_from_file(const char* path, tdmpc_scenario** out);
TDMPC_API tdmpc_status tdmpc_scenario_from_preset(const char* name, tdmpc_scenario** out);
TDMPC_API void tdmpc_scenario_free(tdmpc_scenario* scenario);

/* Strings returned by scenario accessors live as long as the scenario. */
TDMPC_API const char* tdmpc_scenario_json(const tdmpc_scenario* scenario);
TDMPC_API const char* tdmpc_scenario_hash(const tdmpc_scenario* scenario);
TDMPC_API const char* tdmpc_scenario_name(const tdmpc_scenario* scenario);
TDMPC_API const char* tdmpc_scenario_output_dir(const tdmpc_scenario* scenario);
TDMPC_API const char* tdmpc_scenario_output_stem(const tdmpc_scenario* scenario);

TDMPC_API tdmpc_status tdmpc_certify(const tdmpc_scenario* scenario, tdmpc_result** out);
TDMPC_API tdmpc_status tdmpc_simulate(const tdmpc_scenario* scenario, int repeat, tdmpc_result** out);
TDMPC_API tdmpc_status tdmpc_compare(const tdmpc_scenario* a, const tdmpc_scenario* b, tdmpc_result** out);
TDMPC_API tdmpc_status tdmpc_verify_bounds(const tdmpc_scenario* scenario, tdmpc_result** out);
TDMPC_API tdmpc_status tdmpc_condensed_json(const tdmpc_scenario* scenario, tdmpc_result** out);

/* Strings returned by result accessors live as long as the result. */
TDMPC_API const char* tdmpc_result_report(const tdmpc_result* result);
TDMPC_API size_t tdmpc_result_file_count(const tdmpc_result* result);
TDMPC_API const char* tdmpc_result_file_suffix(const tdmpc_result* result, size_t index);
TDMPC_API const char* tdmpc_result_file_content(const tdmpc_result* result, size_t index);
/* 1 if every bound check passed, 0 if one failed, -1 if the result carries no bound checks. */
TDMPC_API int tdmpc_result_bounds_satisfied(const tdmpc_result* result);
/* Writes <stem>.json and the attached files; nothing is left behind on failure. */
TDMPC_API tdmpc_status tdmpc_result_write(const tdmpc_result* result, const char* dir, const char* stem);
TDMPC_API void tdmpc_result_free(tdmpc_result* result);

/* Time-distributed controller on the scenario's plant at horizon N (0 = the scenario's first horizon). */
TDMPC_API tdmpc_status tdmpc_controller_create(const tdmpc_scenario* scenario, int horizon, tdmpc_controller** out);
TDMPC_API size_t tdmpc_controller_state_dim(const tdmpc_controller* controller);
TDMPC_API size_t tdmpc_controller_input_dim(const tdmpc_controller* controller);
TDMPC_API int tdmpc_controller_horizon(const tdmpc_controller* controller);
TDMPC_API tdmpc_status tdmpc_controller_step(tdmpc_controller* controller, const double* x, size_t n, int ell,
                                             double* u, size_t m);
TDMPC_API tdmpc_status tdmpc_controller_set_horizon(tdmpc_controller* controller, int horizon);
TDMPC_API tdmpc_status tdmpc_controller_reset(tdmpc_controller* controller);
TDMPC_API void tdmpc_controller_free(tdmpc_controller* controller);

#ifdef __cplusplus
}
#endif

#endif
