#ifndef THINLAYER_THINLAYER_H
#define THINLAYER_THINLAYER_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#  ifdef THINLAYER_BUILDING
#    define TL_API __declspec(dllexport)
#  else
#    define TL_API __declspec(dllimport)
#  endif
#else
#  define TL_API __attribute__((visibility("default")))
#endif

/* Return codes. Every int-returning call yields TL_OK or one of these; the message of the
   last failure on the calling thread is available from tl_last_error(). */
enum {
  TL_OK = 0,
  TL_INVALID_ARGUMENT = 1,
  TL_DEGENERATE_OBSTACLE = 2,
  TL_OBSTACLE_TOUCHES_BOUNDARY = 3,
  TL_NON_INTEGER_PERIOD_COUNT = 4,
  TL_LAYER_TOO_WIDE = 5,
  TL_FEATURE_UNDERRESOLVED = 6,
  TL_NON_POSITIVE_DIFFUSION = 7,
  TL_UNKNOWN_TAG = 8,
  TL_LINEAR_SOLVE_FAILURE = 9,
  TL_PICARD_DIVERGENCE = 10,
  TL_GEOMETRY_MESH_MISMATCH = 11,
  TL_AMBIGUOUS_CLASSIFICATION = 12,
  TL_INTERFACE_ITERATION_DIVERGED = 13,
  TL_REGION_MISMATCH = 14,
  TL_SWEEP_TOO_SHORT = 15,
  TL_NON_POSITIVE_INPUT = 16,
  TL_CONFIG_ERROR = 17,
  TL_IO_ERROR = 18,
  TL_ASSUMPTION_VIOLATION = 19,
  TL_INTERNAL = 99
};

typedef struct tl_config tl_config;
typedef struct tl_micro tl_micro;
typedef struct tl_report tl_report;

TL_API const char* tl_version(void);
TL_API const char* tl_last_error(void);
TL_API const char* tl_error_name(int code);

/* Configuration (JSON, see docs/config.md). */
TL_API int tl_config_load(const char* path, tl_config** out);
TL_API int tl_config_parse(const char* json, tl_config** out);
TL_API void tl_config_free(tl_config* cfg);
/* Numeric override by dotted key, e.g. "geometry.eps", "drift.delta", "time.dt", "mesh.target_edge". */
TL_API int tl_config_set(tl_config* cfg, const char* key, double value);
/* Writes "S1".."S4" or "unclassified" (NUL-terminated, truncated to cap). */
TL_API int tl_config_classify(const tl_config* cfg, char* buf, size_t cap);
TL_API int tl_config_lambda(const tl_config* cfg, int* lambda1, int* lambda2);
/* One violation per line ("rule: detail", warnings prefixed "warning "). *needed receives the full
   length including the terminator; *blocking the number of violations that would stop a run. */
TL_API int tl_config_validate(const tl_config* cfg, char* buf, size_t cap, size_t* needed, int* blocking);

/* Micro problem. */
TL_API int tl_micro_run(const tl_config* cfg, tl_micro** out);
TL_API void tl_micro_free(tl_micro* sol);
TL_API int tl_micro_levels(const tl_micro* sol, size_t* levels);
TL_API int tl_micro_layer_average(const tl_micro* sol, double* out, size_t n);
/* e1..e4 at the final time. */
TL_API int tl_micro_energy(const tl_micro* sol, double out[4]);
TL_API int tl_micro_write(const tl_micro* sol, const char* dir);

/* Limit problem "S1".."S4"; writes outputs to dir and reports the largest interface residual. */
TL_API int tl_run_macro(const tl_config* cfg, const char* choice, const char* dir, double* max_residual);

/* Studies. Each report row holds sweep_value, err_L, err_R, err_layer_avg, e1, e2, e3, wall_ms. */
TL_API int tl_study_eps(const tl_config* cfg, const double* eps, size_t n, const char* choice, int deterministic,
                        tl_report** out);
/* level is "micro" or "macro"; choice selects the macro model. */
TL_API int tl_study_delta(const tl_config* cfg, const double* deltas, size_t n, const char* level, const char* choice,
                          int deterministic, tl_report** out);
TL_API void tl_report_free(tl_report* report);
TL_API int tl_report_rows(const tl_report* report, size_t* rows);
TL_API int tl_report_row(const tl_report* report, size_t row, double out[8]);
TL_API int tl_report_warnings(const tl_report* report, char* buf, size_t cap, size_t* needed);
TL_API int tl_report_write(const tl_report* report, const char* dir);

/* CSV of r, P(r), P_delta(r) on n samples of [r0, r1] for the configured drift. */
TL_API int tl_drift_samples(const tl_config* cfg, double r0, double r1, int n, const char* csv_path);

/* report.csv -> log-log SVG. */
TL_API int tl_plot_csv(const char* csv_path, const char* svg_path);

#ifdef __cplusplus
}
#endif

#endif
