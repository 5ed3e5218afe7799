/* C interface to the stwind library. All functions return a status code;
 * on failure stw_last_error() describes the most recent error on the
 * calling thread. */
#ifndef STWIND_H
#define STWIND_H

#include <stddef.h>
#include <stdint.h>

#if defined(STW_BUILDING_LIBRARY)
#define STW_API __attribute__((visibility("default")))
#else
#define STW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  STW_OK = 0,
  STW_ERR_INTERNAL = 1,
  STW_ERR_CONFIG = 2,
  STW_ERR_DATA = 3,
  STW_ERR_NUMERIC = 4
} stw_status;

typedef struct stw_config stw_config;
typedef struct stw_model stw_model;

typedef struct {
  double mean;
  double variance;
  int cutout;
} stw_power;

STW_API const char* stw_version(void);

/* Message and machine-readable code (e.g. "E_SCHEMA") of the last failure. */
STW_API const char* stw_last_error(void);
STW_API const char* stw_last_error_code(void);

STW_API stw_status stw_set_threads(int n);

STW_API stw_status stw_config_new(stw_config** out);
STW_API stw_status stw_config_load(const char* path, stw_config** out);
STW_API stw_status stw_config_set(stw_config* cfg, const char* key, const char* value);
STW_API stw_status stw_config_get_threads(const stw_config* cfg, int* out);
/* paths.output, truncated to len. */
STW_API stw_status stw_config_get_output(const stw_config* cfg, char* buf, size_t len);
STW_API void stw_config_free(stw_config* cfg);

/* Stages: synth clean features fit predict power site benchmark.
 * summary receives a one-line report, truncated to summary_len. */
STW_API stw_status stw_run_stage(const stw_config* cfg, const char* stage, const char* stage_dir,
                                 char* summary, size_t summary_len);

/* Loads model/mean and model/variance written by the fit stage. */
STW_API stw_status stw_model_load(const char* stage_dir, stw_model** out);
STW_API size_t stw_model_feature_count(const stw_model* model);
STW_API size_t stw_model_time_count(const stw_model* model);
/* features: n_points x feature_count, row-major raw (unstandardised) values.
 * Outputs are n_points x n_times, row-major; var_pred may be NULL. */
STW_API stw_status stw_model_predict(const stw_model* model, const double* features, size_t n_points,
                                     const size_t* time_index, size_t n_times, double* mean, double* var_model,
                                     double* var_pred);
STW_API void stw_model_free(stw_model* model);

STW_API stw_status stw_loglaw_factor(double h0, double h1, double h2, double* out);
STW_API stw_status stw_power_moments(double mu_v, double sigma2_v, double phi1, double phi2, double phi3,
                                     double cutout, stw_power* out);
STW_API stw_status stw_characteristic_scale(double area_km2, size_t stations, double* out);

#ifdef __cplusplus
}
#endif

#endif
