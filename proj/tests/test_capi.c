/* Exercises the shared library through its C header only. */
#include "stwind/stwind.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                    \
  do {                                                                  \
    if (!(cond)) {                                                      \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                       \
    }                                                                   \
  } while (0)

static void test_errors(void) {
  stw_config* cfg = NULL;
  EXPECT(stw_config_new(&cfg) == STW_OK);
  EXPECT(stw_config_set(cfg, "model.bogus", "1") == STW_ERR_CONFIG);
  EXPECT(strcmp(stw_last_error_code(), "E_CONFIG") == 0);
  EXPECT(strstr(stw_last_error(), "model.bogus") != NULL);
  EXPECT(stw_config_set(NULL, "run.seed", "1") == STW_ERR_CONFIG);
  EXPECT(strcmp(stw_last_error_code(), "E_PARAMETER") == 0);
  char summary[256];
  EXPECT(stw_run_stage(cfg, "synth", "unused", summary, sizeof summary) == STW_ERR_CONFIG);
  EXPECT(stw_run_stage(cfg, "train", "unused", summary, sizeof summary) == STW_ERR_CONFIG);
  stw_config_free(cfg);

  stw_config* missing = NULL;
  EXPECT(stw_config_load("/nonexistent/stwind.cfg", &missing) == STW_ERR_CONFIG);
  EXPECT(missing == NULL);
  stw_model* model = NULL;
  EXPECT(stw_model_load("/nonexistent", &model) == STW_ERR_DATA);
  EXPECT(stw_set_threads(0) == STW_ERR_CONFIG);
  EXPECT(stw_set_threads(1) == STW_OK);
}

static void test_formulas(void) {
  double c = 0.0;
  EXPECT(stw_loglaw_factor(0.1, 10.0, 100.0, &c) == STW_OK);
  EXPECT(c == 1.5);
  EXPECT(stw_loglaw_factor(20.0, 10.0, 100.0, &c) == STW_ERR_DATA);
  EXPECT(strcmp(stw_last_error_code(), "E_GEOMETRY") == 0);

  stw_power p;
  EXPECT(stw_power_moments(8.47, 1.0, 3075.31, 8.47, 1.27, 25.0, &p) == STW_OK);
  EXPECT(p.mean == 1537.655);
  EXPECT(fabs(p.variance - 3075.31 * 3075.31 / (1.27 * 1.27) / 16.0) < 1e-6);
  EXPECT(p.cutout == 0);
  EXPECT(stw_power_moments(26.0, 1.0, 3075.31, 8.47, 1.27, 25.0, &p) == STW_OK);
  EXPECT(p.mean == 0.0 && p.variance == 0.0 && p.cutout == 1);

  double s = 0.0;
  EXPECT(stw_characteristic_scale(41285.0, 166, &s) == STW_OK);
  EXPECT(fabs(s - 15.8) <= 0.05);
  EXPECT(strlen(stw_version()) > 0);
}

static void test_model(const char* dir) {
  stw_config* cfg = NULL;
  EXPECT(stw_config_new(&cfg) == STW_OK);
  const char* settings[][2] = {
      {"run.seed", "3"},        {"synth.stations", "30"}, {"synth.hours", "120"}, {"synth.width_m", "30000"},
      {"synth.height_m", "30000"}, {"model.members", "4"},  {"model.neurons", "20"}, {"paths.output", dir},
  };
  for (size_t i = 0; i < sizeof settings / sizeof settings[0]; ++i)
    EXPECT(stw_config_set(cfg, settings[i][0], settings[i][1]) == STW_OK);
  char out[1024];
  EXPECT(stw_config_get_output(cfg, out, sizeof out) == STW_OK);
  EXPECT(strcmp(out, dir) == 0);
  const char* stages[] = {"synth", "clean", "features", "fit"};
  char summary[512];
  for (int i = 0; i < 4; ++i) {
    const stw_status st = stw_run_stage(cfg, stages[i], dir, summary, sizeof summary);
    if (st != STW_OK) fprintf(stderr, "%s: %s %s\n", stages[i], stw_last_error_code(), stw_last_error());
    EXPECT(st == STW_OK);
  }
  stw_config_free(cfg);

  stw_model* model = NULL;
  EXPECT(stw_model_load(dir, &model) == STW_OK);
  if (!model) return;
  EXPECT(stw_model_feature_count(model) == 13);
  EXPECT(stw_model_time_count(model) == 120);

  double x[2 * 13];
  for (int i = 0; i < 26; ++i) x[i] = 0.0;
  x[0] = 10000.0;
  x[1] = 12000.0;
  x[13] = 20000.0;
  x[14] = 5000.0;
  const size_t t[3] = {0, 5, 119};
  double mean[6], vm[6], vp[6];
  EXPECT(stw_model_predict(model, x, 2, t, 3, mean, vm, vp) == STW_OK);
  for (int i = 0; i < 6; ++i) {
    EXPECT(isfinite(mean[i]));
    EXPECT(vm[i] >= 0.0);
    EXPECT(vp[i] >= 0.0);
  }
  EXPECT(stw_model_predict(model, x, 2, t, 3, mean, vm, NULL) == STW_OK);
  const size_t bad[1] = {120};
  EXPECT(stw_model_predict(model, x, 2, bad, 1, mean, vm, NULL) == STW_ERR_DATA);
  EXPECT(strcmp(stw_last_error_code(), "E_RANGE") == 0);
  stw_model_free(model);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi WORKDIR\n");
    return 2;
  }
  test_errors();
  test_formulas();
  test_model(argv[1]);
  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("all C API checks passed\n");
  return failures ? 1 : 0;
}
