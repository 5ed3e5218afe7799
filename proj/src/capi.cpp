#include "stwind/stwind.h"

#include "stwind/config.hpp"
#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/pipeline.hpp"
#include "stwind/power.hpp"
#include "stwind/st_model.hpp"

#include <json.hpp>

#include <cstring>
#include <new>
#include <string>

struct stw_config {
  stwind::RunConfig cfg;
};

struct stw_model {
  stwind::StModel mean;
  stwind::VarianceModel variance;
};

namespace {

thread_local std::string last_message;
thread_local std::string last_code = "OK";

stw_status record(stw_status s, std::string_view code, std::string message) {
  last_code = code;
  last_message = std::move(message);
  return s;
}

template <class F>
stw_status guarded(F&& body) {
  try {
    body();
    last_code = "OK";
    last_message.clear();
    return STW_OK;
  } catch (const stwind::Error& e) {
    return record(static_cast<stw_status>(e.error_class()), stwind::kind_name(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(STW_ERR_DATA, "E_SCHEMA", e.what());
  } catch (const std::bad_alloc&) {
    return record(STW_ERR_INTERNAL, "E_INTERNAL", "out of memory");
  } catch (const std::exception& e) {
    return record(STW_ERR_INTERNAL, "E_INTERNAL", e.what());
  }
}

stw_status null_arg(const char* what) {
  return record(STW_ERR_CONFIG, "E_PARAMETER", std::string(what) + " must not be NULL");
}

} // namespace

extern "C" {

const char* stw_version(void) { return "0.1.0"; }
const char* stw_last_error(void) { return last_message.c_str(); }
const char* stw_last_error_code(void) { return last_code.c_str(); }

stw_status stw_set_threads(int n) {
  return guarded([&] {
    if (n < 1) stwind::fail(stwind::ErrorKind::parameter, "thread count must be >= 1");
    stwind::set_thread_count(n);
  });
}

stw_status stw_config_new(stw_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new stw_config{}; });
}

stw_status stw_config_load(const char* path, stw_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new stw_config{stwind::load_config(path)}; });
}

stw_status stw_config_set(stw_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("cfg");
  if (!key || !value) return null_arg("key/value");
  return guarded([&] { stwind::apply_setting(cfg->cfg, key, value); });
}

stw_status stw_config_get_threads(const stw_config* cfg, int* out) {
  if (!cfg || !out) return null_arg("cfg/out");
  *out = cfg->cfg.threads;
  return STW_OK;
}

stw_status stw_config_get_output(const stw_config* cfg, char* buf, size_t len) {
  if (!cfg || !buf || len == 0) return null_arg("cfg/buf");
  const auto s = cfg->cfg.output.string();
  if (s.size() >= len) return record(STW_ERR_CONFIG, "E_PARAMETER", "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return STW_OK;
}

void stw_config_free(stw_config* cfg) { delete cfg; }

stw_status stw_run_stage(const stw_config* cfg, const char* stage, const char* stage_dir, char* summary,
                         size_t summary_len) {
  if (!cfg || !stage || !stage_dir) return null_arg("cfg/stage/stage_dir");
  return guarded([&] {
    const auto s = stwind::parse_stage(stage);
    if (!s) stwind::fail(stwind::ErrorKind::config, "unknown stage '" + std::string(stage) + "'");
    const auto report = stwind::run_stage(cfg->cfg, *s, stage_dir);
    if (summary && summary_len > 0) {
      std::string line = report.summary;
      for (const auto& w : report.warnings) line += "; warning: " + w;
      const auto n = std::min(line.size(), summary_len - 1);
      std::memcpy(summary, line.data(), n);
      summary[n] = '\0';
    }
  });
}

stw_status stw_model_load(const char* stage_dir, stw_model** out) {
  if (!stage_dir || !out) return null_arg("stage_dir/out");
  return guarded([&] {
    const std::filesystem::path dir(stage_dir);
    *out = new stw_model{stwind::load_st_model(dir / "model" / "mean"),
                         stwind::load_variance_model(dir / "model" / "variance")};
  });
}

size_t stw_model_feature_count(const stw_model* model) {
  return model ? static_cast<size_t>(model->mean.training_features().cols()) : 0;
}

size_t stw_model_time_count(const stw_model* model) { return model ? model->mean.times().size() : 0; }

stw_status stw_model_predict(const stw_model* model, const double* features, size_t n_points,
                             const size_t* time_index, size_t n_times, double* mean, double* var_model,
                             double* var_pred) {
  if (!model || !features || !time_index || !mean || !var_model) return null_arg("argument");
  return guarded([&] {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto d = static_cast<Eigen::Index>(stw_model_feature_count(model));
    const Eigen::MatrixXd x = Eigen::Map<const RowMajor>(features, static_cast<Eigen::Index>(n_points), d);
    for (size_t j = 0; j < n_times; ++j)
      if (time_index[j] >= model->mean.times().size())
        stwind::fail(stwind::ErrorKind::range, "time index outside the model's time grid");
    const std::span<const std::size_t> times(time_index, n_times);
    const auto p = static_cast<Eigen::Index>(n_points);
    const auto t = static_cast<Eigen::Index>(n_times);
    Eigen::Map<RowMajor>(mean, p, t) = model->mean.predict(x, times);
    Eigen::Map<RowMajor>(var_model, p, t) = model->mean.model_variance(x, times);
    if (var_pred) Eigen::Map<RowMajor>(var_pred, p, t) = model->variance.prediction_variance(x, times);
  });
}

void stw_model_free(stw_model* model) { delete model; }

stw_status stw_loglaw_factor(double h0, double h1, double h2, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = stwind::loglaw_factor(h0, {h1, h2, 25.0}); });
}

stw_status stw_power_moments(double mu_v, double sigma2_v, double phi1, double phi2, double phi3, double cutout,
                             stw_power* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    const stwind::PowerCurve curve{phi1, phi2, phi3};
    stwind::TurbineConfig turbine;
    turbine.cutout = cutout;
    const auto pm = stwind::apply_cutout(mu_v, stwind::power_moments(mu_v, sigma2_v, curve), turbine);
    *out = {pm.mean, pm.variance, pm.cutout ? 1 : 0};
  });
}

stw_status stw_characteristic_scale(double area_km2, size_t stations, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = stwind::characteristic_scale(area_km2, stations); });
}

} // extern "C"
