#pragma once

#include "stwind/data_model.hpp"
#include "stwind/elm.hpp"
#include "stwind/eof.hpp"
#include "stwind/terrain_features.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace stwind {

struct StModelConfig {
  ElmConfig elm;               // members, neurons, alpha grid, master seed
  std::size_t k_retained = 0;  // 0: all S components
  double residual_floor = 1e-6; // (m/s)^2, added inside the log of the variance model
};

// Seed of the ensemble fitted to component k.
std::uint64_t component_seed(std::uint64_t master, std::size_t k) noexcept;

struct ComponentVariances {
  Eigen::MatrixXd heteroskedastic; // P x K, sigma2_S2,k
  Eigen::MatrixXd bias_reduced;    // P x K, sigma2_BR,k
  Eigen::VectorXd noise;           // K, sigma2_eps,k
};

// EOF decomposition of the training matrix plus one ELM ensemble per retained
// component with a nonzero singular value. Inputs are raw feature rows; the
// model standardises them with statistics frozen from the training stations.
class StModel {
public:
  static StModel fit(const ObservationMatrix& train, const Eigen::MatrixXd& features,
                     const StModelConfig& config);

  const EofDecomposition& eof() const { return eof_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const std::vector<Timestamp>& times() const { return times_; }
  const std::vector<StationLocation>& stations() const { return stations_; }
  const Eigen::MatrixXd& training_features() const { return features_; }
  std::size_t component_count() const { return eof_.k_retained; }
  // Empty for components that were skipped (zero singular value).
  const std::optional<ElmEnsemble>& ensemble(std::size_t k) const { return ensembles_[k]; }
  std::size_t ensemble_count() const;

  // Index of each timestamp on the model's time grid; range error if absent.
  std::vector<std::size_t> time_indices(std::span<const Timestamp> times) const;

  // Estimated coefficient maps a_k(s0), P x K.
  Eigen::MatrixXd coefficients(const Eigen::MatrixXd& features) const;
  ComponentVariances component_variances(const Eigen::MatrixXd& features) const;

  // P x |times| fields.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& features, std::span<const std::size_t> times) const;
  Eigen::MatrixXd model_variance(const Eigen::MatrixXd& features, std::span<const std::size_t> times) const;

  // Training residual of each component map, n x K (a_k - a_hat_k).
  Eigen::MatrixXd component_residuals() const;

private:
  friend StModel load_st_model(const std::filesystem::path& dir);

  EofDecomposition eof_;
  Standardizer standardizer_;
  std::vector<Timestamp> times_;
  std::vector<StationLocation> stations_;
  Eigen::MatrixXd features_; // raw training features, n x d
  std::vector<std::optional<ElmEnsemble>> ensembles_;
};

// sum_k var(p, k) phi_k(t)^2 for every (p, t): P x K times T x K -> P x T.
Eigen::MatrixXd weighted_component_sum(const Eigen::MatrixXd& var, const Eigen::MatrixXd& phi);

struct CrossCovarianceReport {
  double max_abs_correlation = 0.0;
  std::size_t k = 0;
  std::size_t l = 0;
  bool warning = false; // max_abs_correlation > threshold
};

// Largest normalised empirical cross-covariance between distinct columns.
// Columns with zero variance are ignored.
CrossCovarianceReport cross_covariance(const Eigen::MatrixXd& residuals, double threshold = 0.2);
CrossCovarianceReport cross_covariance_check(const StModel& model, double threshold = 0.2);

// Second model fitted to L = log(R^2 + floor) of the training residuals.
class VarianceModel {
public:
  const StModel& model() const { return model_; }
  double floor() const { return floor_; }

  // exp(mu_L) (1 + sigma2_L / 2), P x |times|.
  Eigen::MatrixXd prediction_variance(const Eigen::MatrixXd& features,
                                      std::span<const std::size_t> times) const;
  // sum_k (sigma2_BR,k + sigma2_eps,k) phi_k^2
  Eigen::MatrixXd log_variance(const Eigen::MatrixXd& features, std::span<const std::size_t> times) const;

private:
  friend VarianceModel fit_variance_model(const StModel&, const ObservationMatrix&,
                                          const Eigen::MatrixXd&, const StModelConfig&);
  friend VarianceModel load_variance_model(const std::filesystem::path& dir);

  StModel model_;
  double floor_ = 1e-6;
};

// Seeds the second pipeline from splitmix64(master) so its hidden layers
// differ from the first model's.
VarianceModel fit_variance_model(const StModel& model, const ObservationMatrix& train,
                                 const Eigen::MatrixXd& features, const StModelConfig& config);

double prediction_variance(double mu_l, double sigma2_l);

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double baseline_rmse = 0.0;
  double baseline_mae = 0.0;
  std::size_t cells = 0;
};

// Errors over the observed (non-NaN) cells of `truth`.
void error_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted, double& rmse,
                   double& mae, std::size_t& cells);

// Model against test stations, and the baseline that predicts mu_t everywhere.
Metrics evaluate(const StModel& model, const ObservationMatrix& test, const Eigen::MatrixXd& test_features);

// Fraction of observed cells with |z - mean| <= 1.96 sqrt(var).
double coverage_fraction(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& mean,
                         const Eigen::MatrixXd& var);
double coverage_check(const StModel& model, const VarianceModel& vm, const ObservationMatrix& test,
                      const Eigen::MatrixXd& test_features);

void save_st_model(const std::filesystem::path& dir, const StModel& model);
StModel load_st_model(const std::filesystem::path& dir);
void save_variance_model(const std::filesystem::path& dir, const VarianceModel& vm);
VarianceModel load_variance_model(const std::filesystem::path& dir);

} // namespace stwind
