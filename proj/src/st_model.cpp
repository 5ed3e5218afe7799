#include "stwind/st_model.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/random.hpp"
#include "stwind/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace stwind {

std::uint64_t component_seed(std::uint64_t master, std::size_t k) noexcept {
  return splitmix64(master + static_cast<std::uint64_t>(k));
}

namespace {

Eigen::MatrixXd phi_rows(const EofDecomposition& d, std::span<const std::size_t> times, Eigen::Index k) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), k);
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] >= d.time_count()) fail(ErrorKind::range, "time index outside the modelled range");
    out.row(static_cast<Eigen::Index>(j)) = d.phi.row(static_cast<Eigen::Index>(times[j])).head(k);
  }
  return out;
}

std::string component_dir(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "component_%03zu", k);
  return buf;
}

} // namespace

StModel StModel::fit(const ObservationMatrix& train, const Eigen::MatrixXd& features,
                     const StModelConfig& config) {
  if (!train.complete()) fail(ErrorKind::completeness, "model fitting needs a complete training matrix");
  if (static_cast<std::size_t>(features.rows()) != train.station_count())
    fail(ErrorKind::dimension, "feature rows do not match the training stations");

  StModel model;
  model.eof_ = decompose_observations(train, config.k_retained);
  model.times_ = train.times;
  model.stations_ = train.stations;
  model.features_ = features;
  model.standardizer_ = Standardizer::fit(features);
  const Eigen::MatrixXd x = model.standardizer_.apply(features);

  const auto K = model.eof_.k_retained;
  model.ensembles_.resize(K);
  parallel_for(K, [&](std::size_t k) {
    if (!model.eof_.is_active(k)) return;
    ElmConfig c = config.elm;
    c.seed = component_seed(config.elm.seed, k);
    model.ensembles_[k] = ElmEnsemble::fit(x, model.eof_.coeffs.col(static_cast<Eigen::Index>(k)), c);
  });
  return model;
}

std::size_t StModel::ensemble_count() const {
  return static_cast<std::size_t>(
      std::count_if(ensembles_.begin(), ensembles_.end(), [](const auto& e) { return e.has_value(); }));
}

std::vector<std::size_t> StModel::time_indices(std::span<const Timestamp> times) const {
  std::vector<std::size_t> out;
  out.reserve(times.size());
  for (auto t : times) {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end() || *it != t)
      fail(ErrorKind::range, "timestamp " + format_timestamp(t) + " is not on the model's time grid");
    out.push_back(static_cast<std::size_t>(it - times_.begin()));
  }
  return out;
}

Eigen::MatrixXd StModel::coefficients(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd x = standardizer_.apply(features);
  const auto K = static_cast<Eigen::Index>(component_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(x.rows(), K);
  parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
    if (ensembles_[k]) a.col(static_cast<Eigen::Index>(k)) = ensembles_[k]->predict(x);
  });
  return a;
}

ComponentVariances StModel::component_variances(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd x = standardizer_.apply(features);
  const auto K = static_cast<Eigen::Index>(component_count());
  ComponentVariances out;
  out.heteroskedastic = Eigen::MatrixXd::Zero(x.rows(), K);
  out.bias_reduced = Eigen::MatrixXd::Zero(x.rows(), K);
  out.noise = Eigen::VectorXd::Zero(K);
  parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
    if (!ensembles_[k]) return;
    const auto v = ensembles_[k]->variances(x);
    const auto kk = static_cast<Eigen::Index>(k);
    out.heteroskedastic.col(kk) = v.heteroskedastic;
    out.bias_reduced.col(kk) = v.bias_reduced;
    out.noise(kk) = v.noise;
  });
  return out;
}

Eigen::MatrixXd StModel::predict(const Eigen::MatrixXd& features, std::span<const std::size_t> times) const {
  return reconstruct(eof_, coefficients(features), times);
}

Eigen::MatrixXd StModel::model_variance(const Eigen::MatrixXd& features,
                                        std::span<const std::size_t> times) const {
  const auto cv = component_variances(features);
  return weighted_component_sum(cv.heteroskedastic,
                                phi_rows(eof_, times, static_cast<Eigen::Index>(component_count())));
}

Eigen::MatrixXd StModel::component_residuals() const {
  const auto K = static_cast<Eigen::Index>(component_count());
  return eof_.coeffs.leftCols(K) - coefficients(features_);
}

Eigen::MatrixXd weighted_component_sum(const Eigen::MatrixXd& var, const Eigen::MatrixXd& phi) {
  if (var.cols() != phi.cols()) fail(ErrorKind::dimension, "component counts differ");
  return var * phi.array().square().matrix().transpose();
}

CrossCovarianceReport cross_covariance(const Eigen::MatrixXd& residuals, double threshold) {
  CrossCovarianceReport report;
  const auto n = residuals.rows();
  const auto K = residuals.cols();
  if (n < 2) return report;
  const Eigen::MatrixXd c = residuals.rowwise() - residuals.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(n);
  const double scale = cov.diagonal().maxCoeff();
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(cov(k, k) > 1e-14 * scale)) continue;
    for (Eigen::Index l = k + 1; l < K; ++l) {
      if (!(cov(l, l) > 1e-14 * scale)) continue;
      const double r = std::abs(cov(k, l)) / std::sqrt(cov(k, k) * cov(l, l));
      if (r > report.max_abs_correlation) {
        report.max_abs_correlation = r;
        report.k = static_cast<std::size_t>(k);
        report.l = static_cast<std::size_t>(l);
      }
    }
  }
  report.warning = report.max_abs_correlation > threshold;
  return report;
}

CrossCovarianceReport cross_covariance_check(const StModel& model, double threshold) {
  return cross_covariance(model.component_residuals(), threshold);
}

VarianceModel fit_variance_model(const StModel& model, const ObservationMatrix& train,
                                 const Eigen::MatrixXd& features, const StModelConfig& config) {
  if (!(config.residual_floor > 0)) fail(ErrorKind::parameter, "residual floor must be > 0");
  const Eigen::MatrixXd fitted = model.predict(features, model.time_indices(train.times));

  ObservationMatrix log_sq = train;
  log_sq.values = ((train.values - fitted).array().square() + config.residual_floor).log().matrix();

  StModelConfig second = config;
  second.elm.seed = splitmix64(config.elm.seed);
  VarianceModel vm;
  vm.model_ = StModel::fit(log_sq, features, second);
  vm.floor_ = config.residual_floor;
  return vm;
}

double prediction_variance(double mu_l, double sigma2_l) {
  if (!std::isfinite(mu_l) || !std::isfinite(sigma2_l))
    fail(ErrorKind::numeric, "non-finite log-residual moments");
  return std::exp(mu_l) * (1.0 + 0.5 * sigma2_l);
}

Eigen::MatrixXd VarianceModel::log_variance(const Eigen::MatrixXd& features,
                                            std::span<const std::size_t> times) const {
  const auto cv = model_.component_variances(features);
  const Eigen::MatrixXd v = cv.bias_reduced.rowwise() + cv.noise.transpose();
  return weighted_component_sum(
      v, phi_rows(model_.eof(), times, static_cast<Eigen::Index>(model_.component_count())));
}

Eigen::MatrixXd VarianceModel::prediction_variance(const Eigen::MatrixXd& features,
                                                   std::span<const std::size_t> times) const {
  const Eigen::MatrixXd mu = model_.predict(features, times);
  if (!mu.allFinite()) fail(ErrorKind::numeric, "non-finite log-residual prediction");
  const Eigen::MatrixXd s2 = log_variance(features, times);
  return (mu.array().exp() * (1.0 + 0.5 * s2.array())).matrix();
}

void error_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted, double& rmse,
                   double& mae, std::size_t& cells) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    fail(ErrorKind::dimension, "metric inputs differ in shape");
  CompensatedSum sq, ab;
  cells = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j)
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      if (std::isnan(truth(i, j))) continue;
      const double e = truth(i, j) - predicted(i, j);
      sq.add(e * e);
      ab.add(std::abs(e));
      ++cells;
    }
  if (cells == 0) fail(ErrorKind::evaluation, "no observed test cells to evaluate");
  rmse = std::sqrt(sq.value() / static_cast<double>(cells));
  mae = ab.value() / static_cast<double>(cells);
}

Metrics evaluate(const StModel& model, const ObservationMatrix& test, const Eigen::MatrixXd& test_features) {
  if (test.station_count() == 0 || test.time_count() == 0)
    fail(ErrorKind::evaluation, "empty test set");
  const auto idx = model.time_indices(test.times);
  const Eigen::MatrixXd pred = model.predict(test_features, idx);
  Eigen::MatrixXd baseline(pred.rows(), pred.cols());
  for (std::size_t j = 0; j < idx.size(); ++j)
    baseline.col(static_cast<Eigen::Index>(j)).setConstant(model.eof().mean(static_cast<Eigen::Index>(idx[j])));
  Metrics m;
  error_metrics(test.values, pred, m.rmse, m.mae, m.cells);
  std::size_t cells = 0;
  error_metrics(test.values, baseline, m.baseline_rmse, m.baseline_mae, cells);
  return m;
}

double coverage_fraction(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& var) {
  std::size_t inside = 0;
  std::size_t cells = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j)
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      if (std::isnan(truth(i, j))) continue;
      ++cells;
      if (std::abs(truth(i, j) - mean(i, j)) <= 1.96 * std::sqrt(std::max(0.0, var(i, j)))) ++inside;
    }
  if (cells == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(inside) / static_cast<double>(cells);
}

double coverage_check(const StModel& model, const VarianceModel& vm, const ObservationMatrix& test,
                      const Eigen::MatrixXd& test_features) {
  const auto idx = model.time_indices(test.times);
  const auto idx_v = vm.model().time_indices(test.times);
  return coverage_fraction(test.values, model.predict(test_features, idx),
                           vm.prediction_variance(test_features, idx_v));
}

void save_st_model(const std::filesystem::path& dir, const StModel& model) {
  std::filesystem::create_directories(dir);
  save_eof(dir / "eof", model.eof(), model.times(), model.stations());

  const auto& names = feature_names();
  const auto& f = model.training_features();
  const auto& z = model.standardizer();
  {
    auto out = open_output(dir / "standardizer.csv");
    out << "feature,mean,scale\n";
    for (Eigen::Index c = 0; c < z.mean.size(); ++c)
      out << (static_cast<std::size_t>(c) < names.size() && f.cols() == static_cast<Eigen::Index>(kFeatureCount)
                  ? names[static_cast<std::size_t>(c)]
                  : "x" + std::to_string(c + 1))
          << ',' << format_double(z.mean(c)) << ',' << format_double(z.scale(c)) << '\n';
  }
  {
    auto out = open_output(dir / "features.csv");
    out << "station_id,easting_m,northing_m,elev_m";
    for (Eigen::Index c = 0; c < f.cols(); ++c) out << ",x" << c + 1;
    out << '\n';
    for (std::size_t i = 0; i < model.stations().size(); ++i) {
      const auto& s = model.stations()[i];
      out << s.id << ',' << format_double(s.easting) << ',' << format_double(s.northing) << ','
          << format_double(s.elevation);
      for (Eigen::Index c = 0; c < f.cols(); ++c) out << ',' << format_double(f(static_cast<Eigen::Index>(i), c));
      out << '\n';
    }
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = "STMODEL1";
  manifest["k_retained"] = model.component_count();
  manifest["components"] = nlohmann::json::array();
  for (std::size_t k = 0; k < model.component_count(); ++k) {
    if (!model.ensemble(k)) continue;
    manifest["components"].push_back({{"k", k}, {"dir", component_dir(k)}});
    save_ensemble(dir / component_dir(k), *model.ensemble(k));
  }
  auto out = open_output(dir / "model.json");
  out << manifest.dump(2) << '\n';
}

namespace {

std::vector<std::vector<std::string>> csv_body(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto field : split(trim(line), ',')) row.emplace_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_number(const std::string& s, const std::filesystem::path& path) {
  const auto v = parse_double(s);
  if (!v) fail(ErrorKind::schema, path.string() + ": unparseable number '" + s + "'");
  return *v;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::schema, path.string() + ": " + ex.what());
  }
}

} // namespace

StModel load_st_model(const std::filesystem::path& dir) {
  StModel model;
  std::vector<std::string> ids;
  model.eof_ = load_eof(dir / "eof", &model.times_, &ids);

  const auto frows = csv_body(dir / "features.csv");
  if (frows.size() != ids.size()) fail(ErrorKind::schema, "features.csv does not match the EOF stations");
  const auto d = frows.empty() ? 0 : static_cast<Eigen::Index>(frows[0].size()) - 4;
  model.features_.resize(static_cast<Eigen::Index>(frows.size()), d);
  for (std::size_t i = 0; i < frows.size(); ++i) {
    const auto& r = frows[i];
    if (static_cast<Eigen::Index>(r.size()) != d + 4 || r[0] != ids[i])
      fail(ErrorKind::schema, "features.csv: inconsistent row for station '" + r[0] + "'");
    StationLocation s;
    s.id = r[0];
    s.easting = to_number(r[1], dir / "features.csv");
    s.northing = to_number(r[2], dir / "features.csv");
    s.elevation = to_number(r[3], dir / "features.csv");
    model.stations_.push_back(s);
    for (Eigen::Index c = 0; c < d; ++c)
      model.features_(static_cast<Eigen::Index>(i), c) = to_number(r[static_cast<std::size_t>(c) + 4], dir / "features.csv");
  }

  const auto zrows = csv_body(dir / "standardizer.csv");
  if (static_cast<Eigen::Index>(zrows.size()) != d) fail(ErrorKind::schema, "standardizer.csv: wrong row count");
  model.standardizer_.mean.resize(d);
  model.standardizer_.scale.resize(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto& r = zrows[static_cast<std::size_t>(c)];
    if (r.size() != 3) fail(ErrorKind::schema, "standardizer.csv: expected 3 columns");
    model.standardizer_.mean(c) = to_number(r[1], dir / "standardizer.csv");
    model.standardizer_.scale(c) = to_number(r[2], dir / "standardizer.csv");
  }

  const auto manifest = read_json(dir / "model.json");
  const auto K = manifest.at("k_retained").get<std::size_t>();
  if (K != model.eof_.k_retained) fail(ErrorKind::schema, "model.json disagrees with the stored EOF");
  model.ensembles_.resize(K);
  const Eigen::MatrixXd x = model.standardizer_.apply(model.features_);
  for (const auto& entry : manifest.at("components")) {
    const auto k = entry.at("k").get<std::size_t>();
    if (k >= K) fail(ErrorKind::schema, "model.json: component index out of range");
    model.ensembles_[k] = load_ensemble(dir / entry.at("dir").get<std::string>(), x,
                                        model.eof_.coeffs.col(static_cast<Eigen::Index>(k)));
  }
  return model;
}

void save_variance_model(const std::filesystem::path& dir, const VarianceModel& vm) {
  save_st_model(dir, vm.model());
  nlohmann::ordered_json j;
  j["residual_floor"] = vm.floor();
  auto out = open_output(dir / "variance.json");
  out << j.dump(2) << '\n';
}

VarianceModel load_variance_model(const std::filesystem::path& dir) {
  VarianceModel vm;
  vm.model_ = load_st_model(dir);
  vm.floor_ = read_json(dir / "variance.json").at("residual_floor").get<double>();
  return vm;
}

} // namespace stwind
