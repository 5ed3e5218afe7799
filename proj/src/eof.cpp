#include "stwind/eof.hpp"

#include "stwind/error.hpp"
#include "stwind/text_io.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace stwind {

Eigen::VectorXd temporal_mean(const Eigen::MatrixXd& z) {
  if (z.array().isNaN().any()) fail(ErrorKind::completeness, "temporal mean needs a complete matrix");
  if (z.rows() == 0) fail(ErrorKind::dimension, "temporal mean of an empty matrix");
  return z.colwise().mean().transpose();
}

Eigen::MatrixXd center(const Eigen::MatrixXd& z, const Eigen::VectorXd& mean) {
  if (mean.size() != z.cols()) fail(ErrorKind::dimension, "centring: mean length differs from T");
  return z.rowwise() - mean.transpose();
}

EofDecomposition decompose(const Eigen::MatrixXd& ztilde) {
  const auto S = ztilde.rows();
  const auto T = ztilde.cols();
  if (S > T) fail(ErrorKind::dimension, "EOF decomposition needs S <= T");
  if (!ztilde.allFinite()) fail(ErrorKind::numeric, "EOF decomposition of non-finite data");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(ztilde, Eigen::ComputeThinU | Eigen::ComputeThinV);
  EofDecomposition d;
  d.singular_values = svd.singularValues();
  d.phi = svd.matrixV();
  d.coeffs = svd.matrixU();
  d.k_retained = static_cast<std::size_t>(S);
  d.mean = Eigen::VectorXd::Zero(T);

  const double tol = static_cast<double>(std::max(S, T)) * std::numeric_limits<double>::epsilon() *
                     (S > 0 ? d.singular_values(0) : 0.0);
  for (Eigen::Index k = 0; k < S; ++k) {
    Eigen::Index arg = 0;
    d.phi.col(k).cwiseAbs().maxCoeff(&arg);
    if (d.phi(arg, k) < 0) {
      d.phi.col(k) *= -1.0;
      d.coeffs.col(k) *= -1.0;
    }
    if (d.singular_values(k) <= tol) {
      d.singular_values(k) = 0.0;
      d.coeffs.col(k).setZero();
    } else {
      d.coeffs.col(k) *= d.singular_values(k);
    }
  }
  return d;
}

EofDecomposition decompose_observations(const ObservationMatrix& m, std::size_t k_retained) {
  const auto mean = temporal_mean(m.values);
  auto d = decompose(center(m.values, mean));
  d.mean = mean;
  if (k_retained > 0) d.k_retained = std::min(k_retained, d.k_retained);
  return d;
}

Eigen::MatrixXd reconstruct(const EofDecomposition& d, const Eigen::MatrixXd& coeffs,
                            std::span<const std::size_t> times) {
  const auto K = coeffs.cols();
  if (static_cast<std::size_t>(K) > d.k_retained)
    fail(ErrorKind::dimension, "reconstruction uses more components than retained");
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(times.size()), K);
  Eigen::VectorXd mean(static_cast<Eigen::Index>(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] >= d.time_count()) fail(ErrorKind::range, "time index outside the modelled range");
    const auto t = static_cast<Eigen::Index>(times[j]);
    phi.row(static_cast<Eigen::Index>(j)) = d.phi.row(t).head(K);
    mean(static_cast<Eigen::Index>(j)) = d.mean(t);
  }
  Eigen::MatrixXd out = coeffs * phi.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

EofDiagnostics verify_coefficient_moments(const EofDecomposition& d) {
  EofDiagnostics diag;
  const auto& a = d.coeffs;
  const auto S = a.rows();
  const auto K = a.cols();
  if (S == 0 || K == 0) return diag;
  const double sigma1 = d.singular_values.size() ? d.singular_values(0) : 0.0;

  const Eigen::RowVectorXd sums = a.colwise().sum();
  const Eigen::RowVectorXd means = sums / static_cast<double>(S);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double sigma_k = k < d.singular_values.size() ? d.singular_values(k) : 0.0;
    const double tol = 1e-8 * sigma_k + 1e-12 * sigma1 + 1e-300;
    if (std::abs(sums(k)) > tol) diag.mean_ok = false;
    if (sigma1 > 0) diag.max_abs_column_sum = std::max(diag.max_abs_column_sum, std::abs(sums(k)) / sigma1);
  }

  const Eigen::MatrixXd centred = a.rowwise() - means;
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(S);
  const double scale = cov(0, 0) > 0 ? cov(0, 0) : 1.0;
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index l = 0; l < K; ++l)
      if (k != l) diag.max_abs_off_diagonal = std::max(diag.max_abs_off_diagonal, std::abs(cov(k, l)) / scale);
  diag.covariance_ok = diag.max_abs_off_diagonal <= 1e-8;

  for (Eigen::Index k = 0; k + 1 < K; ++k)
    if (cov(k + 1, k + 1) > cov(k, k) + 1e-10 * scale) ++diag.monotonicity_violations;
  diag.monotone_ok = diag.monotonicity_violations == 0;
  return diag;
}

void save_eof(const std::filesystem::path& dir, const EofDecomposition& d,
              std::span<const Timestamp> times, std::span<const StationLocation> stations) {
  if (times.size() != d.time_count() || stations.size() != d.station_count())
    fail(ErrorKind::dimension, "save_eof: labels do not match the decomposition");
  std::filesystem::create_directories(dir);
  const auto K = static_cast<Eigen::Index>(d.k_retained);
  {
    auto out = open_output(dir / "mu_t.csv");
    out << "timestamp,mean\n";
    for (std::size_t j = 0; j < times.size(); ++j)
      out << format_timestamp(times[j]) << ',' << format_double(d.mean(static_cast<Eigen::Index>(j))) << '\n';
  }
  {
    auto out = open_output(dir / "phi.csv");
    for (Eigen::Index k = 0; k < K; ++k) out << (k ? "," : "") << "phi_" << k + 1;
    out << '\n';
    for (Eigen::Index j = 0; j < d.phi.rows(); ++j) {
      for (Eigen::Index k = 0; k < K; ++k) out << (k ? "," : "") << format_double(d.phi(j, k));
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "coefficients.csv");
    out << "station_id";
    for (Eigen::Index k = 0; k < K; ++k) out << ",a_" << k + 1;
    out << '\n';
    for (std::size_t i = 0; i < stations.size(); ++i) {
      out << stations[i].id;
      for (Eigen::Index k = 0; k < K; ++k) out << ',' << format_double(d.coeffs(static_cast<Eigen::Index>(i), k));
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "singular_values.csv");
    out << "k,singular_value\n";
    for (Eigen::Index k = 0; k < K; ++k) out << k + 1 << ',' << format_double(d.singular_values(k)) << '\n';
  }
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line); // header
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto f : split(trim(line), ',')) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const std::string& s, const std::filesystem::path& path) {
  const auto v = parse_double(s);
  if (!v) fail(ErrorKind::schema, path.string() + ": unparseable number '" + s + "'");
  return *v;
}

} // namespace

EofDecomposition load_eof(const std::filesystem::path& dir, std::vector<Timestamp>* times,
                          std::vector<std::string>* station_ids) {
  EofDecomposition d;
  const auto mu = read_csv_rows(dir / "mu_t.csv");
  const auto phi = read_csv_rows(dir / "phi.csv");
  const auto coeffs = read_csv_rows(dir / "coefficients.csv");
  const auto sv = read_csv_rows(dir / "singular_values.csv");

  const auto T = static_cast<Eigen::Index>(mu.size());
  const auto S = static_cast<Eigen::Index>(coeffs.size());
  const auto K = static_cast<Eigen::Index>(sv.size());
  if (phi.size() != mu.size() || K > S)
    fail(ErrorKind::schema, dir.string() + ": inconsistent EOF files");

  d.mean.resize(T);
  if (times) times->clear();
  for (Eigen::Index j = 0; j < T; ++j) {
    if (mu[j].size() != 2) fail(ErrorKind::schema, "mu_t.csv: expected 2 columns");
    if (times) {
      const auto t = parse_timestamp(mu[j][0]);
      if (!t) fail(ErrorKind::schema, "mu_t.csv: bad timestamp");
      times->push_back(*t);
    }
    d.mean(j) = number(mu[j][1], dir / "mu_t.csv");
  }
  d.phi.resize(T, K);
  for (Eigen::Index j = 0; j < T; ++j) {
    if (static_cast<Eigen::Index>(phi[j].size()) != K) fail(ErrorKind::schema, "phi.csv: bad column count");
    for (Eigen::Index k = 0; k < K; ++k) d.phi(j, k) = number(phi[j][k], dir / "phi.csv");
  }
  d.coeffs.resize(S, K);
  if (station_ids) station_ids->clear();
  for (Eigen::Index i = 0; i < S; ++i) {
    if (static_cast<Eigen::Index>(coeffs[i].size()) != K + 1)
      fail(ErrorKind::schema, "coefficients.csv: bad column count");
    if (station_ids) station_ids->push_back(coeffs[i][0]);
    for (Eigen::Index k = 0; k < K; ++k) d.coeffs(i, k) = number(coeffs[i][k + 1], dir / "coefficients.csv");
  }
  d.singular_values.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) d.singular_values(k) = number(sv[k][1], dir / "singular_values.csv");
  d.k_retained = static_cast<std::size_t>(K);
  return d;
}

} // namespace stwind
