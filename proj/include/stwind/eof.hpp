#pragma once

#include "stwind/data_model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stwind {

// Empirical orthogonal functions of an S x T space-time matrix:
//   Z(s_i, t_j) = mu_t(t_j) + sum_k a_k(s_i) phi_k(t_j)
struct EofDecomposition {
  Eigen::VectorXd mean;            // T, empirical temporal mean
  Eigen::MatrixXd phi;             // T x S, orthonormal columns
  Eigen::MatrixXd coeffs;          // S x S, column k is the map a_k
  Eigen::VectorXd singular_values; // S, nonincreasing
  std::size_t k_retained = 0;

  std::size_t station_count() const { return static_cast<std::size_t>(coeffs.rows()); }
  std::size_t time_count() const { return static_cast<std::size_t>(phi.rows()); }
  // Components with a zero singular value carry identically zero maps.
  bool is_active(std::size_t k) const { return singular_values(static_cast<Eigen::Index>(k)) > 0.0; }
};

Eigen::VectorXd temporal_mean(const Eigen::MatrixXd& z);
Eigen::MatrixXd center(const Eigen::MatrixXd& z, const Eigen::VectorXd& mean);

// SVD of the centred matrix: coeffs = U * Sigma, phi = V. Each phi_k is
// flipped so that its largest-magnitude entry is positive. Singular values
// below the rank tolerance are set to exactly zero with their maps.
EofDecomposition decompose(const Eigen::MatrixXd& ztilde);

// Temporal mean + centring + decomposition of a complete observation matrix.
EofDecomposition decompose_observations(const ObservationMatrix& m, std::size_t k_retained = 0);

// mean(t) + sum_{k < K} coeffs(p, k) phi_k(t) for each row p of `coeffs`
// (P x K, K <= k_retained) and each requested time index.
Eigen::MatrixXd reconstruct(const EofDecomposition& d, const Eigen::MatrixXd& coeffs,
                            std::span<const std::size_t> times);

struct EofDiagnostics {
  double max_abs_column_sum = 0.0;   // max_k |sum_i a_k(s_i)| / sigma_1
  double max_abs_off_diagonal = 0.0; // max |cov(a_k, a_l)| / cov(a_1, a_1)
  std::size_t monotonicity_violations = 0;
  bool mean_ok = true;
  bool covariance_ok = true;
  bool monotone_ok = true;

  bool ok() const { return mean_ok && covariance_ok && monotone_ok; }
};

// Empirical checks that coefficient maps are centred, uncorrelated and of
// nonincreasing variance.
EofDiagnostics verify_coefficient_moments(const EofDecomposition& d);

void save_eof(const std::filesystem::path& dir, const EofDecomposition& d,
              std::span<const Timestamp> times, std::span<const StationLocation> stations);
EofDecomposition load_eof(const std::filesystem::path& dir, std::vector<Timestamp>* times = nullptr,
                          std::vector<std::string>* station_ids = nullptr);

} // namespace stwind
