#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace stwind {

// Random hidden layer of a single-hidden-layer network.
struct HiddenLayer {
  Eigen::MatrixXd weights; // d x N, entries uniform on [-1, 1]
  Eigen::VectorXd biases;  // N, uniform on [-1, 1]

  std::size_t input_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t neurons() const { return static_cast<std::size_t>(biases.size()); }
};

HiddenLayer init_member(std::size_t d, std::size_t neurons, std::uint64_t seed);

double logistic(double z) noexcept;

// H_ij = g(x_i . w_j + b_j), logistic g.
Eigen::MatrixXd hidden_matrix(const Eigen::MatrixXd& x, const HiddenLayer& layer);

// Thin SVD of a hidden matrix, H = U diag(s) V^T. Every ridge quantity for
// any Tikhonov factor alpha follows from it without refactorising.
class RidgeSpectrum {
public:
  explicit RidgeSpectrum(const Eigen::MatrixXd& h);

  std::size_t rows() const { return static_cast<std::size_t>(u_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(v_.rows()); }
  bool singular_gram() const; // H^T H singular

  // (H^T H + alpha I)^{-1} H^T y
  Eigen::VectorXd solve(const Eigen::VectorXd& y, double alpha) const;
  // tr(A_alpha), A_alpha = H (H^T H + alpha I)^{-1} H^T
  double hat_trace(double alpha) const;
  // (1/n)||(I - A)y||^2 / ((1/n) tr(I - A))^2; NaN when tr(A) reaches n.
  double gcv(const Eigen::VectorXd& y, double alpha) const;
  // H^alpha = (H^T H + alpha I)^{-1} H^T, N x n.
  Eigen::MatrixXd smoother(double alpha) const;
  Eigen::MatrixXd hat(double alpha) const;
  // (H^alpha)^T B for a block B of N-vectors, giving n-vectors.
  Eigen::MatrixXd smoother_transpose_times(const Eigen::MatrixXd& b, double alpha) const;

private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd v_;
};

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double alpha);
double gcv_score(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double alpha);
// Minimiser of GCV over the grid; ties go to the larger alpha.
double gcv_select(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, std::span<const double> alpha_grid);
double gcv_select(const RidgeSpectrum& spectrum, const Eigen::VectorXd& y,
                  std::span<const double> alpha_grid);

// n log-spaced values on [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct ElmConfig {
  std::size_t members = 20;
  std::size_t neurons = 0; // 0: floor(0.9 n)
  std::vector<double> alpha_grid = log_grid(1e-8, 1e4, 61);
  std::uint64_t seed = 0;
};

std::size_t default_neurons(std::size_t n);

struct ElmMember {
  std::uint64_t seed = 0;
  HiddenLayer layer;
  double alpha = 0.0;
  Eigen::VectorXd beta;
};

enum class VarianceMode { heteroskedastic, bias_reduced };

struct EnsembleVariances {
  Eigen::VectorXd heteroskedastic; // sigma2_S2 per query point
  Eigen::VectorXd bias_reduced;    // sigma2_BR per query point
  double noise = 0.0;              // sigma2_eps
};

// M regularised ELMs sharing one training set. Member m is seeded with
// seed ^ m and picks its own alpha by GCV. Immutable once built.
class ElmEnsemble {
public:
  static ElmEnsemble fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ElmConfig& config);
  static ElmEnsemble from_members(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  std::vector<ElmMember> members);

  std::size_t size() const { return members_.size(); }
  std::size_t input_dim() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t training_size() const { return static_cast<std::size_t>(x_.rows()); }
  const std::vector<ElmMember>& members() const { return members_; }
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }

  // P x M member predictions.
  Eigen::MatrixXd member_predictions(const Eigen::MatrixXd& x0) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x0) const;
  double predict(const Eigen::VectorXd& x0) const;

  // Ensemble hat matrix (1/M) sum_m H_m H_m^alpha.
  const Eigen::MatrixXd& hat() const { return hat_; }
  const Eigen::VectorXd& residuals() const { return residuals_; }
  // tr(2 A - A A^T)
  double degrees_of_freedom() const { return dof_; }
  // ||y - A y||^2 / (n - dof)
  double noise_variance() const;

  // Per-member smoother factors, rebuilt on demand.
  std::vector<RidgeSpectrum> spectra() const;
  // l_m(x0) = (H_m^alpha)^T h_m(x0), one n x P block per member.
  std::vector<Eigen::MatrixXd> weight_vectors(const Eigen::MatrixXd& x0) const;

  EnsembleVariances variances(const Eigen::MatrixXd& x0) const;
  Eigen::VectorXd model_variance(const Eigen::MatrixXd& x0, VarianceMode mode) const;

private:
  void build_caches(const std::vector<Eigen::MatrixXd>& member_hats);

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<ElmMember> members_;
  Eigen::MatrixXd hat_;
  Eigen::VectorXd residuals_;
  double dof_ = 0.0;
};

// Manifest (JSON) plus one STELM001 binary per member holding W (d x N,
// row-major), b and beta as little-endian doubles.
void save_ensemble(const std::filesystem::path& dir, const ElmEnsemble& e);
ElmEnsemble load_ensemble(const std::filesystem::path& dir, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y);

} // namespace stwind
