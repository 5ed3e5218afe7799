#include "stwind/elm.hpp"
#include "stwind/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace stwind;

namespace {

// A = H (H^T H + alpha I)^{-1} H^T formed explicitly.
Eigen::MatrixXd explicit_hat(const Eigen::MatrixXd& h, double alpha) {
  const auto N = h.cols();
  const Eigen::MatrixXd g = h.transpose() * h + alpha * Eigen::MatrixXd::Identity(N, N);
  return h * g.ldlt().solve(h.transpose());
}

double brute_gcv(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double alpha) {
  const auto n = static_cast<double>(h.rows());
  const Eigen::MatrixXd a = explicit_hat(h, alpha);
  const Eigen::VectorXd r = y - a * y;
  const double free = n - a.trace();
  return (r.squaredNorm() / n) / ((free / n) * (free / n));
}

Eigen::MatrixXd uniform_inputs(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.uniform(-1, 1);
  return x;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::config;
}

} // namespace

TEST_CASE("init_member draws uniform weights deterministically") {
  const auto a = init_member(4, 7, 123), b = init_member(4, 7, 123);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
  CHECK(init_member(4, 7, 124).weights != a.weights);

  const auto big = init_member(100, 1000, 9);
  const double mean = big.weights.mean();
  CHECK(std::abs(mean) <= 0.02);
  CHECK(big.weights.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(big.biases.cwiseAbs().maxCoeff() <= 1.0);

  const auto empty = init_member(0, 5, 1);
  CHECK(empty.weights.size() == 0);
  CHECK(empty.biases.size() == 5);
  CHECK(kind_of([] { init_member(3, 0, 1); }) == ErrorKind::parameter);
}

TEST_CASE("logistic hidden layer") {
  HiddenLayer l;
  l.weights = Eigen::MatrixXd::Ones(2, 3);
  l.biases = Eigen::VectorXd::Zero(3);
  const auto h = hidden_matrix(Eigen::MatrixXd::Zero(1, 2), l);
  CHECK(h.isApprox(Eigen::MatrixXd::Constant(1, 3, 0.5)));
  CHECK(logistic(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
  for (double z : {-40.0, -3.0, -0.1, 0.0, 0.7, 5.0, 800.0}) CHECK(logistic(z) + logistic(-z) == doctest::Approx(1.0));
  CHECK(kind_of([&] { hidden_matrix(Eigen::MatrixXd::Zero(1, 3), l); }) == ErrorKind::dimension);
}

TEST_CASE("fit_ridge hand values and singular systems") {
  const Eigen::Vector3d y(1, -2, 5);
  CHECK(fit_ridge(Eigen::MatrixXd::Identity(3, 3), y, 0.0).isApprox(y));
  CHECK(fit_ridge(Eigen::MatrixXd::Ones(2, 1), Eigen::Vector2d(2, 2), 2.0)(0) == doctest::Approx(1.0));
  CHECK(kind_of([] { fit_ridge(Eigen::MatrixXd::Ones(2, 2), Eigen::Vector2d(1, 2), 0.0); }) == ErrorKind::singular);
}

TEST_CASE("fit_ridge norm is nonincreasing in alpha") {
  Rng rng(9);
  const Eigen::MatrixXd h = testing::normal_matrix(rng, 30, 12);
  const Eigen::VectorXd y = testing::normal_vector(rng, 30);
  double prev = INFINITY;
  for (double a : log_grid(1e-8, 1e4, 61)) {
    const double nrm = fit_ridge(h, y, a).norm();
    CHECK(nrm <= prev * (1 + 1e-12));
    prev = nrm;
  }
}

TEST_CASE("GCV hand value and brute force") {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Ones(2, 1);
  CHECK(gcv_score(h, Eigen::Vector2d(2, 0), 2.0) == doctest::Approx(2.5 / 2 / 0.5625).epsilon(1e-14));
  CHECK(gcv_score(h, Eigen::Vector2d(2, 0), 2.0) == doctest::Approx(2.2222).epsilon(1e-4));
  Rng rng(10);
  for (int c = 0; c < 10; ++c) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(40));
    const auto N = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::uint64_t>(n)));
    const Eigen::MatrixXd hm = testing::normal_matrix(rng, n, N);
    const Eigen::VectorXd yv = testing::normal_vector(rng, n);
    for (double a : {1e-3, 0.1, 1.0, 30.0})
      CHECK(gcv_score(hm, yv, a) == doctest::Approx(brute_gcv(hm, yv, a)).epsilon(1e-9));
  }
}

TEST_CASE("gcv_select sweeps the grid") {
  Rng rng(12);
  const auto grid = log_grid(1e-8, 1e4, 61);
  CHECK(grid.size() == 61);
  CHECK(grid.front() == doctest::Approx(1e-8));
  CHECK(grid.back() == doctest::Approx(1e4));

  const Eigen::MatrixXd h = testing::normal_matrix(rng, 60, 10);
  const Eigen::VectorXd y = h * testing::normal_vector(rng, 10) + 1e-9 * testing::normal_vector(rng, 60);
  CHECK(gcv_select(h, y, grid) == grid.front());

  const auto x = uniform_inputs(rng, 100, 5);
  const auto layer = init_member(5, 90, 4);
  const Eigen::VectorXd noise = testing::normal_vector(rng, 100);
  // Pure noise: GCV shrinks the fit to a small fraction of n degrees of freedom.
  const Eigen::MatrixXd hn = hidden_matrix(x, layer);
  CHECK(RidgeSpectrum(hn).hat_trace(gcv_select(hn, noise, grid)) < 20.0);

  // Oracle sweep with the tie rule: the largest alpha among the minimisers.
  const Eigen::MatrixXd h2 = testing::normal_matrix(rng, 40, 8);
  const Eigen::VectorXd y2 = testing::normal_vector(rng, 40);
  double best = INFINITY, arg = 0;
  for (double a : grid) {
    const double s = brute_gcv(h2, y2, a);
    if (s <= best * (1 + 1e-12)) {
      if (s < best) best = s;
      arg = a;
    }
  }
  CHECK(gcv_select(h2, y2, grid) == arg);

  const std::vector<double> empty;
  CHECK(kind_of([&] { gcv_select(h2, y2, empty); }) == ErrorKind::parameter);
  // N >= n with a vanishing alpha leaves no residual degrees of freedom.
  const std::vector<double> tiny{1e-300};
  CHECK(kind_of([&] { gcv_select(Eigen::MatrixXd::Identity(4, 4), Eigen::Vector4d(1, 2, 3, 4), tiny); }) ==
        ErrorKind::selection);
}

TEST_CASE("ensemble prediction equals the member-loop oracle") {
  Rng rng(13);
  const auto x = uniform_inputs(rng, 40, 3);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y(i) = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.1 * rng.normal();
  ElmConfig cfg;
  cfg.members = 5;
  cfg.seed = 77;
  const auto e = ElmEnsemble::fit(x, y, cfg);
  const auto x0 = uniform_inputs(rng, 7, 3);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(7);
  for (std::size_t m = 0; m < 5; ++m) {
    const auto& mem = e.members()[m];
    CHECK(mem.seed == (77u ^ m));
    const auto layer = init_member(3, default_neurons(40), mem.seed);
    CHECK(layer.weights == mem.layer.weights);
    const auto h = hidden_matrix(x, layer);
    CHECK(mem.alpha == gcv_select(h, y, cfg.alpha_grid));
    oracle += hidden_matrix(x0, layer) * fit_ridge(h, y, mem.alpha);
  }
  oracle /= 5.0;
  CHECK((e.predict(x0) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(e.predict(Eigen::VectorXd(x0.row(2).transpose())) == doctest::Approx(oracle(2)));
  CHECK(kind_of([&] { e.predict(Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 4))); }) == ErrorKind::dimension);

  // Linear in y for fixed members.
  std::vector<ElmMember> members = e.members();
  const Eigen::VectorXd y2 = testing::normal_vector(rng, 40);
  for (auto& m : members) m.beta = fit_ridge(hidden_matrix(x, m.layer), 2.0 * y - 3.0 * y2, m.alpha);
  const auto lin = ElmEnsemble::from_members(x, 2.0 * y - 3.0 * y2, members);
  for (auto& m : members) m.beta = fit_ridge(hidden_matrix(x, m.layer), y2, m.alpha);
  const auto e2 = ElmEnsemble::from_members(x, y2, members);
  CHECK((lin.predict(x0) - (2.0 * e.predict(x0) - 3.0 * e2.predict(x0))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("identical members and zero targets") {
  Rng rng(14);
  const auto x = uniform_inputs(rng, 30, 2);
  const Eigen::VectorXd y = testing::normal_vector(rng, 30);
  ElmConfig one;
  one.members = 1;
  one.seed = 5;
  const auto single = ElmEnsemble::fit(x, y, one);
  std::vector<ElmMember> copies(4, single.members().front());
  const auto same = ElmEnsemble::from_members(x, y, copies);
  const auto x0 = uniform_inputs(rng, 5, 2);
  CHECK((same.predict(x0) - single.predict(x0)).cwiseAbs().maxCoeff() < 1e-12);

  ElmConfig cfg;
  cfg.members = 4;
  const auto zero = ElmEnsemble::fit(x, Eigen::VectorXd::Zero(30), cfg);
  CHECK(zero.predict(x0).isZero());
  const auto v = zero.variances(x0);
  CHECK(v.noise == 0.0);
  CHECK(v.bias_reduced.isZero());
  CHECK(v.heteroskedastic.isZero());
  CHECK(kind_of([&] { single.variances(x0); }) == ErrorKind::ensemble);
}

TEST_CASE("noise variance") {
  Rng rng(15);
  const auto x = uniform_inputs(rng, 200, 5);
  Eigen::VectorXd y(200);
  for (Eigen::Index i = 0; i < 200; ++i)
    y(i) = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.5 * std::cos(3 * x(i, 3)) + rng.normal();
  ElmConfig cfg;
  cfg.seed = 3;
  const auto e = ElmEnsemble::fit(x, y, cfg);
  CHECK(e.noise_variance() >= 0.8);
  CHECK(e.noise_variance() <= 1.2);
  const Eigen::MatrixXd a = e.hat();
  CHECK(e.degrees_of_freedom() == doctest::Approx((2 * a - a * a.transpose()).trace()));

  // Null smoother limit.
  std::vector<ElmMember> members = e.members();
  for (auto& m : members) m.alpha = 1e30;
  const auto null = ElmEnsemble::from_members(x, y, members);
  CHECK(null.noise_variance() == doctest::Approx(y.squaredNorm() / 200).epsilon(1e-9));

  // Interpolating smoother: df reaches n.
  std::vector<ElmMember> interp(2);
  for (std::size_t m = 0; m < 2; ++m) {
    interp[m].layer = init_member(5, 6, m);
    interp[m].alpha = 1e-14;
  }
  const auto full = ElmEnsemble::from_members(x.topRows(6), y.head(6), interp);
  CHECK(kind_of([&] { full.noise_variance(); }) == ErrorKind::dof);
}

TEST_CASE("variance estimates agree with their closed forms") {
  Rng rng(16);
  const auto x = uniform_inputs(rng, 50, 3);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) y(i) = x(i, 0) - x(i, 1) * x(i, 1) + 0.3 * rng.normal();
  ElmConfig cfg;
  cfg.members = 6;
  cfg.seed = 8;
  const auto e = ElmEnsemble::fit(x, y, cfg);
  const auto x0 = uniform_inputs(rng, 4, 3);
  const auto v = e.variances(x0);

  // Oracle from explicit per-member hat rows.
  const double n = 50, M = 6;
  const auto A = e.hat();
  const double df = (2 * A - A * A.transpose()).trace();
  const Eigen::VectorXd r = y - A * y;
  const double s2 = r.squaredNorm() / (n - df);
  CHECK(v.noise == doctest::Approx(s2).epsilon(1e-10));
  for (Eigen::Index p = 0; p < 4; ++p) {
    std::vector<Eigen::VectorXd> l;
    Eigen::VectorXd lbar = Eigen::VectorXd::Zero(50);
    Eigen::VectorXd f(6);
    for (std::size_t m = 0; m < 6; ++m) {
      const auto& mem = e.members()[m];
      const auto h = hidden_matrix(x, mem.layer);
      const Eigen::MatrixXd g = h.transpose() * h + mem.alpha * Eigen::MatrixXd::Identity(h.cols(), h.cols());
      const Eigen::VectorXd hq = hidden_matrix(x0.row(p), mem.layer).transpose();
      l.push_back(h * g.ldlt().solve(hq));
      lbar += l.back() / M;
      f(static_cast<Eigen::Index>(m)) = l.back().dot(y);
    }
    double spread = 0;
    for (const auto& lm : l) spread += (lm - lbar).squaredNorm();
    const double tau = (f.array() - f.mean()).square().sum() / (M * (M - 1));
    const double tauc = std::max(0.0, tau - s2 * spread / (M * (M - 1)));
    const double br = tauc + s2 * lbar.squaredNorm();
    const double het = tauc + (lbar.array().square() * r.array().square()).sum() * n / (n - df);
    CHECK(v.bias_reduced(p) == doctest::Approx(br).epsilon(1e-8));
    CHECK(v.heteroskedastic(p) == doctest::Approx(het).epsilon(1e-8));
    CHECK(e.model_variance(x0.row(p), VarianceMode::bias_reduced)(0) == doctest::Approx(br).epsilon(1e-8));
  }
}

TEST_CASE("noiseless targets give a negligible noise estimate") {
  Rng rng(17);
  const auto x = uniform_inputs(rng, 80, 2);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) y(i) = std::sin(3 * x(i, 0)) * x(i, 1);
  ElmConfig cfg;
  cfg.members = 10;
  cfg.seed = 21;
  const auto e = ElmEnsemble::fit(x, y, cfg);
  const auto x0 = uniform_inputs(rng, 6, 2);
  const auto v = e.variances(x0);
  const double var_y = (y.array() - y.mean()).square().mean();
  CHECK(v.noise < 1e-2 * var_y);
  CHECK((v.bias_reduced.array() < 1e-2 * var_y).all());
}

TEST_CASE("ensemble save/load round trip") {
  testing::TempDir dir;
  Rng rng(18);
  const auto x = uniform_inputs(rng, 25, 4);
  const Eigen::VectorXd y = testing::normal_vector(rng, 25);
  ElmConfig cfg;
  cfg.members = 3;
  cfg.seed = 99;
  const auto e = ElmEnsemble::fit(x, y, cfg);
  save_ensemble(dir.path(), e);
  const auto back = load_ensemble(dir.path(), x, y);
  const auto x0 = uniform_inputs(rng, 5, 4);
  CHECK(back.predict(x0) == e.predict(x0));
  CHECK(back.members()[2].alpha == e.members()[2].alpha);
  const auto magic = testing::read_text(dir.path() / "member_000.bin").substr(0, 8);
  CHECK(magic == "STELM001");
}
