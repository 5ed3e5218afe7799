#include "stwind/elm.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/random.hpp"
#include "stwind/text_io.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace stwind {

HiddenLayer init_member(std::size_t d, std::size_t neurons, std::uint64_t seed) {
  if (neurons < 1) fail(ErrorKind::parameter, "an ELM needs at least one hidden neuron");
  Rng rng(seed);
  HiddenLayer layer;
  layer.weights.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(neurons));
  layer.biases.resize(static_cast<Eigen::Index>(neurons));
  for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index j = 0; j < layer.biases.size(); ++j) layer.biases(j) = rng.uniform(-1.0, 1.0);
  return layer;
}

double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd hidden_matrix(const Eigen::MatrixXd& x, const HiddenLayer& layer) {
  if (static_cast<std::size_t>(x.cols()) != layer.input_dim())
    fail(ErrorKind::dimension, "input dimension does not match the hidden layer");
  Eigen::MatrixXd h = x * layer.weights;
  h.rowwise() += layer.biases.transpose();
  return h.unaryExpr([](double z) { return logistic(z); });
}

RidgeSpectrum::RidgeSpectrum(const Eigen::MatrixXd& h) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  s_ = svd.singularValues();
  v_ = svd.matrixV();
}

bool RidgeSpectrum::singular_gram() const {
  if (cols() > rows() || s_.size() == 0) return true;
  const double tol = static_cast<double>(std::max(rows(), cols())) *
                     std::numeric_limits<double>::epsilon() * s_(0);
  return s_(s_.size() - 1) <= tol;
}

Eigen::VectorXd RidgeSpectrum::solve(const Eigen::VectorXd& y, double alpha) const {
  const Eigen::VectorXd c = u_.transpose() * y;
  const Eigen::VectorXd f = s_.array() / (s_.array().square() + alpha);
  return v_ * (f.array() * c.array()).matrix();
}

double RidgeSpectrum::hat_trace(double alpha) const {
  return (s_.array().square() / (s_.array().square() + alpha)).sum();
}

double RidgeSpectrum::gcv(const Eigen::VectorXd& y, double alpha) const {
  const auto n = static_cast<double>(rows());
  const Eigen::VectorXd c = u_.transpose() * y;
  const Eigen::ArrayXd shrink = alpha / (s_.array().square() + alpha); // 1 - f_i
  const double outside = (y - u_ * c).squaredNorm();
  const double rss = outside + (shrink * c.array()).square().sum();
  const double free = n - hat_trace(alpha);
  if (!(free > 1e-12 * n)) return std::numeric_limits<double>::quiet_NaN();
  return (rss / n) / ((free / n) * (free / n));
}

Eigen::MatrixXd RidgeSpectrum::smoother(double alpha) const {
  const Eigen::VectorXd f = s_.array() / (s_.array().square() + alpha);
  return v_ * f.asDiagonal() * u_.transpose();
}

Eigen::MatrixXd RidgeSpectrum::hat(double alpha) const {
  const Eigen::VectorXd f = s_.array().square() / (s_.array().square() + alpha);
  return u_ * f.asDiagonal() * u_.transpose();
}

Eigen::MatrixXd RidgeSpectrum::smoother_transpose_times(const Eigen::MatrixXd& b, double alpha) const {
  const Eigen::VectorXd f = s_.array() / (s_.array().square() + alpha);
  return u_ * (f.asDiagonal() * (v_.transpose() * b));
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double alpha) {
  if (alpha < 0) fail(ErrorKind::parameter, "Tikhonov factor must be >= 0");
  if (h.rows() != y.size()) fail(ErrorKind::dimension, "fit_ridge: H rows differ from y length");
  const RidgeSpectrum spectrum(h);
  if (alpha == 0 && spectrum.singular_gram())
    fail(ErrorKind::singular, "H^T H is singular; a positive Tikhonov factor is required");
  return spectrum.solve(y, alpha);
}

double gcv_score(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double alpha) {
  return RidgeSpectrum(h).gcv(y, alpha);
}

double gcv_select(const RidgeSpectrum& spectrum, const Eigen::VectorXd& y,
                  std::span<const double> alpha_grid) {
  if (alpha_grid.empty()) fail(ErrorKind::parameter, "GCV grid is empty");
  double best_alpha = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::infinity();
  for (double alpha : alpha_grid) {
    if (!(alpha > 0)) fail(ErrorKind::parameter, "GCV grid values must be positive");
    const double score = spectrum.gcv(y, alpha);
    if (std::isnan(score)) continue;
    const bool tie = std::isfinite(best) && std::abs(score - best) <= 1e-12 * std::abs(best);
    if (score < best && !tie) {
      best = score;
      best_alpha = alpha;
    } else if (tie && alpha > best_alpha) {
      best_alpha = alpha;
    }
  }
  if (std::isnan(best_alpha)) fail(ErrorKind::selection, "every GCV candidate was degenerate");
  return best_alpha;
}

double gcv_select(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, std::span<const double> alpha_grid) {
  return gcv_select(RidgeSpectrum(h), y, alpha_grid);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n == 0 || !(lo > 0) || !(hi >= lo)) fail(ErrorKind::parameter, "invalid log grid");
  std::vector<double> g(n);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

std::size_t default_neurons(std::size_t n) {
  return std::max<std::size_t>(1, n * 9 / 10);
}

ElmEnsemble ElmEnsemble::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ElmConfig& config) {
  if (x.rows() != y.size()) fail(ErrorKind::dimension, "ELM: inputs and targets differ in length");
  if (config.members < 1) fail(ErrorKind::parameter, "ELM ensemble needs at least one member");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto neurons = config.neurons ? config.neurons : default_neurons(n);

  std::vector<ElmMember> members(config.members);
  std::vector<Eigen::MatrixXd> hats(config.members);
  parallel_for(config.members, [&](std::size_t m) {
    auto& member = members[m];
    member.seed = config.seed ^ static_cast<std::uint64_t>(m);
    member.layer = init_member(static_cast<std::size_t>(x.cols()), neurons, member.seed);
    const RidgeSpectrum spectrum(hidden_matrix(x, member.layer));
    member.alpha = gcv_select(spectrum, y, config.alpha_grid);
    member.beta = spectrum.solve(y, member.alpha);
    hats[m] = spectrum.hat(member.alpha);
  });
  ElmEnsemble e;
  e.x_ = x;
  e.y_ = y;
  e.members_ = std::move(members);
  e.build_caches(hats);
  return e;
}

ElmEnsemble ElmEnsemble::from_members(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      std::vector<ElmMember> members) {
  if (members.empty()) fail(ErrorKind::parameter, "ELM ensemble needs at least one member");
  ElmEnsemble e;
  e.x_ = x;
  e.y_ = y;
  e.members_ = std::move(members);
  std::vector<Eigen::MatrixXd> hats(e.members_.size());
  parallel_for(hats.size(), [&](std::size_t m) {
    hats[m] = RidgeSpectrum(hidden_matrix(e.x_, e.members_[m].layer)).hat(e.members_[m].alpha);
  });
  e.build_caches(hats);
  return e;
}

void ElmEnsemble::build_caches(const std::vector<Eigen::MatrixXd>& member_hats) {
  const auto n = x_.rows();
  hat_ = Eigen::MatrixXd::Zero(n, n);
  for (const auto& h : member_hats) hat_ += h;
  hat_ /= static_cast<double>(members_.size());
  residuals_ = y_ - hat_ * y_;
  dof_ = 2.0 * hat_.trace() - (hat_.array() * hat_.array()).sum();
}

Eigen::MatrixXd ElmEnsemble::member_predictions(const Eigen::MatrixXd& x0) const {
  if (x0.cols() != x_.cols()) fail(ErrorKind::dimension, "ELM: query feature dimension mismatch");
  Eigen::MatrixXd out(x0.rows(), static_cast<Eigen::Index>(members_.size()));
  for (std::size_t m = 0; m < members_.size(); ++m)
    out.col(static_cast<Eigen::Index>(m)) = hidden_matrix(x0, members_[m].layer) * members_[m].beta;
  return out;
}

Eigen::VectorXd ElmEnsemble::predict(const Eigen::MatrixXd& x0) const {
  return member_predictions(x0).rowwise().mean();
}

double ElmEnsemble::predict(const Eigen::VectorXd& x0) const {
  return predict(Eigen::MatrixXd(x0.transpose()))(0);
}

double ElmEnsemble::noise_variance() const {
  const double n = static_cast<double>(training_size());
  // A smoother within rounding of interpolation leaves no residual degrees of freedom.
  if (!(n - dof_ > 1e-8 * n))
    fail(ErrorKind::dof, "noise variance needs n > degrees of freedom (n=" + format_double(n) +
                             ", df=" + format_double(dof_) + ")");
  return std::max(0.0, residuals_.squaredNorm() / (n - dof_));
}

std::vector<RidgeSpectrum> ElmEnsemble::spectra() const {
  std::vector<RidgeSpectrum> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.emplace_back(hidden_matrix(x_, m.layer));
  return out;
}

std::vector<Eigen::MatrixXd> ElmEnsemble::weight_vectors(const Eigen::MatrixXd& x0) const {
  if (x0.cols() != x_.cols()) fail(ErrorKind::dimension, "ELM: query feature dimension mismatch");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(members_.size());
  for (const auto& m : members_) {
    const RidgeSpectrum spectrum(hidden_matrix(x_, m.layer));
    out.push_back(spectrum.smoother_transpose_times(hidden_matrix(x0, m.layer).transpose(), m.alpha));
  }
  return out;
}

EnsembleVariances ElmEnsemble::variances(const Eigen::MatrixXd& x0) const {
  const auto M = members_.size();
  if (M < 2) fail(ErrorKind::ensemble, "variance estimation needs an ensemble of at least 2 members");
  if (x0.cols() != x_.cols()) fail(ErrorKind::dimension, "ELM: query feature dimension mismatch");

  const double n = static_cast<double>(training_size());
  EnsembleVariances out;
  out.noise = noise_variance();
  const Eigen::VectorXd d = residuals_.array().square() * (n / (n - dof_));

  const auto P = x0.rows();
  out.heteroskedastic.resize(P);
  out.bias_reduced.resize(P);

  // G_m = (H_m^alpha)^T, so that l_m(x0) = G_m h_m(x0).
  std::vector<Eigen::MatrixXd> g(M);
  parallel_for(M, [&](std::size_t m) {
    g[m] = RidgeSpectrum(hidden_matrix(x_, members_[m].layer)).smoother(members_[m].alpha).transpose();
  });

  constexpr Eigen::Index kBlock = 256;
  const auto blocks = static_cast<std::size_t>((P + kBlock - 1) / kBlock);
  parallel_for(blocks, [&](std::size_t b) {
    const auto start = static_cast<Eigen::Index>(b) * kBlock;
    const auto count = std::min(kBlock, P - start);
    const Eigen::MatrixXd xb = x0.middleRows(start, count);
    std::vector<Eigen::MatrixXd> l(M);
    Eigen::MatrixXd f(count, static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m) {
      const Eigen::MatrixXd hq = hidden_matrix(xb, members_[m].layer);
      l[m] = g[m] * hq.transpose();
      f.col(static_cast<Eigen::Index>(m)) = hq * members_[m].beta;
    }
    Eigen::MatrixXd lbar = Eigen::MatrixXd::Zero(l[0].rows(), count);
    for (const auto& lm : l) lbar += lm;
    lbar /= static_cast<double>(M);
    Eigen::VectorXd spread = Eigen::VectorXd::Zero(count);
    for (const auto& lm : l) spread += (lm - lbar).colwise().squaredNorm().transpose();

    const Eigen::VectorXd fbar = f.rowwise().mean();
    const double mm1 = static_cast<double>(M) * static_cast<double>(M - 1);
    const Eigen::VectorXd tau2 = (f.colwise() - fbar).rowwise().squaredNorm() / mm1;
    const Eigen::VectorXd corrected = (tau2 - (out.noise / mm1) * spread).cwiseMax(0.0);
    const Eigen::VectorXd lbar2 = lbar.colwise().squaredNorm().transpose();
    const Eigen::VectorXd sandwich = (lbar.array().square().colwise() * d.array()).colwise().sum().transpose();

    out.bias_reduced.segment(start, count) = (corrected + out.noise * lbar2).cwiseMax(0.0);
    out.heteroskedastic.segment(start, count) = (corrected + sandwich).cwiseMax(0.0);
  });
  return out;
}

Eigen::VectorXd ElmEnsemble::model_variance(const Eigen::MatrixXd& x0, VarianceMode mode) const {
  auto v = variances(x0);
  return mode == VarianceMode::heteroskedastic ? v.heteroskedastic : v.bias_reduced;
}

namespace {

constexpr char kMagic[8] = {'S', 'T', 'E', 'L', 'M', '0', '0', '1'};

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) fail(ErrorKind::schema, "truncated ELM weight file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string member_file(std::size_t m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "member_%03zu.bin", m);
  return buf;
}

} // namespace

void save_ensemble(const std::filesystem::path& dir, const ElmEnsemble& e) {
  std::filesystem::create_directories(dir);
  const auto& members = e.members();
  nlohmann::ordered_json manifest;
  manifest["format"] = "STELM001";
  manifest["d"] = e.input_dim();
  manifest["N"] = members.front().layer.neurons();
  manifest["M"] = members.size();
  manifest["members"] = nlohmann::json::array();
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto& mem = members[m];
    manifest["members"].push_back({{"file", member_file(m)}, {"seed", mem.seed}, {"alpha", mem.alpha}});
    std::ofstream out(dir / member_file(m), std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write ELM member file in '" + dir.string() + "'");
    out.write(kMagic, 8);
    const auto& w = mem.layer.weights;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) write_le(out, w(i, j));
    for (Eigen::Index j = 0; j < mem.layer.biases.size(); ++j) write_le(out, mem.layer.biases(j));
    for (Eigen::Index j = 0; j < mem.beta.size(); ++j) write_le(out, mem.beta(j));
    if (!out) fail(ErrorKind::io, "write failed for ELM member file");
  }
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

ElmEnsemble load_ensemble(const std::filesystem::path& dir, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y) {
  auto in = open_input(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::schema, dir.string() + "/manifest.json: " + ex.what());
  }
  const auto d = manifest.at("d").get<std::size_t>();
  const auto N = manifest.at("N").get<std::size_t>();
  if (d != static_cast<std::size_t>(x.cols()))
    fail(ErrorKind::dimension, "stored ensemble input dimension differs from the training inputs");

  std::vector<ElmMember> members;
  for (const auto& entry : manifest.at("members")) {
    ElmMember mem;
    mem.seed = entry.at("seed").get<std::uint64_t>();
    mem.alpha = entry.at("alpha").get<double>();
    std::ifstream bin(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!bin) fail(ErrorKind::io, "missing ELM member file in '" + dir.string() + "'");
    char magic[8];
    if (!bin.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
      fail(ErrorKind::schema, "ELM member file lacks the STELM001 header");
    mem.layer.weights.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(N));
    for (Eigen::Index i = 0; i < mem.layer.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < mem.layer.weights.cols(); ++j) mem.layer.weights(i, j) = read_le(bin);
    mem.layer.biases.resize(static_cast<Eigen::Index>(N));
    for (Eigen::Index j = 0; j < mem.layer.biases.size(); ++j) mem.layer.biases(j) = read_le(bin);
    mem.beta.resize(static_cast<Eigen::Index>(N));
    for (Eigen::Index j = 0; j < mem.beta.size(); ++j) mem.beta(j) = read_le(bin);
    members.push_back(std::move(mem));
  }
  if (members.size() != manifest.at("M").get<std::size_t>())
    fail(ErrorKind::schema, "ELM manifest member count mismatch");
  return ElmEnsemble::from_members(x, y, std::move(members));
}

} // namespace stwind
