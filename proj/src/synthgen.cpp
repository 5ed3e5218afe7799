#include "stwind/synthgen.hpp"

#include "stwind/error.hpp"
#include "stwind/random.hpp"
#include "stwind/terrain_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace stwind {

namespace {

constexpr double kPi = std::numbers::pi;

double terrain(const SyntheticScenario& s, double x, double y) {
  const double xn = (x - s.x0) / s.width;
  const double yn = (y - s.y0) / s.height;
  return 500.0 + 250.0 * std::sin(kPi * (1.5 * xn + 0.1)) * std::cos(kPi * (1.2 * yn - 0.3)) +
         80.0 * std::sin(2.0 * kPi * (3.0 * xn + 2.0 * yn)) + 40.0 * std::cos(2.0 * kPi * (5.0 * yn - 1.0 * xn));
}

Grid raster(const SyntheticScenario& s) {
  GridGeometry g;
  g.xll = s.x0;
  g.yll = s.y0;
  g.cellsize = s.cellsize;
  g.ncols = static_cast<std::size_t>(std::ceil(s.width / s.cellsize - 1e-9));
  g.nrows = static_cast<std::size_t>(std::ceil(s.height / s.cellsize - 1e-9));
  return Grid(g);
}

} // namespace

GroundTruth::GroundTruth(SyntheticScenario scenario, std::size_t T) : scenario_(std::move(scenario)) {
  const auto K = static_cast<Eigen::Index>(scenario_.modes.size());
  if (scenario_.periods_h.size() != scenario_.modes.size())
    fail(ErrorKind::parameter, "synthetic scenario needs one period per spatial mode");
  const auto n = static_cast<Eigen::Index>(T);
  if (K > n) fail(ErrorKind::dimension, "more synthetic modes than time steps");
  Eigen::MatrixXd raw(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double period = scenario_.periods_h[static_cast<std::size_t>(k)];
    const double phase = 0.7 * static_cast<double>(k);
    for (Eigen::Index t = 0; t < n; ++t) raw(t, k) = std::sin(2.0 * kPi * static_cast<double>(t) / period + phase);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, K);
  for (Eigen::Index k = 0; k < K; ++k)
    if (q.col(k).dot(raw.col(k)) < 0) q.col(k) *= -1.0;
  psi_ = q * std::sqrt(static_cast<double>(n));
}

double GroundTruth::mean(std::size_t t) const {
  return scenario_.base_speed + scenario_.daily_amplitude * std::cos(2.0 * kPi * static_cast<double>(t) / 24.0);
}

double GroundTruth::spatial(std::size_t k, Point p) const {
  const auto& m = scenario_.modes[k];
  const double xn = (p.x - scenario_.x0) / scenario_.width;
  const double yn = (p.y - scenario_.y0) / scenario_.height;
  return m.amplitude * std::sin(kPi * (m.fx * xn + m.px)) * std::cos(kPi * (m.fy * yn + m.py));
}

double GroundTruth::field(Point p, std::size_t t) const {
  double z = mean(t);
  for (std::size_t k = 0; k < scenario_.modes.size(); ++k)
    z += spatial(k, p) * psi_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
  return z;
}

double GroundTruth::noise_sd(Point p) const {
  if (scenario_.noise == NoiseModel::homoskedastic) return scenario_.noise_sd;
  return p.x < scenario_.x0 + scenario_.region_split * scenario_.width ? scenario_.noise_sd
                                                                        : scenario_.noise_sd_high;
}

std::vector<Point> station_points(const SyntheticScenario& s, std::size_t S, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  std::vector<Point> pts;
  pts.reserve(S);
  // Keep stations half a cell inside the raster so terrain sampling is interior.
  const double m = 0.5 * s.cellsize;
  const auto inside = [&](Point p) {
    return Point{std::clamp(p.x, s.x0 + m, s.x0 + s.width - m), std::clamp(p.y, s.y0 + m, s.y0 + s.height - m)};
  };
  if (s.layout == StationLayout::uniform || s.clusters == 0) {
    for (std::size_t i = 0; i < S; ++i) {
      const double x = rng.uniform(s.x0 + m, s.x0 + s.width - m);
      const double y = rng.uniform(s.y0 + m, s.y0 + s.height - m);
      pts.push_back({x, y});
    }
    return pts;
  }
  std::vector<Point> centres;
  for (std::size_t c = 0; c < s.clusters; ++c) {
    const double x = rng.uniform(s.x0, s.x0 + s.width);
    const double y = rng.uniform(s.y0, s.y0 + s.height);
    centres.push_back({x, y});
  }
  const double spread = s.cluster_spread * s.width;
  for (std::size_t i = 0; i < S; ++i) {
    const auto& c = centres[i % centres.size()];
    const double dx = spread * rng.normal();
    const double dy = spread * rng.normal();
    pts.push_back(inside({c.x + dx, c.y + dy}));
  }
  return pts;
}

SyntheticDataset generate(const SyntheticScenario& scenario, std::size_t S, std::size_t T, std::uint64_t seed) {
  if (S > T) fail(ErrorKind::dimension, "synthetic dataset needs S <= T");
  if (!(scenario.missing_fraction >= 0 && scenario.missing_fraction < 1))
    fail(ErrorKind::parameter, "missing fraction must lie in [0, 1)");
  GroundTruth truth(scenario, T);
  const auto pts = station_points(scenario, S, seed);
  const Grid dem = synthetic_dem(scenario);

  ObservationMatrix obs;
  obs.times.resize(T);
  for (std::size_t j = 0; j < T; ++j) obs.times[j] = scenario.start + static_cast<Timestamp>(j) * kSecondsPerHour;
  for (std::size_t i = 0; i < S; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "S%04zu", i + 1);
    obs.stations.push_back({id, pts[i].x, pts[i].y, sample_bilinear(dem, pts[i])});
  }

  const auto s = static_cast<Eigen::Index>(S);
  const auto t = static_cast<Eigen::Index>(T);
  Eigen::MatrixXd clean(s, t);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      clean(i, j) = truth.field(pts[static_cast<std::size_t>(i)], static_cast<std::size_t>(j));

  Rng noise(splitmix64(seed + 1));
  obs.values.resize(s, t);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double sd = truth.noise_sd(pts[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < t; ++j) {
      const double e = sd > 0 ? sd * noise.normal() : 0.0;
      obs.values(i, j) = std::max(0.0, clean(i, j) + e);
    }
  }
  if (scenario.missing_fraction > 0) {
    Rng gaps(splitmix64(seed + 2));
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < t; ++j)
        if (gaps.uniform() < scenario.missing_fraction) obs.values(i, j) = Grid::kMissing;
  }
  return {std::move(obs), std::move(clean), std::move(truth)};
}

Grid synthetic_dem(const SyntheticScenario& s) {
  Grid g = raster(s);
  for (std::size_t r = 0; r < g.geometry.nrows; ++r)
    for (std::size_t c = 0; c < g.geometry.ncols; ++c)
      g.at(r, c) = terrain(s, g.geometry.x_center(c), g.geometry.y_center(r));
  return g;
}

Grid synthetic_roughness(const SyntheticScenario& s) {
  Grid g = raster(s);
  for (std::size_t r = 0; r < g.geometry.nrows; ++r)
    for (std::size_t c = 0; c < g.geometry.ncols; ++c) {
      const double z = terrain(s, g.geometry.x_center(c), g.geometry.y_center(r));
      // Rougher in the lowlands, smoother on exposed ground.
      g.at(r, c) = std::clamp(0.6 - (z - 200.0) / 1000.0, 0.03, 0.6);
    }
  return g;
}

Grid synthetic_mask(const SyntheticScenario& s) {
  Grid g = raster(s);
  for (std::size_t r = 0; r < g.geometry.nrows; ++r)
    for (std::size_t c = 0; c < g.geometry.ncols; ++c) {
      const double x = g.geometry.x_center(c);
      const double y = g.geometry.y_center(r);
      const double z = terrain(s, x, y);
      double code = 3.0;
      if (z < 380.0) code = 0.0;
      else if (z > 700.0) code = 1.0;
      else if (std::sin(2.0 * kPi * (x - s.x0) / s.width * 2.0) > 0.4) code = 2.0;
      g.at(r, c) = code;
    }
  return g;
}

} // namespace stwind
