#pragma once

#include "stwind/data_model.hpp"
#include "stwind/grid.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace stwind {

// f(x, y) = amplitude * sin(pi (fx * xn + px)) * cos(pi (fy * yn + py)),
// with (xn, yn) the position scaled to [0, 1] over the domain.
struct SpatialMode {
  double amplitude = 1.0;
  double fx = 1.0;
  double px = 0.0;
  double fy = 1.0;
  double py = 0.0;
};

enum class NoiseModel { homoskedastic, two_region };
enum class StationLayout { uniform, clustered };

struct SyntheticScenario {
  double x0 = 0.0; // domain lower-left corner (m)
  double y0 = 0.0;
  double width = 100000.0;
  double height = 100000.0;
  double cellsize = 1000.0; // synthetic DEM / roughness / mask resolution

  double base_speed = 8.0;     // m/s
  double daily_amplitude = 1.0; // of the temporal mean
  std::vector<SpatialMode> modes = {
      {2.0, 1.0, 0.0, 0.5, 0.0},
      {1.2, 2.0, 0.25, 1.0, 0.0},
      {0.7, 1.0, 0.5, 2.0, 0.25},
  };
  // One period (hours) per mode; columns are orthonormalised over the series.
  std::vector<double> periods_h = {24.0, 8766.0, 168.0};

  NoiseModel noise = NoiseModel::homoskedastic;
  double noise_sd = 1.0;      // everywhere, or west of the split
  double noise_sd_high = 3.0; // east of the split in the two-region model
  double region_split = 0.5;  // fraction of the width

  StationLayout layout = StationLayout::uniform;
  std::size_t clusters = 5;
  double cluster_spread = 0.08; // fraction of the width

  double missing_fraction = 0.0; // random cells blanked after generation
  Timestamp start = 1483228800;  // 2017-01-01T00:00:00Z
};

// Exact field and noise level of a generated dataset at any location.
class GroundTruth {
public:
  GroundTruth(SyntheticScenario scenario, std::size_t T);

  std::size_t time_count() const { return static_cast<std::size_t>(psi_.rows()); }
  double mean(std::size_t t) const;
  double spatial(std::size_t k, Point p) const;
  double field(Point p, std::size_t t) const;
  double noise_sd(Point p) const;
  // Unit-RMS temporal bases, T x K.
  const Eigen::MatrixXd& temporal() const { return psi_; }
  const SyntheticScenario& scenario() const { return scenario_; }

private:
  SyntheticScenario scenario_;
  Eigen::MatrixXd psi_;
};

struct SyntheticDataset {
  ObservationMatrix observed; // truth + noise, clamped at 0, with optional gaps
  Eigen::MatrixXd truth;      // noise-free S x T field
  GroundTruth ground_truth;
};

// Z(s_i, t_j) = mu(t_j) + sum_k f_k(s_i) psi_k(t_j) + noise. Fails if S > T.
SyntheticDataset generate(const SyntheticScenario& scenario, std::size_t S, std::size_t T, std::uint64_t seed);

std::vector<Point> station_points(const SyntheticScenario& scenario, std::size_t S, std::uint64_t seed);

// Smooth synthetic terrain, roughness length and restriction zones on the
// scenario's raster.
Grid synthetic_dem(const SyntheticScenario& scenario);
Grid synthetic_roughness(const SyntheticScenario& scenario);
Grid synthetic_mask(const SyntheticScenario& scenario);

} // namespace stwind
