#pragma once

#include "stwind/grid.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stwind {

using DemGrid = Grid;

enum class Axis { north_south, east_west };

inline constexpr std::size_t kFeatureCount = 13;

// Gaussian convolution with bandwidth (standard deviation) in metres. The
// kernel is truncated at three bandwidths and renormalised over the valid
// cells it covers, so edges and nodata holes are never padded.
DemGrid gaussian_smooth(const DemGrid& dem, double bandwidth);

DemGrid difference_of_gaussians(const DemGrid& dem, double bw_small, double bw_large);

// Derivative (m/m) along the axis on the smoothed DEM: central differences in
// the interior, one-sided at edges. North-south is d/d(northing).
DemGrid directional_derivative(const DemGrid& dem, double bandwidth, Axis axis);
DemGrid slope_norm(const DemGrid& dem, double bandwidth);

// Derivatives of an already smoothed surface.
DemGrid finite_difference(const DemGrid& surface, Axis axis);

struct FeatureStack {
  // easting, northing, elevation, DoG(b1,b2), DoG(b2,b3), DoG(b1,b3),
  // dNS(b1), dNS(b2), dEW(b1), dEW(b2), slope(b1), slope(b2), slope(b3)
  std::array<DemGrid, kFeatureCount> grids;
  std::array<double, 3> bandwidths{};

  const GridGeometry& geometry() const { return grids[0].geometry; }
};

const std::array<std::string, kFeatureCount>& feature_names();

FeatureStack assemble_features(const DemGrid& dem, std::span<const double> bandwidths);

void save_feature_stack(const std::filesystem::path& dir, const FeatureStack& stack);
FeatureStack load_feature_stack(const std::filesystem::path& dir);

// Bilinear interpolation between cell centres; points between the outermost
// centres and the grid edge take the edge value. Returns one row per point.
Eigen::MatrixXd sample_features(const FeatureStack& stack, std::span<const Point> points);
double sample_bilinear(const Grid& grid, Point p);

// Per-column z-scores frozen from the training rows. Constant columns keep a
// unit scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

} // namespace stwind
