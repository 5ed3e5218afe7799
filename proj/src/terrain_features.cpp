#include "stwind/terrain_features.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/text_io.hpp"

#include <algorithm>
#include <cmath>

namespace stwind {

namespace {

std::vector<double> gaussian_kernel(double sigma_cells) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma_cells));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double z = static_cast<double>(k) / sigma_cells;
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * z * z);
  }
  return w;
}

// 1-D pass over rows (along columns) or columns (along rows) of two planes at
// once: weighted values and weights.
void convolve_pass(const std::vector<double>& kernel, std::size_t nrows, std::size_t ncols,
                   bool along_cols, const std::vector<double>& vin, const std::vector<double>& win,
                   std::vector<double>& vout, std::vector<double>& wout) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  vout.assign(nrows * ncols, 0.0);
  wout.assign(nrows * ncols, 0.0);
  parallel_for(nrows, [&](std::size_t r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      double sv = 0.0;
      double sw = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r);
        std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c);
        (along_cols ? cc : rr) += k;
        if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(nrows) ||
            cc >= static_cast<std::ptrdiff_t>(ncols))
          continue;
        const auto idx = static_cast<std::size_t>(rr) * ncols + static_cast<std::size_t>(cc);
        const double kw = kernel[static_cast<std::size_t>(k + radius)];
        sv += kw * vin[idx];
        sw += kw * win[idx];
      }
      vout[r * ncols + c] = sv;
      wout[r * ncols + c] = sw;
    }
  });
}

void require_bandwidth(const DemGrid& dem, double bandwidth) {
  if (!(bandwidth >= dem.geometry.cellsize))
    fail(ErrorKind::parameter, "Gaussian bandwidth must be at least one cell size");
}

} // namespace

DemGrid gaussian_smooth(const DemGrid& dem, double bandwidth) {
  require_bandwidth(dem, bandwidth);
  const auto& g = dem.geometry;
  const auto kernel = gaussian_kernel(bandwidth / g.cellsize);

  std::vector<double> v(g.size());
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool ok = !Grid::missing(dem.values[i]);
    v[i] = ok ? dem.values[i] : 0.0;
    w[i] = ok ? 1.0 : 0.0;
  }
  std::vector<double> v1, w1, v2, w2;
  convolve_pass(kernel, g.nrows, g.ncols, true, v, w, v1, w1);
  convolve_pass(kernel, g.nrows, g.ncols, false, v1, w1, v2, w2);

  DemGrid out(g);
  out.nodata = dem.nodata;
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = w2[i] > 0 ? v2[i] / w2[i] : Grid::kMissing;
  return out;
}

DemGrid difference_of_gaussians(const DemGrid& dem, double bw_small, double bw_large) {
  if (!(bw_small < bw_large)) fail(ErrorKind::parameter, "DoG needs bw_small < bw_large");
  auto a = gaussian_smooth(dem, bw_small);
  const auto b = gaussian_smooth(dem, bw_large);
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
  return a;
}

DemGrid finite_difference(const DemGrid& s, Axis axis) {
  const auto& g = s.geometry;
  DemGrid out(g, Grid::kMissing);
  out.nodata = s.nodata;
  const auto nr = static_cast<std::ptrdiff_t>(g.nrows);
  const auto nc = static_cast<std::ptrdiff_t>(g.ncols);
  auto value = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    if (r < 0 || c < 0 || r >= nr || c >= nc) return Grid::kMissing;
    return s.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  parallel_for(g.nrows, [&](std::size_t ur) {
    const auto r = static_cast<std::ptrdiff_t>(ur);
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
      // "ahead" is the neighbour in the positive coordinate direction.
      double ahead, behind;
      if (axis == Axis::east_west) {
        ahead = value(r, c + 1);
        behind = value(r, c - 1);
      } else {
        ahead = value(r - 1, c);
        behind = value(r + 1, c);
      }
      const double here = value(r, c);
      double d = Grid::kMissing;
      if (!Grid::missing(ahead) && !Grid::missing(behind))
        d = (ahead - behind) / (2.0 * g.cellsize);
      else if (!Grid::missing(ahead) && !Grid::missing(here))
        d = (ahead - here) / g.cellsize;
      else if (!Grid::missing(behind) && !Grid::missing(here))
        d = (here - behind) / g.cellsize;
      out.at(ur, static_cast<std::size_t>(c)) = d;
    }
  });
  return out;
}

DemGrid directional_derivative(const DemGrid& dem, double bandwidth, Axis axis) {
  return finite_difference(gaussian_smooth(dem, bandwidth), axis);
}

DemGrid slope_norm(const DemGrid& dem, double bandwidth) {
  const auto s = gaussian_smooth(dem, bandwidth);
  const auto dx = finite_difference(s, Axis::east_west);
  auto out = finite_difference(s, Axis::north_south);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::hypot(dx.values[i], out.values[i]);
  return out;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{
      "easting",   "northing",  "elevation", "dog_1_2", "dog_2_3", "dog_1_3", "dns_1",
      "dns_2",     "dew_1",     "dew_2",     "slope_1", "slope_2", "slope_3"};
  return names;
}

FeatureStack assemble_features(const DemGrid& dem, std::span<const double> bandwidths) {
  if (bandwidths.size() != 3) fail(ErrorKind::parameter, "exactly 3 Gaussian bandwidths are required");
  if (!(bandwidths[0] < bandwidths[1] && bandwidths[1] < bandwidths[2]))
    fail(ErrorKind::parameter, "bandwidths must be distinct and ascending");
  for (double b : bandwidths) require_bandwidth(dem, b);

  const auto& g = dem.geometry;
  FeatureStack fs;
  std::copy(bandwidths.begin(), bandwidths.end(), fs.bandwidths.begin());

  std::array<DemGrid, 3> smooth;
  for (std::size_t i = 0; i < 3; ++i) smooth[i] = gaussian_smooth(dem, bandwidths[i]);

  DemGrid east(g), north(g);
  east.nodata = north.nodata = dem.nodata;
  for (std::size_t r = 0; r < g.nrows; ++r)
    for (std::size_t c = 0; c < g.ncols; ++c) {
      east.at(r, c) = g.x_center(c);
      north.at(r, c) = g.y_center(r);
    }
  auto diff = [](const DemGrid& a, const DemGrid& b) {
    DemGrid d = a;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
    return d;
  };
  auto norm = [](const DemGrid& s) {
    const auto dx = finite_difference(s, Axis::east_west);
    auto out = finite_difference(s, Axis::north_south);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::hypot(dx.values[i], out.values[i]);
    return out;
  };

  fs.grids = {east,
              north,
              dem,
              diff(smooth[0], smooth[1]),
              diff(smooth[1], smooth[2]),
              diff(smooth[0], smooth[2]),
              finite_difference(smooth[0], Axis::north_south),
              finite_difference(smooth[1], Axis::north_south),
              finite_difference(smooth[0], Axis::east_west),
              finite_difference(smooth[1], Axis::east_west),
              norm(smooth[0]),
              norm(smooth[1]),
              norm(smooth[2])};
  return fs;
}

void save_feature_stack(const std::filesystem::path& dir, const FeatureStack& stack) {
  std::filesystem::create_directories(dir);
  const auto& names = feature_names();
  auto manifest = open_output(dir / "manifest.txt");
  manifest << "bandwidths " << format_double(stack.bandwidths[0]) << ' '
           << format_double(stack.bandwidths[1]) << ' ' << format_double(stack.bandwidths[2]) << '\n';
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "f%02zu_%s.asc", i + 1, names[i].c_str());
    write_ascii_grid(dir / file, stack.grids[i]);
    manifest << "feature " << i + 1 << ' ' << names[i] << ' ' << file << '\n';
  }
  if (!manifest) fail(ErrorKind::io, "write failed for feature manifest");
}

FeatureStack load_feature_stack(const std::filesystem::path& dir) {
  auto in = open_input(dir / "manifest.txt");
  FeatureStack fs;
  std::string tag;
  in >> tag;
  if (tag != "bandwidths" || !(in >> fs.bandwidths[0] >> fs.bandwidths[1] >> fs.bandwidths[2]))
    fail(ErrorKind::schema, "feature manifest: missing bandwidths line");
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    std::size_t index = 0;
    std::string name, file;
    if (!(in >> tag >> index >> name >> file) || tag != "feature" || index != i + 1 ||
        name != feature_names()[i])
      fail(ErrorKind::schema, "feature manifest: bad entry " + std::to_string(i + 1));
    fs.grids[i] = read_ascii_grid(dir / file);
    if (!(fs.grids[i].geometry == fs.grids[0].geometry))
      fail(ErrorKind::schema, "feature grids do not share one geometry");
  }
  return fs;
}

double sample_bilinear(const Grid& grid, Point p) {
  const auto& g = grid.geometry;
  if (!(p.x >= g.xll && p.x <= g.xmax() && p.y >= g.yll && p.y <= g.ymax()))
    fail(ErrorKind::extent, "point (" + format_double(p.x) + ", " + format_double(p.y) +
                                ") lies outside the grid extent");
  // Continuous column / row-from-south coordinates of cell centres.
  const double fx = std::clamp((p.x - g.xll) / g.cellsize - 0.5, 0.0, static_cast<double>(g.ncols - 1));
  const double fy = std::clamp((p.y - g.yll) / g.cellsize - 0.5, 0.0, static_cast<double>(g.nrows - 1));
  const auto c0 = static_cast<std::size_t>(std::floor(fx));
  const auto s0 = static_cast<std::size_t>(std::floor(fy));
  const auto c1 = std::min(c0 + 1, g.ncols - 1);
  const auto s1 = std::min(s0 + 1, g.nrows - 1);
  const double tx = fx - static_cast<double>(c0);
  const double ty = fy - static_cast<double>(s0);
  const auto row = [&](std::size_t s) { return g.nrows - 1 - s; };

  const std::array<double, 4> v{grid.at(row(s0), c0), grid.at(row(s0), c1), grid.at(row(s1), c0),
                                grid.at(row(s1), c1)};
  const std::array<double, 4> w{(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  double sv = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (w[i] == 0.0 || Grid::missing(v[i])) continue;
    sv += w[i] * v[i];
    sw += w[i];
  }
  if (sw == 0.0)
    fail(ErrorKind::extent, "point (" + format_double(p.x) + ", " + format_double(p.y) +
                                ") falls on nodata cells");
  return sv / sw;
}

Eigen::MatrixXd sample_features(const FeatureStack& stack, std::span<const Point> points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = sample_bilinear(stack.grids[f], points[i]);
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) fail(ErrorKind::dimension, "standardizer: feature dimension mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

} // namespace stwind
