#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

namespace stwind {

struct Point {
  double x = 0.0; // easting (m)
  double y = 0.0; // northing (m)
};

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
};

// Raster geometry in the ESRI convention: (xll, yll) is the lower-left
// corner of the grid, row 0 is the northernmost row.
struct GridGeometry {
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 1.0;
  std::size_t nrows = 0;
  std::size_t ncols = 0;

  double x_center(std::size_t col) const { return xll + (static_cast<double>(col) + 0.5) * cellsize; }
  double y_center(std::size_t row) const {
    return yll + (static_cast<double>(nrows - row) - 0.5) * cellsize;
  }
  double xmax() const { return xll + static_cast<double>(ncols) * cellsize; }
  double ymax() const { return yll + static_cast<double>(nrows) * cellsize; }
  std::size_t size() const { return nrows * ncols; }

  // Cell containing p; cells are half-open [x0, x0 + cellsize) on both axes.
  std::optional<CellIndex> locate(Point p) const;

  bool operator==(const GridGeometry&) const = default;
};

// Row-major raster of doubles. Missing cells are NaN in memory and are written
// with `nodata` on disk.
struct Grid {
  GridGeometry geometry;
  std::vector<double> values;
  double nodata = -9999.0;

  Grid() = default;
  Grid(GridGeometry g, double fill = 0.0) : geometry(g), values(g.size(), fill) {}

  double& at(std::size_t row, std::size_t col) { return values[row * geometry.ncols + col]; }
  double at(std::size_t row, std::size_t col) const { return values[row * geometry.ncols + col]; }
  static bool missing(double v) { return std::isnan(v); }
  static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
};

Grid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const std::filesystem::path& path, const Grid& grid);

} // namespace stwind
