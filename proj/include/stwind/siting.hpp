#pragma once

#include "stwind/grid.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace stwind {

enum class Zone : int { prohibited = 0, restricted = 1, forests = 2, other = 3 };

inline constexpr std::size_t kZoneCount = 4;

std::string_view zone_name(Zone z) noexcept;

// Integer zone code per cell; nodata cells count as prohibited.
struct RestrictionMask {
  GridGeometry geometry;
  std::vector<Zone> zones; // row-major

  Zone at(std::size_t row, std::size_t col) const { return zones[row * geometry.ncols + col]; }
  double cell_area_km2() const { return geometry.cellsize * geometry.cellsize / 1e6; }
  // Most restrictive non-prohibited zone among the cells whose closed square
  // contains p (within `tol` metres); empty if there is none.
  std::optional<Zone> zone_near(Point p, double tol = 1e-6) const;
};

RestrictionMask mask_from_grid(const Grid& grid);
RestrictionMask read_mask(const std::filesystem::path& path);

struct LatticeSpec {
  double direction_deg = 60.0; // streamwise direction, clockwise from north
  double streamwise = 1600.0;  // m
  double spanwise = 1000.0;    // m
};

struct Turbine {
  Point position;
  Zone zone = Zone::other;
};

struct TurbineLayout {
  std::vector<Turbine> turbines;
  LatticeSpec spec;
  Point anchor; // lattice origin in map coordinates
};

// Lattice with streamwise axis u = (sin d, cos d) and spanwise axis
// v = (-cos d, sin d), anchored at the minimum corner of the raster extent in
// the (u, v) frame and kept where it is half-open inside that extent. A point
// is a turbine site if it lies in a non-prohibited cell.
TurbineLayout place_turbines(const RestrictionMask& mask, const LatticeSpec& spec = {});

struct AnnualEnergy {
  double gwh = 0.0;
  double variance = 0.0; // GWh^2, hours treated as independent
};

// Hourly kW means and variances summed to GWh and GWh^2.
AnnualEnergy annual_energy(std::span<const double> power_mean_kw, std::span<const double> power_var_kw2);

struct ZoneSummary {
  Zone zone = Zone::other;
  double area_km2 = 0.0;
  std::size_t turbines = 0;
  double energy_twh = 0.0;
  double variance_twh2 = 0.0;
};

struct PotentialSummary {
  std::array<ZoneSummary, kZoneCount> zones;
  ZoneSummary total; // over the non-prohibited zones
  double mask_area_km2 = 0.0;
};

// One AnnualEnergy per turbine, in layout order.
PotentialSummary summarize_potential(const TurbineLayout& layout, std::span<const AnnualEnergy> energies,
                                     const RestrictionMask& mask);

void write_layout_csv(const std::filesystem::path& path, const TurbineLayout& layout);
void write_summary_csv(const std::filesystem::path& path, const PotentialSummary& summary);

} // namespace stwind
