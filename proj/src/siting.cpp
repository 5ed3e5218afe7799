#include "stwind/siting.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace stwind {

std::string_view zone_name(Zone z) noexcept {
  switch (z) {
  case Zone::prohibited: return "prohibited";
  case Zone::restricted: return "restricted";
  case Zone::forests: return "forests";
  case Zone::other: return "other";
  }
  return "unknown";
}

std::optional<Zone> RestrictionMask::zone_near(Point p, double tol) const {
  const auto& g = geometry;
  const double cs = g.cellsize;
  const auto clip = [](double v, std::size_t n) -> long long {
    return std::clamp<long long>(static_cast<long long>(std::floor(v)), -1, static_cast<long long>(n));
  };
  const long long c0 = clip((p.x - g.xll - tol) / cs, g.ncols);
  const long long c1 = clip((p.x - g.xll + tol) / cs, g.ncols);
  const long long f0 = clip((p.y - g.yll - tol) / cs, g.nrows);
  const long long f1 = clip((p.y - g.yll + tol) / cs, g.nrows);
  std::optional<Zone> best;
  for (long long fy = f0; fy <= f1; ++fy) {
    if (fy < 0 || fy >= static_cast<long long>(g.nrows)) continue;
    const auto row = g.nrows - 1 - static_cast<std::size_t>(fy);
    for (long long c = c0; c <= c1; ++c) {
      if (c < 0 || c >= static_cast<long long>(g.ncols)) continue;
      const Zone z = at(row, static_cast<std::size_t>(c));
      if (z == Zone::prohibited) continue;
      if (!best || static_cast<int>(z) < static_cast<int>(*best)) best = z;
    }
  }
  return best;
}

RestrictionMask mask_from_grid(const Grid& grid) {
  RestrictionMask mask;
  mask.geometry = grid.geometry;
  mask.zones.reserve(grid.values.size());
  for (double v : grid.values) {
    if (Grid::missing(v)) {
      mask.zones.push_back(Zone::prohibited);
      continue;
    }
    if (v != 0.0 && v != 1.0 && v != 2.0 && v != 3.0)
      fail(ErrorKind::schema, "restriction mask codes must be 0, 1, 2 or 3 (got " + format_double(v) + ")");
    mask.zones.push_back(static_cast<Zone>(static_cast<int>(v)));
  }
  return mask;
}

RestrictionMask read_mask(const std::filesystem::path& path) { return mask_from_grid(read_ascii_grid(path)); }

TurbineLayout place_turbines(const RestrictionMask& mask, const LatticeSpec& spec) {
  if (!(spec.streamwise > 0) || !(spec.spanwise > 0))
    fail(ErrorKind::parameter, "turbine spacings must be positive");
  TurbineLayout layout;
  layout.spec = spec;
  const auto& g = mask.geometry;
  if (g.size() == 0) return layout;

  const double rad = spec.direction_deg * std::numbers::pi / 180.0;
  const Point u{std::sin(rad), std::cos(rad)};
  const Point v{-std::cos(rad), std::sin(rad)};
  const Point corners[4] = {{g.xll, g.yll}, {g.xmax(), g.yll}, {g.xll, g.ymax()}, {g.xmax(), g.ymax()}};
  double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
  for (const auto& c : corners) {
    const double pu = c.x * u.x + c.y * u.y;
    const double pv = c.x * v.x + c.y * v.y;
    umin = std::min(umin, pu);
    umax = std::max(umax, pu);
    vmin = std::min(vmin, pv);
    vmax = std::max(vmax, pv);
  }
  layout.anchor = {umin * u.x + vmin * v.x, umin * u.y + vmin * v.y};

  constexpr double tol = 1e-6;
  const auto count = [&](double extent, double step) {
    std::size_t n = 0;
    while (static_cast<double>(n) * step < extent - tol) ++n;
    return n;
  };
  const auto nu = count(umax - umin, spec.streamwise);
  const auto nv = count(vmax - vmin, spec.spanwise);

  std::vector<std::vector<Turbine>> rows(nu);
  parallel_for(nu, [&](std::size_t i) {
    const double a = umin + static_cast<double>(i) * spec.streamwise;
    for (std::size_t j = 0; j < nv; ++j) {
      const double b = vmin + static_cast<double>(j) * spec.spanwise;
      const Point p{a * u.x + b * v.x, a * u.y + b * v.y};
      if (const auto z = mask.zone_near(p, tol)) rows[i].push_back({p, *z});
    }
  });
  for (auto& r : rows) layout.turbines.insert(layout.turbines.end(), r.begin(), r.end());
  return layout;
}

AnnualEnergy annual_energy(std::span<const double> power_mean_kw, std::span<const double> power_var_kw2) {
  if (power_mean_kw.size() != power_var_kw2.size())
    fail(ErrorKind::dimension, "power mean and variance series differ in length");
  CompensatedSum e, v;
  for (double x : power_mean_kw) e.add(x);
  for (double x : power_var_kw2) v.add(x);
  return {e.value() / 1e6, v.value() / 1e12};
}

PotentialSummary summarize_potential(const TurbineLayout& layout, std::span<const AnnualEnergy> energies,
                                     const RestrictionMask& mask) {
  if (energies.size() != layout.turbines.size())
    fail(ErrorKind::completeness, "every turbine needs an energy estimate (" + std::to_string(layout.turbines.size()) +
                                      " turbines, " + std::to_string(energies.size()) + " estimates)");
  PotentialSummary s;
  std::array<std::size_t, kZoneCount> cells{};
  for (auto z : mask.zones) ++cells[static_cast<std::size_t>(z)];
  std::array<CompensatedSum, kZoneCount> gwh, var;
  for (std::size_t t = 0; t < energies.size(); ++t) {
    const auto z = static_cast<std::size_t>(layout.turbines[t].zone);
    ++s.zones[z].turbines;
    gwh[z].add(energies[t].gwh);
    var[z].add(energies[t].variance);
  }
  CompensatedSum area, total_twh, total_var;
  s.total.zone = Zone::other;
  for (std::size_t z = 0; z < kZoneCount; ++z) {
    auto& zs = s.zones[z];
    zs.zone = static_cast<Zone>(z);
    zs.area_km2 = static_cast<double>(cells[z]) * mask.cell_area_km2();
    zs.energy_twh = gwh[z].value() / 1e3;
    zs.variance_twh2 = var[z].value() / 1e6;
    s.mask_area_km2 += zs.area_km2;
    if (zs.zone == Zone::prohibited) continue;
    area.add(zs.area_km2);
    total_twh.add(zs.energy_twh);
    total_var.add(zs.variance_twh2);
    s.total.turbines += zs.turbines;
  }
  s.total.area_km2 = area.value();
  s.total.energy_twh = total_twh.value();
  s.total.variance_twh2 = total_var.value();
  return s;
}

void write_layout_csv(const std::filesystem::path& path, const TurbineLayout& layout) {
  auto out = open_output(path);
  out << "turbine_id,easting_m,northing_m,zone\n";
  for (std::size_t i = 0; i < layout.turbines.size(); ++i) {
    const auto& t = layout.turbines[i];
    out << i + 1 << ',' << format_double(t.position.x) << ',' << format_double(t.position.y) << ','
        << zone_name(t.zone) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const PotentialSummary& summary) {
  auto out = open_output(path);
  out << "zone,area_km2,area_fraction,virtual_turbines,potential_twh,potential_var_twh2\n";
  const auto row = [&](std::string_view name, const ZoneSummary& z) {
    const double frac = summary.mask_area_km2 > 0 ? z.area_km2 / summary.mask_area_km2 : 0.0;
    out << name << ',' << format_double(z.area_km2) << ',' << format_double(frac) << ',' << z.turbines << ','
        << format_double(z.energy_twh) << ',' << format_double(z.variance_twh2) << '\n';
  };
  for (const auto& z : summary.zones) row(zone_name(z.zone), z);
  row("total", summary.total);
}

} // namespace stwind
