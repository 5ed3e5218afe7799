#include "stwind/error.hpp"
#include "stwind/random.hpp"
#include "stwind/siting.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace stwind;

namespace {

RestrictionMask uniform_mask(std::size_t nrows, std::size_t ncols, double cell, Zone z = Zone::other) {
  RestrictionMask m;
  m.geometry = {0.0, 0.0, cell, nrows, ncols};
  m.zones.assign(nrows * ncols, z);
  return m;
}

std::vector<std::pair<double, double>> sorted_positions(const TurbineLayout& l) {
  std::vector<std::pair<double, double>> p;
  for (const auto& t : l.turbines) p.emplace_back(t.position.x, t.position.y);
  // Order on millimetre-rounded keys so rounding noise around zero cannot swap points.
  const auto key = [](const std::pair<double, double>& a) {
    return std::pair{std::llround(a.first * 1e3), std::llround(a.second * 1e3)};
  };
  std::sort(p.begin(), p.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return p;
}

} // namespace

TEST_CASE("hand lattice on a small rectangle") {
  // 3.2 km x 2.0 km, streamwise axis along x.
  const auto mask = uniform_mask(20, 32, 100.0);
  const auto layout = place_turbines(mask, {90.0, 1600.0, 1000.0});
  const auto p = sorted_positions(layout);
  REQUIRE(p.size() == 4);
  const double want[4][2] = {{0, 0}, {0, 1000}, {1600, 0}, {1600, 1000}};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(p[static_cast<std::size_t>(i)].first - want[i][0]) < 1e-6);
    CHECK(std::abs(p[static_cast<std::size_t>(i)].second - want[i][1]) < 1e-6);
  }
  CHECK(6.4 / 1.6 == 4.0);
  CHECK(place_turbines(uniform_mask(20, 32, 100.0, Zone::prohibited)).turbines.empty());
  CHECK_THROWS_AS(place_turbines(mask, {60.0, 0.0, 1000.0}), Error);
}

TEST_CASE("lattice density and structure") {
  const auto mask = uniform_mask(100, 100, 1000.0);
  const auto layout = place_turbines(mask);
  const double expected = 100.0 * 100.0 / 1.6;
  CHECK(std::abs(static_cast<double>(layout.turbines.size()) - expected) / expected < 0.05);
  const double rad = 60.0 * std::numbers::pi / 180.0;
  for (const auto& t : layout.turbines) {
    const double dx = t.position.x - layout.anchor.x, dy = t.position.y - layout.anchor.y;
    const double a = (dx * std::sin(rad) + dy * std::cos(rad)) / 1600.0;
    const double b = (-dx * std::cos(rad) + dy * std::sin(rad)) / 1000.0;
    CHECK(std::abs(a - std::round(a)) < 1e-9);
    CHECK(std::abs(b - std::round(b)) < 1e-9);
    CHECK(t.position.x >= -1e-6);
    CHECK(t.position.x < 1e5);
    CHECK(t.position.y >= -1e-6);
    CHECK(t.position.y < 1e5);
  }
}

TEST_CASE("no turbine lands on a prohibited cell and counts are monotone in area") {
  Rng rng(4);
  auto mask = uniform_mask(40, 50, 500.0, Zone::prohibited);
  std::size_t prev = 0;
  for (int step = 0; step < 6; ++step) {
    for (int i = 0; i < 300; ++i) mask.zones[rng.below(mask.zones.size())] = static_cast<Zone>(1 + rng.below(3));
    const auto layout = place_turbines(mask);
    CHECK(layout.turbines.size() >= prev);
    prev = layout.turbines.size();
    for (const auto& t : layout.turbines) {
      const auto z = mask.zone_near(t.position);
      REQUIRE(z.has_value());
      CHECK(*z == t.zone);
    }
  }
  CHECK(prev > 0);
}

TEST_CASE("layout is congruent under rotation of mask and direction") {
  Rng rng(8);
  const std::size_t H = 30, W = 45;
  RestrictionMask a;
  a.geometry = {0.0, 0.0, 400.0, H, W};
  for (std::size_t i = 0; i < H * W; ++i) a.zones.push_back(static_cast<Zone>(rng.below(4)));
  // Clockwise quarter turn about the origin: (x, y) -> (y, -x).
  RestrictionMask b;
  b.geometry = {0.0, -static_cast<double>(W) * 400.0, 400.0, W, H};
  b.zones.resize(H * W);
  for (std::size_t r = 0; r < W; ++r)
    for (std::size_t c = 0; c < H; ++c) b.zones[r * H + c] = a.at(H - 1 - c, r);
  const auto la = place_turbines(a, {60.0, 1600.0, 1000.0});
  const auto lb = place_turbines(b, {150.0, 1600.0, 1000.0});
  REQUIRE(la.turbines.size() == lb.turbines.size());
  TurbineLayout back = lb;
  for (auto& t : back.turbines) t.position = {-t.position.y, t.position.x};
  const auto pa = sorted_positions(la), pb = sorted_positions(back);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::abs(pa[i].first - pb[i].first) < 1e-6);
    CHECK(std::abs(pa[i].second - pb[i].second) < 1e-6);
  }
}

TEST_CASE("annual energy") {
  std::vector<double> mean(8760, 500.0), var(8760, 0.0);
  CHECK(annual_energy(mean, var).gwh == doctest::Approx(4.38).epsilon(1e-14));
  std::vector<double> zero(8760, 0.0);
  CHECK(annual_energy(zero, zero).gwh == 0.0);
  CHECK(annual_energy(zero, zero).variance == 0.0);
  Rng rng(3);
  for (auto& x : mean) x = 3000.0 * rng.uniform();
  for (auto& x : var) x = 1e5 * rng.uniform();
  long double s = 0, v = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    s += mean[i];
    v += var[i];
  }
  const auto e = annual_energy(mean, var);
  CHECK(e.gwh == doctest::Approx(static_cast<double>(s / 1e6)).epsilon(1e-9));
  CHECK(e.variance == doctest::Approx(static_cast<double>(v / 1e12)).epsilon(1e-9));
  std::vector<double> short_var(10, 0.0);
  CHECK_THROWS_AS(annual_energy(mean, short_var), Error);
}

TEST_CASE("potential summary") {
  auto mask = uniform_mask(2, 2, 1000.0);
  mask.zones = {Zone::prohibited, Zone::restricted, Zone::forests, Zone::other};
  TurbineLayout layout;
  layout.turbines = {{{0, 0}, Zone::other}, {{1, 0}, Zone::other}};
  const std::vector<AnnualEnergy> e{{1.0, 0.1}, {2.0, 0.2}};
  const auto s = summarize_potential(layout, e, mask);
  const auto& other = s.zones[static_cast<std::size_t>(Zone::other)];
  CHECK(other.turbines == 2);
  CHECK(other.energy_twh == doctest::Approx(3e-3).epsilon(1e-15));
  CHECK(s.total.energy_twh == other.energy_twh);
  CHECK(s.total.area_km2 == 3.0);
  CHECK(s.mask_area_km2 == 4.0);
  CHECK_THROWS_AS(summarize_potential(layout, std::vector<AnnualEnergy>(1), mask), Error);

  // Reference zone totals 13.6 + 15.8 + 23.7 TWh.
  layout.turbines = {{{0, 0}, Zone::restricted}, {{1, 0}, Zone::forests}, {{2, 0}, Zone::other}};
  const std::vector<AnnualEnergy> t4{{13600.0, 0.0}, {15800.0, 0.0}, {23700.0, 0.0}};
  const auto s4 = summarize_potential(layout, t4, mask);
    CHECK(s4.total.energy_twh == 53.1);
  CHECK(s4.total.turbines == 3);
}

TEST_CASE("reference zone areas give reference turbine counts") {
  const double areas[3] = {4351, 5315, 9953};
  const double counts[3] = {2734, 3311, 5985};
  for (int i = 0; i < 3; ++i) {
    // Near-square rectangle of 1 km cells matching the area.
    const auto w = static_cast<std::size_t>(std::round(std::sqrt(areas[i])));
    const auto h = static_cast<std::size_t>(std::round(areas[i] / static_cast<double>(w)));
    const auto layout = place_turbines(uniform_mask(h, w, 1000.0));
    CHECK(std::abs(static_cast<double>(layout.turbines.size()) - counts[i]) / counts[i] < 0.05);
  }
}

TEST_CASE("mask file and CSV outputs") {
  testing::TempDir dir;
  testing::write_text(dir / "m.asc",
                      "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1000\nNODATA_value -9999\n"
                      "3 -9999\n1 2\n");
  const auto mask = read_mask(dir / "m.asc");
  CHECK(mask.at(0, 0) == Zone::other);
  CHECK(mask.at(0, 1) == Zone::prohibited);
  CHECK(mask.at(1, 1) == Zone::forests);
  testing::write_text(dir / "bad.asc",
                      "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n7\n");
  CHECK_THROWS_AS(read_mask(dir / "bad.asc"), Error);

  TurbineLayout layout;
  layout.turbines = {{{0.5, 1.0}, Zone::forests}};
  write_layout_csv(dir / "l.csv", layout);
  CHECK(testing::read_text(dir / "l.csv") == "turbine_id,easting_m,northing_m,zone\n1,0.5,1,forests\n");
  const auto s = summarize_potential(layout, std::vector<AnnualEnergy>{{2.0, 0.0}}, mask);
  write_summary_csv(dir / "s.csv", s);
  const auto text = testing::read_text(dir / "s.csv");
  CHECK(text.rfind("zone,area_km2,area_fraction,virtual_turbines,potential_twh,potential_var_twh2\n", 0) == 0);
  CHECK(text.find("total,3,0.75,1,0.002,0\n") != std::string::npos);
}
