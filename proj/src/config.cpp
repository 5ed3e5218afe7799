#include "stwind/config.hpp"

#include "stwind/error.hpp"
#include "stwind/text_io.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace stwind {

StModelConfig RunConfig::model_config() const {
  StModelConfig c;
  c.elm.members = members;
  c.elm.neurons = neurons;
  c.elm.alpha_grid = log_grid(alpha_min, alpha_max, alpha_count);
  c.elm.seed = require_seed();
  c.k_retained = k_retained;
  c.residual_floor = residual_floor;
  return c;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) fail(ErrorKind::config, "run.seed is required (set it in the config or pass --seed)");
  return *seed;
}

OutputFormat parse_format(std::string_view text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "ascii-grid") return OutputFormat::ascii_grid;
  fail(ErrorKind::config, "unknown output format '" + std::string(text) + "' (expected csv or ascii-grid)");
}

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorKind::config,
       std::string(key) + ": invalid value '" + std::string(value) + "' (expected " + std::string(expected) + ")");
}

double real(std::string_view key, std::string_view v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) bad(key, v, "a finite number");
  return *d;
}

double positive(std::string_view key, std::string_view v) {
  const double d = real(key, v);
  if (!(d > 0)) bad(key, v, "a positive number");
  return d;
}

std::uint64_t unsigned_int(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

Timestamp timestamp(std::string_view key, std::string_view v) {
  const auto t = parse_timestamp(v);
  if (!t) bad(key, v, "an ISO-8601 UTC timestamp");
  return *t;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"paths.stations",
       [](RunConfig& c, auto, auto v) {
         c.stations.clear();
         for (auto p : split(v, ','))
           if (!trim(p).empty()) c.stations.emplace_back(std::string(trim(p)));
       }},
      {"paths.dem", [](RunConfig& c, auto, auto v) { c.dem = std::string(v); }},
      {"paths.roughness", [](RunConfig& c, auto, auto v) { c.roughness = std::string(v); }},
      {"paths.mask", [](RunConfig& c, auto, auto v) { c.mask = std::string(v); }},
      {"paths.power_curve", [](RunConfig& c, auto, auto v) { c.power_curve = std::string(v); }},
      {"paths.output", [](RunConfig& c, auto, auto v) { c.output = std::string(v); }},

      {"run.seed", [](RunConfig& c, auto k, auto v) { c.seed = unsigned_int(k, v); }},
      {"run.threads",
       [](RunConfig& c, auto k, auto v) {
         const auto n = unsigned_int(k, v);
         if (n < 1 || n > 1024) bad(k, v, "a thread count in [1, 1024]");
         c.threads = static_cast<int>(n);
       }},

      {"data.start", [](RunConfig& c, auto k, auto v) { c.start = timestamp(k, v); }},
      {"data.end", [](RunConfig& c, auto k, auto v) { c.end = timestamp(k, v); }},

      {"cleaning.missing", [](RunConfig& c, auto k, auto v) { c.cleaning.missing = real(k, v); }},
      {"cleaning.negative", [](RunConfig& c, auto k, auto v) { c.cleaning.negative = real(k, v); }},
      {"cleaning.zero", [](RunConfig& c, auto k, auto v) { c.cleaning.zero = real(k, v); }},
      {"cleaning.outlier_max_speed",
       [](RunConfig& c, auto k, auto v) { c.cleaning.outlier_max_speed = positive(k, v); }},
      {"cleaning.outlier_robust_z", [](RunConfig& c, auto k, auto v) { c.cleaning.outlier_robust_z = positive(k, v); }},

      {"split.fraction",
       [](RunConfig& c, auto k, auto v) {
         c.split_fraction = real(k, v);
         if (!(c.split_fraction > 0 && c.split_fraction < 1)) bad(k, v, "a fraction in (0, 1)");
       }},
      {"impute.k_space", [](RunConfig& c, auto k, auto v) { c.impute_k_space = unsigned_int(k, v); }},
      {"impute.k_time", [](RunConfig& c, auto k, auto v) { c.impute_k_time = unsigned_int(k, v); }},

      {"features.bandwidths",
       [](RunConfig& c, auto k, auto v) {
         const auto parts = split(v, ',');
         if (parts.size() != 3) bad(k, v, "three comma-separated bandwidths");
         for (std::size_t i = 0; i < 3; ++i) c.bandwidths[i] = positive(k, trim(parts[i]));
       }},

      {"model.members", [](RunConfig& c, auto k, auto v) { c.members = unsigned_int(k, v); }},
      {"model.neurons", [](RunConfig& c, auto k, auto v) { c.neurons = unsigned_int(k, v); }},
      {"model.alpha_min", [](RunConfig& c, auto k, auto v) { c.alpha_min = positive(k, v); }},
      {"model.alpha_max", [](RunConfig& c, auto k, auto v) { c.alpha_max = positive(k, v); }},
      {"model.alpha_count", [](RunConfig& c, auto k, auto v) { c.alpha_count = unsigned_int(k, v); }},
      {"model.k_retained", [](RunConfig& c, auto k, auto v) { c.k_retained = unsigned_int(k, v); }},
      {"model.residual_floor", [](RunConfig& c, auto k, auto v) { c.residual_floor = positive(k, v); }},

      {"predict.start", [](RunConfig& c, auto k, auto v) { c.predict_start = timestamp(k, v); }},
      {"predict.end", [](RunConfig& c, auto k, auto v) { c.predict_end = timestamp(k, v); }},
      {"predict.time_step",
       [](RunConfig& c, auto k, auto v) {
         c.time_step = unsigned_int(k, v);
         if (c.time_step < 1) bad(k, v, "an integer >= 1");
       }},
      {"predict.cell_step",
       [](RunConfig& c, auto k, auto v) {
         c.cell_step = unsigned_int(k, v);
         if (c.cell_step < 1) bad(k, v, "an integer >= 1");
       }},

      {"power.h1", [](RunConfig& c, auto k, auto v) { c.turbine.h1 = positive(k, v); }},
      {"power.h2", [](RunConfig& c, auto k, auto v) { c.turbine.h2 = positive(k, v); }},
      {"power.cutout", [](RunConfig& c, auto k, auto v) { c.turbine.cutout = positive(k, v); }},
      {"power.phi1", [](RunConfig& c, auto k, auto v) { c.curve.phi1 = positive(k, v); }},
      {"power.phi2", [](RunConfig& c, auto k, auto v) { c.curve.phi2 = real(k, v); }},
      {"power.phi3", [](RunConfig& c, auto k, auto v) { c.curve.phi3 = positive(k, v); }},
      {"power.roughness", [](RunConfig& c, auto k, auto v) { c.roughness_default = positive(k, v); }},

      {"siting.direction_deg", [](RunConfig& c, auto k, auto v) { c.lattice.direction_deg = real(k, v); }},
      {"siting.streamwise_m", [](RunConfig& c, auto k, auto v) { c.lattice.streamwise = positive(k, v); }},
      {"siting.spanwise_m", [](RunConfig& c, auto k, auto v) { c.lattice.spanwise = positive(k, v); }},

      {"output.format", [](RunConfig& c, auto, auto v) { c.format = parse_format(v); }},

      {"synth.stations", [](RunConfig& c, auto k, auto v) { c.synth_stations = unsigned_int(k, v); }},
      {"synth.hours", [](RunConfig& c, auto k, auto v) { c.synth_hours = unsigned_int(k, v); }},
      {"synth.start", [](RunConfig& c, auto k, auto v) { c.scenario.start = timestamp(k, v); }},
      {"synth.x0_m", [](RunConfig& c, auto k, auto v) { c.scenario.x0 = real(k, v); }},
      {"synth.y0_m", [](RunConfig& c, auto k, auto v) { c.scenario.y0 = real(k, v); }},
      {"synth.width_m", [](RunConfig& c, auto k, auto v) { c.scenario.width = positive(k, v); }},
      {"synth.height_m", [](RunConfig& c, auto k, auto v) { c.scenario.height = positive(k, v); }},
      {"synth.cellsize_m", [](RunConfig& c, auto k, auto v) { c.scenario.cellsize = positive(k, v); }},
      {"synth.base_speed", [](RunConfig& c, auto k, auto v) { c.scenario.base_speed = real(k, v); }},
      {"synth.noise",
       [](RunConfig& c, auto k, auto v) {
         if (v == "homoskedastic") c.scenario.noise = NoiseModel::homoskedastic;
         else if (v == "two_region") c.scenario.noise = NoiseModel::two_region;
         else bad(k, v, "homoskedastic or two_region");
       }},
      {"synth.noise_sd",
       [](RunConfig& c, auto k, auto v) {
         c.scenario.noise_sd = real(k, v);
         if (c.scenario.noise_sd < 0) bad(k, v, "a non-negative number");
       }},
      {"synth.noise_sd_high",
       [](RunConfig& c, auto k, auto v) {
         c.scenario.noise_sd_high = real(k, v);
         if (c.scenario.noise_sd_high < 0) bad(k, v, "a non-negative number");
       }},
      {"synth.layout",
       [](RunConfig& c, auto k, auto v) {
         if (v == "uniform") c.scenario.layout = StationLayout::uniform;
         else if (v == "clustered") c.scenario.layout = StationLayout::clustered;
         else bad(k, v, "uniform or clustered");
       }},
      {"synth.missing_fraction",
       [](RunConfig& c, auto k, auto v) {
         c.scenario.missing_fraction = real(k, v);
         if (!(c.scenario.missing_fraction >= 0 && c.scenario.missing_fraction < 1)) bad(k, v, "a fraction in [0, 1)");
       }},
  };
  return table;
}

} // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::config, "unknown configuration key '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

RunConfig parse_config(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = std::string_view(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) fail(ErrorKind::config, where + "expected 'section.key = value'");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    if (key.find('.') == std::string_view::npos) fail(ErrorKind::config, where + "key must be 'section.key'");
    try {
      apply_setting(cfg, key, value);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

} // namespace stwind
