#pragma once

#include "stwind/data_model.hpp"
#include "stwind/power.hpp"
#include "stwind/siting.hpp"
#include "stwind/st_model.hpp"
#include "stwind/synthgen.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stwind {

enum class OutputFormat { csv, ascii_grid };

struct RunConfig {
  // paths.*; empty paths fall back to the synth stage outputs
  std::vector<std::filesystem::path> stations;
  std::filesystem::path dem;
  std::filesystem::path roughness;
  std::filesystem::path mask;
  std::filesystem::path power_curve; // optional datasheet, overrides power.phi*
  std::filesystem::path output = "stwind_out";

  // run.*
  std::optional<std::uint64_t> seed;
  int threads = 1;

  // data.*; unset bounds take the extent of the cleaned series
  std::optional<Timestamp> start;
  std::optional<Timestamp> end;

  CleaningThresholds cleaning;
  double split_fraction = 0.8;
  std::size_t impute_k_space = 8;
  std::size_t impute_k_time = 1;

  std::array<double, 3> bandwidths{1000.0, 3000.0, 9000.0};

  // model.*
  std::size_t members = 20;
  std::size_t neurons = 0;
  double alpha_min = 1e-8;
  double alpha_max = 1e4;
  std::size_t alpha_count = 61;
  std::size_t k_retained = 0;
  double residual_floor = 1e-6;

  // predict.*
  std::optional<Timestamp> predict_start;
  std::optional<Timestamp> predict_end;
  std::size_t time_step = 1;  // hours
  std::size_t cell_step = 1;  // every n-th raster cell in each direction

  TurbineConfig turbine;
  PowerCurve curve;
  double roughness_default = 0.1; // h0 when no roughness grid is given

  LatticeSpec lattice;

  OutputFormat format = OutputFormat::csv;

  SyntheticScenario scenario;
  std::size_t synth_stations = 125;
  std::size_t synth_hours = 2000;

  StModelConfig model_config() const;
  std::uint64_t require_seed() const;
};

// One `section.key = value` assignment; unknown keys and bad values are
// config errors.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

RunConfig parse_config(std::string_view text, std::string_view origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

OutputFormat parse_format(std::string_view text);

} // namespace stwind
