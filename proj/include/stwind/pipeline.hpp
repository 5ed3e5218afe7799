#pragma once

#include "stwind/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stwind {

enum class Stage { synth, clean, features, fit, predict, power, site, benchmark };

std::optional<Stage> parse_stage(std::string_view name);
std::string_view stage_name(Stage stage) noexcept;

struct StageReport {
  std::string summary; // one line for the terminal
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> outputs;
};

// Each stage reads the config plus files written by earlier stages under
// `stage_dir` and writes its own subdirectory there:
//   synth/ clean/ features/ model/ predict/ power/ site/ benchmark/
StageReport run_stage(const RunConfig& cfg, Stage stage, const std::filesystem::path& stage_dir);

} // namespace stwind
