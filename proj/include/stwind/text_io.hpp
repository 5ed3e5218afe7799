#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stwind {

// Seconds since 1970-01-01T00:00:00Z.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerHour = 3600;

// Parses `YYYY-MM-DDTHH:MM:SSZ` (also accepts a missing trailing Z).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
int year_of(Timestamp t);

// Shortest representation that round-trips exactly.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

// Neumaier compensated summation.
class CompensatedSum {
public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

} // namespace stwind
