#pragma once

#include "stwind/text_io.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stwind {

struct StationLocation {
  std::string id;
  double easting = 0.0;   // m
  double northing = 0.0;  // m
  double elevation = 0.0; // m
};

// A missing sample carries a NaN speed.
struct Sample {
  Timestamp time = 0;
  double speed = 0.0;
};

struct StationSeries {
  StationLocation location;
  std::vector<Sample> samples; // strictly increasing in time
};

// S stations x T hourly times. Missing cells are NaN.
struct ObservationMatrix {
  std::vector<StationLocation> stations;
  std::vector<Timestamp> times;
  Eigen::MatrixXd values;

  std::size_t station_count() const { return stations.size(); }
  std::size_t time_count() const { return times.size(); }
  std::size_t missing_count() const;
  bool complete() const { return missing_count() == 0; }
};

struct CleaningThresholds {
  double missing = 0.10;
  double negative = 0.10;
  double zero = 0.10;
  double outlier_max_speed = 75.0; // m/s, physical bound
  double outlier_robust_z = 8.0;   // |x - median| / (1.4826 MAD)
};

enum class RemovalReason { none, missing, negative, zero };

struct StationQuality {
  std::string station_id;
  double frac_missing = 0.0;
  double frac_negative = 0.0;
  double frac_zero = 0.0;
  bool removed = false;
  RemovalReason reason = RemovalReason::none;
  std::size_t outliers_replaced = 0;
};

struct QualityReport {
  std::vector<StationQuality> stations;
  std::size_t outlier_replacements = 0;
  CleaningThresholds thresholds;
};

struct NetworkSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double fraction = 0.8;
};

// Station CSV: station_id,easting_m,northing_m,elev_m,timestamp,speed_mps
std::vector<StationSeries> load_station_csv(const std::filesystem::path& path);
// Loads several files and merges series sharing a station id.
std::vector<StationSeries> load_station_csvs(std::span<const std::filesystem::path> paths);
void write_station_csv(const std::filesystem::path& path, std::span<const StationSeries> series);

struct CleanResult {
  std::vector<StationSeries> stations;
  QualityReport report;
};

// Removes stations whose fraction of missing, negative or zero samples exceeds
// the thresholds, then turns the survivors' zeros, negatives and outliers into
// missing samples. The rule is applied until nothing changes, so the result is
// a fixed point: cleaning it again is a no-op.
CleanResult clean_network(std::span<const StationSeries> series,
                          const CleaningThresholds& thresholds = {});

std::string reason_label(RemovalReason reason, const CleaningThresholds& thresholds);
void write_quality_report(const std::filesystem::path& path, const QualityReport& report);

// Mean of the available samples in each [t, t + 1h) bin.
StationSeries downsample_hourly(const StationSeries& series);

// Hourly grid on [start, end). Fails if S > T.
ObservationMatrix build_matrix(std::span<const StationSeries> series, Timestamp start,
                               Timestamp end);

std::vector<StationSeries> matrix_to_series(const ObservationMatrix& m);

// Indices of the k nearest other stations in the plane, nearest first;
// ties go to the lower index.
std::vector<std::size_t> nearest_stations(std::span<const StationLocation> stations,
                                          std::size_t station, std::size_t k);

// Replaces each missing cell by the mean of the original values of the
// k_space nearest stations at times t-k_time..t+k_time.
ObservationMatrix impute_missing(const ObservationMatrix& m, std::size_t k_space = 8,
                                 std::size_t k_time = 1);

NetworkSplit split_network(std::size_t station_count, double fraction, std::uint64_t seed);
ObservationMatrix select_stations(const ObservationMatrix& m, std::span<const std::size_t> rows);

// Characteristic network scale sqrt(A / n), in the units of sqrt(area).
double characteristic_scale(double area_km2, std::size_t n);

} // namespace stwind
