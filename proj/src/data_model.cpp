#include "stwind/data_model.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace stwind {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kStationHeader = "station_id,easting_m,northing_m,elev_m,timestamp,speed_mps";

void sort_and_check(StationSeries& s) {
  std::stable_sort(s.samples.begin(), s.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < s.samples.size(); ++i)
    if (s.samples[i].time == s.samples[i - 1].time)
      fail(ErrorKind::duplicate, "duplicate sample for station '" + s.location.id + "' at " +
                                     format_timestamp(s.samples[i].time));
}

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

struct SampleCounts {
  std::size_t missing = 0;
  std::size_t negative = 0;
  std::size_t zero = 0;
};

SampleCounts count_samples(const StationSeries& s) {
  SampleCounts c;
  for (const auto& x : s.samples) {
    if (std::isnan(x.speed))
      ++c.missing;
    else if (x.speed < 0)
      ++c.negative;
    else if (x.speed == 0)
      ++c.zero;
  }
  return c;
}

// One pass of the survivor rule. Returns the number of samples turned into
// missing values as outliers; zeros and negatives are blanked as well.
std::size_t blank_invalid(StationSeries& s, const CleaningThresholds& t, bool& changed) {
  changed = false;
  std::vector<double> valid;
  for (auto& x : s.samples) {
    if (std::isnan(x.speed)) continue;
    if (x.speed <= 0) {
      x.speed = kNaN;
      changed = true;
      continue;
    }
    valid.push_back(x.speed);
  }
  if (valid.empty()) return 0;

  const double med = median_of(valid);
  for (auto& v : valid) v = std::abs(v - med);
  const double scale = 1.4826 * median_of(valid);

  std::size_t outliers = 0;
  for (auto& x : s.samples) {
    if (std::isnan(x.speed)) continue;
    const bool too_fast = x.speed > t.outlier_max_speed;
    const bool far = scale > 0 && std::abs(x.speed - med) / scale > t.outlier_robust_z;
    if (too_fast || far) {
      x.speed = kNaN;
      ++outliers;
      changed = true;
    }
  }
  return outliers;
}

} // namespace

std::size_t ObservationMatrix::missing_count() const {
  return static_cast<std::size_t>(values.array().isNaN().count());
}

std::vector<StationSeries> load_station_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::schema, path.string() + ": empty file, expected header");
  {
    auto header = split(trim(line), ',');
    const auto expected = split(kStationHeader, ',');
    bool ok = header.size() == expected.size();
    for (std::size_t i = 0; ok && i < header.size(); ++i) ok = trim(header[i]) == expected[i];
    if (!ok)
      fail(ErrorKind::schema, path.string() + ": header must be '" + kStationHeader + "'");
  }

  std::vector<StationSeries> out;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 6) fail(ErrorKind::schema, where + ": expected 6 fields");
    const std::string id(trim(fields[0]));
    if (id.empty()) fail(ErrorKind::schema, where + ": empty station_id");
    const auto e = parse_double(fields[1]);
    const auto n = parse_double(fields[2]);
    const auto z = parse_double(fields[3]);
    const auto t = parse_timestamp(fields[4]);
    if (!e || !n || !z) fail(ErrorKind::schema, where + ": unparseable station coordinates");
    if (!t) fail(ErrorKind::schema, where + ": unparseable timestamp");
    const auto speed = parse_double(fields[5]);

    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) out.push_back(StationSeries{{id, *e, *n, *z}, {}});
    out[it->second].samples.push_back({*t, speed && std::isfinite(*speed) ? *speed : kNaN});
  }
  for (auto& s : out) sort_and_check(s);
  return out;
}

std::vector<StationSeries> load_station_csvs(std::span<const std::filesystem::path> paths) {
  std::vector<StationSeries> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : paths) {
    for (auto& s : load_station_csv(p)) {
      auto [it, inserted] = index.try_emplace(s.location.id, out.size());
      if (inserted) {
        out.push_back(std::move(s));
      } else {
        auto& dst = out[it->second].samples;
        dst.insert(dst.end(), s.samples.begin(), s.samples.end());
      }
    }
  }
  for (auto& s : out) sort_and_check(s);
  return out;
}

void write_station_csv(const std::filesystem::path& path, std::span<const StationSeries> series) {
  auto out = open_output(path);
  out << kStationHeader << '\n';
  for (const auto& s : series) {
    const auto prefix = s.location.id + ',' + format_double(s.location.easting) + ',' +
                        format_double(s.location.northing) + ',' +
                        format_double(s.location.elevation) + ',';
    for (const auto& x : s.samples)
      out << prefix << format_timestamp(x.time) << ','
          << (std::isnan(x.speed) ? std::string() : format_double(x.speed)) << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

CleanResult clean_network(std::span<const StationSeries> series,
                          const CleaningThresholds& thresholds) {
  const std::size_t n = series.size();
  std::vector<StationSeries> cleaned(n);
  std::vector<StationQuality> quality(n);

  parallel_for(n, [&](std::size_t i) {
    const auto& raw = series[i];
    auto& q = quality[i];
    q.station_id = raw.location.id;
    const auto total = static_cast<double>(raw.samples.size());
    const auto c = count_samples(raw);
    q.frac_missing = total > 0 ? static_cast<double>(c.missing) / total : 1.0;
    q.frac_negative = total > 0 ? static_cast<double>(c.negative) / total : 0.0;
    q.frac_zero = total > 0 ? static_cast<double>(c.zero) / total : 0.0;

    auto reject = [&](RemovalReason r) {
      q.removed = true;
      q.reason = r;
    };
    if (q.frac_missing > thresholds.missing) return reject(RemovalReason::missing);
    if (q.frac_negative > thresholds.negative) return reject(RemovalReason::negative);
    if (q.frac_zero > thresholds.zero) return reject(RemovalReason::zero);

    StationSeries s = raw;
    for (bool changed = true; changed;) {
      q.outliers_replaced += blank_invalid(s, thresholds, changed);
      const auto m = count_samples(s).missing;
      if (static_cast<double>(m) / total > thresholds.missing) return reject(RemovalReason::missing);
    }
    cleaned[i] = std::move(s);
  });

  CleanResult result;
  result.report.thresholds = thresholds;
  for (std::size_t i = 0; i < n; ++i) {
    result.report.outlier_replacements += quality[i].outliers_replaced;
    if (!quality[i].removed) result.stations.push_back(std::move(cleaned[i]));
  }
  result.report.stations = std::move(quality);
  return result;
}

std::string reason_label(RemovalReason reason, const CleaningThresholds& t) {
  auto pct = [](double f) { return format_double(f * 100.0) + "%"; };
  switch (reason) {
  case RemovalReason::none: return "";
  case RemovalReason::missing: return "missing>" + pct(t.missing);
  case RemovalReason::negative: return "negative>" + pct(t.negative);
  case RemovalReason::zero: return "zero>" + pct(t.zero);
  }
  return "";
}

void write_quality_report(const std::filesystem::path& path, const QualityReport& report) {
  auto out = open_output(path);
  out << "station_id,frac_missing,frac_negative,frac_zero,removed,reason\n";
  for (const auto& q : report.stations)
    out << q.station_id << ',' << format_double(q.frac_missing) << ','
        << format_double(q.frac_negative) << ',' << format_double(q.frac_zero) << ','
        << (q.removed ? 1 : 0) << ',' << reason_label(q.reason, report.thresholds) << '\n';
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

StationSeries downsample_hourly(const StationSeries& series) {
  StationSeries out{series.location, {}};
  auto hour_of = [](Timestamp t) {
    Timestamp h = t / kSecondsPerHour;
    if (t % kSecondsPerHour < 0) --h;
    return h * kSecondsPerHour;
  };
  std::size_t i = 0;
  while (i < series.samples.size()) {
    const Timestamp hour = hour_of(series.samples[i].time);
    double sum = 0.0;
    std::size_t count = 0;
    for (; i < series.samples.size() && hour_of(series.samples[i].time) == hour; ++i) {
      const double v = series.samples[i].speed;
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
    }
    out.samples.push_back({hour, count ? sum / static_cast<double>(count) : kNaN});
  }
  return out;
}

ObservationMatrix build_matrix(std::span<const StationSeries> series, Timestamp start,
                               Timestamp end) {
  if (end <= start) fail(ErrorKind::parameter, "build_matrix: end must be after start");
  const auto T = static_cast<std::size_t>((end - start + kSecondsPerHour - 1) / kSecondsPerHour);
  const auto S = series.size();
  if (S > T)
    fail(ErrorKind::dimension, "observation matrix needs S <= T, got S=" + std::to_string(S) +
                                   " T=" + std::to_string(T));
  ObservationMatrix m;
  m.times.resize(T);
  for (std::size_t j = 0; j < T; ++j) m.times[j] = start + static_cast<Timestamp>(j) * kSecondsPerHour;
  m.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(T), kNaN);
  for (std::size_t i = 0; i < S; ++i) {
    m.stations.push_back(series[i].location);
    for (const auto& x : series[i].samples) {
      if (x.time < start || x.time >= end || (x.time - start) % kSecondsPerHour != 0) continue;
      m.values(static_cast<Eigen::Index>(i), (x.time - start) / kSecondsPerHour) = x.speed;
    }
  }
  return m;
}

std::vector<StationSeries> matrix_to_series(const ObservationMatrix& m) {
  std::vector<StationSeries> out;
  out.reserve(m.station_count());
  for (std::size_t i = 0; i < m.station_count(); ++i) {
    StationSeries s{m.stations[i], {}};
    s.samples.reserve(m.time_count());
    for (std::size_t j = 0; j < m.time_count(); ++j)
      s.samples.push_back({m.times[j], m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> nearest_stations(std::span<const StationLocation> stations,
                                          std::size_t station, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(stations.size());
  const auto& me = stations[station];
  for (std::size_t j = 0; j < stations.size(); ++j) {
    if (j == station) continue;
    const double dx = stations[j].easting - me.easting;
    const double dy = stations[j].northing - me.northing;
    d.emplace_back(dx * dx + dy * dy, j);
  }
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

ObservationMatrix impute_missing(const ObservationMatrix& m, std::size_t k_space,
                                 std::size_t k_time) {
  const auto S = m.station_count();
  const auto T = static_cast<std::ptrdiff_t>(m.time_count());
  ObservationMatrix out = m;
  std::vector<std::string> errors(S);

  parallel_for(S, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (!m.values.row(row).array().isNaN().any()) return;
    const auto neighbours = nearest_stations(m.stations, i, k_space);
    for (std::ptrdiff_t j = 0; j < T; ++j) {
      if (!std::isnan(m.values(row, j))) continue;
      const auto lo = std::max<std::ptrdiff_t>(0, j - static_cast<std::ptrdiff_t>(k_time));
      const auto hi = std::min<std::ptrdiff_t>(T - 1, j + static_cast<std::ptrdiff_t>(k_time));
      double sum = 0.0;
      std::size_t count = 0;
      for (auto nb : neighbours)
        for (auto t = lo; t <= hi; ++t) {
          const double v = m.values(static_cast<Eigen::Index>(nb), t);
          if (!std::isnan(v)) {
            sum += v;
            ++count;
          }
        }
      if (count == 0) {
        errors[i] = "no available neighbour to impute station '" + m.stations[i].id + "' at " +
                    format_timestamp(m.times[static_cast<std::size_t>(j)]);
        return;
      }
      out.values(row, j) = sum / static_cast<double>(count);
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) fail(ErrorKind::imputation, e);
  return out;
}

NetworkSplit split_network(std::size_t station_count, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    fail(ErrorKind::parameter, "split fraction must lie in (0, 1)");
  if (station_count < 2) fail(ErrorKind::parameter, "split needs at least 2 stations");
  std::vector<std::size_t> order(station_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = station_count - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(station_count)));
  n_train = std::clamp<std::size_t>(n_train, 1, station_count - 1);
  NetworkSplit split;
  split.fraction = fraction;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ObservationMatrix select_stations(const ObservationMatrix& m, std::span<const std::size_t> rows) {
  ObservationMatrix out;
  out.times = m.times;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), m.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.station_count()) fail(ErrorKind::range, "station index out of range");
    out.stations.push_back(m.stations[rows[i]]);
    out.values.row(static_cast<Eigen::Index>(i)) = m.values.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

double characteristic_scale(double area_km2, std::size_t n) {
  if (!(area_km2 > 0) || n < 1) fail(ErrorKind::parameter, "characteristic_scale needs A > 0, n >= 1");
  return std::sqrt(area_km2 / static_cast<double>(n));
}

} // namespace stwind
