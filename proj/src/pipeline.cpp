#include "stwind/pipeline.hpp"

#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/terrain_features.hpp"
#include "stwind/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace stwind {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 8> kStageNames = {"synth",   "clean", "features", "fit",
                                                         "predict", "power", "site",     "benchmark"};

nlohmann::json read_json(const fs::path& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::schema, path.string() + ": " + ex.what());
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

void require_file(const fs::path& path, std::string_view what) {
  if (!fs::exists(path))
    fail(ErrorKind::io, std::string(what) + " '" + path.string() + "' not found (run the earlier stage first?)");
}

std::vector<fs::path> station_inputs(const RunConfig& cfg, const fs::path& dir) {
  if (!cfg.stations.empty()) return cfg.stations;
  return {dir / "synth" / "stations.csv"};
}

fs::path input_or_synth(const fs::path& configured, const fs::path& dir, std::string_view file) {
  return configured.empty() ? dir / "synth" / file : configured;
}

std::string compact_time(Timestamp t) {
  std::string s = format_timestamp(t);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '-' || c == ':'; }), s.end());
  return s;
}

std::vector<Point> locations(const ObservationMatrix& m) {
  std::vector<Point> pts;
  for (const auto& s : m.stations) pts.push_back({s.easting, s.northing});
  return pts;
}

ObservationMatrix load_hourly_matrix(const RunConfig& cfg, const fs::path& dir, std::optional<Timestamp> start,
                                     std::optional<Timestamp> end) {
  const auto path = dir / "clean" / "stations.csv";
  require_file(path, "cleaned station file");
  const auto series = load_station_csv(path);
  if (series.empty()) fail(ErrorKind::completeness, "no stations survived cleaning");
  Timestamp lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : series)
    for (const auto& x : s.samples) {
      if (!any) lo = hi = x.time;
      lo = std::min(lo, x.time);
      hi = std::max(hi, x.time);
      any = true;
    }
  if (!any) fail(ErrorKind::completeness, "cleaned station file holds no samples");
  (void)cfg;
  return build_matrix(series, start.value_or(lo), end.value_or(hi + kSecondsPerHour));
}

// --- stages -----------------------------------------------------------------

StageReport stage_synth(const RunConfig& cfg, const fs::path& dir) {
  const auto out = dir / "synth";
  fs::create_directories(out);
  const auto ds = generate(cfg.scenario, cfg.synth_stations, cfg.synth_hours, cfg.require_seed());
  const auto series = matrix_to_series(ds.observed);
  StageReport r;
  write_station_csv(out / "stations.csv", series);
  write_ascii_grid(out / "dem.asc", synthetic_dem(cfg.scenario));
  write_ascii_grid(out / "roughness.asc", synthetic_roughness(cfg.scenario));
  write_ascii_grid(out / "mask.asc", synthetic_mask(cfg.scenario));
  r.outputs = {out / "stations.csv", out / "dem.asc", out / "roughness.asc", out / "mask.asc"};
  r.summary = "synth: " + std::to_string(ds.observed.station_count()) + " stations x " +
              std::to_string(ds.observed.time_count()) + " hours";
  return r;
}

StageReport stage_clean(const RunConfig& cfg, const fs::path& dir) {
  const auto inputs = station_inputs(cfg, dir);
  for (const auto& p : inputs) require_file(p, "station file");
  const auto raw = load_station_csvs(inputs);
  auto cleaned = clean_network(raw, cfg.cleaning);
  std::vector<StationSeries> hourly(cleaned.stations.size());
  parallel_for(hourly.size(), [&](std::size_t i) { hourly[i] = downsample_hourly(cleaned.stations[i]); });

  const auto out = dir / "clean";
  fs::create_directories(out);
  write_station_csv(out / "stations.csv", hourly);
  write_quality_report(out / "quality_report.csv", cleaned.report);
  StageReport r;
  r.outputs = {out / "stations.csv", out / "quality_report.csv"};
  r.summary = "clean: kept " + std::to_string(hourly.size()) + " of " + std::to_string(raw.size()) +
              " stations, " + std::to_string(cleaned.report.outlier_replacements) + " outliers blanked";
  return r;
}

StageReport stage_features(const RunConfig& cfg, const fs::path& dir) {
  const auto dem_path = input_or_synth(cfg.dem, dir, "dem.asc");
  require_file(dem_path, "DEM");
  const auto stack = assemble_features(read_ascii_grid(dem_path), cfg.bandwidths);
  save_feature_stack(dir / "features", stack);
  StageReport r;
  r.outputs = {dir / "features" / "manifest.txt"};
  r.summary = "features: 13 grids of " + std::to_string(stack.geometry().nrows) + " x " +
              std::to_string(stack.geometry().ncols) + " cells";
  return r;
}

StageReport stage_fit(const RunConfig& cfg, const fs::path& dir) {
  require_file(dir / "features" / "manifest.txt", "feature stack");
  const auto all = load_hourly_matrix(cfg, dir, cfg.start, cfg.end);
  const auto split = split_network(all.station_count(), cfg.split_fraction, cfg.require_seed());
  const auto train = impute_missing(select_stations(all, split.train), cfg.impute_k_space, cfg.impute_k_time);
  const auto stack = load_feature_stack(dir / "features");
  const auto train_pts = locations(train);
  const Eigen::MatrixXd x = sample_features(stack, train_pts);

  const auto mc = cfg.model_config();
  const auto model = StModel::fit(train, x, mc);
  const auto vm = fit_variance_model(model, train, x, mc);
  const auto cc = cross_covariance_check(model);

  const auto out = dir / "model";
  fs::create_directories(out);
  save_st_model(out / "mean", model);
  save_variance_model(out / "variance", vm);
  {
    auto f = open_output(out / "split.csv");
    f << "station_id,set\n";
    for (auto i : split.train) f << all.stations[i].id << ",train\n";
    for (auto i : split.test) f << all.stations[i].id << ",test\n";
  }
  {
    auto f = open_output(out / "cross_covariance.csv");
    f << "max_abs_correlation,component_k,component_l,warning\n";
    f << format_double(cc.max_abs_correlation) << ',' << cc.k + 1 << ',' << cc.l + 1 << ','
      << (cc.warning ? 1 : 0) << '\n';
  }
  StageReport r;
  if (cc.warning)
    r.warnings.push_back("component residuals " + std::to_string(cc.k + 1) + " and " + std::to_string(cc.l + 1) +
                         " are correlated (" + format_double(cc.max_abs_correlation) + " > 0.2)");
  r.outputs = {out / "mean", out / "variance", out / "split.csv", out / "cross_covariance.csv"};
  r.summary = "fit: " + std::to_string(train.station_count()) + " training stations, " +
              std::to_string(model.ensemble_count()) + " component ensembles";
  return r;
}

// Prediction points: every cell_step-th raster cell with complete features.
struct PredictionSet {
  GridGeometry geometry;
  std::vector<CellIndex> cells;
  std::vector<Point> points;
  std::vector<Timestamp> times;
  Eigen::MatrixXd mean, var_model, var_pred; // P x T
};

void write_prediction_manifest(const fs::path& dir, const PredictionSet& ps, OutputFormat format,
                               std::size_t cell_step) {
  nlohmann::ordered_json j;
  j["format"] = format == OutputFormat::csv ? "csv" : "ascii-grid";
  j["grid"] = {{"xll", ps.geometry.xll},   {"yll", ps.geometry.yll},     {"cellsize", ps.geometry.cellsize},
               {"nrows", ps.geometry.nrows}, {"ncols", ps.geometry.ncols}, {"cell_step", cell_step}};
  auto times = nlohmann::json::array();
  for (auto t : ps.times) times.push_back(format_timestamp(t));
  j["timestamps"] = times;
  write_json(dir / "manifest.json", j);
}

// Long CSV or one grid per (quantity, timestamp).
void write_fields(const fs::path& dir, OutputFormat format, const GridGeometry& geometry,
                  std::span<const CellIndex> cells, std::span<const Point> points, std::span<const Timestamp> times,
                  std::span<const std::string_view> names, std::span<const Eigen::MatrixXd* const> fields,
                  std::vector<fs::path>& outputs, std::string_view csv_name) {
  if (format == OutputFormat::csv) {
    auto out = open_output(dir / csv_name);
    out << "easting,northing,timestamp";
    for (auto n : names) out << ',' << n;
    out << '\n';
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto ts = format_timestamp(times[j]);
      for (std::size_t p = 0; p < points.size(); ++p) {
        out << format_double(points[p].x) << ',' << format_double(points[p].y) << ',' << ts;
        for (const auto* f : fields)
          out << ',' << format_double((*f)(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)));
        out << '\n';
      }
    }
    outputs.push_back(dir / csv_name);
    return;
  }
  for (std::size_t j = 0; j < times.size(); ++j)
    for (std::size_t q = 0; q < names.size(); ++q) {
      Grid g(geometry, Grid::kMissing);
      for (std::size_t p = 0; p < cells.size(); ++p)
        g.at(cells[p].row, cells[p].col) = (*fields[q])(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j));
      const auto path = dir / (std::string(names[q]) + "_" + compact_time(times[j]) + ".asc");
      write_ascii_grid(path, g);
      outputs.push_back(path);
    }
}

StageReport stage_predict(const RunConfig& cfg, const fs::path& dir) {
  require_file(dir / "model" / "mean" / "model.json", "fitted model");
  const auto model = load_st_model(dir / "model" / "mean");
  const auto vm = load_variance_model(dir / "model" / "variance");
  const auto stack = load_feature_stack(dir / "features");

  PredictionSet ps;
  ps.geometry = stack.geometry();
  for (std::size_t r = 0; r < ps.geometry.nrows; r += cfg.cell_step)
    for (std::size_t c = 0; c < ps.geometry.ncols; c += cfg.cell_step) {
      bool ok = true;
      for (const auto& g : stack.grids) ok = ok && !Grid::missing(g.at(r, c));
      if (!ok) continue;
      ps.cells.push_back({r, c});
      ps.points.push_back({ps.geometry.x_center(c), ps.geometry.y_center(r)});
    }
  if (ps.points.empty()) fail(ErrorKind::completeness, "no raster cell has a complete feature vector");

  const auto& mt = model.times();
  const Timestamp lo = cfg.predict_start.value_or(mt.front());
  const Timestamp hi = cfg.predict_end.value_or(mt.back() + kSecondsPerHour);
  for (Timestamp t = lo; t < hi; t += static_cast<Timestamp>(cfg.time_step) * kSecondsPerHour) ps.times.push_back(t);
  if (ps.times.empty()) fail(ErrorKind::range, "prediction window is empty");
  const auto idx = model.time_indices(ps.times);
  const auto idx_v = vm.model().time_indices(ps.times);

  const Eigen::MatrixXd x = sample_features(stack, ps.points);
  ps.mean = model.predict(x, idx);
  ps.var_model = model.model_variance(x, idx);
  ps.var_pred = vm.prediction_variance(x, idx_v);

  const auto out = dir / "predict";
  fs::remove_all(out);
  fs::create_directories(out);
  StageReport r;
  const std::array<std::string_view, 3> names = {"mean", "var_model", "var_pred"};
  const std::array<const Eigen::MatrixXd*, 3> fields = {&ps.mean, &ps.var_model, &ps.var_pred};
  write_fields(out, cfg.format, ps.geometry, ps.cells, ps.points, ps.times, names, fields, r.outputs,
               "predictions.csv");
  write_prediction_manifest(out, ps, cfg.format, cfg.cell_step);
  r.outputs.push_back(out / "manifest.json");
  r.summary = "predict: " + std::to_string(ps.points.size()) + " cells x " + std::to_string(ps.times.size()) +
              " hours";
  return r;
}

PredictionSet read_predictions(const fs::path& dir) {
  require_file(dir / "manifest.json", "prediction manifest");
  const auto manifest = read_json(dir / "manifest.json");
  PredictionSet ps;
  const auto& g = manifest.at("grid");
  ps.geometry.xll = g.at("xll").get<double>();
  ps.geometry.yll = g.at("yll").get<double>();
  ps.geometry.cellsize = g.at("cellsize").get<double>();
  ps.geometry.nrows = g.at("nrows").get<std::size_t>();
  ps.geometry.ncols = g.at("ncols").get<std::size_t>();
  for (const auto& t : manifest.at("timestamps")) {
    const auto ts = parse_timestamp(t.get<std::string>());
    if (!ts) fail(ErrorKind::schema, "prediction manifest: bad timestamp");
    ps.times.push_back(*ts);
  }
  const auto T = ps.times.size();
  if (T == 0) fail(ErrorKind::schema, "prediction manifest lists no timestamps");

  if (manifest.at("format").get<std::string>() == "csv") {
    auto in = open_input(dir / "predictions.csv");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "easting,northing,timestamp,mean,var_model,var_pred")
      fail(ErrorKind::schema, "predictions.csv: unexpected header");
    std::vector<std::array<double, 5>> rows; // x, y, mean, var_model, var_pred
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const auto f = split(trim(line), ',');
      if (f.size() != 6) fail(ErrorKind::schema, "predictions.csv: expected 6 columns");
      std::array<double, 5> row{};
      const std::size_t cols[5] = {0, 1, 3, 4, 5};
      for (std::size_t c = 0; c < 5; ++c) {
        const auto v = parse_double(f[cols[c]]);
        if (!v) fail(ErrorKind::schema, "predictions.csv: unparseable number");
        row[c] = *v;
      }
      rows.push_back(row);
    }
    if (rows.empty() || rows.size() % T != 0) fail(ErrorKind::schema, "predictions.csv: incomplete time blocks");
    const auto P = rows.size() / T;
    ps.mean.resize(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(T));
    ps.var_model.resizeLike(ps.mean);
    ps.var_pred.resizeLike(ps.mean);
    for (std::size_t p = 0; p < P; ++p) {
      const Point pt{rows[p][0], rows[p][1]};
      const auto cell = ps.geometry.locate(pt);
      if (!cell) fail(ErrorKind::extent, "predictions.csv: point outside the prediction grid");
      ps.points.push_back(pt);
      ps.cells.push_back(*cell);
    }
    for (std::size_t j = 0; j < T; ++j)
      for (std::size_t p = 0; p < P; ++p) {
        const auto& row = rows[j * P + p];
        if (row[0] != ps.points[p].x || row[1] != ps.points[p].y)
          fail(ErrorKind::schema, "predictions.csv: time blocks list different points");
        const auto pi = static_cast<Eigen::Index>(p);
        const auto ji = static_cast<Eigen::Index>(j);
        ps.mean(pi, ji) = row[2];
        ps.var_model(pi, ji) = row[3];
        ps.var_pred(pi, ji) = row[4];
      }
    return ps;
  }

  std::vector<Grid> mean, var_model, var_pred;
  for (auto t : ps.times) {
    const auto suffix = "_" + compact_time(t) + ".asc";
    mean.push_back(read_ascii_grid(dir / ("mean" + suffix)));
    var_model.push_back(read_ascii_grid(dir / ("var_model" + suffix)));
    var_pred.push_back(read_ascii_grid(dir / ("var_pred" + suffix)));
  }
  for (std::size_t r = 0; r < ps.geometry.nrows; ++r)
    for (std::size_t c = 0; c < ps.geometry.ncols; ++c)
      if (!Grid::missing(mean[0].at(r, c))) {
        ps.cells.push_back({r, c});
        ps.points.push_back({ps.geometry.x_center(c), ps.geometry.y_center(r)});
      }
  const auto P = static_cast<Eigen::Index>(ps.cells.size());
  ps.mean.resize(P, static_cast<Eigen::Index>(T));
  ps.var_model.resizeLike(ps.mean);
  ps.var_pred.resizeLike(ps.mean);
  for (std::size_t j = 0; j < T; ++j)
    for (Eigen::Index p = 0; p < P; ++p) {
      const auto& cell = ps.cells[static_cast<std::size_t>(p)];
      const auto ji = static_cast<Eigen::Index>(j);
      ps.mean(p, ji) = mean[j].at(cell.row, cell.col);
      ps.var_model(p, ji) = var_model[j].at(cell.row, cell.col);
      ps.var_pred(p, ji) = var_pred[j].at(cell.row, cell.col);
    }
  if (!ps.mean.allFinite() || !ps.var_pred.allFinite())
    fail(ErrorKind::schema, "prediction grids disagree on which cells were predicted");
  return ps;
}

StageReport stage_power(const RunConfig& cfg, const fs::path& dir) {
  PowerCurve curve = cfg.curve;
  if (!cfg.power_curve.empty()) curve = fit_power_curve(read_power_curve_csv(cfg.power_curve)).curve;
  const auto ps = read_predictions(dir / "predict");

  const auto rough_path = input_or_synth(cfg.roughness, dir, "roughness.asc");
  std::optional<Grid> rough;
  if (fs::exists(rough_path)) rough = read_ascii_grid(rough_path);
  else if (!cfg.roughness.empty()) require_file(rough_path, "roughness grid");

  const auto P = static_cast<Eigen::Index>(ps.points.size());
  const auto T = static_cast<Eigen::Index>(ps.times.size());
  Eigen::MatrixXd mean(P, T), var(P, T), flag(P, T);
  std::vector<double> h0(ps.points.size());
  for (std::size_t p = 0; p < ps.points.size(); ++p)
    h0[p] = rough ? sample_bilinear(*rough, ps.points[p]) : cfg.roughness_default;

  std::vector<std::size_t> clamped(ps.points.size(), 0);
  parallel_for(ps.points.size(), [&](std::size_t p) {
    const auto pi = static_cast<Eigen::Index>(p);
    const double c = loglaw_factor(h0[p], cfg.turbine);
    for (Eigen::Index j = 0; j < T; ++j) {
      const double mu_v = c * ps.mean(pi, j);
      const double s2_v = c * c * ps.var_pred(pi, j);
      const auto pm = apply_cutout(mu_v, power_moments(mu_v, s2_v, curve), cfg.turbine);
      mean(pi, j) = pm.mean;
      var(pi, j) = pm.variance;
      flag(pi, j) = pm.cutout ? 1.0 : 0.0;
      if (pm.variance_clamped) ++clamped[p];
    }
  });

  const auto out = dir / "power";
  fs::remove_all(out);
  fs::create_directories(out);
  StageReport r;
  const std::array<std::string_view, 3> names = {"power_mean_kw", "power_var_kw2", "cutout_flag"};
  const std::array<const Eigen::MatrixXd*, 3> fields = {&mean, &var, &flag};
  write_fields(out, cfg.format, ps.geometry, ps.cells, ps.points, ps.times, names, fields, r.outputs, "power.csv");

  // Energy over the predicted hours, and scaled to one year of 8760 h.
  const double hours = static_cast<double>(ps.times.size()) * static_cast<double>(cfg.time_step);
  const double scale = 8760.0 / hours;
  {
    auto f = open_output(out / "energy.csv");
    f << "easting,northing,hours,energy_gwh,energy_var_gwh2,annual_gwh,annual_var_gwh2\n";
    for (Eigen::Index p = 0; p < P; ++p) {
      // Each sampled hour stands for time_step hours.
      const Eigen::VectorXd m = mean.row(p).transpose() * static_cast<double>(cfg.time_step);
      const Eigen::VectorXd v = var.row(p).transpose() * static_cast<double>(cfg.time_step * cfg.time_step);
      const auto e = annual_energy(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())),
                                   std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
      const auto& pt = ps.points[static_cast<std::size_t>(p)];
      f << format_double(pt.x) << ',' << format_double(pt.y) << ',' << format_double(hours) << ','
        << format_double(e.gwh) << ',' << format_double(e.variance) << ',' << format_double(e.gwh * scale) << ','
        << format_double(e.variance * scale * scale) << '\n';
    }
  }
  r.outputs.push_back(out / "energy.csv");
  std::size_t cut = 0, clamp_total = 0;
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index j = 0; j < T; ++j) cut += flag(p, j) != 0.0;
  for (auto c : clamped) clamp_total += c;
  nlohmann::ordered_json diag;
  diag["phi1"] = curve.phi1;
  diag["phi2"] = curve.phi2;
  diag["phi3"] = curve.phi3;
  diag["cutout_cells"] = cut;
  diag["negative_variance_clamps"] = clamp_total;
  write_json(out / "diagnostics.json", diag);
  r.outputs.push_back(out / "diagnostics.json");
  if (clamp_total > 0)
    r.warnings.push_back(std::to_string(clamp_total) + " negative wind-speed variances clamped to 0");
  r.summary = "power: " + std::to_string(P) + " cells x " + std::to_string(T) + " hours, " + std::to_string(cut) +
              " cut-out cells";
  return r;
}

StageReport stage_site(const RunConfig& cfg, const fs::path& dir) {
  const auto mask_path = input_or_synth(cfg.mask, dir, "mask.asc");
  require_file(mask_path, "restriction mask");
  const auto mask = read_mask(mask_path);
  const auto layout = place_turbines(mask, cfg.lattice);

  const auto energy_path = dir / "power" / "energy.csv";
  require_file(energy_path, "cell energy file");
  std::vector<Point> pts;
  std::vector<AnnualEnergy> cell_energy;
  {
    auto in = open_input(energy_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const auto f = split(trim(line), ',');
      if (f.size() != 7) fail(ErrorKind::schema, "energy.csv: expected 7 columns");
      const auto x = parse_double(f[0]), y = parse_double(f[1]), e = parse_double(f[5]), v = parse_double(f[6]);
      if (!x || !y || !e || !v) fail(ErrorKind::schema, "energy.csv: unparseable number");
      pts.push_back({*x, *y});
      cell_energy.push_back({*e, *v});
    }
  }
  if (pts.empty()) fail(ErrorKind::completeness, "energy.csv lists no cells");

  // Each turbine takes the annual energy of the nearest predicted cell centre.
  std::vector<AnnualEnergy> energies(layout.turbines.size());
  parallel_for(layout.turbines.size(), [&](std::size_t t) {
    const auto& q = layout.turbines[t].position;
    double best = INFINITY;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = std::hypot(pts[i].x - q.x, pts[i].y - q.y);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    energies[t] = cell_energy[arg];
  });
  const auto summary = summarize_potential(layout, energies, mask);

  const auto out = dir / "site";
  fs::create_directories(out);
  write_layout_csv(out / "layout.csv", layout);
  write_summary_csv(out / "summary.csv", summary);
  StageReport r;
  r.outputs = {out / "layout.csv", out / "summary.csv"};
  r.summary = "site: " + std::to_string(layout.turbines.size()) + " turbines, " +
              format_double(summary.total.energy_twh) + " TWh/yr";
  return r;
}

StageReport stage_benchmark(const RunConfig& cfg, const fs::path& dir) {
  require_file(dir / "model" / "split.csv", "station split");
  const auto model = load_st_model(dir / "model" / "mean");
  const auto vm = load_variance_model(dir / "model" / "variance");
  const auto all = load_hourly_matrix(cfg, dir, model.times().front(), model.times().back() + kSecondsPerHour);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all.stations.size(); ++i) index[all.stations[i].id] = i;
  std::vector<std::size_t> test;
  {
    auto in = open_input(dir / "model" / "split.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = split(trim(line), ',');
      if (f.size() != 2) continue;
      if (f[1] != "test") continue;
      const auto it = index.find(std::string(f[0]));
      if (it == index.end()) fail(ErrorKind::schema, "split.csv names an unknown station '" + std::string(f[0]) + "'");
      test.push_back(it->second);
    }
  }
  const auto test_m = select_stations(all, test);
  const auto stack = load_feature_stack(dir / "features");
  const Eigen::MatrixXd x = sample_features(stack, locations(test_m));
  const auto m = evaluate(model, test_m, x);
  const double coverage = coverage_check(model, vm, test_m, x);

  std::size_t neurons = 0, members = 0;
  for (std::size_t k = 0; k < model.component_count() && neurons == 0; ++k)
    if (model.ensemble(k)) {
      neurons = model.ensemble(k)->members().front().layer.neurons();
      members = model.ensemble(k)->size();
    }
  const auto out = dir / "benchmark";
  fs::create_directories(out);
  {
    auto f = open_output(out / "benchmark.csv");
    f << "train_stations,test_stations,neurons,members,test_cells,rmse,mae,baseline_rmse,baseline_mae,coverage_95\n";
    f << model.stations().size() << ',' << test_m.station_count() << ',' << neurons << ',' << members << ','
      << m.cells << ',' << format_double(m.rmse) << ',' << format_double(m.mae) << ','
      << format_double(m.baseline_rmse) << ',' << format_double(m.baseline_mae) << ',' << format_double(coverage)
      << '\n';
  }
  StageReport r;
  r.outputs = {out / "benchmark.csv"};
  r.summary = "benchmark: RMSE " + format_double(m.rmse) + " vs baseline " + format_double(m.baseline_rmse) +
              ", coverage " + format_double(coverage);
  return r;
}

} // namespace

std::optional<Stage> parse_stage(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  return std::nullopt;
}

std::string_view stage_name(Stage stage) noexcept { return kStageNames[static_cast<std::size_t>(stage)]; }

StageReport run_stage(const RunConfig& cfg, Stage stage, const fs::path& stage_dir) {
  cfg.require_seed();
  switch (stage) {
  case Stage::synth: return stage_synth(cfg, stage_dir);
  case Stage::clean: return stage_clean(cfg, stage_dir);
  case Stage::features: return stage_features(cfg, stage_dir);
  case Stage::fit: return stage_fit(cfg, stage_dir);
  case Stage::predict: return stage_predict(cfg, stage_dir);
  case Stage::power: return stage_power(cfg, stage_dir);
  case Stage::site: return stage_site(cfg, stage_dir);
  case Stage::benchmark: return stage_benchmark(cfg, stage_dir);
  }
  fail(ErrorKind::config, "unknown stage");
}

} // namespace stwind
