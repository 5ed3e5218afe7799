// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: stwind_acceptance WORKDIR

#include "stwind/config.hpp"
#include "stwind/data_model.hpp"
#include "stwind/elm.hpp"
#include "stwind/eof.hpp"
#include "stwind/error.hpp"
#include "stwind/parallel.hpp"
#include "stwind/pipeline.hpp"
#include "stwind/power.hpp"
#include "stwind/random.hpp"
#include "stwind/siting.hpp"
#include "stwind/st_model.hpp"
#include "stwind/text_io.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace stwind;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Appends a failed check to the outcome's detail line.
void require(Outcome& o, bool ok, const std::string& what) {
  if (ok) return;
  o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

Outcome eof_exactness() {
  Outcome o;
  Rng rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto S = static_cast<Eigen::Index>(2 + rng.below(29));
    const auto T = static_cast<Eigen::Index>(S + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(201 - S))));
    const Eigen::MatrixXd z = normal_matrix(rng, S, T);
    const Eigen::MatrixXd zt = center(z, temporal_mean(z));
    const auto d = decompose(zt);
    const double err = (zt - d.coeffs * d.phi.transpose()).norm() / zt.norm();
    worst = std::max(worst, err);
    require(o, err < 1e-10, "reconstruction error " + fmt(err) + " at " + std::to_string(S) + "x" + std::to_string(T));
    const auto diag = verify_coefficient_moments(d);
    require(o, diag.ok(), "moment diagnostics failed at " + std::to_string(S) + "x" + std::to_string(T));
  }
  if (o.pass) o.detail = "20 matrices, worst relative error " + fmt(worst) + ", diagnostics ok";
  return o;
}

Outcome ridge_and_gcv() {
  Outcome o;
  Rng rng(202);
  double worst_res = 0.0, worst_gcv = 0.0;
  int gcv_cases = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = static_cast<Eigen::Index>(10 + rng.below(71));
    const auto N = static_cast<Eigen::Index>(2 + rng.below(static_cast<std::uint64_t>(n - 2)));
    const double alpha = std::pow(10.0, rng.uniform(-6.0, 2.0));
    const Eigen::MatrixXd h = normal_matrix(rng, n, N);
    const Eigen::VectorXd y = normal_matrix(rng, n, 1);
    const Eigen::VectorXd beta = fit_ridge(h, y, alpha);
    const Eigen::MatrixXd g = h.transpose() * h + alpha * Eigen::MatrixXd::Identity(N, N);
    const Eigen::VectorXd rhs = h.transpose() * y;
    const double res = (g * beta - rhs).norm() / rhs.norm();
    worst_res = std::max(worst_res, res);
    require(o, res < 1e-8, "normal-equation residual " + fmt(res));
    if (n > 50) continue;
    // Brute force from the explicit hat matrix.
    const Eigen::MatrixXd a = h * g.ldlt().solve(h.transpose());
    const Eigen::VectorXd r = y - a * y;
    const double tr = static_cast<double>(n) - a.trace();
    const double brute = static_cast<double>(n) * r.squaredNorm() / (tr * tr);
    const double rel = std::abs(gcv_score(h, y, alpha) - brute) / brute;
    worst_gcv = std::max(worst_gcv, rel);
    ++gcv_cases;
    require(o, rel < 1e-9, "GCV relative error " + fmt(rel) + " at n=" + std::to_string(n));
  }
  if (o.pass)
    o.detail = "50 fits, worst residual " + fmt(worst_res) + "; " + std::to_string(gcv_cases) +
               " GCV checks, worst relative error " + fmt(worst_gcv);
  return o;
}

// Monte-Carlo study of one scenario: model variance over replicates against
// the averaged estimators.
struct McResult {
  Eigen::VectorXd mc_var;
  Eigen::VectorXd br;
  Eigen::VectorXd s2;
  double noise = 0.0;
  double true_noise = 0.0;
};

McResult variance_monte_carlo(bool heteroskedastic) {
  constexpr int n = 200, d = 5, P = 10, replicates = 1000, estimator_replicates = 200;
  Rng rng(7);
  Eigen::MatrixXd x(n, d), xp(P, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  // Interior probes, half on each side of x1 = 0.
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < d; ++j) xp(i, j) = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < P; ++i) xp(i, 0) = (i < P / 2 ? -1.0 : 1.0) * std::abs(xp(i, 0));
  const auto f = [](const Eigen::RowVectorXd& v) {
    return std::sin(2 * v(0)) + v(1) * v(2) + 0.5 * std::cos(3 * v(3)) + 0.3 * v(4);
  };
  const auto sd = [&](const Eigen::RowVectorXd& v) { return heteroskedastic && v(0) < 0 ? 0.5 : 1.0; };

  McResult out;
  out.br = Eigen::VectorXd::Zero(P);
  out.s2 = Eigen::VectorXd::Zero(P);
  for (int i = 0; i < n; ++i) out.true_noise += sd(x.row(i)) * sd(x.row(i)) / n;
  Eigen::MatrixXd pred(replicates, P);
  for (int r = 0; r < replicates; ++r) {
    Rng e(splitmix64(1000 + static_cast<std::uint64_t>(r)));
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = f(x.row(i)) + sd(x.row(i)) * e.normal();
    ElmConfig cfg;
    cfg.neurons = 60;
    cfg.seed = splitmix64(5000 + static_cast<std::uint64_t>(r));
    const auto ens = ElmEnsemble::fit(x, y, cfg);
    pred.row(r) = ens.predict(xp).transpose();
    if (r < estimator_replicates) {
      const auto v = ens.variances(xp);
      out.br += v.bias_reduced / estimator_replicates;
      out.s2 += v.heteroskedastic / estimator_replicates;
      out.noise += v.noise / estimator_replicates;
    }
  }
  out.mc_var.resize(P);
  for (int p = 0; p < P; ++p) {
    const double m = pred.col(p).mean();
    out.mc_var(p) = (pred.col(p).array() - m).square().sum() / (replicates - 1);
  }
  return out;
}

Outcome variance_estimators() {
  Outcome o;
  const auto within = [](double est, double truth) { return std::abs(est / truth - 1.0) <= 0.2; };
  const auto hom = variance_monte_carlo(false);
  require(o, within(hom.noise, hom.true_noise), "homoskedastic noise " + fmt(hom.noise) + " vs " + fmt(hom.true_noise));
  double br_lo = 1e9, br_hi = 0, s2_lo = 1e9, s2_hi = 0;
  for (Eigen::Index p = 0; p < hom.mc_var.size(); ++p) {
    const double rb = hom.br(p) / hom.mc_var(p), rs = hom.s2(p) / hom.mc_var(p);
    br_lo = std::min(br_lo, rb);
    br_hi = std::max(br_hi, rb);
    s2_lo = std::min(s2_lo, rs);
    s2_hi = std::max(s2_hi, rs);
    require(o, within(hom.br(p), hom.mc_var(p)), "BR/MC " + fmt(rb) + " at probe " + std::to_string(p));
    require(o, within(hom.s2(p), hom.mc_var(p)), "S2/MC " + fmt(rs) + " at probe " + std::to_string(p));
  }
  const auto het = variance_monte_carlo(true);
  require(o, within(het.noise, het.true_noise),
          "heteroskedastic noise " + fmt(het.noise) + " vs " + fmt(het.true_noise));
  double h_lo = 1e9, h_hi = 0;
  for (Eigen::Index p = 0; p < het.mc_var.size(); ++p) {
    const double rs = het.s2(p) / het.mc_var(p);
    h_lo = std::min(h_lo, rs);
    h_hi = std::max(h_hi, rs);
    require(o, within(het.s2(p), het.mc_var(p)), "heteroskedastic S2/MC " + fmt(rs) + " at probe " + std::to_string(p));
  }
  const double quiet = het.s2.head(5).mean(), noisy = het.s2.tail(5).mean();
  require(o, noisy > quiet, "S2 does not rank the noisy region above the quiet one");
  if (o.pass)
    o.detail = "noise " + fmt(hom.noise) + "/" + fmt(het.noise) + " (true " + fmt(hom.true_noise) + "/" +
               fmt(het.true_noise) + "); BR/MC [" + fmt(br_lo) + ", " + fmt(br_hi) + "], S2/MC [" + fmt(s2_lo) +
               ", " + fmt(s2_hi) + "], heteroskedastic S2/MC [" + fmt(h_lo) + ", " + fmt(h_hi) + "], S2 " +
               fmt(noisy) + " > " + fmt(quiet);
  return o;
}

Outcome formula_hand_values() {
  Outcome o;
  Eigen::MatrixXd var(1, 2), phi(1, 2);
  var << 1.0, 4.0;
  phi << 0.6, 0.8;
  const double a = weighted_component_sum(var, phi)(0, 0);
  const double b = prediction_variance(std::log(2.0), 1.0);
  require(o, std::abs(a - 2.92) <= 1e-12, "weighted sum " + fmt(a));
  require(o, std::abs(b - 3.0) <= 1e-12, "prediction variance " + fmt(b));
  if (o.pass) o.detail = "2.92 and 3.0 reproduced to 1e-12";
  return o;
}

Outcome delta_method() {
  Outcome o;
  const PowerCurve c;
  Rng rng(303);
  std::vector<double> z(1000000);
  for (auto& v : z) v = rng.normal();
  const auto mc = [&](double mu, double sd, double& mean, double& var) {
    CompensatedSum s, s2;
    for (double v : z) {
      const double p = c(mu + sd * v);
      s.add(p);
      s2.add(p * p);
    }
    const double N = static_cast<double>(z.size());
    mean = s.value() / N;
    var = s2.value() / N - mean * mean;
  };
  double worst_mean = 0.0, worst_var = 0.0;
  for (double mu : {c.phi2 - 2 * c.phi3, c.phi2 - c.phi3, c.phi2, c.phi2 + c.phi3, c.phi2 + 2 * c.phi3})
    for (double sd : {0.2, 0.4, 0.635}) {
      double m, v;
      mc(mu, sd, m, v);
      const auto d = power_moments(mu, sd * sd, c);
      const double rel = std::abs(d.mean - m) / m;
      worst_mean = std::max(worst_mean, rel);
      require(o, rel <= 0.02, "mean off by " + fmt(rel) + " at mu=" + fmt(mu) + ", sd=" + fmt(sd));
    }
  for (double mu : {c.phi2 - 2 * c.phi3, c.phi2, c.phi2 + 2 * c.phi3}) {
    double m, v;
    mc(mu, 0.635, m, v);
    const double rel = std::abs(power_moments(mu, 0.635 * 0.635, c).variance - v) / v;
    worst_var = std::max(worst_var, rel);
    require(o, rel <= 0.15, "variance off by " + fmt(rel) + " at mu=" + fmt(mu));
  }
  const double inflection = power_moments(c.phi2, 0.635 * 0.635, c).mean;
  require(o, std::abs(inflection - 1537.655) <= 1e-9, "E[P] at phi2 is " + fmt(inflection));
  if (o.pass)
    o.detail = "mean within " + fmt(100 * worst_mean) + "%, variance within " + fmt(100 * worst_var) +
               "%, E[P](phi2) = 1537.655";
  return o;
}

Outcome loglaw_exactness() {
  Outcome o;
  const TurbineConfig cfg;
  const double c = loglaw_factor(0.1, cfg);
  const auto m = loglaw(1.0, 1.0, 0.1, cfg);
  require(o, c == 1.5, "factor " + fmt(c));
  require(o, m.variance == 2.25, "variance factor " + fmt(m.variance));
  if (o.pass) o.detail = "factor 1.5, variance factor 2.25";
  return o;
}

Outcome characteristic_scales() {
  Outcome o;
  const std::pair<std::size_t, double> rows[] = {{166, 15.8}, {101, 20.2}, {84, 22.2}};
  std::string got;
  for (const auto& [n, want] : rows) {
    const double s = characteristic_scale(41285, n);
    require(o, std::abs(s - want) <= 0.05, "n=" + std::to_string(n) + " gives " + fmt(s));
    got += (got.empty() ? "" : ", ") + fmt(s);
  }
  if (o.pass) o.detail = got + " km";
  return o;
}

Outcome turbine_density() {
  Outcome o;
  const double areas[3] = {4351, 5315, 9953};
  const double counts[3] = {2734, 3311, 5985};
  std::string got;
  for (int i = 0; i < 3; ++i) {
    const auto w = static_cast<std::size_t>(std::round(std::sqrt(areas[i])));
    const auto h = static_cast<std::size_t>(std::round(areas[i] / static_cast<double>(w)));
    RestrictionMask mask;
    mask.geometry = {0.0, 0.0, 1000.0, h, w};
    mask.zones.assign(h * w, Zone::other);
    const auto n = place_turbines(mask).turbines.size();
    const double rel = std::abs(static_cast<double>(n) - counts[i]) / counts[i];
    require(o, rel < 0.05, std::to_string(n) + " turbines vs " + fmt(counts[i]));
    got += (got.empty() ? "" : ", ") + std::to_string(n);
  }
  RestrictionMask mask;
  mask.geometry = {0.0, 0.0, 1000.0, 1, 3};
  mask.zones = {Zone::restricted, Zone::forests, Zone::other};
  TurbineLayout layout;
  layout.turbines = {{{0, 0}, Zone::restricted}, {{1000, 0}, Zone::forests}, {{2000, 0}, Zone::other}};
  const std::vector<AnnualEnergy> e{{13600.0, 0.0}, {15800.0, 0.0}, {23700.0, 0.0}};
  const double total = summarize_potential(layout, e, mask).total.energy_twh;
  require(o, total == 53.1, "zone total " + fmt(total));
  if (o.pass) o.detail = "counts " + got + " (reference 2734, 3311, 5985); total 53.1 TWh";
  return o;
}

std::map<std::string, std::string> read_csv_row(const fs::path& path) {
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  const auto keys = split(header, ',');
  const auto vals = split(row, ',');
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < keys.size() && i < vals.size(); ++i) out[std::string(keys[i])] = std::string(vals[i]);
  return out;
}

Outcome end_to_end(const fs::path& work) {
  Outcome o;
  const auto dir = work / "end_to_end";
  fs::remove_all(dir);
  const auto cfg = parse_config("run.seed = 11\nsynth.stations = 125\nsynth.hours = 2000\n");
  for (auto s : {Stage::synth, Stage::clean, Stage::features, Stage::fit, Stage::benchmark}) run_stage(cfg, s, dir);
  const auto row = read_csv_row(dir / "benchmark" / "benchmark.csv");
  const double rmse = std::stod(row.at("rmse")), base = std::stod(row.at("baseline_rmse"));
  const double cov = std::stod(row.at("coverage_95"));
  require(o, row.at("train_stations") == "100" && row.at("test_stations") == "25",
          "split " + row.at("train_stations") + "/" + row.at("test_stations"));
  require(o, rmse < base, "RMSE " + fmt(rmse) + " not below baseline " + fmt(base));
  require(o, cov >= 0.88 && cov <= 0.99, "coverage " + fmt(cov));
  if (o.pass) o.detail = "RMSE " + fmt(rmse) + " < baseline " + fmt(base) + ", coverage " + fmt(cov);
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  const auto cfg = parse_config("run.seed = 23\n"
                                "synth.stations = 60\n"
                                "synth.hours = 300\n"
                                "model.members = 8\n"
                                "predict.time_step = 12\n"
                                "predict.cell_step = 3\n");
  std::map<std::string, std::string> runs[2];
  const int threads[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const auto dir = work / ("threads_" + std::to_string(threads[i]));
    fs::remove_all(dir);
    set_thread_count(threads[i]);
    for (auto s : {Stage::synth, Stage::clean, Stage::features, Stage::fit, Stage::predict, Stage::power, Stage::site,
                   Stage::benchmark})
      run_stage(cfg, s, dir);
    runs[i] = snapshot(dir);
  }
  set_thread_count(1);
  require(o, runs[0].size() == runs[1].size(), "file sets differ");
  std::size_t bytes = 0;
  for (const auto& [name, content] : runs[0]) {
    const auto it = runs[1].find(name);
    require(o, it != runs[1].end() && it->second == content, name + " differs");
    bytes += content.size();
  }
  if (o.pass) o.detail = std::to_string(runs[0].size()) + " files (" + std::to_string(bytes) + " bytes) identical at 1 and 8 threads";
  return o;
}

Outcome curve_round_trip() {
  Outcome o;
  double worst = 0.0;
  for (const PowerCurve truth : {PowerCurve{}, PowerCurve{1000.0, 10.0, 2.0}, PowerCurve{2300.0, 7.2, 0.9}}) {
    std::vector<CurvePoint> pts;
    for (double v = 0.0; v <= 25.0; v += 0.5) pts.push_back({v, truth(v)});
    const auto fit = fit_power_curve(pts).curve;
    for (auto [got, want] : {std::pair{fit.phi1, truth.phi1}, {fit.phi2, truth.phi2}, {fit.phi3, truth.phi3}}) {
      const double rel = std::abs(got - want) / want;
      worst = std::max(worst, rel);
      require(o, rel <= 1e-4, "parameter " + fmt(got) + " vs " + fmt(want));
    }
  }
  if (o.pass) o.detail = "3 curves, worst relative error " + fmt(worst);
  return o;
}

} // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stwind_acceptance";
  fs::create_directories(work);

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"EOF exactness", eof_exactness},
      {"ridge residual and GCV brute force", ridge_and_gcv},
      {"variance estimators against Monte Carlo", variance_estimators},
      {"component-sum and prediction-variance hand values", formula_hand_values},
      {"delta-method power moments", delta_method},
      {"log-law exactness", loglaw_exactness},
      {"characteristic network scales", characteristic_scales},
      {"turbine density and potential totals", turbine_density},
      {"end-to-end synthetic benchmark", [&] { return end_to_end(work); }},
      {"determinism across thread counts", [&] { return determinism(work); }},
      {"power-curve round trip", curve_round_trip},
  };

  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const Error& e) {
      o = {false, std::string(kind_name(e.kind())) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
