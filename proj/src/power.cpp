#include "stwind/power.hpp"

#include "stwind/error.hpp"
#include "stwind/text_io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace stwind {

namespace {

// 1 / (1 + exp(-x)) without overflow.
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

double loglaw_factor(double h0, const TurbineConfig& cfg) {
  if (!(h0 > 0) || !(h0 < cfg.h1) || !(cfg.h1 <= cfg.h2))
    fail(ErrorKind::geometry, "log-law needs 0 < h0 < h1 <= h2 (h0=" + format_double(h0) +
                                  ", h1=" + format_double(cfg.h1) + ", h2=" + format_double(cfg.h2) + ")");
  // Base 10 keeps decade ratios exact, e.g. (0.1, 10, 100) gives 3/2.
  return std::log10(cfg.h2 / h0) / std::log10(cfg.h1 / h0);
}

Moments loglaw(double mu_z, double sigma2_z, double h0, const TurbineConfig& cfg) {
  const double c = loglaw_factor(h0, cfg);
  return {c * mu_z, c * c * sigma2_z};
}

double PowerCurve::logistic(double v) const { return sigmoid((v - phi2) / phi3); }

CurveDerivatives curve_derivatives(const PowerCurve& c, double v) {
  const double s = c.logistic(v);
  const double q = sigmoid((c.phi2 - v) / c.phi3); // 1 - S
  return {c.phi1 * s, c.phi1 / c.phi3 * s * q, c.phi1 / (c.phi3 * c.phi3) * s * q * (1.0 - 2.0 * s)};
}

PowerMoments power_moments(double mu_v, double sigma2_v, const PowerCurve& c) {
  PowerMoments out;
  if (sigma2_v < 0) {
    sigma2_v = 0.0;
    out.variance_clamped = true;
  }
  const double s = c.logistic(mu_v);
  const double q = sigmoid((c.phi2 - mu_v) / c.phi3);
  const double mean = c.phi1 * s * (1.0 + q * (1.0 - 2.0 * s) * sigma2_v / (2.0 * c.phi3 * c.phi3));
  out.mean = std::clamp(mean, 0.0, c.phi1);
  const double g = c.phi1 / c.phi3 * s * q;
  out.variance = g * g * sigma2_v;
  return out;
}

PowerMoments apply_cutout(double mu_v, PowerMoments result, const TurbineConfig& cfg) {
  if (mu_v > cfg.cutout) {
    result.mean = 0.0;
    result.variance = 0.0;
    result.cutout = true;
  }
  return result;
}

namespace {

double rss_of(std::span<const CurvePoint> pts, const PowerCurve& c) {
  double r = 0.0;
  for (const auto& p : pts) {
    const double e = c(p.speed) - p.power;
    r += e * e;
  }
  return r;
}

// Speed at which the piecewise-linear datasheet first reaches `level`.
bool crossing(std::span<const CurvePoint> pts, double level, double& v) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (a.power < level && b.power >= level) {
      v = a.speed + (level - a.power) * (b.speed - a.speed) / (b.power - a.power);
      return true;
    }
  }
  return false;
}

} // namespace

CurveFitResult fit_power_curve(std::span<const CurvePoint> input, const CurveFitOptions& options) {
  std::vector<CurvePoint> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.speed < b.speed; });
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].speed == pts[i - 1].speed) fail(ErrorKind::fit, "power curve speeds must be distinct");
  if (pts.size() < 4) fail(ErrorKind::fit, "power curve fit needs at least 4 points");

  PowerCurve c;
  c.phi1 = std::max_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
             return a.power < b.power;
           })->power;
  if (!(c.phi1 > 0)) fail(ErrorKind::fit, "power curve has no positive output");
  if (!crossing(pts, 0.5 * c.phi1, c.phi2))
    fail(ErrorKind::fit, "power curve never rises through half of its maximum");
  double v10 = pts.front().speed;
  double v90 = pts.back().speed;
  crossing(pts, 0.1 * c.phi1, v10);
  crossing(pts, 0.9 * c.phi1, v90);
  c.phi3 = (v90 - v10) / 4.0;
  if (!(c.phi3 > 0)) c.phi3 = (pts.back().speed - pts.front().speed) / 8.0;

  const auto n = static_cast<Eigen::Index>(pts.size());
  double scale = 0.0;
  for (const auto& p : pts) scale += p.power * p.power;
  scale = std::max(scale, 1e-300);

  CurveFitResult result;
  double rss = rss_of(pts, c);
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    Eigen::MatrixXd j(n, 3);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = pts[static_cast<std::size_t>(i)].speed;
      const double s = c.logistic(v);
      const double q = sigmoid((c.phi2 - v) / c.phi3);
      j(i, 0) = s;
      j(i, 1) = -c.phi1 * s * q / c.phi3;
      j(i, 2) = -c.phi1 * s * q * (v - c.phi2) / (c.phi3 * c.phi3);
      r(i) = c.phi1 * s - pts[static_cast<std::size_t>(i)].power;
    }
    // Gradient of the RSS in parameter-relative units.
    const Eigen::Vector3d theta(c.phi1, c.phi2, c.phi3);
    const Eigen::VectorXd grad = (j.transpose() * r).cwiseProduct(theta.cwiseAbs().cwiseMax(1.0)) / scale;
    result.iterations = it;
    if (grad.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance || rss <= 1e-28 * scale) {
      result.curve = c;
      result.rss = rss;
      return result;
    }
    const Eigen::Vector3d step = j.colPivHouseholderQr().solve(-r);
    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      PowerCurve trial{c.phi1 + t * step(0), c.phi2 + t * step(1), c.phi3 + t * step(2)};
      if (!(trial.phi1 > 0) || !(trial.phi3 > 0)) continue;
      const double trial_rss = rss_of(pts, trial);
      if (trial_rss < rss) {
        c = trial;
        rss = trial_rss;
        improved = true;
        break;
      }
    }
    if (!improved) {
      // No descent left along the Gauss-Newton direction: stationary point.
      result.curve = c;
      result.rss = rss;
      return result;
    }
  }
  fail(ErrorKind::fit, "power curve fit did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (rss=" + format_double(rss) + ")");
}

std::vector<CurvePoint> read_power_curve_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "speed_mps,power_kw")
    fail(ErrorKind::schema, path.string() + ": expected header speed_mps,power_kw");
  std::vector<CurvePoint> pts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    const auto v = f.size() == 2 ? parse_double(f[0]) : std::nullopt;
    const auto p = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
    if (!v || !p) fail(ErrorKind::schema, path.string() + ":" + std::to_string(lineno) + ": bad row");
    pts.push_back({*v, *p});
  }
  return pts;
}

} // namespace stwind
