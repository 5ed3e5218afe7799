#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace stwind {

struct TurbineConfig {
  double h1 = 10.0;     // measurement height (m)
  double h2 = 100.0;    // hub height (m)
  double cutout = 25.0; // m/s
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// Log-law factor ln(h2/h0) / ln(h1/h0). Requires 0 < h0 < h1 <= h2.
double loglaw_factor(double h0, const TurbineConfig& cfg);
// (c mu_Z, c^2 sigma2_Z)
Moments loglaw(double mu_z, double sigma2_z, double h0, const TurbineConfig& cfg);

// P(v) = phi1 / (1 + exp((phi2 - v) / phi3))
struct PowerCurve {
  double phi1 = 3075.31; // kW
  double phi2 = 8.47;    // m/s
  double phi3 = 1.27;    // m/s

  double logistic(double v) const;
  double operator()(double v) const { return phi1 * logistic(v); }
};

struct CurveDerivatives {
  double p = 0.0;
  double dp = 0.0;
  double d2p = 0.0;
};

CurveDerivatives curve_derivatives(const PowerCurve& c, double v);

struct PowerMoments {
  double mean = 0.0;     // kW
  double variance = 0.0; // kW^2
  bool cutout = false;
  bool variance_clamped = false; // incoming sigma2_V was negative
};

// Second-order mean and first-order variance of P(V) for V with the given
// moments. The mean is clamped to [0, phi1].
PowerMoments power_moments(double mu_v, double sigma2_v, const PowerCurve& c);

// Zero output above the cut-out speed (strict).
PowerMoments apply_cutout(double mu_v, PowerMoments result, const TurbineConfig& cfg);

struct CurvePoint {
  double speed = 0.0;
  double power = 0.0;
};

struct CurveFitOptions {
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-10;
};

struct CurveFitResult {
  PowerCurve curve;
  double rss = 0.0;
  std::size_t iterations = 0;
};

// Gauss-Newton least squares for (phi1, phi2, phi3) with step halving.
CurveFitResult fit_power_curve(std::span<const CurvePoint> points, const CurveFitOptions& options = {});

// Datasheet CSV: speed_mps,power_kw
std::vector<CurvePoint> read_power_curve_csv(const std::filesystem::path& path);

} // namespace stwind
