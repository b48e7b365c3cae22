#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spice {

enum class DensityFamily {
  kGaussian,
  kLaplace,
  kExponential,
  kGaussianMixture,
  kUniform,
};

/// A univariate density for numerical Fourier checks.
struct DensitySpec {
  DensityFamily family = DensityFamily::kGaussian;
  double loc = 0.0;
  double scale = 1.0;  // gaussian sigma / laplace scale
  double rate = 1.0;   // exponential
  double lo = -1.0;    // uniform bounds
  double hi = 1.0;
  std::vector<double> weights, locs, scales;  // gaussian mixture

  void validate() const;
  double pdf(double x) const;
  /// Window holding all but ~1e-13 of the mass, at least 12 scale units wide.
  std::pair<double, double> default_window() const;
  std::string family_name() const;
};

struct QuadratureConfig {
  int panels = 1 << 14;  // composite Simpson subintervals (even)
  std::optional<std::pair<double, double>> window;  // auto-sized when unset
  double coverage_tol = 1e-10;  // window must hold >= 1 - tol of the mass
};

/// Closed form |f_hat(t)| = (2 pi)^(-1/2) exp(-t^2 sigma^2 / 2) for a
/// univariate Gaussian; strictly positive and independent of the mean.
double gaussian_ft_magnitude(double t, double sigma);

struct FtResult {
  std::complex<double> value;
  double error_estimate = 0.0;  // Richardson estimate from half the panels
};

/// (2 pi)^(-1/2) integral f(x) exp(-i t x) dx by composite Simpson.
/// Throws NumericError when the window covers too little mass.
FtResult numeric_ft(const DensitySpec& density, double t,
                    const QuadratureConfig& cfg = {});

enum class ZeroScanVerdict { kNoZeroFound, kNearZero };

/// Grid evidence, not a proof. A true zero of a continuous transform shows
/// up as an interior local minimum of |f_hat|; each such dip is refined and
/// flagged near_zero when it drops below the floor. Plain tail decay at the
/// range edges (every light-tailed density decays below any floor
/// eventually) is not zero evidence and is never flagged.
struct ZeroScanResult {
  ZeroScanVerdict verdict = ZeroScanVerdict::kNoZeroFound;
  double min_magnitude = 0.0;  // raw grid minimum, boundaries included
  double argmin_t = 0.0;
  double near_zero_value = 0.0;  // refined interior minimum, when flagged
  double near_zero_t = 0.0;
  double floor = 0.0;
};

ZeroScanResult scan_for_zeros(const DensitySpec& density, double t_lo,
                              double t_hi, double step, double floor,
                              const QuadratureConfig& cfg = {});

/// Max over the w-grid of | integral p_E(w - g(u)) delta(u) du | on the
/// symmetric domain [-a, a] with the sign witness delta(u) = sign(u).
/// Near-zero values witness non-completeness of the mechanism w = g(u) + e.
struct WitnessResult {
  double max_abs = 0.0;
  double argmax_w = 0.0;
};

WitnessResult noninjective_witness(const std::function<double(double)>& g,
                                   const DensitySpec& density, double a,
                                   const std::vector<double>& w_grid,
                                   int panels = 1 << 14,
                                   const std::function<double(double)>& witness =
                                       nullptr);

enum class Divisibility { kKnownInfinitelyDivisible, kUnknown };

/// Static catalog of families with infinitely divisible laws (hence
/// non-vanishing characteristic functions). No proofs, a lookup only.
Divisibility infinite_divisibility_catalog(const std::string& family_name);

}  // namespace spice
