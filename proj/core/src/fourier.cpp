#include "spice/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "spice/common.hpp"

namespace spice {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Composite Simpson over [lo, hi] with an even number of subintervals.
template <typename F>
double simpson(const F& f, double lo, double hi, int panels) {
  const double h = (hi - lo) / panels;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) {
    sum += f(lo + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

}  // namespace

void DensitySpec::validate() const {
  switch (family) {
    case DensityFamily::kGaussian:
    case DensityFamily::kLaplace:
      if (!(scale > 0.0)) throw ConfigError("density scale must be positive");
      return;
    case DensityFamily::kExponential:
      if (!(rate > 0.0)) throw ConfigError("density rate must be positive");
      return;
    case DensityFamily::kUniform:
      if (!(hi > lo)) throw ConfigError("uniform bounds must satisfy lo < hi");
      return;
    case DensityFamily::kGaussianMixture: {
      if (weights.empty() || weights.size() != locs.size() ||
          weights.size() != scales.size()) {
        throw ConfigError("mixture weights, locs and scales must align");
      }
      double total = 0.0;
      for (size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !(scales[i] > 0.0)) {
          throw ConfigError("mixture weights must be >= 0 and scales > 0");
        }
        total += weights[i];
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("mixture weights must sum to 1");
      }
      return;
    }
  }
  throw ConfigError("unknown density family");
}

double DensitySpec::pdf(double x) const {
  switch (family) {
    case DensityFamily::kGaussian: {
      const double z = (x - loc) / scale;
      return kInvSqrt2Pi / scale * std::exp(-0.5 * z * z);
    }
    case DensityFamily::kLaplace:
      return 0.5 / scale * std::exp(-std::abs(x - loc) / scale);
    case DensityFamily::kExponential:
      return x < 0.0 ? 0.0 : rate * std::exp(-rate * x);
    case DensityFamily::kUniform:
      return (x < lo || x > hi) ? 0.0 : 1.0 / (hi - lo);
    case DensityFamily::kGaussianMixture: {
      double v = 0.0;
      for (size_t i = 0; i < weights.size(); ++i) {
        const double z = (x - locs[i]) / scales[i];
        v += weights[i] * kInvSqrt2Pi / scales[i] * std::exp(-0.5 * z * z);
      }
      return v;
    }
  }
  throw ConfigError("unknown density family");
}

std::pair<double, double> DensitySpec::default_window() const {
  // At least 12 scale units; heavier-tailed families get the analytic
  // quantile holding all but ~1e-13 of the mass so the coverage
  // precondition is met.
  switch (family) {
    case DensityFamily::kGaussian:
      return {loc - 12.0 * scale, loc + 12.0 * scale};
    case DensityFamily::kLaplace: {
      // Tail mass beyond c scale units is exp(-c); exp(-30) ~ 9e-14.
      const double c = std::max(12.0, 30.0) * scale;
      return {loc - c, loc + c};
    }
    case DensityFamily::kExponential: {
      const double c = std::max(12.0, 30.0) / rate;
      return {0.0, c};
    }
    case DensityFamily::kUniform:
      return {lo, hi};
    case DensityFamily::kGaussianMixture: {
      double w_lo = locs[0], w_hi = locs[0];
      for (size_t i = 0; i < locs.size(); ++i) {
        w_lo = std::min(w_lo, locs[i] - 12.0 * scales[i]);
        w_hi = std::max(w_hi, locs[i] + 12.0 * scales[i]);
      }
      return {w_lo, w_hi};
    }
  }
  throw ConfigError("unknown density family");
}

std::string DensitySpec::family_name() const {
  switch (family) {
    case DensityFamily::kGaussian:
      return "gaussian";
    case DensityFamily::kLaplace:
      return "laplace";
    case DensityFamily::kExponential:
      return "exponential";
    case DensityFamily::kUniform:
      return "uniform";
    case DensityFamily::kGaussianMixture:
      return "gaussian_mixture";
  }
  return "unknown";
}

double gaussian_ft_magnitude(double t, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  return kInvSqrt2Pi * std::exp(-0.5 * t * t * sigma * sigma);
}

namespace {

std::complex<double> ft_once(const DensitySpec& density, double t, double lo,
                             double hi, int panels) {
  const double re = simpson(
      [&](double x) { return density.pdf(x) * std::cos(t * x); }, lo, hi,
      panels);
  const double im = simpson(
      [&](double x) { return -density.pdf(x) * std::sin(t * x); }, lo, hi,
      panels);
  return kInvSqrt2Pi * std::complex<double>(re, im);
}

}  // namespace

namespace {

void check_coverage(const DensitySpec& density, double lo, double hi,
                    int panels, double coverage_tol) {
  const double mass =
      simpson([&](double x) { return density.pdf(x); }, lo, hi, panels);
  if (mass < 1.0 - coverage_tol) {
    throw NumericError("quadrature window covers only " +
                       std::to_string(mass) + " of the density mass");
  }
}

}  // namespace

FtResult numeric_ft(const DensitySpec& density, double t,
                    const QuadratureConfig& cfg) {
  density.validate();
  if (cfg.panels < 4 || cfg.panels % 2 != 0) {
    throw ConfigError("panel count must be even and at least 4");
  }
  const auto [lo, hi] = cfg.window ? *cfg.window : density.default_window();
  check_coverage(density, lo, hi, cfg.panels, cfg.coverage_tol);
  FtResult res;
  res.value = ft_once(density, t, lo, hi, cfg.panels);
  const std::complex<double> coarse =
      ft_once(density, t, lo, hi, cfg.panels / 2);
  // Simpson is O(h^4): the Richardson error estimate is |fine - coarse| / 15.
  res.error_estimate = std::abs(res.value - coarse) / 15.0;
  return res;
}

ZeroScanResult scan_for_zeros(const DensitySpec& density, double t_lo,
                              double t_hi, double step, double floor,
                              const QuadratureConfig& cfg) {
  if (!(step > 0.0)) throw ConfigError("scan step must be positive");
  if (!(t_hi >= t_lo)) throw ConfigError("scan range is empty");
  density.validate();
  if (cfg.panels < 4 || cfg.panels % 2 != 0) {
    throw ConfigError("panel count must be even and at least 4");
  }
  const auto [w_lo, w_hi] = cfg.window ? *cfg.window : density.default_window();
  check_coverage(density, w_lo, w_hi, cfg.panels, cfg.coverage_tol);
  auto magnitude = [&](double t) {
    return std::abs(ft_once(density, t, w_lo, w_hi, cfg.panels));
  };

  ZeroScanResult res;
  res.floor = floor;
  res.min_magnitude = std::numeric_limits<double>::infinity();

  std::vector<double> ts, mags;
  for (double t = t_lo; t <= t_hi + 0.5 * step; t += step) {
    ts.push_back(t);
    mags.push_back(magnitude(t));
    if (mags.back() < res.min_magnitude) {
      res.min_magnitude = mags.back();
      res.argmin_t = t;
    }
  }

  // Refine every interior dip; the best refined value decides the verdict.
  // Quadrature roundoff (~1e-16) produces spurious wiggles once the true
  // magnitude has decayed below the noise scale, so a dip only qualifies
  // when its shoulders sit above that scale and tower over the refined
  // minimum.
  constexpr double kNoiseGuard = 1e-12;
  double best = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (size_t i = 1; i + 1 < ts.size(); ++i) {
    if (!(mags[i] <= mags[i - 1] && mags[i] <= mags[i + 1])) continue;
    const double shoulder = std::min(mags[i - 1], mags[i + 1]);
    if (shoulder < kNoiseGuard) continue;
    double lo = ts[i - 1], hi = ts[i + 1];
    double local_t = ts[i], local_v = mags[i];
    for (int round = 0; round < 14; ++round) {
      const double h = (hi - lo) / 20.0;
      for (int jj = 0; jj <= 20; ++jj) {
        const double t = lo + h * jj;
        const double v = magnitude(t);
        if (v < local_v) {
          local_v = v;
          local_t = t;
        }
      }
      lo = std::max(t_lo, local_t - h);
      hi = std::min(t_hi, local_t + h);
      if (hi - lo < 1e-13) break;
    }
    if (local_v * 10.0 > shoulder) continue;  // shallow wiggle, not a root
    if (local_v < best) {
      best = local_v;
      best_t = local_t;
    }
  }
  if (best < floor) {
    res.verdict = ZeroScanVerdict::kNearZero;
    res.near_zero_value = best;
    res.near_zero_t = best_t;
  } else {
    res.verdict = ZeroScanVerdict::kNoZeroFound;
  }
  return res;
}

WitnessResult noninjective_witness(const std::function<double(double)>& g,
                                   const DensitySpec& density, double a,
                                   const std::vector<double>& w_grid,
                                   int panels,
                                   const std::function<double(double)>& witness) {
  if (!(a > 0.0)) throw ConfigError("domain half-width a must be positive");
  if (panels < 4 || panels % 2 != 0) {
    throw ConfigError("panel count must be even and at least 4");
  }
  density.validate();
  std::function<double(double)> delta = witness;
  if (!delta) {
    delta = [](double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); };
  }
  WitnessResult res;
  bool first = true;
  for (double w : w_grid) {
    const double value = simpson(
        [&](double u) { return density.pdf(w - g(u)) * delta(u); }, -a, a,
        panels);
    if (first || std::abs(value) > res.max_abs) {
      res.max_abs = std::abs(value);
      res.argmax_w = w;
      first = false;
    }
  }
  return res;
}

Divisibility infinite_divisibility_catalog(const std::string& family_name) {
  // Families with infinitely divisible laws; their characteristic functions
  // never vanish, which is the non-vanishing Fourier condition.
  static const std::set<std::string> known = {
      "gaussian",
      "normal",
      "multivariate_gaussian",
      "cauchy",
      "laplace",
      "gamma",
      "exponential",
      "chi_squared",
      "stable",
      "alpha_stable",
      "sub_gaussian_alpha_stable",
      "tempered_alpha_stable",
      "log_normal",
      "generalized_hyperbolic",
      "student_t",
      "normal_inverse_gaussian",
      "generalized_inverse_gaussian",
      "variance_gamma",
      "matern",
      "product_of_infinitely_divisible",
      "convolution_of_infinitely_divisible",
  };
  return known.count(family_name) != 0
             ? Divisibility::kKnownInfinitelyDivisible
             : Divisibility::kUnknown;
}

}  // namespace spice
