#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "spice/common.hpp"

namespace spice {

/// Deterministic random stream. Each noise term of a structural model owns
/// its own Rng derived from (seed, term-tag), so mutual independence of the
/// noise terms is structural rather than an artifact of draw order.
///
/// Samplers are implemented directly on top of the raw 64-bit stream
/// (uniform bits -> inverse CDF / Box-Muller) so that identical seeds give
/// bit-identical draws independent of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view tag) : engine_(derive_seed(seed, tag)) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the paired variate is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // 1-u in (0, 1] keeps the log argument positive.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double gaussian(double loc, double scale) { return loc + scale * gaussian(); }

  /// Inverse-CDF exponential draw so a single uniform stream supports
  /// pathwise (reparameterized) derivatives.
  double exponential(double rate) {
    return -std::log(1.0 - uniform()) / rate;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Modulo bias is negligible for the n used here (dataset sizes), but
    // rejection keeps draws exact.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace spice
