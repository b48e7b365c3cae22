#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "spice/dataset.hpp"

namespace spice {

struct Provenance {
  std::string method;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double value = 0.0;
  bool extrapolated = false;
};

/// An evaluable causal-function estimate: x on the treatment scale in,
/// outcome-scale value out. Evaluations outside the observed treatment hull
/// are flagged, never refused.
class CausalEstimate {
 public:
  CausalEstimate(std::function<double(double)> theta, TreatmentKind kind,
                 Provenance provenance,
                 double hull_lo = -std::numeric_limits<double>::infinity(),
                 double hull_hi = std::numeric_limits<double>::infinity())
      : theta_(std::move(theta)),
        kind_(kind),
        provenance_(std::move(provenance)),
        hull_lo_(hull_lo),
        hull_hi_(hull_hi) {}

  double operator()(double x) const { return theta_(x); }
  double evaluate(double x) const { return theta_(x); }

  EvalResult evaluate_checked(double x) const {
    return EvalResult{theta_(x), x < hull_lo_ || x > hull_hi_};
  }

  TreatmentKind treatment_kind() const { return kind_; }
  const Provenance& provenance() const { return provenance_; }
  double hull_lo() const { return hull_lo_; }
  double hull_hi() const { return hull_hi_; }

  /// Eagerly evaluated grid, kept for report output.
  void set_grid(std::vector<double> xs) {
    grid_x_ = std::move(xs);
    grid_values_.clear();
    grid_values_.reserve(grid_x_.size());
    for (double x : grid_x_) grid_values_.push_back(theta_(x));
  }
  const std::vector<double>& grid_x() const { return grid_x_; }
  const std::vector<double>& grid_values() const { return grid_values_; }

 private:
  std::function<double(double)> theta_;
  TreatmentKind kind_;
  Provenance provenance_;
  double hull_lo_;
  double hull_hi_;
  std::vector<double> grid_x_;
  std::vector<double> grid_values_;
};

/// Back-transforms an estimate fitted on standardized data:
/// theta(x) = sd_y * theta_std((x - mean_x) / sd_x) + mean_y.
/// Binary treatments carry identity x-stats, so only the outcome transform
/// applies. The treatment hull is mapped to the raw scale.
CausalEstimate destandardize_estimate(const CausalEstimate& est,
                                      const ColumnStats& x_stats,
                                      const ColumnStats& y_stats);

}  // namespace spice
