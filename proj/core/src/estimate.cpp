#include "spice/estimate.hpp"

namespace spice {

CausalEstimate destandardize_estimate(const CausalEstimate& est,
                                      const ColumnStats& x_stats,
                                      const ColumnStats& y_stats) {
  auto theta = [inner = est, x_stats, y_stats](double x) {
    return y_stats.sd * inner.evaluate((x - x_stats.mean) / x_stats.sd) +
           y_stats.mean;
  };
  const double lo = x_stats.mean + x_stats.sd * est.hull_lo();
  const double hi = x_stats.mean + x_stats.sd * est.hull_hi();
  CausalEstimate out(std::move(theta), est.treatment_kind(), est.provenance(),
                     lo, hi);
  if (!est.grid_x().empty()) {
    std::vector<double> raw_grid;
    raw_grid.reserve(est.grid_x().size());
    for (double x_std : est.grid_x()) {
      raw_grid.push_back(x_stats.mean + x_stats.sd * x_std);
    }
    out.set_grid(std::move(raw_grid));
  }
  return out;
}

}  // namespace spice
