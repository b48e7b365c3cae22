#include "spice/linear_gaussian.hpp"

#include <cmath>

#include "spice/common.hpp"

namespace spice {

void LinearScmParams::validate() const {
  if (!(var_nu > 0.0 && var_e > 0.0 && var_nx > 0.0 && var_ny > 0.0)) {
    throw ConfigError("linear SCM noise variances must be positive");
  }
}

PcScmSpec LinearScmParams::to_scm() const {
  validate();
  PcScmSpec spec;
  spec.p = spec.k = spec.d = 1;
  spec.noise_u = NoiseDistribution::gaussian(0, std::sqrt(var_nu));
  spec.noise_e = NoiseDistribution::gaussian(0, std::sqrt(var_e));
  spec.noise_x = NoiseDistribution::gaussian(0, std::sqrt(var_nx));
  spec.noise_y = NoiseDistribution::gaussian(0, std::sqrt(var_ny));
  const double uw = a_uw, ux = a_ux, uy = a_uy, xy = a_xy;
  spec.f_w = [uw](const Eigen::VectorXd& u, const Eigen::VectorXd& e) {
    return Eigen::VectorXd::Constant(1, uw * u[0] + e[0]);
  };
  spec.f_x = [ux](const Eigen::VectorXd& u, const Eigen::VectorXd& n) {
    return Eigen::VectorXd::Constant(1, ux * u[0] + n[0]);
  };
  spec.f_y = [uy, xy](const Eigen::VectorXd& u, const Eigen::VectorXd& x,
                      double n) { return uy * u[0] + xy * x[0] + n; };
  spec.name = "linear_gaussian";
  return spec;
}

SecondMoments population_covariance(const LinearScmParams& p) {
  p.validate();
  SecondMoments m;
  const double s_uy_total = (p.a_uy + p.a_xy * p.a_ux) * p.var_nu;
  m.s_uu = p.var_nu;
  m.s_ux = p.a_ux * p.var_nu;
  m.s_uy = s_uy_total;
  m.s_ww = p.a_uw * p.a_uw * p.var_nu + p.var_e;
  m.s_wx = p.a_uw * p.a_ux * p.var_nu;
  m.s_wy = s_uy_total * p.a_uw;
  m.s_xx = p.a_ux * p.a_ux * p.var_nu + p.var_nx;
  m.s_xy = s_uy_total * p.a_ux + p.a_xy * p.var_nx;
  return m;
}

SecondMoments empirical_moments(const Dataset& data) {
  if (data.d() != 1 || data.p() != 1) {
    throw DataError("empirical moments require univariate W and X");
  }
  const double n = static_cast<double>(data.n());
  if (n < 2) throw DataError("need at least two rows for moments");
  const Eigen::ArrayXd w = data.w.col(0).array() - data.w.col(0).mean();
  const Eigen::ArrayXd x = data.x.col(0).array() - data.x.col(0).mean();
  const Eigen::ArrayXd y = data.y.array() - data.y.mean();
  const double denom = n - 1.0;
  SecondMoments m;
  m.s_xx = (x * x).sum() / denom;
  m.s_ww = (w * w).sum() / denom;
  m.s_wx = (w * x).sum() / denom;
  m.s_wy = (w * y).sum() / denom;
  m.s_xy = (x * y).sum() / denom;
  if (data.k() == 1) {
    const Eigen::ArrayXd u = data.u.col(0).array() - data.u.col(0).mean();
    m.s_uu = (u * u).sum() / denom;
    m.s_ux = (u * x).sum() / denom;
    m.s_uy = (u * y).sum() / denom;
  }
  return m;
}

double ols_coeff_adjust_u(const SecondMoments& m) {
  if (!m.s_uu || !m.s_ux || !m.s_uy) {
    throw ConfigError("adjust-U regression requires the U moments");
  }
  const double denom = m.s_xx * *m.s_uu - *m.s_ux * *m.s_ux;
  if (!(denom > 0.0)) {
    throw NumericError("collinear (X, U) design: singular denominator");
  }
  return (m.s_xy * *m.s_uu - *m.s_uy * *m.s_ux) / denom;
}

double ols_coeff_adjust_w(const SecondMoments& m) {
  const double denom = m.s_xx * m.s_ww - m.s_wx * m.s_wx;
  if (!(denom > 0.0)) {
    throw NumericError("collinear (X, W) design: singular denominator");
  }
  return (m.s_xy * m.s_ww - m.s_wy * m.s_wx) / denom;
}

double bias_term(const LinearScmParams& p) {
  p.validate();
  const double denom = p.a_ux * p.a_ux +
                       p.a_uw * p.a_uw * p.var_nx / p.var_e +
                       p.var_nx / p.var_nu;
  return p.a_ux * p.a_uy / denom;
}

double corrected_estimator(const SecondMoments& m, double var_e) {
  if (!(var_e >= 0.0)) throw ConfigError("sigma_E^2 must be nonnegative");
  const double uu_scaled = m.s_ww - var_e;  // = a_uw^2 s_uu at population level
  if (!(uu_scaled > 0.0)) {
    throw NumericError(
        "invalid mechanism: measurement error variance is at least Var(W)");
  }
  const double denom = m.s_xx - m.s_wx * m.s_wx / uu_scaled;
  if (!(denom > 1e-8 * m.s_xx)) {
    throw NumericError("unidentified at tolerance: corrected denominator "
                       "vanishes relative to Var(X)");
  }
  return (m.s_xy - m.s_wy * m.s_wx / uu_scaled) / denom;
}

}  // namespace spice
