#pragma once

#include <cstdint>
#include <optional>

#include "spice/dataset.hpp"
#include "spice/scm.hpp"

namespace spice {

/// Path coefficients and noise variances of the univariate linear Gaussian
/// model U <- N_U, W <- a_uw U + E, X <- a_ux U + N_X, Y <- a_uy U + a_xy X + N_Y.
struct LinearScmParams {
  double a_uw = 1.0;
  double a_ux = 1.0;
  double a_uy = 1.0;
  double a_xy = 1.0;
  double var_nu = 1.0;
  double var_e = 1.0;
  double var_nx = 1.0;
  double var_ny = 1.0;

  void validate() const;
  PcScmSpec to_scm() const;
};

/// Second moments of (U, W, X, Y). The U-moments are optional: empirical
/// moments from proxy-only data leave them unset.
struct SecondMoments {
  double s_xx = 0.0;
  double s_ww = 0.0;
  double s_wx = 0.0;
  double s_wy = 0.0;
  double s_xy = 0.0;
  std::optional<double> s_uu;
  std::optional<double> s_ux;
  std::optional<double> s_uy;
};

/// Population covariance entries implied by the parameters.
SecondMoments population_covariance(const LinearScmParams& params);

/// Unbiased (n-1) empirical second moments; U-moments filled when the
/// dataset carries the hidden confounder (k = 1 required).
SecondMoments empirical_moments(const Dataset& data);

/// OLS coefficient on X when regressing Y on (X, U); equals a_xy at
/// population moments.
double ols_coeff_adjust_u(const SecondMoments& m);

/// OLS coefficient on X when regressing Y on (X, W); biased by confounding.
double ols_coeff_adjust_w(const SecondMoments& m);

/// The bias of adjust-W in closed form:
/// a_ux a_uy / (a_ux^2 + a_uw^2 var_nx / var_e + var_nx / var_nu).
double bias_term(const LinearScmParams& params);

/// Measurement-error-corrected estimator: substitutes s_ww - var_e for the
/// unobservable a_uw^2 s_uu; equals a_xy at population moments.
double corrected_estimator(const SecondMoments& m, double var_e);

}  // namespace spice
