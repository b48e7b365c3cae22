#include "spice/noise.hpp"

#include <cmath>

#include "spice/common.hpp"

namespace spice {

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::kGaussian:
      return "gaussian";
    case NoiseFamily::kExponential:
      return "exponential";
    case NoiseFamily::kMultivariateGaussian:
      return "multivariate_gaussian";
  }
  return "unknown";
}

NoiseDistribution NoiseDistribution::gaussian(double loc, double scale) {
  if (!(scale > 0.0) || !std::isfinite(loc) || !std::isfinite(scale)) {
    throw ConfigError("gaussian noise requires finite loc and scale > 0");
  }
  NoiseDistribution d;
  d.family_ = NoiseFamily::kGaussian;
  d.dimension_ = 1;
  d.loc_ = loc;
  d.scale_ = scale;
  return d;
}

NoiseDistribution NoiseDistribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ConfigError("exponential noise requires rate > 0");
  }
  NoiseDistribution d;
  d.family_ = NoiseFamily::kExponential;
  d.dimension_ = 1;
  d.rate_ = rate;
  return d;
}

NoiseDistribution NoiseDistribution::multivariate_gaussian(
    Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  if (covariance.rows() != covariance.cols() ||
      covariance.rows() != mean.size() || mean.size() < 1) {
    throw ConfigError("multivariate gaussian dimensions are inconsistent");
  }
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw ConfigError("covariance matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("covariance matrix is not positive definite");
  }
  NoiseDistribution d;
  d.family_ = NoiseFamily::kMultivariateGaussian;
  d.dimension_ = static_cast<int>(mean.size());
  d.mean_ = std::move(mean);
  d.covariance_ = std::move(covariance);
  d.chol_ = llt.matrixL();
  return d;
}

Eigen::VectorXd NoiseDistribution::sample(Rng& rng) const {
  switch (family_) {
    case NoiseFamily::kGaussian:
      return Eigen::VectorXd::Constant(1, rng.gaussian(loc_, scale_));
    case NoiseFamily::kExponential:
      return Eigen::VectorXd::Constant(1, rng.exponential(rate_));
    case NoiseFamily::kMultivariateGaussian: {
      Eigen::VectorXd z(dimension_);
      for (int i = 0; i < dimension_; ++i) z[i] = rng.gaussian();
      return mean_ + chol_ * z;
    }
  }
  throw ConfigError("unknown noise family");
}

Eigen::VectorXd NoiseDistribution::population_mean() const {
  switch (family_) {
    case NoiseFamily::kGaussian:
      return Eigen::VectorXd::Constant(1, loc_);
    case NoiseFamily::kExponential:
      return Eigen::VectorXd::Constant(1, 1.0 / rate_);
    case NoiseFamily::kMultivariateGaussian:
      return mean_;
  }
  throw ConfigError("unknown noise family");
}

}  // namespace spice
