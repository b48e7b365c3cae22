#pragma once

#include <Eigen/Dense>
#include <string>

#include "spice/rng.hpp"

namespace spice {

enum class NoiseFamily { kGaussian, kExponential, kMultivariateGaussian };

std::string to_string(NoiseFamily family);

/// One noise term of a structural model: a univariate Gaussian or
/// exponential, or a multivariate Gaussian with a full covariance.
class NoiseDistribution {
 public:
  static NoiseDistribution gaussian(double loc, double scale);
  static NoiseDistribution exponential(double rate);
  static NoiseDistribution multivariate_gaussian(Eigen::VectorXd mean,
                                                 Eigen::MatrixXd covariance);

  NoiseFamily family() const { return family_; }
  int dimension() const { return dimension_; }
  double loc() const { return loc_; }
  double scale() const { return scale_; }
  double rate() const { return rate_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

  Eigen::VectorXd sample(Rng& rng) const;
  Eigen::VectorXd population_mean() const;

 private:
  NoiseDistribution() = default;

  NoiseFamily family_ = NoiseFamily::kGaussian;
  int dimension_ = 1;
  double loc_ = 0.0;
  double scale_ = 1.0;
  double rate_ = 1.0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of covariance_
};

}  // namespace spice
