#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spice/dataset.hpp"
#include "spice/noise.hpp"
#include "spice/rng.hpp"

namespace spice {

enum class HeadMode { kFixed, kLearnable };

/// The E-sampling head added to the generator's pre-noise output. In fixed
/// mode it draws from the known error distribution and its parameters are
/// immutable. In learnable mode scale-like parameters are kept strictly
/// positive through a softplus reparameterization and samples are pathwise
/// differentiable in the parameters.
class NoiseHead {
 public:
  static NoiseHead fixed(const NoiseDistribution& dist);
  static NoiseHead learnable_gaussian(double init_loc, double init_scale);
  static NoiseHead learnable_exponential(double init_rate);
  static NoiseHead learnable_multivariate_gaussian(
      const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_covariance);

  NoiseFamily family() const { return family_; }
  HeadMode mode() const { return mode_; }
  int dimension() const { return dimension_; }

  struct SampleBatch {
    Eigen::MatrixXd e;    // rows x d draws added to the pre-noise output
    Eigen::MatrixXd raw;  // underlying z (Gaussian) or q = -log(1-v) draws
  };

  SampleBatch sample(Eigen::Index rows, Rng& rng) const;

  int param_count() const;
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(const Eigen::VectorXd& p);

  /// Pathwise gradient of the loss with respect to the unconstrained
  /// parameters, given d(loss)/d(e) and the raw draws of the batch.
  Eigen::VectorXd param_gradient(const Eigen::MatrixXd& grad_e,
                                 const SampleBatch& batch) const;

  /// Effective distribution parameters implied by the current state.
  double effective_loc() const;
  double effective_scale() const;  // univariate sd; mvn: sqrt(max cov diagonal)
  double effective_rate() const;
  Eigen::VectorXd effective_mean() const;
  Eigen::MatrixXd effective_covariance() const;

  /// The same head with parameters rescaled to standardized-W units
  /// (per-column division by sd of W). Gaussian: loc/sd, scale/sd;
  /// exponential: rate * sd; multivariate: D^-1 mean, D^-1 Sigma D^-1.
  NoiseHead rescaled_for_standardized_w(
      const std::vector<ColumnStats>& w_stats) const;

 private:
  NoiseHead() = default;
  void rebuild_fixed_cache();

  NoiseFamily family_ = NoiseFamily::kGaussian;
  HeadMode mode_ = HeadMode::kFixed;
  int dimension_ = 1;
  // Fixed mode: the distribution itself. Learnable mode: unconstrained
  // parameter vector. Gaussian: (loc, s) with scale = softplus(s).
  // Exponential: (r) with rate = softplus(r). Multivariate Gaussian:
  // (mean[d], then lower-triangular scale rows with softplus on the
  // diagonal entries).
  NoiseDistribution fixed_dist_ = NoiseDistribution::gaussian(0, 1);
  Eigen::MatrixXd fixed_chol_;  // lower factor for fixed mvn sampling
  Eigen::VectorXd params_;
};

double softplus(double x);
double softplus_inverse(double y);

}  // namespace spice
