#include "spice/noise_head.hpp"

#include <cmath>

#include "spice/common.hpp"

namespace spice {

double softplus(double x) {
  // Overflow-safe log(1 + exp(x)).
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ConfigError("softplus inverse needs a positive value");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Lower-triangular entry count for dimension d.
inline int tri_count(int d) { return d * (d + 1) / 2; }

}  // namespace

NoiseHead NoiseHead::fixed(const NoiseDistribution& dist) {
  NoiseHead head;
  head.family_ = dist.family();
  head.mode_ = HeadMode::kFixed;
  head.dimension_ = dist.dimension();
  head.fixed_dist_ = dist;
  head.rebuild_fixed_cache();
  return head;
}

void NoiseHead::rebuild_fixed_cache() {
  if (family_ == NoiseFamily::kMultivariateGaussian) {
    Eigen::LLT<Eigen::MatrixXd> llt(fixed_dist_.covariance());
    if (llt.info() != Eigen::Success) {
      throw ConfigError("fixed head covariance is not positive definite");
    }
    fixed_chol_ = llt.matrixL();
  }
}

NoiseHead NoiseHead::learnable_gaussian(double init_loc, double init_scale) {
  NoiseHead head;
  head.family_ = NoiseFamily::kGaussian;
  head.mode_ = HeadMode::kLearnable;
  head.dimension_ = 1;
  head.params_.resize(2);
  head.params_ << init_loc, softplus_inverse(init_scale);
  return head;
}

NoiseHead NoiseHead::learnable_exponential(double init_rate) {
  NoiseHead head;
  head.family_ = NoiseFamily::kExponential;
  head.mode_ = HeadMode::kLearnable;
  head.dimension_ = 1;
  head.params_.resize(1);
  head.params_ << softplus_inverse(init_rate);
  return head;
}

NoiseHead NoiseHead::learnable_multivariate_gaussian(
    const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_covariance) {
  const int d = static_cast<int>(init_mean.size());
  Eigen::LLT<Eigen::MatrixXd> llt(init_covariance);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("initial covariance is not positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  NoiseHead head;
  head.family_ = NoiseFamily::kMultivariateGaussian;
  head.mode_ = HeadMode::kLearnable;
  head.dimension_ = d;
  head.params_.resize(d + tri_count(d));
  head.params_.head(d) = init_mean;
  int idx = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      head.params_[idx++] = (i == j) ? softplus_inverse(l(i, j)) : l(i, j);
    }
  }
  return head;
}

int NoiseHead::param_count() const {
  if (mode_ == HeadMode::kFixed) return 0;
  return static_cast<int>(params_.size());
}

void NoiseHead::set_params(const Eigen::VectorXd& p) {
  if (mode_ == HeadMode::kFixed) {
    throw ConfigError("fixed noise head parameters are immutable");
  }
  if (p.size() != params_.size()) {
    throw ConfigError("noise head parameter size mismatch");
  }
  params_ = p;
}

namespace {

Eigen::MatrixXd learnable_chol(const Eigen::VectorXd& params, int d) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  int idx = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = params[idx++];
      l(i, j) = (i == j) ? softplus(v) : v;
    }
  }
  return l;
}

}  // namespace

NoiseHead::SampleBatch NoiseHead::sample(Eigen::Index rows, Rng& rng) const {
  SampleBatch batch;
  batch.e.resize(rows, dimension_);
  batch.raw.resize(rows, dimension_);
  switch (family_) {
    case NoiseFamily::kGaussian: {
      const double loc =
          mode_ == HeadMode::kFixed ? fixed_dist_.loc() : params_[0];
      const double scale = mode_ == HeadMode::kFixed ? fixed_dist_.scale()
                                                     : softplus(params_[1]);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double z = rng.gaussian();
        batch.raw(i, 0) = z;
        batch.e(i, 0) = loc + scale * z;
      }
      return batch;
    }
    case NoiseFamily::kExponential: {
      const double rate = mode_ == HeadMode::kFixed ? fixed_dist_.rate()
                                                    : softplus(params_[0]);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double q = -std::log(1.0 - rng.uniform());
        batch.raw(i, 0) = q;
        batch.e(i, 0) = q / rate;
      }
      return batch;
    }
    case NoiseFamily::kMultivariateGaussian: {
      const Eigen::VectorXd mean = effective_mean();
      const Eigen::MatrixXd l = mode_ == HeadMode::kFixed
                                    ? fixed_chol_
                                    : learnable_chol(params_, dimension_);
      for (Eigen::Index i = 0; i < rows; ++i) {
        Eigen::VectorXd z(dimension_);
        for (int jj = 0; jj < dimension_; ++jj) z[jj] = rng.gaussian();
        batch.raw.row(i) = z;
        batch.e.row(i) = (mean + l * z).transpose();
      }
      return batch;
    }
  }
  throw ConfigError("unknown noise head family");
}

Eigen::VectorXd NoiseHead::param_gradient(const Eigen::MatrixXd& grad_e,
                                          const SampleBatch& batch) const {
  if (mode_ == HeadMode::kFixed) return Eigen::VectorXd();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  switch (family_) {
    case NoiseFamily::kGaussian: {
      // e = loc + softplus(s) z.
      grad[0] = grad_e.col(0).sum();
      grad[1] = sigmoid(params_[1]) *
                grad_e.col(0).cwiseProduct(batch.raw.col(0)).sum();
      return grad;
    }
    case NoiseFamily::kExponential: {
      // e = q / softplus(r), so de/dr = -q sigmoid(r) / rate^2.
      const double rate = softplus(params_[0]);
      grad[0] = -sigmoid(params_[0]) / (rate * rate) *
                grad_e.col(0).cwiseProduct(batch.raw.col(0)).sum();
      return grad;
    }
    case NoiseFamily::kMultivariateGaussian: {
      // e = mean + L z with softplus on the diagonal of L.
      const int d = dimension_;
      grad.head(d) = grad_e.colwise().sum().transpose();
      int idx = d;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
          double g = grad_e.col(i).cwiseProduct(batch.raw.col(j)).sum();
          if (i == j) g *= sigmoid(params_[idx]);
          grad[idx++] = g;
        }
      }
      return grad;
    }
  }
  throw ConfigError("unknown noise head family");
}

double NoiseHead::effective_loc() const {
  if (family_ != NoiseFamily::kGaussian) {
    throw ConfigError("loc is defined for the Gaussian head only");
  }
  return mode_ == HeadMode::kFixed ? fixed_dist_.loc() : params_[0];
}

double NoiseHead::effective_scale() const {
  switch (family_) {
    case NoiseFamily::kGaussian:
      return mode_ == HeadMode::kFixed ? fixed_dist_.scale()
                                       : softplus(params_[1]);
    case NoiseFamily::kExponential:
      return 1.0 / effective_rate();
    case NoiseFamily::kMultivariateGaussian:
      return std::sqrt(effective_covariance().diagonal().maxCoeff());
  }
  throw ConfigError("unknown noise head family");
}

double NoiseHead::effective_rate() const {
  if (family_ != NoiseFamily::kExponential) {
    throw ConfigError("rate is defined for the exponential head only");
  }
  return mode_ == HeadMode::kFixed ? fixed_dist_.rate() : softplus(params_[0]);
}

Eigen::VectorXd NoiseHead::effective_mean() const {
  if (family_ != NoiseFamily::kMultivariateGaussian) {
    throw ConfigError("mean vector is defined for the multivariate head only");
  }
  return mode_ == HeadMode::kFixed ? fixed_dist_.mean()
                                   : Eigen::VectorXd(params_.head(dimension_));
}

Eigen::MatrixXd NoiseHead::effective_covariance() const {
  if (family_ != NoiseFamily::kMultivariateGaussian) {
    throw ConfigError("covariance is defined for the multivariate head only");
  }
  if (mode_ == HeadMode::kFixed) return fixed_dist_.covariance();
  const Eigen::MatrixXd l = learnable_chol(params_, dimension_);
  return l * l.transpose();
}

NoiseHead NoiseHead::rescaled_for_standardized_w(
    const std::vector<ColumnStats>& w_stats) const {
  if (static_cast<int>(w_stats.size()) != dimension_) {
    throw ConfigError("standardization record disagrees with proxy dimension");
  }
  if (mode_ != HeadMode::kFixed) {
    throw ConfigError("rescaling applies to fixed heads only");
  }
  switch (family_) {
    case NoiseFamily::kGaussian: {
      const double sd = w_stats[0].sd;
      return fixed(NoiseDistribution::gaussian(fixed_dist_.loc() / sd,
                                               fixed_dist_.scale() / sd));
    }
    case NoiseFamily::kExponential: {
      const double sd = w_stats[0].sd;
      return fixed(NoiseDistribution::exponential(fixed_dist_.rate() * sd));
    }
    case NoiseFamily::kMultivariateGaussian: {
      Eigen::VectorXd inv_sd(dimension_);
      for (int i = 0; i < dimension_; ++i) {
        inv_sd[i] = 1.0 / w_stats[static_cast<size_t>(i)].sd;
      }
      const Eigen::MatrixXd scaled_cov =
          inv_sd.asDiagonal() * fixed_dist_.covariance() * inv_sd.asDiagonal();
      const Eigen::VectorXd scaled_mean =
          fixed_dist_.mean().cwiseProduct(inv_sd);
      return fixed(
          NoiseDistribution::multivariate_gaussian(scaled_mean, scaled_cov));
    }
  }
  throw ConfigError("unknown noise head family");
}

}  // namespace spice
