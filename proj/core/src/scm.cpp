#include "spice/scm.hpp"

#include <cmath>

#include "spice/common.hpp"
#include "spice/rng.hpp"

namespace spice {

std::string to_string(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::kAGaussian:
      return "A_gaussian";
    case BenchmarkId::kBBinary:
      return "B_binary";
    case BenchmarkId::kCExponential:
      return "C_exponential";
    case BenchmarkId::kDHighdim:
      return "D_highdim";
  }
  return "unknown";
}

BenchmarkId benchmark_id_from_string(const std::string& s) {
  if (s == "A_gaussian" || s == "A") return BenchmarkId::kAGaussian;
  if (s == "B_binary" || s == "B") return BenchmarkId::kBBinary;
  if (s == "C_exponential" || s == "C") return BenchmarkId::kCExponential;
  if (s == "D_highdim" || s == "D") return BenchmarkId::kDHighdim;
  throw ConfigError("unknown benchmark id: " + s);
}

namespace {

Eigen::VectorXd scalar_vec(double v) { return Eigen::VectorXd::Constant(1, v); }

PcScmSpec make_a_or_b(bool binary) {
  PcScmSpec spec;
  spec.p = spec.k = spec.d = 1;
  spec.noise_u = NoiseDistribution::gaussian(0, 1);
  spec.noise_e = NoiseDistribution::gaussian(0, 1);
  spec.noise_x = NoiseDistribution::gaussian(0, 1);
  spec.noise_y = NoiseDistribution::gaussian(0, 1);
  spec.f_w = [](const Eigen::VectorXd& u, const Eigen::VectorXd& e) {
    return scalar_vec(u[0] + e[0]);
  };
  if (binary) {
    spec.f_x = [](const Eigen::VectorXd& u, const Eigen::VectorXd& n) {
      return scalar_vec(u[0] + n[0] > 0.0 ? 1.0 : 0.0);
    };
    spec.treatment_kind = TreatmentKind::kBinary;
    spec.name = "B_binary";
  } else {
    spec.f_x = [](const Eigen::VectorXd& u, const Eigen::VectorXd& n) {
      return scalar_vec(u[0] + n[0]);
    };
    spec.treatment_kind = TreatmentKind::kContinuous;
    spec.name = "A_gaussian";
  }
  spec.f_y = [](const Eigen::VectorXd& u, const Eigen::VectorXd& x, double n) {
    return u[0] + x[0] + n;
  };
  return spec;
}

PcScmSpec make_c() {
  PcScmSpec spec;
  spec.p = spec.k = spec.d = 1;
  spec.noise_u = NoiseDistribution::exponential(1);
  spec.noise_e = NoiseDistribution::exponential(1);
  spec.noise_x = NoiseDistribution::exponential(1);
  spec.noise_y = NoiseDistribution::exponential(1);
  spec.f_w = [](const Eigen::VectorXd& u, const Eigen::VectorXd& e) {
    return scalar_vec(u[0] + e[0]);
  };
  spec.f_x = [](const Eigen::VectorXd& u, const Eigen::VectorXd& n) {
    return scalar_vec(u[0] + n[0]);
  };
  spec.f_y = [](const Eigen::VectorXd& u, const Eigen::VectorXd& x, double n) {
    return x[0] * x[0] + u[0] * x[0] + n;
  };
  spec.name = "C_exponential";
  return spec;
}

PcScmSpec make_d() {
  PcScmSpec spec;
  spec.p = 1;
  spec.k = 2;
  spec.d = 3;
  spec.noise_u = NoiseDistribution::multivariate_gaussian(
      Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd sigma_e(3, 3);
  sigma_e << 2.0, -0.3, 0.5,  //
      -0.3, 1.5, 0.4,         //
      0.5, 0.4, 1.8;
  spec.noise_e = NoiseDistribution::multivariate_gaussian(
      Eigen::VectorXd::Zero(3), sigma_e);
  spec.noise_x = NoiseDistribution::gaussian(0, 1);
  spec.noise_y = NoiseDistribution::gaussian(0, 1);
  Eigen::MatrixXd a(3, 2);
  a << 1, 1,  //
      0, 1,   //
      1, 0;
  spec.f_w = [a](const Eigen::VectorXd& u, const Eigen::VectorXd& e) {
    return Eigen::VectorXd(a * u + e);
  };
  // B = [1, 1]^T acting as B^T u = u_1 + u_2.
  spec.f_x = [](const Eigen::VectorXd& u, const Eigen::VectorXd& n) {
    return scalar_vec(u.sum() + n[0]);
  };
  spec.f_y = [](const Eigen::VectorXd& u, const Eigen::VectorXd& x, double n) {
    return u.sum() + x[0] + n;
  };
  spec.name = "D_highdim";
  return spec;
}

}  // namespace

PcScmSpec benchmark_spec(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::kAGaussian:
      return make_a_or_b(false);
    case BenchmarkId::kBBinary:
      return make_a_or_b(true);
    case BenchmarkId::kCExponential:
      return make_c();
    case BenchmarkId::kDHighdim:
      return make_d();
  }
  throw ConfigError("unknown benchmark id");
}

Dataset sample_dataset(const PcScmSpec& spec, Eigen::Index n,
                       std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_dataset requires n >= 1");
  if (!spec.f_w || !spec.f_x || !spec.f_y) {
    throw ConfigError("structural maps f_W, f_X, f_Y must all be set");
  }
  Rng rng_u(seed, "noise_u");
  Rng rng_e(seed, "noise_e");
  Rng rng_x(seed, "noise_x");
  Rng rng_y(seed, "noise_y");

  Dataset data;
  data.w.resize(n, spec.d);
  data.x.resize(n, spec.p);
  data.y.resize(n);
  data.u.resize(n, spec.k);
  data.treatment_kind = spec.treatment_kind;
  data.seed = seed;
  data.source = spec.name;

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd u = spec.noise_u.sample(rng_u);
    const Eigen::VectorXd e = spec.noise_e.sample(rng_e);
    const Eigen::VectorXd n_x = spec.noise_x.sample(rng_x);
    const double n_y = spec.noise_y.sample(rng_y)[0];
    const Eigen::VectorXd w = spec.f_w(u, e);
    const Eigen::VectorXd x = spec.f_x(u, n_x);
    if (w.size() != spec.d || x.size() != spec.p || u.size() != spec.k) {
      throw ConfigError("structural map output width disagrees with dims");
    }
    data.u.row(i) = u;
    data.w.row(i) = w;
    data.x.row(i) = x;
    data.y(i) = spec.f_y(u, x, n_y);
  }
  return data;
}

double true_causal_function(BenchmarkId id, double x) {
  switch (id) {
    case BenchmarkId::kAGaussian:
    case BenchmarkId::kBBinary:
    case BenchmarkId::kDHighdim:
      return x;
    case BenchmarkId::kCExponential:
      return x * x + x + 1.0;
  }
  throw ConfigError("unknown benchmark id");
}

OracleResult interventional_oracle(const PcScmSpec& spec,
                                   const Eigen::VectorXd& x, Eigen::Index m,
                                   std::uint64_t seed) {
  if (m < 1) throw ConfigError("interventional_oracle requires m >= 1");
  Rng rng_u(seed, "noise_u");
  Rng rng_y(seed, "noise_y");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd u = spec.noise_u.sample(rng_u);
    const double n_y = spec.noise_y.sample(rng_y)[0];
    const double y = spec.f_y(u, x, n_y);
    sum += y;
    sum_sq += y * y;
  }
  OracleResult res;
  res.value = sum / static_cast<double>(m);
  if (m > 1) {
    const double var =
        (sum_sq - sum * sum / static_cast<double>(m)) / static_cast<double>(m - 1);
    res.standard_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(m));
  }
  return res;
}

OracleResult interventional_oracle(const PcScmSpec& spec, double x,
                                   Eigen::Index m, std::uint64_t seed) {
  return interventional_oracle(spec, Eigen::VectorXd::Constant(1, x), m, seed);
}

}  // namespace spice
