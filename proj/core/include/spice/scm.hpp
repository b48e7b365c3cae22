#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>

#include "spice/dataset.hpp"
#include "spice/noise.hpp"

namespace spice {

/// Structural maps. Each map sees only its parents plus its own noise term.
using ProxyMap = std::function<Eigen::VectorXd(const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& e)>;
using TreatmentMap = std::function<Eigen::VectorXd(const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& n_x)>;
using OutcomeMap = std::function<double(const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& x, double n_y)>;

/// A proximal-confounded structural causal model over (U, W, X, Y):
/// U <- N_U, W <- f_W(U, E), X <- f_X(U, N_X), Y <- f_Y(U, X, N_Y),
/// with mutually independent noise terms. Each noise term draws from its
/// own seeded stream, so independence is structural.
struct PcScmSpec {
  int p = 1;  // treatment dimension
  int k = 1;  // confounder dimension
  int d = 1;  // proxy dimension
  NoiseDistribution noise_u = NoiseDistribution::gaussian(0, 1);
  NoiseDistribution noise_e = NoiseDistribution::gaussian(0, 1);
  NoiseDistribution noise_x = NoiseDistribution::gaussian(0, 1);
  NoiseDistribution noise_y = NoiseDistribution::gaussian(0, 1);
  ProxyMap f_w;
  TreatmentMap f_x;
  OutcomeMap f_y;
  TreatmentKind treatment_kind = TreatmentKind::kContinuous;
  std::string name = "custom";
};

/// The four benchmark data sets.
enum class BenchmarkId { kAGaussian, kBBinary, kCExponential, kDHighdim };

std::string to_string(BenchmarkId id);
BenchmarkId benchmark_id_from_string(const std::string& s);

/// Returns the exact benchmark model for the given id.
PcScmSpec benchmark_spec(BenchmarkId id);

/// Ancestral sampling U -> (W, X) -> Y. Deterministic for fixed seed; the
/// hidden confounder column is always populated.
Dataset sample_dataset(const PcScmSpec& spec, Eigen::Index n, std::uint64_t seed);

/// Ground-truth causal function theta(x) of a benchmark.
double true_causal_function(BenchmarkId id, double x);

struct OracleResult {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of E[Y | do(X := x)]: draws (U, N_Y) m times and
/// averages f_Y(U, x, N_Y).
OracleResult interventional_oracle(const PcScmSpec& spec,
                                   const Eigen::VectorXd& x, Eigen::Index m,
                                   std::uint64_t seed);

/// Convenience overload for univariate treatments.
OracleResult interventional_oracle(const PcScmSpec& spec, double x,
                                   Eigen::Index m, std::uint64_t seed);

}  // namespace spice
