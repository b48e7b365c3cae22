#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "spice/dataset.hpp"
#include "spice/estimate.hpp"
#include "spice/nnet.hpp"
#include "spice/noise_head.hpp"
#include "spice/scm.hpp"

namespace spice {

/// Known error mechanism p(W | U): a discrete column-stochastic matrix or
/// an additive-noise form W = A U + E with a parametric E density. SPICE-Net
/// needs only the E density; the A matrix is carried for completeness checks.
struct ErrorMechanism {
  enum class Kind { kDiscrete, kAdditive };
  Kind kind = Kind::kAdditive;
  NoiseDistribution e_density = NoiseDistribution::gaussian(0, 1);
  Eigen::MatrixXd a;  // optional; 0 x 0 when unspecified
  // Discrete mechanisms are handled by the discrete module; files carrying a
  // "matrix" key are routed there.
};

ErrorMechanism read_error_mechanism_json(const std::string& path);
void write_error_mechanism_json(const ErrorMechanism& mech,
                                const std::string& path);

/// The noise-injected generator of step 1. Five hidden layers of widths
/// 10, 15, 25, 15, 10 counting noise units: one standard Gaussian unit on
/// the input and on each of hidden layers 1-4, ReLU through hidden layer 4,
/// then linear; the pre-noise output has the proxy dimension and the
/// generator output adds an E draw to it, exactly.
struct GeneratorNet {
  NetSpec spec;
  ParamState state;
  NoiseHead head = NoiseHead::fixed(NoiseDistribution::gaussian(0, 1));
  int proxy_dim = 1;
  int treatment_dim = 1;
  TrainMeta meta;
  std::vector<double> epoch_losses;
  std::vector<double> head_scale_trace;  // per-epoch scale in learnable mode
};

GeneratorNet build_generator(int proxy_dim, const NoiseHead& head,
                             std::uint64_t seed, int treatment_dim = 1);

/// Trains the generator on standardized data by minimizing the empirical
/// energy loss over paired draws. Learnable heads receive pathwise
/// gradients; fixed heads stay untouched.
void train_generator(GeneratorNet& gen, const Dataset& standardized,
                     const TrainConfig& cfg);

/// m pre-noise outputs at (x, y): draws approximating AU | (X, Y) = (x, y).
Eigen::MatrixXd sample_confounder(const GeneratorNet& gen,
                                  const Eigen::VectorXd& x, double y,
                                  Eigen::Index m, std::uint64_t seed);

/// Generator persistence via the nnet model format plus the head state.
void save_generator(const GeneratorNet& gen, const std::string& path);
GeneratorNet load_generator(const std::string& path);

/// Step-2 regression adjustment: one hidden ReLU layer, squared-error loss,
/// Adam over size-200 minibatches with the adaptive learning rate. Training
/// stops early, deterministically, once the rate has hit its floor and the
/// epoch loss has been flat for twenty epochs.
struct Step2Config {
  int hidden_width = 100;
  int batch_size = 200;  // minibatch_count is derived as ceil(n / batch_size)
  TrainConfig train;

  Step2Config() {
    train.epochs = 2000;
    train.initial_lr = 0.01;
  }
};

/// Fits m(z, x) ~ E[Y | Z = z, X = x] and returns the G-computation
/// estimate theta(x0) = mean_i m(z_i, x0) as an evaluable closure on the
/// scale of the inputs. z may have zero columns (plain regression of Y on X).
CausalEstimate regression_adjust(const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y,
                                 const std::vector<double>& grid,
                                 const Step2Config& cfg,
                                 TreatmentKind kind = TreatmentKind::kContinuous);

enum class Method { kSpiceNet, kSpiceNetApprox, kAdjU, kAdjW, kNoAdj };

std::string to_string(Method method);
Method method_from_string(const std::string& s);

struct EstimateConfig {
  TrainConfig generator;  // step-1 defaults: 4000 epochs, 10 minibatches, lr 1e-3
  Step2Config step2;
  int adjust_samples = 1;  // AU draws averaged per observation in step 2
  std::uint64_t seed = 0;

  EstimateConfig() {
    generator.epochs = 4000;
    generator.minibatch_count = 10;
    generator.initial_lr = 1e-3;
    // The energy loss fluctuates by ~1/sqrt(n) per epoch under fresh noise
    // draws; plateau detection on raw epoch losses would fire immediately.
    generator.lr_window = 100;
  }
};

/// Extra diagnostics carried by estimate().
struct EstimateDiagnostics {
  double generator_final_loss = 0.0;  // heuristic fit score, not a guarantee
  std::vector<double> head_scale_trace;
  std::optional<NoiseHead> learned_head;  // Approx only
};

/// Dispatches the five estimators. Data enters raw; it is standardized
/// internally (binary treatments pass through) and the estimate is
/// destandardized before return. spice_net requires a fixed additive
/// mechanism, spice_net_approx only the E family, adj_u the hidden
/// confounder column.
CausalEstimate estimate(Method method, const Dataset& data,
                        const std::optional<ErrorMechanism>& mech,
                        const EstimateConfig& cfg,
                        EstimateDiagnostics* diagnostics = nullptr);

/// Table-7-style initial head for SPICE-Net-Approx: scale starts at the
/// empirical sd of standardized W (= 1).
NoiseHead approx_initial_head(NoiseFamily family, int proxy_dim);

struct AceResult {
  double value = 0.0;
  bool extrapolated = false;
};

/// Binary: theta(1) - theta(0). Continuous: mean central difference
/// (theta(X_i + h) - theta(X_i - h)) / (2 h) over the observed treatments.
AceResult ace(const CausalEstimate& est, const Dataset& data, double h);

/// Mean squared test error against the benchmark ground truth on the given
/// treatment values; squared ACE error for binary treatments.
double mse_eval(const CausalEstimate& est, BenchmarkId id,
                const std::vector<double>& test_x);

}  // namespace spice
