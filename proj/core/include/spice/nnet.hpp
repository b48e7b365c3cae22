#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace spice {

enum class Activation { kRelu, kLinear };

struct LayerSpec {
  int input_width = 0;   // includes noise units appended to this layer's input
  int output_width = 0;
  Activation activation = Activation::kLinear;
};

/// Feed-forward network with optional noise units appended to layer inputs.
/// noise_widths[i] standard Gaussian units are appended to the input of
/// layer i (site 0 appends to the external input).
struct NetSpec {
  int input_width = 0;  // external input width, before site-0 noise
  std::vector<LayerSpec> layers;
  std::vector<int> noise_widths;

  int output_width() const { return layers.back().output_width; }
  int total_noise_width() const;
  /// Width compatibility across layers and a linear final activation.
  void validate() const;
};

struct LayerParams {
  Eigen::MatrixXd weight;  // input_width x output_width
  Eigen::VectorXd bias;
};

struct AdamMoments {
  Eigen::MatrixXd m_w, v_w;
  Eigen::VectorXd m_b, v_b;
};

/// Trainable state: weights, Adam accumulators, current learning rate.
struct ParamState {
  std::vector<LayerParams> layers;
  std::vector<AdamMoments> adam;
  long step = 0;
  double lr = 0.0;

  void check_finite() const;  // throws TrainingDiverged on NaN/Inf entries
};

struct TrainConfig {
  int epochs = 4000;
  int minibatch_count = 10;
  double initial_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lr_improve_tol = 1e-6;
  int lr_patience = 2;
  double lr_divisor = 5.0;
  double lr_floor = 1e-6;
  // Plateau detection granularity: epoch losses are averaged over windows
  // of this many epochs before the rule sees them. Stochastic objectives
  // (energy loss under fresh noise draws) need windows wide enough that
  // Monte-Carlo noise does not masquerade as a plateau.
  int lr_window = 1;
  std::uint64_t seed = 0;
  double energy_power = 1.0;  // beta; only 1 is supported
  int samples_per_obs = 2;    // m; paired draws for the energy loss

  void validate() const;
};

/// He-style initialization: weights ~ N(0, 2 / fan_in), zero biases.
/// Deterministic for a fixed seed.
ParamState he_init(const NetSpec& spec, std::uint64_t seed);

/// Cached activations of one batched forward pass (rows are samples).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   // per layer, with noise columns appended
  std::vector<Eigen::MatrixXd> preacts;  // per layer, before activation
  Eigen::MatrixXd output;
};

/// Batched forward pass. noise[i] must be (rows x noise_widths[i]) for every
/// site with a positive width; pass an empty vector when the net has none.
ForwardCache forward(const ParamState& state, const NetSpec& spec,
                     const Eigen::MatrixXd& input,
                     const std::vector<Eigen::MatrixXd>& noise = {});

/// Single-sample convenience wrapper.
Eigen::VectorXd forward_one(const ParamState& state, const NetSpec& spec,
                            const Eigen::VectorXd& input,
                            const std::vector<Eigen::VectorXd>& noise = {});

/// Parameter gradients in the same shape as the layers.
using Gradients = std::vector<LayerParams>;

Gradients zero_gradients(const NetSpec& spec);

/// Reverse-mode accumulation from d(loss)/d(output) through the cache.
/// Gradients are added into grads; noise columns absorb no gradient.
void backward(const ParamState& state, const NetSpec& spec,
              const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
              Gradients& grads);

/// One Adam update with bias correction; uses and mutates state.lr-agnostic
/// accumulators, stepping at the state's current learning rate.
void adam_step(ParamState& state, const Gradients& grads,
               const TrainConfig& cfg);

/// Empirical energy score with power one:
/// 0.5 (||obs - s1|| + ||obs - s2||) - 0.5 ||s1 - s2||.
double energy_loss(const Eigen::VectorXd& observed, const Eigen::VectorXd& s1,
                   const Eigen::VectorXd& s2);

/// Row-wise energy loss over a batch; returns the mean loss and writes the
/// per-sample gradients with respect to s1 and s2 (subgradient zero at
/// coincident points). Gradients carry the 1/rows batch-mean factor.
double energy_loss_batch(const Eigen::MatrixXd& observed,
                         const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                         Eigen::MatrixXd* grad_s1, Eigen::MatrixXd* grad_s2);

/// Plateau-triggered learning-rate decay: divide by lr_divisor whenever the
/// (windowed mean) epoch loss fails to improve by lr_improve_tol for
/// lr_patience consecutive windows; never increases and never drops below
/// lr_floor. With lr_window = 1 the rule acts on raw epoch losses.
class AdaptiveLr {
 public:
  explicit AdaptiveLr(const TrainConfig& cfg)
      : improve_tol_(cfg.lr_improve_tol),
        patience_(cfg.lr_patience),
        divisor_(cfg.lr_divisor),
        floor_(cfg.lr_floor),
        window_(cfg.lr_window < 1 ? 1 : cfg.lr_window) {}

  /// Feeds one epoch loss; returns the updated learning rate.
  double update(double epoch_loss, double current_lr);

 private:
  double improve_tol_;
  int patience_;
  double divisor_;
  double floor_;
  int window_;
  double window_sum_ = 0.0;
  int window_fill_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_streak_ = 0;
};

/// Epoch-seeded index shuffle split into minibatch_count batches; the last
/// batch absorbs the remainder.
std::vector<std::vector<Eigen::Index>> minibatch_indices(
    Eigen::Index n, int minibatch_count, std::uint64_t seed, int epoch);

struct TrainMeta {
  int epochs_run = 0;
  double final_lr = 0.0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  // Optimizer constants used, persisted for reproducibility.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lr_improve_tol = 1e-6;
  int lr_patience = 2;
  double lr_divisor = 5.0;
  double lr_floor = 1e-6;
  int lr_window = 1;

  void record_config(const TrainConfig& cfg) {
    seed = cfg.seed;
    adam_beta1 = cfg.adam_beta1;
    adam_beta2 = cfg.adam_beta2;
    adam_epsilon = cfg.adam_epsilon;
    lr_improve_tol = cfg.lr_improve_tol;
    lr_patience = cfg.lr_patience;
    lr_divisor = cfg.lr_divisor;
    lr_floor = cfg.lr_floor;
    lr_window = cfg.lr_window;
  }
};

/// Model persistence: JSON with the spec, noise layout, row-major weights
/// and training metadata.
void save_model(const NetSpec& spec, const ParamState& state,
                const TrainMeta& meta, const std::string& path);

struct LoadedModel {
  NetSpec spec;
  ParamState state;
  TrainMeta meta;
};

LoadedModel load_model(const std::string& path);

}  // namespace spice
