#include "spice/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spice/common.hpp"
#include "spice/rng.hpp"

namespace spice {

using nlohmann::json;

int NetSpec::total_noise_width() const {
  int total = 0;
  for (int w : noise_widths) total += w;
  return total;
}

void NetSpec::validate() const {
  if (layers.empty()) throw ConfigError("net spec has no layers");
  if (input_width < 1) throw ConfigError("net input width must be positive");
  if (noise_widths.size() != layers.size()) {
    throw ConfigError("noise layout must list one width per layer");
  }
  int expected_in = input_width;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (noise_widths[i] < 0) throw ConfigError("negative noise width");
    expected_in += noise_widths[i];
    if (layers[i].output_width < 1 || layers[i].input_width < 1) {
      throw ConfigError("layer " + std::to_string(i) + " has a zero width");
    }
    if (layers[i].input_width != expected_in) {
      throw ConfigError("layer " + std::to_string(i) +
                        " input width disagrees with the preceding layer");
    }
    expected_in = layers[i].output_width;
  }
  if (layers.back().activation != Activation::kLinear) {
    throw ConfigError("final activation must be linear");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (minibatch_count < 1) throw ConfigError("minibatch_count must be >= 1");
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (energy_power != 1.0) {
    throw ConfigError("only energy power beta = 1 is supported");
  }
  if (samples_per_obs != 2) {
    throw ConfigError("energy training uses paired draws (m = 2)");
  }
}

void ParamState::check_finite() const {
  for (size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].weight.allFinite() || !layers[i].bias.allFinite()) {
      throw TrainingDiverged(
          "non-finite parameters in layer " + std::to_string(i), -1);
    }
  }
}

ParamState he_init(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, "he_init");
  ParamState state;
  state.layers.resize(spec.layers.size());
  state.adam.resize(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const int in = spec.layers[i].input_width;
    const int out = spec.layers[i].output_width;
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    auto& layer = state.layers[i];
    layer.weight.resize(in, out);
    for (int r = 0; r < in; ++r) {
      for (int c = 0; c < out; ++c) layer.weight(r, c) = sd * rng.gaussian();
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    auto& adam = state.adam[i];
    adam.m_w = Eigen::MatrixXd::Zero(in, out);
    adam.v_w = Eigen::MatrixXd::Zero(in, out);
    adam.m_b = Eigen::VectorXd::Zero(out);
    adam.v_b = Eigen::VectorXd::Zero(out);
  }
  return state;
}

namespace {

Eigen::MatrixXd append_noise(const Eigen::MatrixXd& activations,
                             const Eigen::MatrixXd* noise, int noise_width,
                             size_t site) {
  if (noise_width == 0) return activations;
  if (noise == nullptr || noise->cols() != noise_width ||
      noise->rows() != activations.rows()) {
    throw ConfigError("noise width mismatch at injection site " +
                      std::to_string(site));
  }
  Eigen::MatrixXd joined(activations.rows(),
                         activations.cols() + noise_width);
  joined << activations, *noise;
  return joined;
}

}  // namespace

ForwardCache forward(const ParamState& state, const NetSpec& spec,
                     const Eigen::MatrixXd& input,
                     const std::vector<Eigen::MatrixXd>& noise) {
  if (input.cols() != spec.input_width) {
    throw ConfigError("input width mismatch");
  }
  if (!noise.empty() && noise.size() != spec.layers.size()) {
    throw ConfigError("noise must carry one matrix per layer");
  }
  ForwardCache cache;
  cache.inputs.resize(spec.layers.size());
  cache.preacts.resize(spec.layers.size());
  Eigen::MatrixXd current = input;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Eigen::MatrixXd* site_noise =
        noise.empty() ? nullptr : &noise[i];
    if (spec.noise_widths[i] > 0 && noise.empty()) {
      throw ConfigError("net expects noise at site " + std::to_string(i));
    }
    cache.inputs[i] = append_noise(current, site_noise, spec.noise_widths[i], i);
    cache.preacts[i] = (cache.inputs[i] * state.layers[i].weight).rowwise() +
                       state.layers[i].bias.transpose();
    if (spec.layers[i].activation == Activation::kRelu) {
      current = cache.preacts[i].cwiseMax(0.0);
    } else {
      current = cache.preacts[i];
    }
  }
  cache.output = current;
  return cache;
}

Eigen::VectorXd forward_one(const ParamState& state, const NetSpec& spec,
                            const Eigen::VectorXd& input,
                            const std::vector<Eigen::VectorXd>& noise) {
  std::vector<Eigen::MatrixXd> noise_rows;
  noise_rows.reserve(noise.size());
  for (const auto& v : noise) noise_rows.push_back(v.transpose());
  const auto cache = forward(state, spec, input.transpose(), noise_rows);
  return cache.output.row(0);
}

Gradients zero_gradients(const NetSpec& spec) {
  Gradients grads(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    grads[i].weight = Eigen::MatrixXd::Zero(spec.layers[i].input_width,
                                            spec.layers[i].output_width);
    grads[i].bias = Eigen::VectorXd::Zero(spec.layers[i].output_width);
  }
  return grads;
}

void backward(const ParamState& state, const NetSpec& spec,
              const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
              Gradients& grads) {
  Eigen::MatrixXd delta = output_grad;
  for (size_t idx = spec.layers.size(); idx-- > 0;) {
    if (spec.layers[idx].activation == Activation::kRelu) {
      delta = delta.cwiseProduct(
          (cache.preacts[idx].array() > 0.0).cast<double>().matrix());
    }
    grads[idx].weight.noalias() += cache.inputs[idx].transpose() * delta;
    grads[idx].bias.noalias() += delta.colwise().sum().transpose();
    if (idx > 0) {
      // Strip gradient columns belonging to appended noise units.
      const Eigen::MatrixXd full = delta * state.layers[idx].weight.transpose();
      delta = full.leftCols(spec.layers[idx - 1].output_width);
    }
  }
}

void adam_step(ParamState& state, const Gradients& grads,
               const TrainConfig& cfg) {
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < state.layers.size(); ++i) {
    auto& adam = state.adam[i];
    auto& layer = state.layers[i];
    const auto& g = grads[i];
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw TrainingDiverged("non-finite gradient in layer " + std::to_string(i),
                             -1);
    }
    adam.m_w = b1 * adam.m_w + (1.0 - b1) * g.weight;
    adam.v_w = b2 * adam.v_w + (1.0 - b2) * g.weight.cwiseProduct(g.weight);
    adam.m_b = b1 * adam.m_b + (1.0 - b1) * g.bias;
    adam.v_b = b2 * adam.v_b + (1.0 - b2) * g.bias.cwiseProduct(g.bias);
    layer.weight.array() -=
        state.lr * (adam.m_w.array() / corr1) /
        ((adam.v_w.array() / corr2).sqrt() + cfg.adam_epsilon);
    layer.bias.array() -=
        state.lr * (adam.m_b.array() / corr1) /
        ((adam.v_b.array() / corr2).sqrt() + cfg.adam_epsilon);
  }
}

double energy_loss(const Eigen::VectorXd& observed, const Eigen::VectorXd& s1,
                   const Eigen::VectorXd& s2) {
  if (observed.size() != s1.size() || s1.size() != s2.size()) {
    throw ConfigError("energy loss requires equal dimensions");
  }
  return 0.5 * ((observed - s1).norm() + (observed - s2).norm()) -
         0.5 * (s1 - s2).norm();
}

namespace {

// diff / ||diff|| with the convention 0 at coincident points.
inline Eigen::RowVectorXd unit_or_zero(const Eigen::RowVectorXd& diff) {
  const double norm = diff.norm();
  if (norm > 0.0) return diff / norm;
  return Eigen::RowVectorXd::Zero(diff.size());
}

}  // namespace

double energy_loss_batch(const Eigen::MatrixXd& observed,
                         const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                         Eigen::MatrixXd* grad_s1, Eigen::MatrixXd* grad_s2) {
  if (observed.rows() != s1.rows() || s1.rows() != s2.rows() ||
      observed.cols() != s1.cols() || s1.cols() != s2.cols()) {
    throw ConfigError("energy loss batch shapes disagree");
  }
  const Eigen::Index n = observed.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_s1) grad_s1->setZero(n, observed.cols());
  if (grad_s2) grad_s2->setZero(n, observed.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd d1 = s1.row(i) - observed.row(i);
    const Eigen::RowVectorXd d2 = s2.row(i) - observed.row(i);
    const Eigen::RowVectorXd d12 = s1.row(i) - s2.row(i);
    total += 0.5 * (d1.norm() + d2.norm()) - 0.5 * d12.norm();
    if (grad_s1) {
      grad_s1->row(i) = inv_n * (0.5 * unit_or_zero(d1) - 0.5 * unit_or_zero(d12));
    }
    if (grad_s2) {
      grad_s2->row(i) = inv_n * (0.5 * unit_or_zero(d2) + 0.5 * unit_or_zero(d12));
    }
  }
  return total * inv_n;
}

double AdaptiveLr::update(double epoch_loss, double current_lr) {
  window_sum_ += epoch_loss;
  if (++window_fill_ < window_) return current_lr;
  const double mean_loss = window_sum_ / static_cast<double>(window_);
  window_sum_ = 0.0;
  window_fill_ = 0;

  if (mean_loss < best_ - improve_tol_) {
    bad_streak_ = 0;
  } else {
    ++bad_streak_;
    if (bad_streak_ >= patience_) {
      current_lr = std::max(current_lr / divisor_, floor_);
      bad_streak_ = 0;
    }
  }
  best_ = std::min(best_, mean_loss);
  return current_lr;
}

std::vector<std::vector<Eigen::Index>> minibatch_indices(
    Eigen::Index n, int minibatch_count, std::uint64_t seed, int epoch) {
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(
        rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  const int batches = std::min<int>(minibatch_count, static_cast<int>(n));
  std::vector<std::vector<Eigen::Index>> out(static_cast<size_t>(batches));
  const Eigen::Index base = n / batches;
  Eigen::Index pos = 0;
  for (int b = 0; b < batches; ++b) {
    // The last batch absorbs the remainder.
    const Eigen::Index size = (b == batches - 1) ? n - pos : base;
    out[static_cast<size_t>(b)].assign(order.begin() + pos,
                                       order.begin() + pos + size);
    pos += size;
  }
  return out;
}

namespace {

json layer_to_json(const LayerSpec& layer) {
  return json{{"input_width", layer.input_width},
              {"output_width", layer.output_width},
              {"activation",
               layer.activation == Activation::kRelu ? "relu" : "linear"}};
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec layer;
  layer.input_width = j.at("input_width").get<int>();
  layer.output_width = j.at("output_width").get<int>();
  const auto act = j.at("activation").get<std::string>();
  if (act == "relu") {
    layer.activation = Activation::kRelu;
  } else if (act == "linear") {
    layer.activation = Activation::kLinear;
  } else {
    throw DataError("unknown activation: " + act);
  }
  return layer;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json flat = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

Eigen::MatrixXd matrix_from_json(const json& flat, Eigen::Index rows,
                                 Eigen::Index cols) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw DataError("weight array size disagrees with layer shape");
  }
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = flat[static_cast<size_t>(idx++)].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_model(const NetSpec& spec, const ParamState& state,
                const TrainMeta& meta, const std::string& path) {
  json layers = json::array();
  for (const auto& layer : spec.layers) layers.push_back(layer_to_json(layer));
  json weights = json::array();
  for (const auto& layer : state.layers) {
    weights.push_back(json{{"weight", matrix_to_json(layer.weight)},
                           {"bias", matrix_to_json(layer.bias)}});
  }
  json j{{"input_width", spec.input_width},
         {"layers", layers},
         {"noise_widths", spec.noise_widths},
         {"params", weights},
         {"meta",
          {{"epochs_run", meta.epochs_run},
           {"final_lr", meta.final_lr},
           {"final_loss", meta.final_loss},
           {"seed", meta.seed},
           {"adam_beta1", meta.adam_beta1},
           {"adam_beta2", meta.adam_beta2},
           {"adam_epsilon", meta.adam_epsilon},
           {"lr_improve_tol", meta.lr_improve_tol},
           {"lr_patience", meta.lr_patience},
           {"lr_divisor", meta.lr_divisor},
           {"lr_floor", meta.lr_floor},
           {"lr_window", meta.lr_window}}}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid model JSON " + path + ": " + e.what());
  }
  LoadedModel model;
  model.spec.input_width = j.at("input_width").get<int>();
  for (const auto& layer : j.at("layers")) {
    model.spec.layers.push_back(layer_from_json(layer));
  }
  model.spec.noise_widths = j.at("noise_widths").get<std::vector<int>>();
  model.spec.validate();
  const auto& params = j.at("params");
  for (size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& layer_spec = model.spec.layers[i];
    LayerParams layer;
    layer.weight = matrix_from_json(params.at(i).at("weight"),
                                    layer_spec.input_width,
                                    layer_spec.output_width);
    layer.bias = matrix_from_json(params.at(i).at("bias"),
                                  layer_spec.output_width, 1);
    model.state.layers.push_back(std::move(layer));
    AdamMoments adam;
    adam.m_w = Eigen::MatrixXd::Zero(layer_spec.input_width,
                                     layer_spec.output_width);
    adam.v_w = adam.m_w;
    adam.m_b = Eigen::VectorXd::Zero(layer_spec.output_width);
    adam.v_b = adam.m_b;
    model.state.adam.push_back(std::move(adam));
  }
  const auto& meta = j.at("meta");
  model.meta.epochs_run = meta.at("epochs_run").get<int>();
  model.meta.final_lr = meta.at("final_lr").get<double>();
  model.meta.final_loss = meta.at("final_loss").get<double>();
  model.meta.seed = meta.at("seed").get<std::uint64_t>();
  model.meta.adam_beta1 = meta.value("adam_beta1", 0.9);
  model.meta.adam_beta2 = meta.value("adam_beta2", 0.999);
  model.meta.adam_epsilon = meta.value("adam_epsilon", 1e-8);
  model.meta.lr_improve_tol = meta.value("lr_improve_tol", 1e-6);
  model.meta.lr_patience = meta.value("lr_patience", 2);
  model.meta.lr_divisor = meta.value("lr_divisor", 5.0);
  model.meta.lr_floor = meta.value("lr_floor", 1e-6);
  model.meta.lr_window = meta.value("lr_window", 1);
  model.state.lr = model.meta.final_lr;
  return model;
}

}  // namespace spice
