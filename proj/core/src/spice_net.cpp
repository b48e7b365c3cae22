#include "spice/spice_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "spice/common.hpp"
#include "spice/rng.hpp"

namespace spice {

using nlohmann::json;

std::string to_string(Method method) {
  switch (method) {
    case Method::kSpiceNet:
      return "spice_net";
    case Method::kSpiceNetApprox:
      return "spice_net_approx";
    case Method::kAdjU:
      return "adj_u";
    case Method::kAdjW:
      return "adj_w";
    case Method::kNoAdj:
      return "no_adj";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "spice_net") return Method::kSpiceNet;
  if (s == "spice_net_approx") return Method::kSpiceNetApprox;
  if (s == "adj_u") return Method::kAdjU;
  if (s == "adj_w") return Method::kAdjW;
  if (s == "no_adj") return Method::kNoAdj;
  throw ConfigError("unknown method: " + s);
}

ErrorMechanism read_error_mechanism_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mechanism file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid mechanism JSON " + path + ": " + e.what());
  }
  if (j.contains("matrix")) {
    throw ConfigError(
        "discrete mechanism file given where an additive mechanism is "
        "required: " +
        path);
  }
  ErrorMechanism mech;
  mech.kind = ErrorMechanism::Kind::kAdditive;
  const auto& e = j.at("e_density");
  const auto family = e.at("family").get<std::string>();
  if (family == "gaussian") {
    mech.e_density = NoiseDistribution::gaussian(e.value("loc", 0.0),
                                                 e.at("scale").get<double>());
  } else if (family == "exponential") {
    mech.e_density = NoiseDistribution::exponential(e.at("rate").get<double>());
  } else if (family == "multivariate_gaussian") {
    const auto mean = e.at("mean").get<std::vector<double>>();
    const auto rows = e.at("covariance").get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(mean.size());
    Eigen::VectorXd mu(d);
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i) {
      mu[i] = mean[static_cast<size_t>(i)];
      for (int jj = 0; jj < d; ++jj) {
        cov(i, jj) = rows.at(static_cast<size_t>(i)).at(static_cast<size_t>(jj));
      }
    }
    mech.e_density = NoiseDistribution::multivariate_gaussian(mu, cov);
  } else {
    throw ConfigError("unknown E family: " + family);
  }
  if (j.contains("a")) {
    const auto rows = j.at("a").get<std::vector<std::vector<double>>>();
    mech.a.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
    for (Eigen::Index i = 0; i < mech.a.rows(); ++i) {
      for (Eigen::Index jj = 0; jj < mech.a.cols(); ++jj) {
        mech.a(i, jj) = rows[static_cast<size_t>(i)][static_cast<size_t>(jj)];
      }
    }
  }
  return mech;
}

void write_error_mechanism_json(const ErrorMechanism& mech,
                                const std::string& path) {
  json e;
  switch (mech.e_density.family()) {
    case NoiseFamily::kGaussian:
      e = json{{"family", "gaussian"},
               {"loc", mech.e_density.loc()},
               {"scale", mech.e_density.scale()}};
      break;
    case NoiseFamily::kExponential:
      e = json{{"family", "exponential"}, {"rate", mech.e_density.rate()}};
      break;
    case NoiseFamily::kMultivariateGaussian: {
      json cov = json::array();
      for (Eigen::Index i = 0; i < mech.e_density.covariance().rows(); ++i) {
        json row = json::array();
        for (Eigen::Index jj = 0; jj < mech.e_density.covariance().cols(); ++jj) {
          row.push_back(mech.e_density.covariance()(i, jj));
        }
        cov.push_back(row);
      }
      std::vector<double> mean(mech.e_density.mean().data(),
                               mech.e_density.mean().data() +
                                   mech.e_density.mean().size());
      e = json{{"family", "multivariate_gaussian"},
               {"mean", mean},
               {"covariance", cov}};
      break;
    }
  }
  json j{{"e_density", e}};
  if (mech.a.size() > 0) {
    json a = json::array();
    for (Eigen::Index i = 0; i < mech.a.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index jj = 0; jj < mech.a.cols(); ++jj) {
        row.push_back(mech.a(i, jj));
      }
      a.push_back(row);
    }
    j["a"] = a;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

GeneratorNet build_generator(int proxy_dim, const NoiseHead& head,
                             std::uint64_t seed, int treatment_dim) {
  if (proxy_dim < 1) throw ConfigError("proxy dimension must be >= 1");
  if (head.dimension() != proxy_dim) {
    throw ConfigError("noise head dimension disagrees with the proxy");
  }
  GeneratorNet gen;
  gen.proxy_dim = proxy_dim;
  gen.treatment_dim = treatment_dim;
  gen.head = head;

  // Hidden widths 10, 15, 25, 15, 10 count the noise unit appended to each
  // of hidden layers 1-4; a fifth unit rides on the (x, y) input.
  NetSpec spec;
  spec.input_width = treatment_dim + 1;
  spec.noise_widths = {1, 1, 1, 1, 1, 0};
  spec.layers = {
      {treatment_dim + 2, 9, Activation::kRelu},
      {10, 14, Activation::kRelu},
      {15, 24, Activation::kRelu},
      {25, 14, Activation::kRelu},
      {15, 10, Activation::kLinear},
      {10, proxy_dim, Activation::kLinear},
  };
  spec.validate();
  gen.spec = spec;
  gen.state = he_init(spec, seed);
  return gen;
}

namespace {

std::vector<Eigen::MatrixXd> draw_injected_noise(const NetSpec& spec,
                                                 Eigen::Index rows, Rng& rng) {
  std::vector<Eigen::MatrixXd> noise(spec.layers.size());
  for (size_t site = 0; site < spec.layers.size(); ++site) {
    const int width = spec.noise_widths[site];
    noise[site].resize(rows, width);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (int c = 0; c < width; ++c) noise[site](i, c) = rng.gaussian();
    }
  }
  return noise;
}

Eigen::MatrixXd generator_inputs(const Dataset& data) {
  Eigen::MatrixXd inputs(data.n(), data.p() + 1);
  inputs << data.x, data.y;
  return inputs;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

void train_generator(GeneratorNet& gen, const Dataset& standardized,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (!standardized.is_standardized()) {
    throw ConfigError("train_generator expects standardized data");
  }
  if (standardized.d() != gen.proxy_dim ||
      standardized.p() != gen.treatment_dim) {
    throw ConfigError("dataset dimensions disagree with the generator");
  }
  const Eigen::Index n = standardized.n();
  const Eigen::MatrixXd inputs = generator_inputs(standardized);
  const Eigen::MatrixXd& targets = standardized.w;

  Rng rng_eps(cfg.seed, "generator_eps");
  Rng rng_e(cfg.seed, "generator_e");

  const bool learnable = gen.head.mode() == HeadMode::kLearnable;
  Eigen::VectorXd head_m, head_v;
  if (learnable) {
    head_m = Eigen::VectorXd::Zero(gen.head.param_count());
    head_v = Eigen::VectorXd::Zero(gen.head.param_count());
  }

  gen.state.lr = cfg.initial_lr;
  AdaptiveLr lr_rule(cfg);
  gen.epoch_losses.clear();
  gen.head_scale_trace.clear();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches =
        minibatch_indices(n, cfg.minibatch_count, cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const Eigen::Index rows = static_cast<Eigen::Index>(batch.size());
      const Eigen::MatrixXd batch_in = select_rows(inputs, batch);
      const Eigen::MatrixXd batch_w = select_rows(targets, batch);

      // Paired draws: two independent (eps, e) tuples per observation.
      const auto noise1 = draw_injected_noise(gen.spec, rows, rng_eps);
      const auto noise2 = draw_injected_noise(gen.spec, rows, rng_eps);
      const auto e1 = gen.head.sample(rows, rng_e);
      const auto e2 = gen.head.sample(rows, rng_e);

      const ForwardCache cache1 = forward(gen.state, gen.spec, batch_in, noise1);
      const ForwardCache cache2 = forward(gen.state, gen.spec, batch_in, noise2);
      const Eigen::MatrixXd out1 = cache1.output + e1.e;
      const Eigen::MatrixXd out2 = cache2.output + e2.e;

      Eigen::MatrixXd grad1, grad2;
      const double loss =
          energy_loss_batch(batch_w, out1, out2, &grad1, &grad2);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("energy loss diverged", epoch);
      }
      epoch_loss += loss * static_cast<double>(rows) / static_cast<double>(n);

      Gradients grads = zero_gradients(gen.spec);
      backward(gen.state, gen.spec, cache1, grad1, grads);
      backward(gen.state, gen.spec, cache2, grad2, grads);
      adam_step(gen.state, grads, cfg);

      if (learnable) {
        // The e draw enters the output additively, so d(loss)/de is the
        // output gradient itself; chain into the head's parameters.
        Eigen::VectorXd hg = gen.head.param_gradient(grad1, e1) +
                             gen.head.param_gradient(grad2, e2);
        if (!hg.allFinite()) {
          throw TrainingDiverged("head gradient diverged", epoch);
        }
        head_m = cfg.adam_beta1 * head_m + (1.0 - cfg.adam_beta1) * hg;
        head_v = cfg.adam_beta2 * head_v +
                 (1.0 - cfg.adam_beta2) * hg.cwiseProduct(hg);
        const double t = static_cast<double>(gen.state.step);
        const double corr1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double corr2 = 1.0 - std::pow(cfg.adam_beta2, t);
        Eigen::VectorXd params = gen.head.params();
        params.array() -= gen.state.lr * (head_m.array() / corr1) /
                          ((head_v.array() / corr2).sqrt() + cfg.adam_epsilon);
        gen.head.set_params(params);
      }
    }
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("epoch loss diverged", epoch);
    }
    gen.state.lr = lr_rule.update(epoch_loss, gen.state.lr);
    gen.epoch_losses.push_back(epoch_loss);
    if (learnable) gen.head_scale_trace.push_back(gen.head.effective_scale());
  }
  gen.state.check_finite();
  gen.meta.record_config(cfg);
  gen.meta.epochs_run = cfg.epochs;
  gen.meta.final_lr = gen.state.lr;
  gen.meta.final_loss = gen.epoch_losses.empty() ? 0.0 : gen.epoch_losses.back();
}

Eigen::MatrixXd sample_confounder(const GeneratorNet& gen,
                                  const Eigen::VectorXd& x, double y,
                                  Eigen::Index m, std::uint64_t seed) {
  if (m == 0) return Eigen::MatrixXd(0, gen.proxy_dim);
  if (x.size() != gen.treatment_dim) {
    throw ConfigError("treatment width disagrees with the generator");
  }
  Eigen::MatrixXd inputs(m, gen.treatment_dim + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    inputs.row(i).head(gen.treatment_dim) = x.transpose();
    inputs(i, gen.treatment_dim) = y;
  }
  Rng rng(seed, "confounder_sample");
  const auto noise = draw_injected_noise(gen.spec, m, rng);
  // Pre-noise outputs: the generator output minus the very e that would be
  // added, i.e. the network output itself.
  return forward(gen.state, gen.spec, inputs, noise).output;
}

void save_generator(const GeneratorNet& gen, const std::string& path) {
  save_model(gen.spec, gen.state, gen.meta, path);
  // Splice the head description into the saved document.
  std::ifstream in(path);
  json j;
  in >> j;
  in.close();
  json head{{"mode",
             gen.head.mode() == HeadMode::kLearnable ? "learnable" : "fixed"},
            {"family", to_string(gen.head.family())},
            {"dimension", gen.head.dimension()}};
  switch (gen.head.family()) {
    case NoiseFamily::kGaussian:
      head["loc"] = gen.head.effective_loc();
      head["scale"] = gen.head.effective_scale();
      break;
    case NoiseFamily::kExponential:
      head["rate"] = gen.head.effective_rate();
      break;
    case NoiseFamily::kMultivariateGaussian: {
      const Eigen::VectorXd mean = gen.head.effective_mean();
      const Eigen::MatrixXd cov = gen.head.effective_covariance();
      head["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
      json cov_rows = json::array();
      for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < cov.cols(); ++c) row.push_back(cov(i, c));
        cov_rows.push_back(row);
      }
      head["covariance"] = cov_rows;
      break;
    }
  }
  j["noise_head"] = head;
  j["proxy_dim"] = gen.proxy_dim;
  j["treatment_dim"] = gen.treatment_dim;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

GeneratorNet load_generator(const std::string& path) {
  LoadedModel model = load_model(path);
  std::ifstream in(path);
  json j;
  in >> j;
  const auto& head_json = j.at("noise_head");
  const auto family = head_json.at("family").get<std::string>();
  NoiseDistribution dist = NoiseDistribution::gaussian(0, 1);
  if (family == "gaussian") {
    dist = NoiseDistribution::gaussian(head_json.at("loc").get<double>(),
                                       head_json.at("scale").get<double>());
  } else if (family == "exponential") {
    dist = NoiseDistribution::exponential(head_json.at("rate").get<double>());
  } else if (family == "multivariate_gaussian") {
    const auto mean = head_json.at("mean").get<std::vector<double>>();
    const auto rows =
        head_json.at("covariance").get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(mean.size());
    Eigen::VectorXd mu(d);
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i) {
      mu[i] = mean[static_cast<size_t>(i)];
      for (int c = 0; c < d; ++c) {
        cov(i, c) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
      }
    }
    dist = NoiseDistribution::multivariate_gaussian(mu, cov);
  } else {
    throw DataError("unknown head family in " + path);
  }
  GeneratorNet gen;
  gen.spec = std::move(model.spec);
  gen.state = std::move(model.state);
  gen.meta = model.meta;
  // Learnable heads are persisted by their effective parameters; loading
  // yields an equivalent fixed head for sampling.
  gen.head = NoiseHead::fixed(dist);
  gen.proxy_dim = j.at("proxy_dim").get<int>();
  gen.treatment_dim = j.at("treatment_dim").get<int>();
  return gen;
}

namespace {

struct Regressor {
  NetSpec spec;
  ParamState state;
};

Regressor train_regressor(const Eigen::MatrixXd& features,
                          const Eigen::VectorXd& targets,
                          const Step2Config& cfg) {
  TrainConfig train = cfg.train;
  const Eigen::Index n = features.rows();
  train.minibatch_count = static_cast<int>(
      (n + cfg.batch_size - 1) / std::max(1, cfg.batch_size));
  train.validate();
  Regressor reg;
  reg.spec.input_width = static_cast<int>(features.cols());
  reg.spec.noise_widths = {0, 0};
  reg.spec.layers = {
      {static_cast<int>(features.cols()), cfg.hidden_width, Activation::kRelu},
      {cfg.hidden_width, 1, Activation::kLinear},
  };
  reg.spec.validate();
  reg.state = he_init(reg.spec, derive_seed(train.seed, "step2_init"));
  reg.state.lr = train.initial_lr;

  AdaptiveLr lr_rule(train);
  double best_seen = std::numeric_limits<double>::infinity();
  int flat_epochs = 0;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const auto batches =
        minibatch_indices(n, train.minibatch_count, train.seed, epoch);
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const Eigen::MatrixXd batch_x = select_rows(features, batch);
      Eigen::VectorXd batch_y(static_cast<Eigen::Index>(batch.size()));
      for (size_t i = 0; i < batch.size(); ++i) {
        batch_y(static_cast<Eigen::Index>(i)) = targets(batch[i]);
      }
      const ForwardCache cache = forward(reg.state, reg.spec, batch_x);
      const Eigen::VectorXd resid = cache.output.col(0) - batch_y;
      const double rows = static_cast<double>(batch.size());
      const double loss = resid.squaredNorm() / rows;
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("regression loss diverged", epoch);
      }
      epoch_loss += loss * rows / static_cast<double>(n);
      Gradients grads = zero_gradients(reg.spec);
      backward(reg.state, reg.spec, cache,
               Eigen::MatrixXd(2.0 / rows * resid), grads);
      adam_step(reg.state, grads, train);
    }
    reg.state.lr = lr_rule.update(epoch_loss, reg.state.lr);
    // Floored rate plus a flat loss cannot move the fit; stop deterministically.
    if (reg.state.lr <= train.lr_floor && epoch_loss > best_seen - 1e-9) {
      if (++flat_epochs >= 20) break;
    } else {
      flat_epochs = 0;
    }
    best_seen = std::min(best_seen, epoch_loss);
  }
  reg.state.check_finite();
  return reg;
}

}  // namespace

CausalEstimate regression_adjust(const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y,
                                 const std::vector<double>& grid,
                                 const Step2Config& cfg, TreatmentKind kind) {
  const Eigen::Index n = y.size();
  if (x.rows() != n || (z.cols() > 0 && z.rows() != n)) {
    throw ConfigError("regression_adjust rows are not aligned");
  }
  if (n < 10) throw DataError("insufficient data: need at least 10 rows");
  if (x.cols() != 1) {
    throw ConfigError("regression_adjust expects a univariate treatment");
  }

  Eigen::MatrixXd features(n, z.cols() + 1);
  if (z.cols() > 0) features << z, x;
  else features = x;
  Regressor reg = train_regressor(features, y, cfg);

  const double hull_lo = x.col(0).minCoeff();
  const double hull_hi = x.col(0).maxCoeff();

  // G-computation closure: average the fitted regression over the observed
  // adjustment rows with the treatment pinned at x0.
  auto shared_z = std::make_shared<Eigen::MatrixXd>(z);
  auto shared_reg = std::make_shared<Regressor>(std::move(reg));
  auto theta = [shared_z, shared_reg, n](double x0) {
    Eigen::MatrixXd eval(n, shared_z->cols() + 1);
    if (shared_z->cols() > 0) {
      eval << *shared_z, Eigen::VectorXd::Constant(n, x0);
    } else {
      eval = Eigen::VectorXd::Constant(n, x0);
    }
    const ForwardCache cache = forward(shared_reg->state, shared_reg->spec, eval);
    return cache.output.col(0).mean();
  };

  Provenance prov{"regression_adjust", 0, cfg.train.seed};
  CausalEstimate est(std::move(theta), kind, std::move(prov), hull_lo, hull_hi);
  if (!grid.empty()) est.set_grid(grid);
  return est;
}

NoiseHead approx_initial_head(NoiseFamily family, int proxy_dim) {
  switch (family) {
    case NoiseFamily::kGaussian:
      return NoiseHead::learnable_gaussian(1.0, 1.0);
    case NoiseFamily::kExponential:
      return NoiseHead::learnable_exponential(1.0);
    case NoiseFamily::kMultivariateGaussian: {
      Eigen::VectorXd mean(proxy_dim);
      for (int i = 0; i < proxy_dim; ++i) mean[i] = static_cast<double>(i + 1);
      Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(proxy_dim, proxy_dim);
      if (proxy_dim == 3) {
        cov << 1.0, 0.7, 0.4,  //
            0.7, 1.0, -0.2,    //
            0.4, -0.2, 1.0;
      }
      return NoiseHead::learnable_multivariate_gaussian(mean, cov);
    }
  }
  throw ConfigError("unknown noise family");
}

namespace {

std::uint64_t estimate_config_hash(Method method, const EstimateConfig& cfg) {
  std::string key = to_string(method) + "|" +
                    std::to_string(cfg.generator.epochs) + "|" +
                    std::to_string(cfg.generator.minibatch_count) + "|" +
                    format_double(cfg.generator.initial_lr) + "|" +
                    std::to_string(cfg.step2.train.epochs) + "|" +
                    format_double(cfg.step2.train.initial_lr) + "|" +
                    std::to_string(cfg.step2.hidden_width) + "|" +
                    std::to_string(cfg.adjust_samples) + "|" +
                    std::to_string(cfg.seed);
  return fnv1a64(key);
}

}  // namespace

CausalEstimate estimate(Method method, const Dataset& data,
                        const std::optional<ErrorMechanism>& mech,
                        const EstimateConfig& cfg,
                        EstimateDiagnostics* diagnostics) {
  if (data.is_standardized()) {
    throw ConfigError("estimate() takes raw data and standardizes internally");
  }
  const Dataset std_data = standardize(data);
  const Standardization& meta = *std_data.standardization;

  Eigen::MatrixXd z;
  switch (method) {
    case Method::kAdjU:
      if (!std_data.has_hidden_confounder()) {
        throw ConfigError("adj_u requires the hidden confounder column u");
      }
      z = std_data.u;
      break;
    case Method::kAdjW:
      z = std_data.w;
      break;
    case Method::kNoAdj:
      z.resize(std_data.n(), 0);
      break;
    case Method::kSpiceNet:
    case Method::kSpiceNetApprox: {
      NoiseHead head = NoiseHead::fixed(NoiseDistribution::gaussian(0, 1));
      if (method == Method::kSpiceNet) {
        if (!mech || mech->kind != ErrorMechanism::Kind::kAdditive) {
          throw ConfigError("spice_net requires the additive error mechanism");
        }
        head = NoiseHead::fixed(mech->e_density)
                   .rescaled_for_standardized_w(meta.w);
      } else {
        if (!mech) {
          throw ConfigError("spice_net_approx requires the E family");
        }
        head = approx_initial_head(mech->e_density.family(),
                                   static_cast<int>(std_data.d()));
      }
      GeneratorNet gen = build_generator(static_cast<int>(std_data.d()), head,
                                         derive_seed(cfg.seed, "generator"),
                                         static_cast<int>(std_data.p()));
      TrainConfig gen_cfg = cfg.generator;
      gen_cfg.seed = derive_seed(cfg.seed, "generator_train");
      train_generator(gen, std_data, gen_cfg);
      if (diagnostics) {
        diagnostics->generator_final_loss = gen.meta.final_loss;
        diagnostics->head_scale_trace = gen.head_scale_trace;
        if (method == Method::kSpiceNetApprox) {
          diagnostics->learned_head = gen.head;
        }
      }
      // One AU sample per observation (averaged when adjust_samples > 1).
      z.resize(std_data.n(), std_data.d());
      const Eigen::Index m = std::max(1, cfg.adjust_samples);
      for (Eigen::Index i = 0; i < std_data.n(); ++i) {
        const Eigen::MatrixXd draws = sample_confounder(
            gen, std_data.x.row(i).transpose(), std_data.y(i), m,
            derive_seed(cfg.seed, "adjust_sample", static_cast<std::uint64_t>(i)));
        z.row(i) = draws.colwise().mean();
      }
      break;
    }
  }

  Step2Config step2 = cfg.step2;
  step2.train.seed = derive_seed(cfg.seed, "step2");
  CausalEstimate standardized_est =
      regression_adjust(z, std_data.x, std_data.y, {}, step2,
                        std_data.treatment_kind);

  Provenance prov{to_string(method), estimate_config_hash(method, cfg),
                  cfg.seed};
  CausalEstimate named(
      [inner = standardized_est](double x) { return inner.evaluate(x); },
      standardized_est.treatment_kind(), prov, standardized_est.hull_lo(),
      standardized_est.hull_hi());
  return destandardize_estimate(named, meta.x[0], meta.y);
}

AceResult ace(const CausalEstimate& est, const Dataset& data, double h) {
  AceResult res;
  if (est.treatment_kind() == TreatmentKind::kBinary) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.x(i, 0) == 0.0) has0 = true;
      if (data.x(i, 0) == 1.0) has1 = true;
    }
    if (!has0 || !has1) {
      throw DataError("binary ACE requires both treatment levels present");
    }
    res.value = est.evaluate(1.0) - est.evaluate(0.0);
    return res;
  }
  if (!(h > 0.0)) throw ConfigError("central-difference step h must be > 0");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto up = est.evaluate_checked(data.x(i, 0) + h);
    const auto dn = est.evaluate_checked(data.x(i, 0) - h);
    res.extrapolated = res.extrapolated || up.extrapolated || dn.extrapolated;
    sum += (up.value - dn.value) / (2.0 * h);
  }
  res.value = sum / static_cast<double>(data.n());
  return res;
}

double mse_eval(const CausalEstimate& est, BenchmarkId id,
                const std::vector<double>& test_x) {
  if (test_x.empty()) throw ConfigError("mse_eval needs test treatments");
  if (est.treatment_kind() == TreatmentKind::kBinary) {
    const double ace_hat = est.evaluate(1.0) - est.evaluate(0.0);
    const double ace_true =
        true_causal_function(id, 1.0) - true_causal_function(id, 0.0);
    const double err = ace_hat - ace_true;
    return err * err;
  }
  double sum = 0.0;
  for (double x : test_x) {
    const double err = est.evaluate(x) - true_causal_function(id, x);
    sum += err * err;
  }
  return sum / static_cast<double>(test_x.size());
}

}  // namespace spice
