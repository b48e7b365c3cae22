#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "spice/common.hpp"
#include "spice/rng.hpp"
#include "spice/scm.hpp"
#include "spice/spice_net.hpp"

using namespace spice;

namespace {

NoiseHead unit_gaussian_head() {
  return NoiseHead::fixed(NoiseDistribution::gaussian(0, 1));
}

ErrorMechanism benchmark_a_mechanism() {
  ErrorMechanism mech;
  mech.kind = ErrorMechanism::Kind::kAdditive;
  mech.e_density = NoiseDistribution::gaussian(0, 1);
  mech.a = Eigen::MatrixXd::Identity(1, 1);
  return mech;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// One well-trained generator on benchmark A, shared across the heavier
// checks below (training dominates this suite's runtime).
struct TrainedA {
  Dataset raw;
  Dataset standardized;
  GeneratorNet gen;
};

const TrainedA& trained_a() {
  static const TrainedA ctx = [] {
    TrainedA t;
    t.raw = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian), 2000,
                           derive_seed(900, "train"));
    t.standardized = standardize(t.raw);
    const NoiseHead head =
        NoiseHead::fixed(NoiseDistribution::gaussian(0, 1))
            .rescaled_for_standardized_w(t.standardized.standardization->w);
    t.gen = build_generator(1, head, derive_seed(900, "generator"), 1);
    EstimateConfig defaults;
    TrainConfig cfg = defaults.generator;
    cfg.seed = derive_seed(900, "generator_train");
    train_generator(t.gen, t.standardized, cfg);
    return t;
  }();
  return ctx;
}

}  // namespace

TEST_CASE("generator architecture follows the stated widths and noise layout") {
  const GeneratorNet g1 = build_generator(1, unit_gaussian_head(), 5, 1);
  CHECK(g1.spec.layers.back().output_width == 1);  // pre-noise width = d
  CHECK(g1.spec.total_noise_width() == 5);
  CHECK(g1.spec.noise_widths == std::vector<int>{1, 1, 1, 1, 1, 0});
  // Hidden widths counting the appended noise unit: 10, 15, 25, 15, 10.
  CHECK(g1.spec.layers[0].output_width + g1.spec.noise_widths[1] == 10);
  CHECK(g1.spec.layers[1].output_width + g1.spec.noise_widths[2] == 15);
  CHECK(g1.spec.layers[2].output_width + g1.spec.noise_widths[3] == 25);
  CHECK(g1.spec.layers[3].output_width + g1.spec.noise_widths[4] == 15);
  CHECK(g1.spec.layers[4].output_width == 10);
  CHECK(g1.spec.layers[0].activation == Activation::kRelu);
  CHECK(g1.spec.layers[3].activation == Activation::kRelu);
  CHECK(g1.spec.layers[4].activation == Activation::kLinear);
  CHECK(g1.spec.layers[5].activation == Activation::kLinear);
  CHECK(g1.spec.input_width == 2);  // (x, y)

  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3);
  const GeneratorNet g3 = build_generator(
      3,
      NoiseHead::fixed(NoiseDistribution::multivariate_gaussian(
          Eigen::VectorXd::Zero(3), cov)),
      5, 1);
  CHECK(g3.spec.layers.back().output_width == 3);

  CHECK_THROWS_AS((void)build_generator(2, unit_gaussian_head(), 5, 1),
                  ConfigError);
}

TEST_CASE("generator output is the pre-noise output plus e, bit for bit") {
  GeneratorNet gen = build_generator(1, unit_gaussian_head(), 21, 1);
  Rng rng_eps(3, "eps");
  Rng rng_e(3, "e");
  Eigen::MatrixXd input(4, 2);
  input << 0.1, -0.5, 1.2, 0.7, -0.3, 0.0, 2.0, -2.0;
  std::vector<Eigen::MatrixXd> noise;
  for (size_t site = 0; site < gen.spec.layers.size(); ++site) {
    Eigen::MatrixXd m(4, gen.spec.noise_widths[site]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng_eps.gaussian();
    noise.push_back(m);
  }
  const auto e = gen.head.sample(4, rng_e);
  const Eigen::MatrixXd prenoise = forward(gen.state, gen.spec, input, noise).output;
  const Eigen::MatrixXd output = prenoise + e.e;
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(output(i, 0) == prenoise(i, 0) + e.e(i, 0));
  }
}

TEST_CASE("training reduces the energy loss on benchmark A") {
  const TrainedA& ctx = trained_a();
  REQUIRE(ctx.gen.epoch_losses.size() == 4000);
  CHECK(ctx.gen.epoch_losses.back() < ctx.gen.epoch_losses.front());
}

TEST_CASE("trained generator tracks the analytic conditional mean of W") {
  // For benchmark A, V gives E[W | X = x, Y = y] = y / 3 on the raw scale.
  // Grid points follow the joint's ridge E[Y | X = x] = 1.5 x, staying in
  // regions the training sample actually covers (corr(X, Y) = 0.87).
  const TrainedA& ctx = trained_a();
  const auto& meta = *ctx.standardized.standardization;
  Rng rng(512, "wcheck");
  for (double x_raw : {-1.0, 0.0, 1.0}) {
    for (double dy : {-1.0, 0.0, 1.0}) {
      const double y_raw = 1.5 * x_raw + dy;
      const Eigen::VectorXd x_std = Eigen::VectorXd::Constant(
          1, (x_raw - meta.x[0].mean) / meta.x[0].sd);
      const double y_std = (y_raw - meta.y.mean) / meta.y.sd;
      const Eigen::MatrixXd prenoise =
          sample_confounder(ctx.gen, x_std, y_std, 4000, rng.raw());
      // W = prenoise + e with E[e] = 0 for this head, so the sampled-W mean
      // is the prenoise mean; undo the standardization.
      const double w_mean_raw =
          meta.w[0].mean + meta.w[0].sd * prenoise.col(0).mean();
      CHECK(std::abs(w_mean_raw - y_raw / 3.0) < 0.15);
    }
  }
}

TEST_CASE("sampled confounders correlate with the analytic E[U | x, y]") {
  const TrainedA& ctx = trained_a();
  const auto& meta = *ctx.standardized.standardization;
  const Dataset held_out = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                          300, derive_seed(901, "test"));
  std::vector<double> sampled_mean, analytic;
  for (Eigen::Index i = 0; i < held_out.n(); ++i) {
    const Eigen::VectorXd x_std = Eigen::VectorXd::Constant(
        1, (held_out.x(i, 0) - meta.x[0].mean) / meta.x[0].sd);
    const double y_std = (held_out.y(i) - meta.y.mean) / meta.y.sd;
    const Eigen::MatrixXd draws = sample_confounder(
        ctx.gen, x_std, y_std, 40, derive_seed(902, "draw", i));
    sampled_mean.push_back(draws.col(0).mean());
    analytic.push_back(held_out.y(i) / 3.0);  // E[U | x, y] from V
  }
  CHECK(pearson(sampled_mean, analytic) > 0.9);
}

TEST_CASE("confounder sampling is deterministic per seed and m = 0 is empty") {
  const TrainedA& ctx = trained_a();
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.2);
  const Eigen::MatrixXd empty = sample_confounder(ctx.gen, x, 0.1, 0, 7);
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 1);
  const Eigen::MatrixXd a = sample_confounder(ctx.gen, x, 0.1, 5, 7);
  const Eigen::MatrixXd b = sample_confounder(ctx.gen, x, 0.1, 5, 7);
  const Eigen::MatrixXd c = sample_confounder(ctx.gen, x, 0.1, 5, 8);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a point-mass target collapses the pre-noise output") {
  // W constant with a (numerically) zero-noise head; bypasses standardize()
  // by attaching identity stats.
  const double c = 0.7;
  Dataset data;
  const Eigen::Index n = 200;
  Rng rng(33);
  data.w = Eigen::MatrixXd::Constant(n, 1, c);
  data.x.resize(n, 1);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.x(i, 0) = rng.gaussian();
    data.y(i) = rng.gaussian();
  }
  data.u.resize(n, 0);
  Standardization meta;
  meta.w.resize(1);
  meta.x.resize(1);
  data.standardization = meta;

  GeneratorNet gen = build_generator(
      1, NoiseHead::fixed(NoiseDistribution::gaussian(0, 1e-12)), 44, 1);
  TrainConfig cfg;
  cfg.epochs = 800;
  cfg.lr_window = 100;  // epoch losses fluctuate with the injected noise
  cfg.seed = 44;
  train_generator(gen, data, cfg);
  const Eigen::MatrixXd prenoise = sample_confounder(
      gen, Eigen::VectorXd::Constant(1, 0.3), -0.2, 200, 45);
  for (Eigen::Index i = 0; i < prenoise.rows(); ++i) {
    CHECK(std::abs(prenoise(i, 0) - c) < 0.05);
  }
}

TEST_CASE("non-finite data raises a training-diverged error with the epoch") {
  Dataset data;
  data.w = Eigen::MatrixXd::Constant(20, 1,
                                     std::numeric_limits<double>::quiet_NaN());
  data.x = Eigen::MatrixXd::Zero(20, 1);
  data.y = Eigen::VectorXd::Zero(20);
  data.u.resize(20, 0);
  Standardization meta;
  meta.w.resize(1);
  meta.x.resize(1);
  data.standardization = meta;
  GeneratorNet gen = build_generator(1, unit_gaussian_head(), 1, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train_generator(gen, data, cfg);
    CHECK(false);
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("fixed heads are immutable and survive training untouched") {
  const TrainedA& ctx = trained_a();
  CHECK(ctx.gen.head.mode() == HeadMode::kFixed);
  const double expected_scale =
      1.0 / ctx.standardized.standardization->w[0].sd;
  CHECK(ctx.gen.head.effective_scale() ==
        doctest::Approx(expected_scale).epsilon(1e-12));
  NoiseHead head = unit_gaussian_head();
  CHECK_THROWS_AS(head.set_params(Eigen::VectorXd::Zero(2)), ConfigError);
}

TEST_CASE("head rescaling reproduces the standardized-parameter values") {
  // sd(W) = sqrt(2) on benchmarks A and B gives scale 0.707; for C the
  // standardized exponential has rate sqrt(2) = 1.414.
  std::vector<ColumnStats> w_stats{{0.0, std::sqrt(2.0)}};
  const NoiseHead g = NoiseHead::fixed(NoiseDistribution::gaussian(0, 1))
                          .rescaled_for_standardized_w(w_stats);
  CHECK(g.effective_scale() == doctest::Approx(0.707).epsilon(1e-3));
  const NoiseHead e = NoiseHead::fixed(NoiseDistribution::exponential(1))
                          .rescaled_for_standardized_w(w_stats);
  CHECK(e.effective_rate() == doctest::Approx(1.414).epsilon(1e-3));

  // Benchmark D: D^-1 Sigma D^-1 with sd(W) = (2, sqrt(2.5), sqrt(2.8)).
  Eigen::MatrixXd sigma(3, 3);
  sigma << 2.0, -0.3, 0.5, -0.3, 1.5, 0.4, 0.5, 0.4, 1.8;
  std::vector<ColumnStats> wd{{0.0, 2.0},
                              {0.0, std::sqrt(2.5)},
                              {0.0, std::sqrt(2.8)}};
  const NoiseHead m =
      NoiseHead::fixed(NoiseDistribution::multivariate_gaussian(
                           Eigen::VectorXd::Zero(3), sigma))
          .rescaled_for_standardized_w(wd);
  const Eigen::MatrixXd cov = m.effective_covariance();
  CHECK(cov(0, 0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(cov(0, 1) == doctest::Approx(-0.095).epsilon(2e-2));
  CHECK(cov(0, 2) == doctest::Approx(0.149).epsilon(2e-2));
  CHECK(cov(1, 1) == doctest::Approx(0.6).epsilon(1e-3));
  CHECK(cov(1, 2) == doctest::Approx(0.151).epsilon(2e-2));
  CHECK(cov(2, 2) == doctest::Approx(0.643).epsilon(1e-2));
}

TEST_CASE("learnable head gradients match finite differences") {
  Rng rng(606);
  const double h = 1e-6;

  // Gaussian: e = loc + softplus(s) z.
  {
    NoiseHead head = NoiseHead::learnable_gaussian(0.4, 1.3);
    const auto batch = head.sample(50, rng);
    Eigen::MatrixXd grad_e(50, 1);
    for (int i = 0; i < 50; ++i) grad_e(i, 0) = rng.gaussian();
    const Eigen::VectorXd analytic = head.param_gradient(grad_e, batch);
    for (int p = 0; p < 2; ++p) {
      auto loss_at = [&](double delta) {
        Eigen::VectorXd params = head.params();
        params[p] += delta;
        const double loc = params[0];
        const double scale = softplus(params[1]);
        double loss = 0.0;
        for (int i = 0; i < 50; ++i) {
          loss += grad_e(i, 0) * (loc + scale * batch.raw(i, 0));
        }
        return loss;
      };
      const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
      CHECK(analytic[p] == doctest::Approx(fd).epsilon(1e-5));
    }
  }

  // Exponential: e = q / softplus(r).
  {
    NoiseHead head = NoiseHead::learnable_exponential(1.7);
    const auto batch = head.sample(50, rng);
    Eigen::MatrixXd grad_e(50, 1);
    for (int i = 0; i < 50; ++i) grad_e(i, 0) = rng.gaussian();
    const Eigen::VectorXd analytic = head.param_gradient(grad_e, batch);
    auto loss_at = [&](double delta) {
      const double rate = softplus(head.params()[0] + delta);
      double loss = 0.0;
      for (int i = 0; i < 50; ++i) {
        loss += grad_e(i, 0) * batch.raw(i, 0) / rate;
      }
      return loss;
    };
    const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
    CHECK(analytic[0] == doctest::Approx(fd).epsilon(1e-5));
  }

  // Multivariate Gaussian: e = mean + L z, softplus diagonal.
  {
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.3, 0.3, 0.8;
    NoiseHead head = NoiseHead::learnable_multivariate_gaussian(
        Eigen::Vector2d(0.1, -0.2), cov);
    const auto batch = head.sample(40, rng);
    Eigen::MatrixXd grad_e(40, 2);
    for (Eigen::Index i = 0; i < grad_e.size(); ++i) grad_e(i) = rng.gaussian();
    const Eigen::VectorXd analytic = head.param_gradient(grad_e, batch);
    auto loss_at = [&](int p, double delta) {
      Eigen::VectorXd params = head.params();
      params[p] += delta;
      const Eigen::Vector2d mean(params[0], params[1]);
      Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
      l(0, 0) = softplus(params[2]);
      l(1, 0) = params[3];
      l(1, 1) = softplus(params[4]);
      double loss = 0.0;
      for (int i = 0; i < 40; ++i) {
        const Eigen::Vector2d e =
            mean + l * Eigen::Vector2d(batch.raw(i, 0), batch.raw(i, 1));
        loss += grad_e.row(i).dot(e);
      }
      return loss;
    };
    for (int p = 0; p < 5; ++p) {
      const double fd = (loss_at(p, h) - loss_at(p, -h)) / (2.0 * h);
      CHECK(analytic[p] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("regression adjustment fits exact structures") {
  Rng rng(77);
  const Eigen::Index n = 500;
  Eigen::MatrixXd x(n, 1), z(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 2.0 * rng.uniform() - 1.0;
    z(i, 0) = rng.gaussian();
  }
  const Eigen::VectorXd y = x.col(0);  // Y = X exactly
  Step2Config cfg;
  cfg.train.seed = 9;
  cfg.train.lr_window = 25;  // keep annealing tied to progress, not shuffle noise
  const CausalEstimate with_z = regression_adjust(z, x, y, {}, cfg);
  const CausalEstimate no_z =
      regression_adjust(Eigen::MatrixXd(n, 0), x, y, {}, cfg);
  for (double x0 : {-0.8, -0.3, 0.0, 0.4, 0.9}) {
    CHECK(std::abs(with_z.evaluate(x0) - x0) < 0.05);
    CHECK(std::abs(no_z.evaluate(x0) - x0) < 0.05);
  }
}

TEST_CASE("regression adjustment validates its inputs") {
  Step2Config cfg;
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  CHECK_THROWS_AS(
      (void)regression_adjust(Eigen::MatrixXd(5, 0), x, y, {}, cfg), DataError);
  Eigen::MatrixXd z(4, 1);
  Eigen::MatrixXd x10 = Eigen::MatrixXd::Zero(10, 1);
  Eigen::VectorXd y10 = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS((void)regression_adjust(z, x10, y10, {}, cfg), ConfigError);
}

TEST_CASE("estimate() names missing prerequisites") {
  Dataset data = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian), 100,
                                derive_seed(31, "train"));
  data.u.resize(data.n(), 0);  // drop the oracle column
  EstimateConfig cfg;
  cfg.generator.epochs = 2;
  cfg.step2.train.epochs = 2;
  CHECK_THROWS_WITH_AS((void)estimate(Method::kAdjU, data, std::nullopt, cfg),
                       doctest::Contains("u"), ConfigError);
  CHECK_THROWS_AS((void)estimate(Method::kSpiceNet, data, std::nullopt, cfg),
                  ConfigError);
  CHECK_THROWS_AS(
      (void)estimate(Method::kSpiceNetApprox, data, std::nullopt, cfg),
      ConfigError);
  const Dataset std_data = standardize(data);
  CHECK_THROWS_AS(
      (void)estimate(Method::kNoAdj, std_data, std::nullopt, cfg), ConfigError);
}

TEST_CASE("estimate() equals the documented standardize-fit-destandardize path") {
  const Dataset data = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                      400, derive_seed(63, "train"));
  EstimateConfig cfg;
  cfg.seed = 12345;
  cfg.step2.train.epochs = 300;
  const CausalEstimate est = estimate(Method::kAdjU, data, std::nullopt, cfg);

  const Dataset std_data = standardize(data);
  const Standardization& meta = *std_data.standardization;
  Step2Config step2 = cfg.step2;
  step2.train.seed = derive_seed(cfg.seed, "step2");
  const CausalEstimate std_est = regression_adjust(
      std_data.u, std_data.x, std_data.y, {}, step2, TreatmentKind::kContinuous);

  for (int i = 0; i < 20; ++i) {
    const double x = -2.0 + 4.0 * static_cast<double>(i) / 19.0;
    const double manual =
        meta.y.sd * std_est.evaluate((x - meta.x[0].mean) / meta.x[0].sd) +
        meta.y.mean;
    CHECK(std::abs(est.evaluate(x) - manual) < 1e-10);
  }
}

TEST_CASE("oracle confounder adjustment reaches the Table-3 band on A") {
  const Dataset train = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                       2000, derive_seed(700, "train"));
  const Dataset test = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                      500, derive_seed(700, "test"));
  std::vector<double> tx(test.x.col(0).data(), test.x.col(0).data() + test.n());
  EstimateConfig cfg;
  cfg.seed = derive_seed(700, "adj_u");
  const CausalEstimate est = estimate(Method::kAdjU, train, std::nullopt, cfg);
  CHECK(mse_eval(est, BenchmarkId::kAGaussian, tx) < 0.1);
}

TEST_CASE("adjusting for an injective linear image of U matches adjusting for U") {
  // Prop.-5 style check on benchmark D at n = 5000 with oracle access.
  const Dataset train = sample_dataset(benchmark_spec(BenchmarkId::kDHighdim),
                                       5000, derive_seed(701, "train"));
  const Dataset test = sample_dataset(benchmark_spec(BenchmarkId::kDHighdim),
                                      500, derive_seed(701, "test"));
  std::vector<double> tx(test.x.col(0).data(), test.x.col(0).data() + test.n());
  const Dataset std_data = standardize(train);
  const Standardization& meta = *std_data.standardization;
  Eigen::MatrixXd a(3, 2);
  a << 1, 1, 0, 1, 1, 0;
  const Eigen::MatrixXd au = (a * train.u.transpose()).transpose();
  // Standardize the A U columns like any adjustment feature.
  Eigen::MatrixXd au_std = au;
  for (int j = 0; j < 3; ++j) {
    const double m = au.col(j).mean();
    const double sd = std::sqrt((au.col(j).array() - m).square().sum() /
                                static_cast<double>(au.rows() - 1));
    au_std.col(j) = (au.col(j).array() - m) / sd;
  }
  Step2Config cfg;
  cfg.train.seed = derive_seed(701, "step2");
  const CausalEstimate est_u = destandardize_estimate(
      regression_adjust(std_data.u, std_data.x, std_data.y, {}, cfg),
      meta.x[0], meta.y);
  const CausalEstimate est_au = destandardize_estimate(
      regression_adjust(au_std, std_data.x, std_data.y, {}, cfg), meta.x[0],
      meta.y);
  const double mse_u = mse_eval(est_u, BenchmarkId::kDHighdim, tx);
  const double mse_au = mse_eval(est_au, BenchmarkId::kDHighdim, tx);
  CHECK(std::abs(mse_u - mse_au) < 0.05);
}

TEST_CASE("approx head stays positive and below the standardized-W spread") {
  const Dataset train = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                       2000, derive_seed(702, "train"));
  ErrorMechanism mech = benchmark_a_mechanism();
  EstimateConfig cfg;
  cfg.seed = 55;
  cfg.generator.epochs = 600;
  EstimateDiagnostics diag;
  (void)estimate(Method::kSpiceNetApprox, train, mech, cfg, &diag);
  REQUIRE(diag.head_scale_trace.size() == 600);
  for (double scale : diag.head_scale_trace) {
    CHECK(scale > 0.0);
    CHECK(scale <= 1.0 + 1e-9);
  }
  REQUIRE(diag.learned_head.has_value());
  CHECK(diag.learned_head->effective_scale() > 0.0);
}

TEST_CASE("generator persistence round-trips sampling behavior") {
  const TrainedA& ctx = trained_a();
  const auto dir = std::filesystem::temp_directory_path() / "spice_gen_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "gen.json").string();
  save_generator(ctx.gen, path);
  const GeneratorNet loaded = load_generator(path);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -0.4);
  const Eigen::MatrixXd a = sample_confounder(ctx.gen, x, 0.9, 8, 99);
  const Eigen::MatrixXd b = sample_confounder(loaded, x, 0.9, 8, 99);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.meta.epochs_run == 4000);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ace on closed-form estimates") {
  const Provenance prov{"toy", 0, 0};
  const Dataset data = sample_dataset(benchmark_spec(BenchmarkId::kCExponential),
                                      2000, derive_seed(64, "train"));

  const CausalEstimate identity([](double x) { return x; },
                                TreatmentKind::kContinuous, prov);
  for (double h : {0.01, 0.1, 1.0}) {
    CHECK(ace(identity, data, h).value == doctest::Approx(1.0).epsilon(1e-9));
  }

  // theta(x) = x^2 + x + 1: the central difference is exactly 2x + 1, so
  // the ACE equals the Monte-Carlo mean of 2X + 1 over the sample.
  const CausalEstimate quad([](double x) { return x * x + x + 1.0; },
                            TreatmentKind::kContinuous, prov);
  const double oracle = (2.0 * data.x.col(0).array() + 1.0).mean();
  CHECK(ace(quad, data, 0.05).value == doctest::Approx(oracle).epsilon(1e-9));

  const Dataset bdata = sample_dataset(benchmark_spec(BenchmarkId::kBBinary),
                                       500, derive_seed(65, "train"));
  const CausalEstimate flat([](double) { return 3.0; }, TreatmentKind::kBinary,
                            prov);
  CHECK(ace(flat, bdata, 0.0).value == 0.0);

  Dataset only_ones = bdata;
  only_ones.x.setOnes();
  CHECK_THROWS_AS((void)ace(flat, only_ones, 0.0), DataError);
}

TEST_CASE("ace flags extrapolation beyond the data hull") {
  const Provenance prov{"toy", 0, 0};
  const CausalEstimate bounded([](double x) { return x; },
                               TreatmentKind::kContinuous, prov, -1.0, 1.0);
  Dataset data;
  data.w = Eigen::MatrixXd::Zero(3, 1);
  data.x.resize(3, 1);
  data.x << -1.0, 0.0, 1.0;
  data.y = Eigen::VectorXd::Zero(3);
  data.u.resize(3, 0);
  CHECK(ace(bounded, data, 0.5).extrapolated);
  Dataset inner = data;
  inner.x << -0.4, 0.0, 0.4;
  CHECK(!ace(bounded, inner, 0.5).extrapolated);
}

TEST_CASE("mse_eval against the ground truth") {
  const Provenance prov{"toy", 0, 0};
  std::vector<double> grid;
  for (int i = 0; i < 500; ++i) grid.push_back(-2.0 + 4.0 * i / 499.0);

  const CausalEstimate truth([](double x) { return x; },
                             TreatmentKind::kContinuous, prov);
  CHECK(mse_eval(truth, BenchmarkId::kAGaussian, grid) == 0.0);

  const CausalEstimate offset([](double x) { return x + 0.1; },
                              TreatmentKind::kContinuous, prov);
  CHECK(mse_eval(offset, BenchmarkId::kAGaussian, grid) ==
        doctest::Approx(0.01).epsilon(1e-12));

  const CausalEstimate binary_est(
      [](double x) { return 1.3 * x; }, TreatmentKind::kBinary, prov);
  // Squared ACE error: (1.3 - 1)^2.
  CHECK(mse_eval(binary_est, BenchmarkId::kBBinary, grid) ==
        doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("estimate grid evaluations survive destandardization consistently") {
  const Dataset data = sample_dataset(benchmark_spec(BenchmarkId::kAGaussian),
                                      200, derive_seed(66, "train"));
  const Dataset std_data = standardize(data);
  const Standardization& meta = *std_data.standardization;
  Step2Config cfg;
  cfg.train.epochs = 100;
  cfg.train.seed = 5;
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(-1.5 + 3.0 * i / 19.0);
  const CausalEstimate std_est =
      regression_adjust(std_data.w, std_data.x, std_data.y, grid, cfg);
  REQUIRE(std_est.grid_values().size() == 20);
  const CausalEstimate raw_est =
      destandardize_estimate(std_est, meta.x[0], meta.y);
  REQUIRE(raw_est.grid_values().size() == 20);
  for (size_t i = 0; i < 20; ++i) {
    CHECK(raw_est.grid_x()[i] ==
          doctest::Approx(meta.x[0].mean + meta.x[0].sd * grid[i]));
    CHECK(raw_est.grid_values()[i] ==
          doctest::Approx(meta.y.sd * std_est.grid_values()[i] + meta.y.mean)
              .epsilon(1e-12));
  }
}
