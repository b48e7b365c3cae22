#include <benchmark/benchmark.h>

#include "spice/discrete.hpp"
#include "spice/fourier.hpp"
#include "spice/linear_gaussian.hpp"
#include "spice/nnet.hpp"
#include "spice/rng.hpp"
#include "spice/scm.hpp"
#include "spice/spice_net.hpp"

namespace {

using namespace spice;

void BM_SampleBenchmarkA(benchmark::State& state) {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kAGaussian);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_dataset(spec, n, seed++));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SampleBenchmarkA)->Arg(1000)->Arg(10000);

void BM_SampleBenchmarkD(benchmark::State& state) {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kDHighdim);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_dataset(spec, n, seed++));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SampleBenchmarkD)->Arg(1000);

void BM_MatrixAdjust(benchmark::State& state) {
  Rng rng(7);
  const Eigen::Index k = state.range(0);
  DiscreteMechanism mech;
  mech.matrix.resize(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      mech.matrix(i, j) = 0.05 + rng.uniform();
      sum += mech.matrix(i, j);
    }
    mech.matrix.col(j) /= sum;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    mech.w_labels.push_back("w" + std::to_string(i));
    mech.u_labels.push_back("u" + std::to_string(i));
  }
  DiscreteJoint joint;
  for (Eigen::Index i = 0; i < k; ++i) joint.v_support.push_back(double(i));
  joint.x_support = {0.0, 1.0};
  joint.y_support = {0.0, 1.0};
  joint.table.assign(static_cast<size_t>(4 * k), 0.0);
  double total = 0.0;
  for (auto& v : joint.table) {
    v = 0.05 + rng.uniform();
    total += v;
  }
  for (auto& v : joint.table) v /= total;
  const DiscreteJoint observed = forward_mechanism(joint, mech);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matrix_adjust(observed, mech));
  }
}
BENCHMARK(BM_MatrixAdjust)->Arg(2)->Arg(8)->Arg(32);

void BM_GeneratorForwardBatch(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  GeneratorNet gen = build_generator(
      1, NoiseHead::fixed(NoiseDistribution::gaussian(0, 1)), 3, 1);
  Rng rng(5);
  Eigen::MatrixXd input(rows, 2);
  for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.gaussian();
  std::vector<Eigen::MatrixXd> noise;
  for (size_t site = 0; site < gen.spec.layers.size(); ++site) {
    Eigen::MatrixXd m(rows, gen.spec.noise_widths[site]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.gaussian();
    noise.push_back(m);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(gen.state, gen.spec, input, noise));
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_GeneratorForwardBatch)->Arg(200)->Arg(2000);

void BM_EnergyLossBatch(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  Rng rng(9);
  Eigen::MatrixXd obs(rows, 3), s1(rows, 3), s2(rows, 3);
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    obs(i) = rng.gaussian();
    s1(i) = rng.gaussian();
    s2(i) = rng.gaussian();
  }
  Eigen::MatrixXd g1, g2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(energy_loss_batch(obs, s1, s2, &g1, &g2));
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_EnergyLossBatch)->Arg(200)->Arg(2000);

void BM_NumericFt(benchmark::State& state) {
  DensitySpec gauss;
  gauss.family = DensityFamily::kGaussian;
  QuadratureConfig cfg;
  cfg.panels = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(numeric_ft(gauss, 1.5, cfg));
  }
}
BENCHMARK(BM_NumericFt)->Arg(1 << 10)->Arg(1 << 14);

void BM_CorrectedEstimator(benchmark::State& state) {
  const LinearScmParams params;
  const SecondMoments m = population_covariance(params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(corrected_estimator(m, 1.0));
  }
}
BENCHMARK(BM_CorrectedEstimator);

void BM_GeneratorTrainEpoch(benchmark::State& state) {
  const Dataset data = standardize(sample_dataset(
      benchmark_spec(BenchmarkId::kAGaussian), 2000, 11));
  const NoiseHead head = NoiseHead::fixed(NoiseDistribution::gaussian(0, 1))
                             .rescaled_for_standardized_w(
                                 data.standardization->w);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 13;
  for (auto _ : state) {
    GeneratorNet gen = build_generator(1, head, 13, 1);
    train_generator(gen, data, cfg);
    benchmark::DoNotOptimize(gen);
  }
}
BENCHMARK(BM_GeneratorTrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
