#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spice/common.hpp"
#include "spice/dataset.hpp"
#include "spice/estimate.hpp"
#include "spice/scm.hpp"

using namespace spice;

namespace {

double column_mean(const Eigen::VectorXd& v) { return v.mean(); }

double column_var(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

double covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() /
         static_cast<double>(a.size() - 1);
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return covariance(a, b) / std::sqrt(column_var(a) * column_var(b));
}

}  // namespace

TEST_CASE("benchmark A uses unit gaussian noises and additive outcome") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kAGaussian);
  CHECK(spec.p == 1);
  CHECK(spec.k == 1);
  CHECK(spec.d == 1);
  for (const auto* noise : {&spec.noise_u, &spec.noise_e, &spec.noise_x,
                            &spec.noise_y}) {
    CHECK(noise->family() == NoiseFamily::kGaussian);
    CHECK(noise->loc() == 0.0);
    CHECK(noise->scale() == 1.0);
  }
  // f_Y(u, x, n) = u + x + n.
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -1.2);
  CHECK(spec.f_y(u, x, 0.5) == doctest::Approx(0.3 - 1.2 + 0.5));
}

TEST_CASE("benchmark B thresholds the treatment") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kBBinary);
  CHECK(spec.treatment_kind == TreatmentKind::kBinary);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.4);
  CHECK(spec.f_x(u, Eigen::VectorXd::Constant(1, 0.1))[0] == 1.0);
  CHECK(spec.f_x(u, Eigen::VectorXd::Constant(1, -0.5))[0] == 0.0);
}

TEST_CASE("benchmark C combines exponential noise with a quadratic outcome") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kCExponential);
  CHECK(spec.noise_u.family() == NoiseFamily::kExponential);
  CHECK(spec.noise_y.rate() == 1.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.0);
  CHECK(spec.f_y(u, x, 0.25) == doctest::Approx(9.0 + 6.0 + 0.25));
}

TEST_CASE("benchmark D declares a full-column-rank A") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kDHighdim);
  CHECK(spec.k == 2);
  CHECK(spec.d == 3);
  // Recover A's columns by pushing basis vectors through f_W with zero noise.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd a(3, 2);
  a.col(0) = spec.f_w(Eigen::Vector2d(1, 0), zero);
  a.col(1) = spec.f_w(Eigen::Vector2d(0, 1), zero);
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 1, 0, 1, 1, 0;
  CHECK((a - expected).norm() == 0.0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  CHECK(svd.singularValues()(1) > 0.5);
}

TEST_CASE("sampling benchmark A yields positively correlated proxy and treatment") {
  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kAGaussian), 2000, 7);
  CHECK(data.d() == 1);
  CHECK(data.p() == 1);
  CHECK(data.n() == 2000);
  CHECK(correlation(data.w.col(0), data.x.col(0)) > 0.0);
}

TEST_CASE("no confounding path into X decorrelates U and X") {
  PcScmSpec spec = benchmark_spec(BenchmarkId::kAGaussian);
  spec.f_x = [](const Eigen::VectorXd&, const Eigen::VectorXd& n) {
    return Eigen::VectorXd::Constant(1, n[0]);
  };
  const Dataset data = sample_dataset(spec, 10000, 11);
  CHECK(std::abs(correlation(data.u.col(0), data.x.col(0))) < 0.05);
}

TEST_CASE("benchmark D proxy covariance matches A A^T + Sigma_E") {
  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kDHighdim), 5000, 1);
  // Oracle: evaluate A A^T + Sigma_E from the declared matrices.
  Eigen::MatrixXd a(3, 2);
  a << 1, 1, 0, 1, 1, 0;
  Eigen::MatrixXd sigma_e(3, 3);
  sigma_e << 2.0, -0.3, 0.5, -0.3, 1.5, 0.4, 0.5, 0.4, 1.8;
  const Eigen::MatrixXd expected = a * a.transpose() + sigma_e;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double emp = covariance(data.w.col(i), data.w.col(j));
      CHECK(std::abs(emp - expected(i, j)) < 0.15);
    }
  }
}

TEST_CASE("true causal functions of the benchmarks") {
  CHECK(true_causal_function(BenchmarkId::kAGaussian, 2.0) == 2.0);
  CHECK(true_causal_function(BenchmarkId::kCExponential, 0.0) == 1.0);
  CHECK(true_causal_function(BenchmarkId::kBBinary, 1.0) -
            true_causal_function(BenchmarkId::kBBinary, 0.0) ==
        1.0);
  CHECK(true_causal_function(BenchmarkId::kDHighdim, -1.5) == -1.5);
}

TEST_CASE("interventional oracle agrees with the closed forms") {
  const PcScmSpec a = benchmark_spec(BenchmarkId::kAGaussian);
  const OracleResult at1 = interventional_oracle(a, 1.0, 1000000, 3);
  CHECK(std::abs(at1.value - 1.0) < 3.0 * at1.standard_error);

  const PcScmSpec c = benchmark_spec(BenchmarkId::kCExponential);
  const OracleResult ct2 = interventional_oracle(c, 2.0, 1000000, 3);
  CHECK(std::abs(ct2.value - 7.0) < 3.0 * ct2.standard_error);
}

TEST_CASE("degenerate outcome gives the constant exactly") {
  PcScmSpec spec = benchmark_spec(BenchmarkId::kAGaussian);
  spec.f_y = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
    return 4.25;
  };
  const OracleResult res = interventional_oracle(spec, 0.7, 100, 9);
  CHECK(res.value == 4.25);
  CHECK(res.standard_error == 0.0);
}

TEST_CASE("oracle tracks the true causal function on a grid, all benchmarks") {
  struct GridCase {
    BenchmarkId id;
    double lo, hi;
  };
  const GridCase cases[] = {
      {BenchmarkId::kAGaussian, -2.0, 2.0},
      {BenchmarkId::kBBinary, 0.0, 1.0},
      {BenchmarkId::kCExponential, 0.0, 4.0},
      {BenchmarkId::kDHighdim, -2.0, 2.0},
  };
  for (const auto& c : cases) {
    const PcScmSpec spec = benchmark_spec(c.id);
    const int points = c.id == BenchmarkId::kBBinary ? 2 : 10;
    for (int i = 0; i < points; ++i) {
      const double x =
          points == 2 ? static_cast<double>(i)
                      : c.lo + (c.hi - c.lo) * static_cast<double>(i) /
                                   static_cast<double>(points - 1);
      const OracleResult res = interventional_oracle(spec, x, 200000, 17 + i);
      CHECK(std::abs(res.value - true_causal_function(c.id, x)) <
            4.0 * res.standard_error + 1e-12);
    }
  }
}

TEST_CASE("sampling is bit-identical for a fixed seed") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kDHighdim);
  const Dataset d1 = sample_dataset(spec, 500, 42);
  const Dataset d2 = sample_dataset(spec, 500, 42);
  CHECK((d1.w - d2.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.x - d2.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.y - d2.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.u - d2.u).cwiseAbs().maxCoeff() == 0.0);
  const Dataset d3 = sample_dataset(spec, 500, 43);
  CHECK((d1.w - d3.w).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("benchmark A second moments at n = 1e5") {
  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kAGaussian), 100000, 5);
  CHECK(std::abs(column_var(data.w.col(0)) - 2.0) < 0.05);
  CHECK(std::abs(column_var(data.x.col(0)) - 2.0) < 0.05);
  CHECK(std::abs(covariance(data.w.col(0), data.x.col(0)) - 1.0) < 0.05);
}

TEST_CASE("standardize normalizes columns and round-trips") {
  Dataset data;
  data.w.resize(3, 1);
  data.w << 1, 2, 3;
  data.x.resize(3, 1);
  data.x << -1, 0, 4;
  data.y.resize(3);
  data.y << 10, 20, 60;
  data.u.resize(3, 0);

  const Dataset std_data = standardize(data);
  CHECK(std::abs(column_mean(std_data.w.col(0))) < 1e-9);
  CHECK(std::abs(column_var(std_data.w.col(0)) - 1.0) < 1e-9);
  CHECK(std::abs(column_mean(std_data.y)) < 1e-9);

  const Dataset back = destandardize(std_data);
  CHECK((back.w - data.w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.x - data.x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.y - data.y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("binary treatments are never standardized") {
  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kBBinary), 200, 21);
  const Dataset std_data = standardize(data);
  CHECK((std_data.x - data.x).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < std_data.n(); ++i) {
    const double v = std_data.x(i, 0);
    CHECK((v == 0.0 || v == 1.0));
  }
  // W and Y are still normalized.
  CHECK(std::abs(column_mean(std_data.w.col(0))) < 1e-9);
  CHECK(std::abs(column_mean(std_data.y)) < 1e-9);
}

TEST_CASE("zero-variance non-binary column is a data error") {
  Dataset data;
  data.w.resize(4, 1);
  data.w << 2, 2, 2, 2;
  data.x.resize(4, 1);
  data.x << 1, 2, 3, 4;
  data.y.resize(4);
  data.y << 1, 2, 3, 4;
  data.u.resize(4, 0);
  CHECK_THROWS_AS((void)standardize(data), DataError);
}

TEST_CASE("destandardized estimate is the affine back-transform") {
  const ColumnStats x_stats{1.5, 2.0};
  const ColumnStats y_stats{-3.0, 4.0};
  CausalEstimate std_est([](double x) { return 2.0 * x + 0.5; },
                         TreatmentKind::kContinuous, Provenance{"toy", 0, 0});
  const CausalEstimate raw = destandardize_estimate(std_est, x_stats, y_stats);
  for (double x : {-2.0, 0.0, 0.7, 3.1}) {
    const double expected =
        y_stats.sd * (2.0 * (x - x_stats.mean) / x_stats.sd + 0.5) +
        y_stats.mean;
    CHECK(raw.evaluate(x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("dataset CSV round-trips exactly and the manifest restores metadata") {
  const auto dir = std::filesystem::temp_directory_path() / "spice_scm_test";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "data.csv").string();
  const std::string manifest = (dir / "data.manifest.json").string();

  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kDHighdim), 50, 77);
  write_dataset_csv(data, csv);
  write_dataset_manifest(data, manifest);

  Dataset loaded = read_dataset_csv(csv);
  apply_dataset_manifest(loaded, manifest);
  CHECK((loaded.w - data.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.x - data.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.y - data.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.u - data.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.seed == data.seed);
  CHECK(loaded.treatment_kind == data.treatment_kind);
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV reader names the offending cell") {
  const auto dir = std::filesystem::temp_directory_path() / "spice_scm_badcsv";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "bad.csv").string();
  {
    std::ofstream out(csv);
    out << "w_1,x_1,y\n1.0,2.0,3.0\n1.0,nan,3.0\n";
  }
  CHECK_THROWS_WITH_AS((void)read_dataset_csv(csv),
                       doctest::Contains("row 3"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sample_dataset rejects invalid arguments") {
  const PcScmSpec spec = benchmark_spec(BenchmarkId::kAGaussian);
  CHECK_THROWS_AS((void)sample_dataset(spec, 0, 1), ConfigError);
  CHECK_THROWS_AS((void)NoiseDistribution::gaussian(0.0, -1.0), ConfigError);
  CHECK_THROWS_AS((void)NoiseDistribution::exponential(0.0), ConfigError);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(
      (void)NoiseDistribution::multivariate_gaussian(Eigen::VectorXd::Zero(2), bad),
      ConfigError);
}
