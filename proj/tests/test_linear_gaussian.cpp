#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "spice/common.hpp"
#include "spice/linear_gaussian.hpp"
#include "spice/rng.hpp"
#include "spice/scm.hpp"

using namespace spice;

namespace {

LinearScmParams all_ones() { return LinearScmParams{}; }

LinearScmParams random_params(Rng& rng) {
  LinearScmParams p;
  p.a_uw = 0.5 + rng.uniform() * 1.5;
  p.a_ux = 0.5 + rng.uniform() * 1.5;
  p.a_uy = -1.0 + rng.uniform() * 2.0;
  p.a_xy = -1.0 + rng.uniform() * 2.0;
  p.var_nu = 0.5 + rng.uniform();
  p.var_e = 0.5 + rng.uniform();
  p.var_nx = 0.5 + rng.uniform();
  p.var_ny = 0.5 + rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("population covariance entries on the all-ones parameterization") {
  // Hand substitution into the V entries: s_xx = 2, s_ww = 2, s_wx = 1,
  // s_wy = 2, s_xy = 3.
  const SecondMoments m = population_covariance(all_ones());
  CHECK(m.s_xx == doctest::Approx(2.0));
  CHECK(m.s_ww == doctest::Approx(2.0));
  CHECK(m.s_wx == doctest::Approx(1.0));
  CHECK(m.s_wy == doctest::Approx(2.0));
  CHECK(m.s_xy == doctest::Approx(3.0));
  CHECK(*m.s_uu == doctest::Approx(1.0));
}

TEST_CASE("no path into X zeroes the corresponding covariances") {
  LinearScmParams p = all_ones();
  p.a_ux = 0.0;
  const SecondMoments m = population_covariance(p);
  CHECK(*m.s_ux == 0.0);
  CHECK(m.s_wx == 0.0);
}

TEST_CASE("outcome driven only by its own noise is uncorrelated with X") {
  LinearScmParams p = all_ones();
  p.a_xy = 0.0;
  p.a_uy = 0.0;
  const SecondMoments m = population_covariance(p);
  CHECK(m.s_xy == 0.0);
}

TEST_CASE("adjusting for U recovers the causal coefficient") {
  CHECK(ols_coeff_adjust_u(population_covariance(all_ones())) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("without U moments the U regression degenerates to simple OLS") {
  SecondMoments m;
  m.s_xx = 2.0;
  m.s_xy = 3.0;
  m.s_uu = 1.0;
  m.s_ux = 0.0;
  m.s_uy = 0.0;
  CHECK(ols_coeff_adjust_u(m) == doctest::Approx(3.0 / 2.0));
}

TEST_CASE("Monte-Carlo moments reproduce the adjust-U coefficient") {
  const Dataset data = sample_dataset(all_ones().to_scm(), 1000000, 31);
  const SecondMoments m = empirical_moments(data);
  CHECK(ols_coeff_adjust_u(m) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("adjusting for the proxy carries the closed-form bias") {
  // 1 + 1 / (1 + 1 + 1) = 4/3 on the all-ones parameterization.
  const LinearScmParams p = all_ones();
  CHECK(ols_coeff_adjust_w(population_covariance(p)) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(bias_term(p) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Cross-check against OLS on simulated draws.
  const Dataset data = sample_dataset(p.to_scm(), 1000000, 77);
  const SecondMoments emp = empirical_moments(data);
  CHECK(ols_coeff_adjust_w(emp) == doctest::Approx(4.0 / 3.0).epsilon(0.01));
}

TEST_CASE("no confounding into Y removes the bias") {
  LinearScmParams p = all_ones();
  p.a_uy = 0.0;
  CHECK(bias_term(p) == 0.0);
}

TEST_CASE("bias vanishes as the proxy noise shrinks") {
  LinearScmParams p = all_ones();
  double last = std::numeric_limits<double>::infinity();
  for (double var_e : {1.0, 0.1, 0.01}) {
    p.var_e = var_e;
    const double b = bias_term(p);
    CHECK(b < last);
    last = b;
  }
  CHECK(last < 0.01);
}

TEST_CASE("corrected estimator at the all-ones parameterization") {
  // (3 - 2 * 1 / (2 - 1)) / (2 - 1 / (2 - 1)) = 1.
  const SecondMoments m = population_covariance(all_ones());
  CHECK(corrected_estimator(m, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a noiseless proxy reduces the correction to adjust-U with W as U") {
  LinearScmParams p = all_ones();
  p.var_e = 1e-12;
  const SecondMoments m = population_covariance(p);
  // With sigma_E^2 = 0 the corrected form equals the (X, W)-regression in
  // which W plays the role of U.
  SecondMoments with_w_as_u = m;
  with_w_as_u.s_uu = m.s_ww;
  with_w_as_u.s_ux = m.s_wx;
  with_w_as_u.s_uy = m.s_wy;
  CHECK(corrected_estimator(m, 0.0) ==
        doctest::Approx(ols_coeff_adjust_u(with_w_as_u)).epsilon(1e-9));
}

TEST_CASE("corrected estimator on benchmark A empirical moments") {
  const Dataset data =
      sample_dataset(benchmark_spec(BenchmarkId::kAGaussian), 100000, 12);
  const SecondMoments m = empirical_moments(data);
  CHECK(corrected_estimator(m, 1.0) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("corrected estimator recovers a_xy across random parameterizations") {
  Rng rng(88);
  int tested = 0;
  while (tested < 200) {
    const LinearScmParams p = random_params(rng);
    const SecondMoments m = population_covariance(p);
    const double denom = m.s_xx - m.s_wx * m.s_wx / (m.s_ww - p.var_e);
    if (!(denom > 1e-3 * m.s_xx)) continue;  // keep well-conditioned cases
    CHECK(corrected_estimator(m, p.var_e) ==
          doctest::Approx(p.a_xy).epsilon(1e-12));
    ++tested;
  }
}

TEST_CASE("adjust-W minus adjust-U equals the bias term at population moments") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const LinearScmParams p = random_params(rng);
    const SecondMoments m = population_covariance(p);
    const double gap = ols_coeff_adjust_w(m) - ols_coeff_adjust_u(m);
    CHECK(gap == doctest::Approx(bias_term(p)).epsilon(1e-10));
  }
}

TEST_CASE("bias term is monotone in var_nx and var_e over a grid") {
  for (double a_ux : {0.5, 1.0, 2.0}) {
    for (double a_uw : {0.5, 1.0, 2.0}) {
      LinearScmParams p = all_ones();
      p.a_ux = a_ux;
      p.a_uw = a_uw;
      double prev = std::numeric_limits<double>::infinity();
      for (double var_nx : {0.5, 1.0, 2.0, 4.0}) {
        p.var_nx = var_nx;
        const double b = bias_term(p);
        CHECK(b < prev);
        prev = b;
      }
      p.var_nx = 1.0;
      prev = -std::numeric_limits<double>::infinity();
      for (double var_e : {0.5, 1.0, 2.0, 4.0}) {
        p.var_e = var_e;
        const double b = bias_term(p);
        CHECK(b > prev);
        prev = b;
      }
    }
  }
}

TEST_CASE("all three estimators agree without confounding") {
  for (int which : {0, 1}) {
    LinearScmParams p = all_ones();
    if (which == 0) {
      p.a_ux = 0.0;
    } else {
      p.a_uy = 0.0;
    }
    const SecondMoments m = population_covariance(p);
    const double u_coeff = ols_coeff_adjust_u(m);
    CHECK(u_coeff == doctest::Approx(p.a_xy).epsilon(1e-12));
    CHECK(ols_coeff_adjust_w(m) == doctest::Approx(u_coeff).epsilon(1e-12));
    CHECK(corrected_estimator(m, p.var_e) ==
          doctest::Approx(u_coeff).epsilon(1e-12));
  }
}

TEST_CASE("error guards") {
  const SecondMoments m = population_covariance(all_ones());
  // Proxy noisier than itself.
  CHECK_THROWS_AS((void)corrected_estimator(m, 5.0), NumericError);
  LinearScmParams bad = all_ones();
  bad.var_nu = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SecondMoments degenerate = m;
  degenerate.s_uu = 1.0;
  degenerate.s_ux = std::sqrt(degenerate.s_xx);  // perfectly collinear
  CHECK_THROWS_AS((void)ols_coeff_adjust_u(degenerate), NumericError);
}
