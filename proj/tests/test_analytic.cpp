#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saa/analytic.hpp"
#include "saa/statistics.hpp"
#include "test_support.hpp"

using namespace saa;

TEST_CASE("chi-square toy program") {
  OptimalityExampleSpec spec;
  spec.alpha = 1.0;
  spec.n = 16;
  spec.replications = 100000;
  spec.seed = 4242;
  std::vector<double> errors = optimality_example_errors(spec);

  SUBCASE("N alpha^2 error^2 is chi-square with two degrees of freedom") {
    double acc = 0.0;
    for (double e : errors) acc += spec.alpha * spec.alpha * e * e * static_cast<double>(spec.n);
    acc /= static_cast<double>(errors.size());
    CHECK(acc == doctest::Approx(2.0).epsilon(0.02));
  }
  SUBCASE("empirical tail matches the closed form within 3 binomial SEs") {
    for (double f : {0.5, 1.0, 1.5}) {
      const double eps = f / (spec.alpha * std::sqrt(static_cast<double>(spec.n)));
      long long count = 0;
      for (double e : errors)
        if (e >= eps) ++count;
      const double empirical = static_cast<double>(count) / static_cast<double>(errors.size());
      const double exact = optimality_exact_tail(spec.alpha, static_cast<double>(spec.n), eps);
      const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(errors.size()));
      CHECK(std::abs(empirical - exact) <= 3.0 * se);
    }
  }
  SUBCASE("RMS error vanishes as N grows") {
    OptimalityExampleSpec big = spec;
    big.n = 4096;
    big.replications = 2000;
    std::vector<double> coarse = optimality_example_errors(spec);
    std::vector<double> fine = optimality_example_errors(big);
    auto rms = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s / static_cast<double>(v.size()));
    };
    CHECK(rms(fine) < 0.125 * rms(coarse));
  }
}

TEST_CASE("chi-square exponential moment") {
  const double tau_sq = matched_tau_sq();
  CHECK(chi2_exp_moment(tau_sq) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(chi2_exp_moment(4.0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK_THROWS_AS(chi2_exp_moment(2.0), std::invalid_argument);
  CHECK_THROWS_AS(chi2_exp_moment(1.5), std::invalid_argument);
}

TEST_CASE("optimality gap constant") {
  OptimalityGap gap = optimality_gap_constant();
  const double e = std::exp(1.0);
  CHECK(gap.constant == doctest::Approx(3.0 * e / (e - 1.0)).epsilon(1e-12));
  CHECK(gap.constant == doctest::Approx(4.7459).epsilon(1e-4));
  CHECK(gap.exponent_ratio == doctest::Approx(gap.constant).epsilon(1e-12));
  SUBCASE("tail bound dominates the exact tail on a grid") {
    for (double n : {1.0, 4.0, 64.0, 1024.0})
      for (double eps : {0.01, 0.1, 0.5, 1.0, 3.0})
        CHECK(bound_tail_pinelis(1.0, std::sqrt(gap.tau_sq), n, eps) >=
              optimality_exact_tail(1.0, n, eps));
  }
}

TEST_CASE("log-normal violation closed forms") {
  const double alpha = 1e-3;
  SUBCASE("target norm") {
    CHECK(yd_eigen_l2_norm() == doctest::Approx(1.0 / (M_PI * M_PI * std::sqrt(2.0))).epsilon(1e-14));
    CHECK(yd_eigen_l2_norm() == doctest::Approx(0.071676).epsilon(1e-4));
  }
  SUBCASE("optimal coefficient and normal-equation residual") {
    CHECK(lognormal_c_star(alpha) == doctest::Approx(-2.1737).epsilon(1e-4));
    CHECK(lognormal_normal_equation_residual(alpha) <= 1e-12);
    CHECK(lognormal_normal_equation_residual(0.1) <= 1e-12);
  }
  SUBCASE("threshold value and inequality on a grid") {
    const double xi_star = lognormal_threshold_xi(alpha);
    CHECK(xi_star == doctest::Approx(2.2063).epsilon(1e-3));
    const double pi2 = M_PI * M_PI;
    for (int i = 0; i < 100; ++i) {
      const double xi = xi_star + 6.0 * i / 99.0;
      CHECK(lognormal_gradient_norm(alpha, xi) >=
            std::exp(xi) / pi2 * yd_eigen_l2_norm() * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("log-normal exponential moment growth versus truncated contrast") {
  LognormalDemoSpec spec;
  spec.alpha = 1e-3;
  spec.tau_grid = {10.0};
  spec.sample_counts = {1000, 10000, 100000, 1000000};
  spec.seed = 777;
  LognormalViolationReport rep = lognormal_violation_evidence(spec);
  REQUIRE(rep.lognormal.size() == 1);
  REQUIRE(rep.contrast.size() == 1);
  const auto& ln = rep.lognormal[0];
  // Estimate at 1e6 samples exceeds the estimate at 1e4 samples.
  CHECK(ln.estimates[3] > ln.estimates[1]);
  CHECK(ln.growing);
  const auto& tr = rep.contrast[0];
  CHECK(tr.estimates[3] <= std::exp(1.0));
  CHECK(std::abs(tr.estimates[3] - tr.estimates[2]) <= 0.01 * tr.estimates[3]);
  CHECK(rep.normal_equation_residual <= 1e-12);
}

TEST_CASE("finite-dimensional sample demand") {
  FiniteDimensionDemo demo = dimension_demo_finite(10, 1.0, 0.1, 10000, 5150);
  SUBCASE("E||zeta||^2 = n sigma^2 within 1%") {
    CHECK(demo.expected_sq_norm == doctest::Approx(10.0).epsilon(0.01));
  }
  SUBCASE("N ||mean||^2 / sigma^2 has mean n within 2%") {
    CHECK(demo.chi2_mean == doctest::Approx(10.0).epsilon(0.02));
  }
  SUBCASE("exceedance at N = n sigma^2/(2 eps) stays above 0.3") {
    // required_n = 100, so n_values = {25, 50, 100, 200}; index 1 is the
    // half-demand point.
    REQUIRE(demo.n_values.size() == 4);
    CHECK(demo.n_values[1] == 50);
    CHECK(demo.exceedance[1] >= 0.3);
  }
  SUBCASE("exceedance decreases with N") {
    CHECK(demo.exceedance.front() >= demo.exceedance.back());
  }
}

TEST_CASE("infinite-dimensional sample demand") {
  SUBCASE("Basel sum") {
    InfiniteDimensionDemo demo = dimension_demo_infinite(100000, 1.0, 0.5, 0.05, 1, 1);
    CHECK(demo.expected_sq_norm == doctest::Approx(M_PI * M_PI / 6.0).epsilon(2e-5));
  }
  SUBCASE("sufficient N depends on the truncation only through the sum") {
    InfiniteDimensionDemo demo = dimension_demo_infinite(100, 1.0, 0.5, 0.05, 1, 1);
    const long long expected = static_cast<long long>(
        std::ceil(3.0 / 0.5 * std::log(2.0 / 0.05) * demo.expected_sq_norm));
    CHECK(demo.sufficient_n == expected);
  }
  SUBCASE("success frequency at the sufficient N") {
    InfiniteDimensionDemo demo = dimension_demo_infinite(100, 1.0, 0.5, 0.05, 10000, 99);
    CHECK(demo.success_frequency >= 0.95);
  }
}

TEST_CASE("exponential moment inequality check") {
  ExpMomentCheckReport rep = check_exp_moment_inequality(1.0, {0.0, 0.5, 1.0, 2.0, 4.0}, 200000, 31);
  SUBCASE("lambda = 0 is an equality") {
    CHECK(rep.rows[0].lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.rows[0].rhs == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("no violations at 3 standard errors") { CHECK(rep.violations == 0); }
  SUBCASE("slack grows with lambda beyond 4/(3 sigma)") {
    const double kink = 4.0 / (3.0 * std::sqrt(rep.sigma_sq));
    double prev_slack = -1.0;
    for (const auto& row : rep.rows) {
      if (row.lambda < kink) continue;
      const double slack = row.rhs - row.lhs;
      CHECK(slack > prev_slack);
      prev_slack = slack;
    }
  }
  SUBCASE("sigma matches the matched-moment constant") {
    CHECK(rep.sigma_sq == doctest::Approx(2.0 / (1.0 - std::exp(-2.0))).epsilon(1e-14));
  }
}

TEST_CASE("hilbert sum tail check") {
  SUBCASE("dim 2: exact chi-square tail stays below the bound") {
    // ||Z_1+...+Z_N||^2 / N ~ chi^2_2, so P(||S|| >= N eps) = exp(-N eps^2/2).
    for (double n : {4.0, 16.0, 64.0})
      for (double eps : {0.1, 0.5, 1.0})
        CHECK(std::exp(-n * eps * eps / 2.0) <= bound_hilbert_sum(std::sqrt(2.0), n, eps));
  }
  SUBCASE("no empirical violations") {
    HilbertTailReport rep = check_hilbert_sum_tail(2, 16, 50000, 8);
    CHECK(rep.violations == 0);
    CHECK(rep.rows.front().empirical <= 1.0);
    HilbertTailReport rep10 = check_hilbert_sum_tail(10, 8, 20000, 9);
    CHECK(rep10.violations == 0);
  }
  SUBCASE("eps = 0 row is trivially dominated") {
    HilbertTailReport rep = check_hilbert_sum_tail(3, 4, 1000, 10);
    CHECK(rep.rows[0].eps == 0.0);
    CHECK(rep.rows[0].bound == 1.0);
    CHECK(rep.rows[0].empirical == 1.0);
  }
}

TEST_CASE("closed-form scalars are pure") {
  CHECK(chi2_exp_moment(3.0) == chi2_exp_moment(3.0));
  CHECK(matched_tau_sq() == matched_tau_sq());
  CHECK(lognormal_c_star(1e-3) == lognormal_c_star(1e-3));
  CHECK(lognormal_threshold_xi(1e-3) == lognormal_threshold_xi(1e-3));
  CHECK(yd_eigen_l2_norm() == yd_eigen_l2_norm());
  CHECK(optimality_gap_constant().constant == optimality_gap_constant().constant);
}

TEST_CASE("chi toy errors feed the harness statistics at rate -1/2") {
  OptimalityExampleSpec spec;
  spec.alpha = 1.0;
  spec.replications = 2000;
  spec.seed = 1234;
  std::vector<double> n_values, means;
  for (long long n : {4LL, 16LL, 64LL, 256LL}) {
    OptimalityExampleSpec s = spec;
    s.n = n;
    s.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(n)});
    std::vector<double> errors = optimality_example_errors(s);
    double mean = 0.0;
    for (double e : errors) mean += e;
    n_values.push_back(static_cast<double>(n));
    means.push_back(mean / static_cast<double>(errors.size()));
  }
  RateFit fit = fit_rate(n_values, means);
  CHECK(fit.rate == doctest::Approx(-0.5).epsilon(0.1));
}
