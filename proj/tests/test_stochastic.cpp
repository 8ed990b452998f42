#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "saa/distributions.hpp"
#include "saa/rng.hpp"
#include "test_support.hpp"

using namespace saa;

TEST_CASE("normal quantile and cdf round-trip") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.9, 1.0 - 1e-6}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("draw: support, reproducibility, moments") {
  SUBCASE("uniform draws stay inside the interval") {
    SampleSet s = draw(ParamDistribution::uniform(-1.0, 1.0), 1000, 42);
    CHECK(s.values.minCoeff() >= -1.0);
    CHECK(s.values.maxCoeff() <= 1.0);
  }
  SUBCASE("truncated normal draws stay inside [lo, hi]") {
    SampleSet s = draw(ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.25), 5000, 7);
    CHECK(s.values.minCoeff() >= 0.5);
    CHECK(s.values.maxCoeff() <= 3.5);
  }
  SUBCASE("same seed reproduces the sample matrix bit-exactly") {
    ParamDistribution d = ParamDistribution::product(
        {ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.25),
         ParamDistribution::uniform(-1.0, 1.0)});
    SampleSet a = draw(d, 257, 123456);
    SampleSet b = draw(d, 257, 123456);
    CHECK((a.values - b.values).lpNorm<Eigen::Infinity>() == 0.0);
    SampleSet c = draw(d, 257, 123457);
    CHECK((a.values - c.values).lpNorm<Eigen::Infinity>() != 0.0);
  }
  SUBCASE("truncated normal empirical mean over 1e6 draws") {
    SampleSet s = draw(ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.25), 1000000, 99);
    CHECK(s.values.col(0).mean() == doctest::Approx(2.0).epsilon(5e-4));
  }
  SUBCASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(ParamDistribution::truncated_normal(3.0, 1.0, 2.0, 0.25),
                    std::invalid_argument);
    CHECK_THROWS_AS(ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(ParamDistribution::uniform(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(draw(ParamDistribution::uniform(0.0, 1.0), 0, 1), std::invalid_argument);
  }
}

TEST_CASE("truncated normal inverse moments") {
  SUBCASE("reference values frozen from the 1e7-point Riemann oracle") {
    // Oracle: testsupport::riemann_inverse_moments at n=1e7 (run ahead of the
    // implementation), TruncatedNormal(0.5, 3.5, 2, 0.25).
    const double m1_ref = 0.50821098501097642;
    const double m2_ref = 0.26275156201444317;
    InverseMoments m = truncated_normal_inverse_moments(0.5, 3.5, 2.0, 0.25);
    CHECK(m.m1 == doctest::Approx(m1_ref).epsilon(1e-10));
    CHECK(m.m2 == doctest::Approx(m2_ref).epsilon(1e-10));
    // Cross-check the oracle itself at 2e6 points.
    double m1o = 0.0, m2o = 0.0;
    testsupport::riemann_inverse_moments(0.5, 3.5, 2.0, 0.25, 2000000, m1o, m2o);
    CHECK(m1o == doctest::Approx(m1_ref).epsilon(1e-9));
    CHECK(m2o == doctest::Approx(m2_ref).epsilon(1e-9));
  }
  SUBCASE("point-mass limit at sd = 1e-8") {
    InverseMoments m = truncated_normal_inverse_moments(0.5, 3.5, 2.0, 1e-8);
    CHECK(m.m1 == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(m.m2 == doctest::Approx(0.25).epsilon(1e-6));
  }
  SUBCASE("Jensen: m2 >= m1^2") {
    for (double sd : {0.1, 0.25, 0.8}) {
      InverseMoments m = truncated_normal_inverse_moments(0.5, 3.5, 2.0, sd);
      CHECK(m.m2 >= m.m1 * m.m1);
    }
  }
  CHECK_THROWS_AS(truncated_normal_inverse_moments(0.0, 3.5, 2.0, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(truncated_normal_inverse_moments(-1.0, 3.5, 2.0, 0.25), std::invalid_argument);
}

TEST_CASE("adaptive quadrature basics") {
  // Smooth closed forms to 1e-12.
  CHECK(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, M_PI) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate_adaptive([](double x) { return x * x * x; }, -1.0, 2.0) ==
        doctest::Approx(3.75).epsilon(1e-12));
  CHECK_THROWS_AS(integrate_adaptive([](double x) { return x; }, 1.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("discrete 2d grid") {
  SUBCASE("k=50 gives 2500 equally weighted atoms") {
    ParamDistribution d = discrete_grid(3.0, 5.0, 0.5, 2.5, 50);
    Eigen::MatrixXd atoms = grid_atoms(std::get<DiscreteGrid2D>(d.v));
    CHECK(atoms.rows() == 2500);
    CHECK(atoms.col(0).mean() == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(atoms.col(1).mean() == doctest::Approx(1.5).epsilon(1e-13));
    CHECK(atoms.col(0).minCoeff() == doctest::Approx(3.0));
    CHECK(atoms.col(0).maxCoeff() == doctest::Approx(5.0));
  }
  SUBCASE("k=1 degenerates to the grid center") {
    Eigen::MatrixXd atoms = grid_atoms(std::get<DiscreteGrid2D>(discrete_grid(3, 5, 0.5, 2.5, 1).v));
    REQUIRE(atoms.rows() == 1);
    CHECK(atoms(0, 0) == doctest::Approx(4.0));
    CHECK(atoms(0, 1) == doctest::Approx(1.5));
  }
  SUBCASE("sampling hits only atoms") {
    ParamDistribution d = discrete_grid(3.0, 5.0, 0.5, 2.5, 4);
    Eigen::MatrixXd atoms = grid_atoms(std::get<DiscreteGrid2D>(d.v));
    std::set<std::pair<double, double>> atom_set;
    for (Eigen::Index a = 0; a < atoms.rows(); ++a)
      atom_set.insert({atoms(a, 0), atoms(a, 1)});
    SampleSet s = draw(d, 500, 31);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      CHECK(atom_set.count({s.values(i, 0), s.values(i, 1)}) == 1);
  }
  CHECK_THROWS_AS(discrete_grid(3, 5, 0.5, 2.5, 0), std::invalid_argument);
}

TEST_CASE("empirical moments converge at 1/sqrt(N) in RMS over seeds") {
  ParamDistribution d = ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.25);
  auto rms_error = [&](Eigen::Index n) {
    double acc = 0.0;
    const int seeds = 40;
    for (int s = 0; s < seeds; ++s) {
      SampleSet set = draw(d, n, derive_seed(1000, {static_cast<std::uint64_t>(s)}));
      const double err = set.values.col(0).mean() - 2.0;
      acc += err * err;
    }
    return std::sqrt(acc / seeds);
  };
  const double ratio = rms_error(100) / rms_error(1600);
  CHECK(ratio > 2.0);  // expect ~4
  CHECK(ratio < 8.0);
}

TEST_CASE("product distribution dimensions") {
  ParamDistribution d = ParamDistribution::product(
      {ParamDistribution::standard_normal(), ParamDistribution::uniform(0, 1),
       ParamDistribution::standard_normal()});
  CHECK(d.dimension() == 3);
  SampleSet s = draw(d, 10, 5);
  CHECK(s.values.cols() == 3);
  CHECK(s.values.col(1).minCoeff() >= 0.0);
  CHECK(s.values.col(1).maxCoeff() <= 1.0);
}
