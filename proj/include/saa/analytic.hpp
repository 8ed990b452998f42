#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "saa/distributions.hpp"
#include "saa/rng.hpp"

namespace saa {

// ---------------------------------------------------------------------------
// Strongly convex toy program with two independent standard Gaussian modes:
// the SAA solution is the scaled sample mean, so the error distribution is an
// exact chi with two degrees of freedom and the tail bound's sharpness can be
// measured against a closed form.
// ---------------------------------------------------------------------------

struct OptimalityExampleSpec {
  double alpha = 1.0;
  long long n = 16;          // samples per replication
  long long replications = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0) || n < 1 || replications < 1)
      throw std::invalid_argument("OptimalityExampleSpec: positivity violated");
  }
};

// ||u* - u_N*|| = sqrt(mean(xi_1)^2 + mean(xi_2)^2) / alpha with u* = 0;
// no PDE involved. N alpha^2 error^2 is chi-square with two degrees of
// freedom, so P(error >= eps) = exp(-N alpha^2 eps^2 / 2) exactly.
inline std::vector<double> optimality_example_errors(const OptimalityExampleSpec& spec) {
  spec.validate();
  std::vector<double> errors(static_cast<std::size_t>(spec.replications));
  RandomStream rng(derive_seed(spec.seed, {0x6f7074ULL}));
  const double inv_n = 1.0 / static_cast<double>(spec.n);
  for (long long r = 0; r < spec.replications; ++r) {
    double s1 = 0.0, s2 = 0.0;
    for (long long i = 0; i < spec.n; ++i) {
      s1 += rng.standard_normal();
      s2 += rng.standard_normal();
    }
    s1 *= inv_n;
    s2 *= inv_n;
    errors[static_cast<std::size_t>(r)] = std::sqrt(s1 * s1 + s2 * s2) / spec.alpha;
  }
  return errors;
}

inline double optimality_exact_tail(double alpha, double n, double eps) {
  return std::exp(-n * alpha * alpha * eps * eps / 2.0);
}

// E exp(||h(xi)||^2 / tau^2) for ||h(xi)||^2 chi-square with two degrees of
// freedom: the moment generating function (1 - 2/tau^2)^{-1}, finite only for
// tau^2 > 2.
inline double chi2_exp_moment(double tau_sq) {
  if (!(tau_sq > 2.0))
    throw std::invalid_argument("chi2_exp_moment: diverges for tau^2 <= 2");
  return 1.0 / (1.0 - 2.0 / tau_sq);
}

// tau^2 = 2e/(e-1) makes the exponential moment exactly e.
inline double matched_tau_sq() {
  const double e = std::exp(1.0);
  return 2.0 * e / (e - 1.0);
}

struct OptimalityGap {
  double tau_sq = 0.0;
  double constant = 0.0;        // 3 tau^2 / 2
  double exponent_ratio = 0.0;  // (alpha^2/2) / (alpha^2/(3 tau^2)), alpha-free
};

// Ratio between the exact tail exponent alpha^2 eps^2 N / 2 and the bound
// exponent alpha^2 eps^2 N / (3 tau^2): the bound is sharp up to 3 tau^2 / 2.
inline OptimalityGap optimality_gap_constant() {
  OptimalityGap g;
  g.tau_sq = matched_tau_sq();
  g.constant = 1.5 * g.tau_sq;
  const double exact_exponent = 0.5;            // coefficient of alpha^2 eps^2 N
  const double bound_exponent = 1.0 / (3.0 * g.tau_sq);
  g.exponent_ratio = exact_exponent / bound_exponent;
  return g;
}

// ---------------------------------------------------------------------------
// One-dimensional Poisson control with log-normal diffusion: everything lives
// in the span of the first Laplace eigenfunction, so gradients are scalars
// times y_d and the exponential integrability condition can be probed in
// closed form. The exp-square moment is infinite for every tau.
// ---------------------------------------------------------------------------

inline double yd_eigen_l2_norm() {
  // y_d = sin(pi x)/pi^2 on (0,1): integral of sin^2 is 1/2.
  const double pi2 = M_PI * M_PI;
  return 1.0 / (pi2 * std::sqrt(2.0));
}

inline double lognormal_c_star(double alpha) {
  const double pi2 = M_PI * M_PI;
  const double pi4 = pi2 * pi2;
  return -pi2 * std::exp(0.5) / (std::exp(2.0) + pi4 * alpha);
}

// Residual of the normal equation alpha u* + E[e^{2 xi}] Kbar*Kbar u*
// = E[e^{xi}] Kbar* y_d in the eigen-coefficient representation; zero to
// rounding for the closed-form coefficient.
inline double lognormal_normal_equation_residual(double alpha) {
  const double pi2 = M_PI * M_PI;
  const double pi4 = pi2 * pi2;
  const double c = lognormal_c_star(alpha);
  return std::abs(alpha * c + std::exp(2.0) / pi4 * c + std::exp(0.5) / pi2);
}

// Scalar factor of grad G_1(u*, xi) in front of y_d.
inline double lognormal_gradient_coefficient(double alpha, double xi) {
  const double pi2 = M_PI * M_PI;
  const double pi4 = pi2 * pi2;
  return std::exp(xi) / pi2 - std::exp(0.5 + 2.0 * xi) / (pi2 * (std::exp(2.0) + pi4 * alpha));
}

// || grad G_1(u*, xi) ||_{L^2(0,1)}; fully closed-form, no discretization.
inline double lognormal_gradient_norm(double alpha, double xi) {
  return std::abs(lognormal_gradient_coefficient(alpha, xi)) * yd_eigen_l2_norm();
}

// Above this threshold the quadratic term dominates and the gradient norm
// exceeds (e^xi / pi^2) ||y_d||.
inline double lognormal_threshold_xi(double alpha) {
  const double pi4 = M_PI * M_PI * M_PI * M_PI;
  return std::log(2.0 * (std::exp(2.0) + pi4 * alpha)) - 0.5;
}

// Deviation norm d(xi) = || grad G_1(u*, xi) - grad F_1(u*) ||: the mean
// coefficient uses E e^{xi} = e^{1/2} and E e^{2 xi} = e^2.
inline double lognormal_deviation_norm(double alpha, double xi) {
  const double pi2 = M_PI * M_PI;
  const double pi4 = pi2 * pi2;
  const double mean_coef =
      std::exp(0.5) / pi2 - std::exp(2.5) / (pi2 * (std::exp(2.0) + pi4 * alpha));
  return std::abs(lognormal_gradient_coefficient(alpha, xi) - mean_coef) * yd_eigen_l2_norm();
}

struct LognormalDemoSpec {
  double alpha = 1e-3;
  std::vector<double> tau_grid = {2.0, 5.0, 10.0, 20.0};
  std::vector<long long> sample_counts = {1000, 10000, 100000, 1000000};
  std::uint64_t seed = 0;
};

struct ExpMomentTrace {
  double tau = 0.0;
  std::vector<double> estimates;  // running Monte Carlo means per sample count
  bool exceeds_e = false;         // largest estimate above e
  bool growing = false;           // estimate at the largest count above the one two decades down
};

struct LognormalViolationReport {
  double alpha = 0.0;
  double c_star = 0.0;
  double normal_equation_residual = 0.0;
  double threshold_xi = 0.0;
  std::vector<ExpMomentTrace> lognormal;  // standard Gaussian xi: diverges
  std::vector<ExpMomentTrace> contrast;   // truncated Gaussian xi: stabilizes
};

namespace detail {

template <class DrawXi>
ExpMomentTrace exp_moment_trace(double alpha, double tau, const std::vector<long long>& counts,
                                DrawXi&& draw_xi) {
  ExpMomentTrace trace;
  trace.tau = tau;
  double sum = 0.0;
  long long done = 0;
  for (long long target : counts) {
    for (; done < target; ++done) {
      const double d = lognormal_deviation_norm(alpha, draw_xi());
      sum += std::exp(d * d / (tau * tau));
    }
    trace.estimates.push_back(sum / static_cast<double>(done));
  }
  const double e = std::exp(1.0);
  for (double v : trace.estimates) trace.exceeds_e = trace.exceeds_e || v > e;
  if (trace.estimates.size() >= 3)
    trace.growing = trace.estimates.back() > trace.estimates[trace.estimates.size() - 3];
  else
    trace.growing = trace.estimates.back() > trace.estimates.front();
  return trace;
}

}  // namespace detail

// Monte Carlo evidence that the exponential integrability condition fails for
// the log-normal law but holds for a truncated contrast: running estimates of
// E exp(d(xi)^2/tau^2) keep growing across sample decades in the first case
// and stabilize in the second. Divergence cannot be certified by sampling;
// the report states the operational indicators only.
inline LognormalViolationReport lognormal_violation_evidence(const LognormalDemoSpec& spec) {
  if (spec.tau_grid.empty() || spec.sample_counts.empty())
    throw std::invalid_argument("lognormal_violation_evidence: empty grids");
  LognormalViolationReport rep;
  rep.alpha = spec.alpha;
  rep.c_star = lognormal_c_star(spec.alpha);
  rep.normal_equation_residual = lognormal_normal_equation_residual(spec.alpha);
  rep.threshold_xi = lognormal_threshold_xi(spec.alpha);
  for (std::size_t t = 0; t < spec.tau_grid.size(); ++t) {
    RandomStream rng(derive_seed(spec.seed, {0x6c6f67ULL, static_cast<std::uint64_t>(t)}));
    rep.lognormal.push_back(detail::exp_moment_trace(
        spec.alpha, spec.tau_grid[t], spec.sample_counts,
        [&] { return rng.standard_normal(); }));
  }
  // Contrast: same construction with xi truncated to [-3, 3]; the deviation
  // is then bounded and the moment finite.
  const double pa = normal_cdf(-3.0);
  const double pb = normal_cdf(3.0);
  for (std::size_t t = 0; t < spec.tau_grid.size(); ++t) {
    RandomStream rng(derive_seed(spec.seed, {0x747275ULL, static_cast<std::uint64_t>(t)}));
    rep.contrast.push_back(detail::exp_moment_trace(
        spec.alpha, spec.tau_grid[t], spec.sample_counts,
        [&] { return normal_quantile(pa + (pb - pa) * rng.uniform01_open()); }));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Finite- versus infinite-dimensional sample demands for norm-constrained
// quadratic programs: the SAA solution is epsilon-optimal iff the squared
// norm of the sample mean stays below epsilon.
// ---------------------------------------------------------------------------

struct FiniteDimensionDemo {
  int dim = 0;
  double sigma_sq = 0.0;
  double eps = 0.0;
  double expected_sq_norm = 0.0;      // n sigma^2, Monte Carlo estimate
  double chi2_mean = 0.0;             // mean of N ||mean||^2 / sigma^2, should be ~dim
  double required_n = 0.0;            // n sigma^2 / eps
  std::vector<long long> n_values;
  std::vector<double> exceedance;     // P(||mean||^2 > eps) per N
};

inline FiniteDimensionDemo dimension_demo_finite(int dim, double sigma_sq, double eps,
                                                 long long trials, std::uint64_t seed,
                                                 std::vector<long long> n_values = {}) {
  if (dim < 1 || !(sigma_sq > 0.0) || !(eps > 0.0) || trials < 1)
    throw std::invalid_argument("dimension_demo_finite: positivity violated");
  FiniteDimensionDemo demo;
  demo.dim = dim;
  demo.sigma_sq = sigma_sq;
  demo.eps = eps;
  demo.required_n = dim * sigma_sq / eps;
  if (n_values.empty()) {
    const long long pivot = std::max<long long>(1, static_cast<long long>(demo.required_n));
    n_values = {std::max<long long>(1, pivot / 4), std::max<long long>(1, pivot / 2), pivot,
                2 * pivot};
  }
  demo.n_values = n_values;
  const double sd = std::sqrt(sigma_sq);

  {
    RandomStream rng(derive_seed(seed, {0x64696dULL, 1}));
    double acc = 0.0;
    for (long long t = 0; t < trials; ++t) {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double z = sd * rng.standard_normal();
        sq += z * z;
      }
      acc += sq;
    }
    demo.expected_sq_norm = acc / static_cast<double>(trials);
  }

  for (std::size_t j = 0; j < n_values.size(); ++j) {
    const long long n = n_values[j];
    RandomStream rng(derive_seed(seed, {0x64696dULL, 2, static_cast<std::uint64_t>(j)}));
    long long exceed = 0;
    double chi2_acc = 0.0;
    for (long long t = 0; t < trials; ++t) {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        double s = 0.0;
        for (long long i = 0; i < n; ++i) s += rng.standard_normal();
        const double mean_k = sd * s / static_cast<double>(n);
        sq += mean_k * mean_k;
      }
      if (sq > eps) ++exceed;
      chi2_acc += static_cast<double>(n) * sq / sigma_sq;
    }
    demo.exceedance.push_back(static_cast<double>(exceed) / static_cast<double>(trials));
    if (j == 0) demo.chi2_mean = chi2_acc / static_cast<double>(trials);
  }
  return demo;
}

struct InfiniteDimensionDemo {
  int k_trunc = 0;
  double variance_scale = 0.0;   // component variance c/k^2
  double eps = 0.0;
  double delta = 0.0;
  double expected_sq_norm = 0.0;  // sum_k c/k^2
  long long sufficient_n = 0;     // ceil((3/eps) ln(2/delta) E||xi||^2)
  double success_frequency = 0.0; // empirical P(||mean||^2 <= eps) at that N
};

inline InfiniteDimensionDemo dimension_demo_infinite(int k_trunc, double c, double eps,
                                                     double delta, long long trials,
                                                     std::uint64_t seed) {
  if (k_trunc < 1 || !(c > 0.0) || !(eps > 0.0) || trials < 1)
    throw std::invalid_argument("dimension_demo_infinite: positivity violated");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("dimension_demo_infinite: delta must be in (0,1)");
  InfiniteDimensionDemo demo;
  demo.k_trunc = k_trunc;
  demo.variance_scale = c;
  demo.eps = eps;
  demo.delta = delta;
  for (int k = 1; k <= k_trunc; ++k)
    demo.expected_sq_norm += c / (static_cast<double>(k) * static_cast<double>(k));
  demo.sufficient_n = static_cast<long long>(
      std::ceil(3.0 / eps * std::log(2.0 / delta) * demo.expected_sq_norm));
  const long long n = std::max<long long>(1, demo.sufficient_n);
  RandomStream rng(derive_seed(seed, {0x696e66ULL}));
  long long success = 0;
  for (long long t = 0; t < trials; ++t) {
    double sq = 0.0;
    for (int k = 1; k <= k_trunc; ++k) {
      double s = 0.0;
      for (long long i = 0; i < n; ++i) s += rng.standard_normal();
      const double mean_k = std::sqrt(c) / static_cast<double>(k) * s / static_cast<double>(n);
      sq += mean_k * mean_k;
    }
    if (sq <= eps) ++success;
  }
  demo.success_frequency = static_cast<double>(success) / static_cast<double>(trials);
  return demo;
}

// ---------------------------------------------------------------------------
// Direct Monte Carlo checks of the concentration ingredients.
// ---------------------------------------------------------------------------

struct ExpMomentCheckRow {
  double lambda = 0.0;
  double lhs = 0.0;       // E[exp(lambda |X|) - lambda |X|]
  double rhs = 0.0;       // exp(3 lambda^2 sigma^2 / 4)
  double se = 0.0;        // standard error of the lhs estimate
  bool violated = false;  // lhs > rhs + 3 se
};

struct ExpMomentCheckReport {
  double gauss_sd = 0.0;
  double sigma_sq = 0.0;  // 2 s^2 / (1 - e^{-2}), makes E exp(X^2/sigma^2) = e
  std::vector<ExpMomentCheckRow> rows;
  int violations = 0;
};

// For X ~ N(0, s^2) and sigma^2 = 2 s^2/(1 - e^{-2}), E exp(X^2/sigma^2) = e
// exactly, so the exponential moment inequality applies; each lambda is
// checked by Monte Carlo against exp(3 lambda^2 sigma^2/4).
inline ExpMomentCheckReport check_exp_moment_inequality(double gauss_sd,
                                                        const std::vector<double>& lambda_grid,
                                                        long long trials, std::uint64_t seed) {
  if (!(gauss_sd > 0.0) || trials < 2 || lambda_grid.empty())
    throw std::invalid_argument("check_exp_moment_inequality: invalid parameters");
  ExpMomentCheckReport rep;
  rep.gauss_sd = gauss_sd;
  rep.sigma_sq = 2.0 * gauss_sd * gauss_sd / (1.0 - std::exp(-2.0));
  RandomStream rng(derive_seed(seed, {0x6d6f6dULL}));
  std::vector<double> abs_x(static_cast<std::size_t>(trials));
  for (long long t = 0; t < trials; ++t)
    abs_x[static_cast<std::size_t>(t)] = std::abs(gauss_sd * rng.standard_normal());
  for (double lambda : lambda_grid) {
    if (lambda < 0.0)
      throw std::invalid_argument("check_exp_moment_inequality: lambda must be >= 0");
    ExpMomentCheckRow row;
    row.lambda = lambda;
    double sum = 0.0, sum_sq = 0.0;
    for (double a : abs_x) {
      const double v = std::exp(lambda * a) - lambda * a;
      sum += v;
      sum_sq += v * v;
    }
    const double m = static_cast<double>(trials);
    row.lhs = sum / m;
    const double var = std::max(0.0, sum_sq / m - row.lhs * row.lhs);
    row.se = std::sqrt(var / m);
    row.rhs = std::exp(0.75 * lambda * lambda * rep.sigma_sq);
    row.violated = row.lhs > row.rhs + 3.0 * row.se;
    if (row.violated) ++rep.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

struct HilbertTailRow {
  double eps = 0.0;
  double empirical = 0.0;
  double bound = 0.0;  // 2 exp(-eps^2 N / (3 dim)), capped at 1
  double se = 0.0;
  bool violated = false;
};

struct HilbertTailReport {
  int dim = 0;
  long long n = 0;
  double sigma_sq = 0.0;  // E||Z||^2 = dim for identity covariance
  std::vector<HilbertTailRow> rows;
  int violations = 0;
};

// Tail of ||Z_1 + ... + Z_N|| for standard Gaussian vectors versus the
// Hilbert-sum bound with sigma^2 = E||Z||^2 = dim.
inline HilbertTailReport check_hilbert_sum_tail(int dim, long long n, long long trials,
                                                std::uint64_t seed,
                                                std::vector<double> eps_grid = {}) {
  if (dim < 1 || n < 1 || trials < 2)
    throw std::invalid_argument("check_hilbert_sum_tail: invalid parameters");
  HilbertTailReport rep;
  rep.dim = dim;
  rep.n = n;
  rep.sigma_sq = static_cast<double>(dim);
  if (eps_grid.empty()) {
    // Around the bulk of ||mean||: scale sqrt(dim/N).
    const double scale = std::sqrt(static_cast<double>(dim) / static_cast<double>(n));
    eps_grid = {0.0, 0.5 * scale, scale, 1.5 * scale, 2.0 * scale, 3.0 * scale};
  }
  RandomStream rng(derive_seed(seed, {0x68696cULL}));
  std::vector<double> norms(static_cast<std::size_t>(trials));
  for (long long t = 0; t < trials; ++t) {
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      double s = 0.0;
      for (long long i = 0; i < n; ++i) s += rng.standard_normal();
      sq += s * s;
    }
    norms[static_cast<std::size_t>(t)] = std::sqrt(sq);
  }
  for (double eps : eps_grid) {
    HilbertTailRow row;
    row.eps = eps;
    long long count = 0;
    const double threshold = static_cast<double>(n) * eps;
    for (double v : norms)
      if (v >= threshold) ++count;
    row.empirical = static_cast<double>(count) / static_cast<double>(trials);
    row.bound = std::min(1.0, 2.0 * std::exp(-eps * eps * static_cast<double>(n) /
                                             (3.0 * static_cast<double>(dim))));
    row.se = std::sqrt(row.empirical * (1.0 - row.empirical) / static_cast<double>(trials));
    row.violated = row.empirical > row.bound + 3.0 * row.se;
    if (row.violated) ++rep.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace saa
