#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace saa {

// Empirical Luxemburg norm for phi(x) = exp(x^2) - 1: the unique nu > 0 with
// (1/R) sum (exp((e_i/nu)^2) - 1) = 1. The objective is strictly decreasing
// in nu, and [e_max/sqrt(ln(1+R)), e_max/sqrt(ln 2)] brackets the root.
inline double luxemburg_estimate(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("luxemburg_estimate: no errors");
  double e_max = 0.0;
  for (double e : errors) {
    if (e < 0.0) throw std::invalid_argument("luxemburg_estimate: negative error");
    e_max = std::max(e_max, e);
  }
  if (e_max == 0.0) return 0.0;
  const double r = static_cast<double>(errors.size());
  auto target = [&](double nu) {
    double s = 0.0;
    for (double e : errors) s += std::expm1((e / nu) * (e / nu));
    return s / r - 1.0;
  };
  double lo = e_max / std::sqrt(std::log1p(r));
  double hi = e_max / std::sqrt(std::log(2.0));
  if (lo >= hi) return hi;  // single sample: closed form e_max/sqrt(ln 2)
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (target(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct RateFit {
  double logC = 0.0;
  double rate = 0.0;
  double C() const { return std::exp(logC); }
};

// Ordinary least squares of ln(value) on ln(N).
inline RateFit fit_rate(const std::vector<double>& n_values, const std::vector<double>& values) {
  if (n_values.size() != values.size() || n_values.size() < 2)
    throw std::invalid_argument("fit_rate: needs >= 2 matching points");
  const double m = static_cast<double>(n_values.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (!(n_values[i] > 0.0) || !(values[i] > 0.0))
      throw std::invalid_argument("fit_rate: points must be positive");
    const double x = std::log(n_values[i]);
    const double y = std::log(values[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissae");
  RateFit f;
  f.rate = (m * sxy - sx * sy) / denom;
  f.logC = (sy - f.rate * sx) / m;
  return f;
}

// Mean square error bound sigma^2 / (alpha^2 N).
inline double bound_mean_square(double alpha, double sigma, double n) {
  if (!(alpha > 0.0) || !(sigma >= 0.0) || !(n > 0.0))
    throw std::invalid_argument("bound_mean_square: invalid parameters");
  return sigma * sigma / (alpha * alpha * n);
}

// Exponential tail bound min(1, 2 exp(-N eps^2 alpha^2 / (3 tau^2))).
inline double bound_tail_pinelis(double alpha, double tau, double n, double eps) {
  if (!(alpha > 0.0) || !(tau > 0.0) || !(n > 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("bound_tail_pinelis: invalid parameters");
  return std::min(1.0, 2.0 * std::exp(-n * eps * eps * alpha * alpha / (3.0 * tau * tau)));
}

// Smallest N with 2 exp(-N eps^2 alpha^2 / (3 tau^2)) <= delta:
// ceil(3 tau^2 ln(2/delta) / (alpha^2 eps^2)).
inline long long sample_size_for(double alpha, double tau, double eps, double delta) {
  if (!(alpha > 0.0) || !(tau > 0.0) || !(eps > 0.0))
    throw std::invalid_argument("sample_size_for: invalid parameters");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("sample_size_for: delta must be in (0,1)");
  const double raw = 3.0 * tau * tau * std::log(2.0 / delta) / (alpha * alpha * eps * eps);
  return static_cast<long long>(std::ceil(raw));
}

// Luxemburg-norm bound 3 sqrt(3) tau / (alpha sqrt(N)).
inline double bound_luxemburg(double alpha, double tau, double n) {
  if (!(alpha > 0.0) || !(tau >= 0.0) || !(n > 0.0))
    throw std::invalid_argument("bound_luxemburg: invalid parameters");
  return 3.0 * std::sqrt(3.0) * tau / (alpha * std::sqrt(n));
}

enum class HilbertSumVariant { ExpSquare, Cosh };

// Tail bound for Hilbert-space random sums: P(||Z_1+...+Z_N|| >= N eps)
// <= 2 exp(-eps^2 N / (3 c^2)), with c the exp-square constant tau or the
// cosh constant sigma (same formula either way).
inline double bound_hilbert_sum(double c, double n, double eps,
                                HilbertSumVariant /*variant*/ = HilbertSumVariant::ExpSquare) {
  if (!(c > 0.0) || !(n > 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("bound_hilbert_sum: invalid parameters");
  return std::min(1.0, 2.0 * std::exp(-eps * eps * n / (3.0 * c * c)));
}

// Parameter bundle for the bound evaluators.
struct BoundParams {
  double alpha = 1.0;
  double sigma = 1.0;
  double tau = 1.0;
  double epsilon = 0.1;
  double delta = 0.05;
  double n = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !(sigma > 0.0) || !(tau > 0.0) || !(epsilon > 0.0) || !(n > 0.0))
      throw std::invalid_argument("BoundParams: positivity violated");
    if (!(delta > 0.0 && delta < 1.0))
      throw std::invalid_argument("BoundParams: delta must be in (0,1)");
  }
  double mean_square() const { return bound_mean_square(alpha, sigma, n); }
  double tail() const { return bound_tail_pinelis(alpha, tau, n, epsilon); }
  long long sample_size() const { return sample_size_for(alpha, tau, epsilon, delta); }
  double luxemburg() const { return bound_luxemburg(alpha, tau, n); }
};

struct SigmaTau {
  double sigma_hat = 0.0;
  double tau_hat = 0.0;
};

// sigma_hat: RMS of the deviation norms. tau_hat: smallest tau with
// mean exp(d_i^2/tau^2) <= e, found by bisection on
// [d_max/sqrt(1+ln M), d_max] to 1e-6 relative width.
inline SigmaTau estimate_sigma_tau_from_deviations(const std::vector<double>& devs) {
  if (devs.size() < 2) throw std::invalid_argument("estimate_sigma_tau: needs M >= 2");
  SigmaTau out;
  double sq = 0.0, d_max = 0.0;
  for (double d : devs) {
    if (d < 0.0) throw std::invalid_argument("estimate_sigma_tau: negative deviation");
    sq += d * d;
    d_max = std::max(d_max, d);
  }
  out.sigma_hat = std::sqrt(sq / static_cast<double>(devs.size()));
  if (d_max == 0.0) return out;
  const double m = static_cast<double>(devs.size());
  auto exp_moment = [&](double tau) {
    double s = 0.0;
    for (double d : devs) s += std::exp((d / tau) * (d / tau));
    return s / m;
  };
  double lo = d_max / std::sqrt(1.0 + std::log(m));
  double hi = d_max;
  const double e = std::exp(1.0);
  if (exp_moment(lo) <= e) {
    out.tau_hat = lo;
    return out;
  }
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (exp_moment(mid) <= e)
      hi = mid;
    else
      lo = mid;
  }
  out.tau_hat = hi;
  return out;
}

}  // namespace saa
