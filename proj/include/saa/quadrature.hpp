#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace saa {

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (QUADPACK values).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct GkResult {
  double integral;
  double error;
};

inline GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(c - half * kKronrodNodes[i]);
    fv[14 - i] = f(c + half * kKronrodNodes[i]);
  }
  fv[7] = f(c);
  double kronrod = 0.0;
  for (int i = 0; i < 7; ++i) kronrod += kKronrodWeights[i] * (fv[i] + fv[14 - i]);
  kronrod += kKronrodWeights[7] * fv[7];
  kronrod *= half;
  // Gauss points are the odd Kronrod nodes.
  double gauss = 0.0;
  for (int i = 0; i < 3; ++i) gauss += kGaussWeights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
  gauss += kGaussWeights[3] * fv[7];
  gauss *= half;
  return {kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration to an absolute tolerance. Intervals with
// the largest error estimate are bisected first.
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double abs_tol = 1e-12, std::size_t max_intervals = 20000) {
  if (!(b > a)) throw std::invalid_argument("integrate_adaptive: empty interval");
  struct Piece {
    double a, b, integral, error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    auto r = detail::gk15(f, lo, hi);
    return Piece{lo, hi, r.integral, r.error};
  };
  std::priority_queue<Piece> pieces;
  pieces.push(eval(a, b));
  double total = pieces.top().integral;
  double total_err = pieces.top().error;
  while (total_err > abs_tol && pieces.size() < max_intervals) {
    Piece worst = pieces.top();
    pieces.pop();
    double mid = 0.5 * (worst.a + worst.b);
    Piece left = eval(worst.a, mid);
    Piece right = eval(mid, worst.b);
    total += left.integral + right.integral - worst.integral;
    total_err += left.error + right.error - worst.error;
    pieces.push(left);
    pieces.push(right);
  }
  if (total_err > abs_tol)
    throw std::runtime_error("integrate_adaptive: tolerance not reached");
  return total;
}

}  // namespace saa
