#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "saa/quadrature.hpp"
#include "saa/rng.hpp"

namespace saa {

// Parameter laws used by the experiments: a truncated normal diffusion
// coefficient, uniform right-hand-side weights, the k^2-atom grid that
// replaces the continuous law in the reference problem, and standard
// Gaussians for the closed-form constructions.
struct TruncatedNormal {
  double lo, hi, mean, sd;
};
struct Uniform {
  double lo, hi;
};
struct DiscreteGrid2D {
  double lo1, hi1, lo2, hi2;
  int k;  // atoms per axis, equal weights 1/k^2
};
struct StandardNormal {};

struct ParamDistribution;
using DistVariant =
    std::variant<TruncatedNormal, Uniform, DiscreteGrid2D, StandardNormal,
                 std::vector<ParamDistribution>>;

struct ParamDistribution {
  DistVariant v = StandardNormal{};

  static ParamDistribution truncated_normal(double lo, double hi, double mean, double sd) {
    if (!(lo < hi)) throw std::invalid_argument("TruncatedNormal: requires lo < hi");
    if (!(sd > 0.0)) throw std::invalid_argument("TruncatedNormal: requires sd > 0");
    double mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
    if (!(mass > 0.0))
      throw std::invalid_argument("TruncatedNormal: no mass on [lo, hi]");
    return {TruncatedNormal{lo, hi, mean, sd}};
  }
  static ParamDistribution uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("Uniform: requires lo < hi");
    return {Uniform{lo, hi}};
  }
  static ParamDistribution standard_normal() { return {StandardNormal{}}; }
  static ParamDistribution product(std::vector<ParamDistribution> comps) {
    if (comps.empty()) throw std::invalid_argument("Product: needs at least one component");
    return {std::move(comps)};
  }

  int dimension() const {
    if (const auto* comps = std::get_if<std::vector<ParamDistribution>>(&v)) {
      int d = 0;
      for (const auto& c : *comps) d += c.dimension();
      return d;
    }
    if (std::holds_alternative<DiscreteGrid2D>(v)) return 2;
    return 1;
  }
};

// Atoms per axis are linspace including the endpoints; k = 1 degenerates to
// the interval center so AtomGrid(1) means "solve at the grid center".
inline ParamDistribution discrete_grid(double lo1, double hi1, double lo2, double hi2, int k) {
  if (k < 1) throw std::invalid_argument("discrete_grid: k must be >= 1");
  return {DiscreteGrid2D{lo1, hi1, lo2, hi2, k}};
}

inline double grid_coordinate(double lo, double hi, int k, int i) {
  if (k == 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
}

// All atoms of a DiscreteGrid2D, row-major over (i1, i2), each with weight 1/k^2.
inline Eigen::MatrixXd grid_atoms(const DiscreteGrid2D& g) {
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(g.k) * g.k, 2);
  Eigen::Index row = 0;
  for (int i = 0; i < g.k; ++i)
    for (int j = 0; j < g.k; ++j, ++row) {
      atoms(row, 0) = grid_coordinate(g.lo1, g.hi1, g.k, i);
      atoms(row, 1) = grid_coordinate(g.lo2, g.hi2, g.k, j);
    }
  return atoms;
}

// Seeded i.i.d. draws; regenerating with the same (distribution, N, seed)
// reproduces the matrix bit-exactly (row i = sample i).
struct SampleSet {
  ParamDistribution dist;
  std::uint64_t seed = 0;
  Eigen::MatrixXd values;  // N x dim

  Eigen::Index size() const { return values.rows(); }
};

namespace detail {

inline void draw_into(const ParamDistribution& dist, RandomStream& rng, double* out) {
  if (const auto* tn = std::get_if<TruncatedNormal>(&dist.v)) {
    // Inverse CDF restricted to the truncated quantile range; rejection-free.
    double pa = normal_cdf((tn->lo - tn->mean) / tn->sd);
    double pb = normal_cdf((tn->hi - tn->mean) / tn->sd);
    double p = pa + (pb - pa) * rng.uniform01_open();
    double x = tn->mean + tn->sd * normal_quantile(p);
    out[0] = std::min(tn->hi, std::max(tn->lo, x));
  } else if (const auto* un = std::get_if<Uniform>(&dist.v)) {
    out[0] = rng.uniform(un->lo, un->hi);
  } else if (const auto* g = std::get_if<DiscreteGrid2D>(&dist.v)) {
    std::uint64_t a = rng.index(static_cast<std::uint64_t>(g->k) * g->k);
    int i = static_cast<int>(a) / g->k;
    int j = static_cast<int>(a) % g->k;
    out[0] = grid_coordinate(g->lo1, g->hi1, g->k, i);
    out[1] = grid_coordinate(g->lo2, g->hi2, g->k, j);
  } else if (std::holds_alternative<StandardNormal>(dist.v)) {
    out[0] = rng.standard_normal();
  } else {
    const auto& comps = std::get<std::vector<ParamDistribution>>(dist.v);
    int off = 0;
    for (const auto& c : comps) {
      draw_into(c, rng, out + off);
      off += c.dimension();
    }
  }
}

}  // namespace detail

inline SampleSet draw(const ParamDistribution& dist, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("draw: N must be >= 1");
  SampleSet s;
  s.dist = dist;
  s.seed = seed;
  s.values.resize(n, dist.dimension());
  RandomStream rng(seed);
  std::vector<double> row(static_cast<std::size_t>(dist.dimension()));
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::draw_into(dist, rng, row.data());
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) s.values(i, j) = row[static_cast<std::size_t>(j)];
  }
  return s;
}

struct InverseMoments {
  double m1;  // E[1/xi]
  double m2;  // E[1/xi^2]
};

// Moments of 1/xi and 1/xi^2 under TruncatedNormal(lo, hi, mean, sd). These
// constants define the "true" solution of the scalar-diffusion problem, so
// they are integrated to 1e-12 absolute. The window is clipped to
// mean +- 15 sd; the discarded tail mass is below 1e-45 relative.
inline InverseMoments truncated_normal_inverse_moments(double lo, double hi, double mean,
                                                       double sd) {
  if (!(lo > 0.0))
    throw std::invalid_argument("truncated_normal_inverse_moments: requires lo > 0");
  if (!(lo < hi) || !(sd > 0.0))
    throw std::invalid_argument("truncated_normal_inverse_moments: invalid parameters");
  const double mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
  if (!(mass > 0.0))
    throw std::invalid_argument("truncated_normal_inverse_moments: no mass on [lo, hi]");
  const double a = std::max(lo, mean - 15.0 * sd);
  const double b = std::min(hi, mean + 15.0 * sd);
  const double inv_norm = 1.0 / (sd * std::sqrt(2.0 * M_PI) * mass);
  auto density = [&](double x) {
    double z = (x - mean) / sd;
    return inv_norm * std::exp(-0.5 * z * z);
  };
  InverseMoments m;
  m.m1 = integrate_adaptive([&](double x) { return density(x) / x; }, a, b, 1e-12);
  m.m2 = integrate_adaptive([&](double x) { return density(x) / (x * x); }, a, b, 1e-12);
  return m;
}

}  // namespace saa
