#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "saa/control.hpp"
#include "saa/fem.hpp"

namespace saa {

// Pointwise minimizer data of (alpha/2) u^2 + gamma |u| + I_[lower,upper](u) - q u.
// The P0 mass matrix is diagonal, so the function-space prox acts cellwise.
struct ProxSpec {
  double alpha = 1.0;
  double gamma = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("ProxSpec: alpha must be > 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("ProxSpec: gamma must be >= 0");
    if (!(lower < upper)) throw std::invalid_argument("ProxSpec: needs lower < upper");
  }
  bool smooth_unconstrained() const {
    return gamma == 0.0 && !std::isfinite(lower) && !std::isfinite(upper);
  }
  static ProxSpec from(const LQProblemSpec& spec) {
    return {spec.alpha, spec.reg.gamma, spec.reg.lower, spec.reg.upper};
  }
};

inline double prox_scalar(double q, const ProxSpec& p) {
  const double soft = std::copysign(std::max(std::abs(q) - p.gamma, 0.0), q) / p.alpha;
  return std::min(p.upper, std::max(p.lower, soft));
}

inline P0Function prox(const P0Function& q, const ProxSpec& p) {
  p.validate();
  P0Function u{q.mesh, Eigen::VectorXd(q.values.size())};
  for (Eigen::Index c = 0; c < q.values.size(); ++c) u.values[c] = prox_scalar(q.values[c], p);
  return u;
}

// Cells where the prox is locally affine with slope 1/alpha. Kinks
// (|q| = gamma exactly, or the soft-threshold value exactly at a bound) count
// as active: any generalized Jacobian element is admissible and the tie goes
// to the smaller system.
inline std::vector<bool> prox_inactive_mask(const P0Function& q, const ProxSpec& p) {
  std::vector<bool> inactive(static_cast<std::size_t>(q.values.size()), false);
  for (Eigen::Index c = 0; c < q.values.size(); ++c) {
    const double qc = q.values[c];
    // The L1 kink only exists for gamma > 0; at gamma = 0 the prox is smooth
    // through q = 0.
    if (p.gamma > 0.0 && std::abs(qc) <= p.gamma) continue;
    const double soft = std::copysign(std::max(std::abs(qc) - p.gamma, 0.0), qc) / p.alpha;
    if (soft <= p.lower || soft >= p.upper) continue;
    inactive[static_cast<std::size_t>(c)] = true;
  }
  return inactive;
}

// Normal-map residual R(q) = q + grad F_1N(P(q)); a root q* gives the solution
// u = P(q*) of the first-order conditions 0 in grad F_1N(u) + alpha u + dPsi(u).
inline P0Function normal_map_residual(const SmoothOracle& oracle, const ProxSpec& p,
                                      const P0Function& q) {
  P0Function r = oracle.gradient(prox(q, p));
  r.values += q.values;
  return r;
}

struct SolverOptions {
  double tol = 1e-10;        // on the L^2 norm of the KKT residual
  int max_outer = 50;
  double cg_rel_tol = 1e-12; // reduced/Newton systems
  int max_cg = 100000;
};

struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

// Solution of one SAA (or reference) problem with solver diagnostics.
struct SAAResult {
  P0Function u;
  double kkt_residual = 0.0;
  int iterations = 0;
  int cg_iterations = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  Eigen::Index n_samples = 0;
  std::vector<double> residual_history;
};

namespace detail {

inline Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[idx[i]];
  return out;
}

inline Eigen::VectorXd scatter(const Eigen::VectorXd& small, const std::vector<int>& idx,
                               Eigen::Index dim) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = small[static_cast<Eigen::Index>(i)];
  return out;
}

}  // namespace detail

// Semismooth Newton on the normal map for Psi = gamma ||.||_L1 + box
// indicator. Each step classifies cells by the prox slope, solves the reduced
// SPD system (alpha I + H)_II du = -R_I matrix-free with CG, and falls back to
// step halving if the residual fails to decrease.
inline SAAResult semismooth_newton(const SmoothOracle& oracle, const ProxSpec& p,
                                   const SolverOptions& opts = {}) {
  p.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh2D& mesh = oracle.mesh();
  SAAResult res;
  P0Function q = P0Function::zero(mesh);
  P0Function u = prox(q, p);
  P0Function g = oracle.gradient(u);
  P0Function r{&mesh, q.values + g.values};
  double rnorm = p0_l2_norm(r);
  res.residual_history.push_back(rnorm);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    if (rnorm <= opts.tol) {
      res.u = u;
      res.kkt_residual = rnorm;
      res.iterations = outer;
      res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return res;
    }

    const std::vector<bool> inactive = prox_inactive_mask(q, p);
    std::vector<int> idx;
    for (std::size_t c = 0; c < inactive.size(); ++c)
      if (inactive[c]) idx.push_back(static_cast<int>(c));

    P0Function du = P0Function::zero(mesh);
    if (!idx.empty()) {
      auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        P0Function vin{&mesh, detail::scatter(v, idx, mesh.cell_count())};
        Eigen::VectorXd hv = oracle.hessvec(vin).values;
        return p.alpha * v + detail::gather(hv, idx);
      };
      Eigen::VectorXd rhs = -detail::gather(r.values, idx);
      CgOutcome cg = conjugate_gradient(apply, rhs, opts.cg_rel_tol, opts.max_cg);
      res.cg_iterations += cg.iterations;
      du.values = detail::scatter(cg.x, idx, mesh.cell_count());
    }

    // dq = -R - H du on active cells; alpha du on inactive ones.
    Eigen::VectorXd hdu = idx.empty() ? Eigen::VectorXd::Zero(mesh.cell_count())
                                      : oracle.hessvec(du).values;
    Eigen::VectorXd dq = -r.values - hdu;
    for (int c : idx) dq[c] = p.alpha * du.values[c];

    double step = 1.0;
    for (;;) {
      P0Function q_trial{&mesh, q.values + step * dq};
      P0Function u_trial = prox(q_trial, p);
      P0Function g_trial = oracle.gradient(u_trial);
      P0Function r_trial{&mesh, q_trial.values + g_trial.values};
      const double rnorm_trial = p0_l2_norm(r_trial);
      if (rnorm_trial < rnorm || step < 1.0 / 1048576.0) {
        q = std::move(q_trial);
        u = std::move(u_trial);
        g = std::move(g_trial);
        r = std::move(r_trial);
        rnorm = rnorm_trial;
        break;
      }
      step *= 0.5;
    }
    res.residual_history.push_back(rnorm);
  }

  if (rnorm <= opts.tol) {
    res.u = u;
    res.kkt_residual = rnorm;
    res.iterations = opts.max_outer;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }
  std::string hist;
  for (double v : res.residual_history) hist += " " + std::to_string(v);
  throw SolverFailure("semismooth_newton: no convergence in " + std::to_string(opts.max_outer) +
                      " iterations; residual history:" + hist);
}

// Inexact Newton-CG for the smooth case Psi = 0: forcing term
// min(0.5, sqrt(||g||)), gradient tolerance on the L^2 norm.
inline SAAResult newton_cg(const SmoothOracle& oracle, double alpha,
                           const SolverOptions& opts = {}, const P0Function* start = nullptr) {
  if (!(alpha > 0.0)) throw std::invalid_argument("newton_cg: alpha must be > 0");
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh2D& mesh = oracle.mesh();
  SAAResult res;
  P0Function u = start ? *start : P0Function::zero(mesh);

  for (int outer = 0; outer <= opts.max_outer; ++outer) {
    P0Function g = oracle.gradient(u);
    g.values += alpha * u.values;
    const double gnorm = p0_l2_norm(g);
    res.residual_history.push_back(gnorm);
    if (gnorm <= opts.tol) {
      res.u = u;
      res.kkt_residual = gnorm;
      res.iterations = outer;
      res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return res;
    }
    if (outer == opts.max_outer) break;

    const double forcing = std::min(0.5, std::sqrt(gnorm));
    // Floor the inner target at a fraction of tol so the last steps land.
    const double rel = std::max(std::min(forcing, 0.9), 0.1 * opts.tol / gnorm);
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      P0Function vin{&mesh, v};
      return alpha * v + oracle.hessvec(vin).values;
    };
    CgOutcome cg = conjugate_gradient(apply, Eigen::VectorXd(-g.values), rel, opts.max_cg);
    res.cg_iterations += cg.iterations;
    u.values += cg.x;
  }
  throw SolverFailure("newton_cg: no convergence in " + std::to_string(opts.max_outer) +
                      " iterations (gradient norm " +
                      std::to_string(res.residual_history.back()) + ")");
}

// Dispatch on the regularizer: the normal-map method handles the nonsmooth
// cases, Newton-CG the smooth unconstrained one.
inline SAAResult solve_regularized(const SmoothOracle& oracle, const ProxSpec& p,
                                   const SolverOptions& opts = {}) {
  if (p.smooth_unconstrained()) return newton_cg(oracle, p.alpha, opts);
  return semismooth_newton(oracle, p, opts);
}

enum class ReferenceStrategy { ExactMoments, AtomGrid };

// Deterministic reference problem: exact moments for the scalar-diffusion
// model, the full atom grid otherwise.
inline SAAResult solve_reference(const DiscreteLQProblem& problem, ReferenceStrategy strategy,
                                 const SolverOptions& opts = {}) {
  const ProxSpec p = ProxSpec::from(problem.spec());
  if (strategy == ReferenceStrategy::ExactMoments) {
    auto kernel = std::make_shared<const ScalarDiffusionKernel>(problem);
    ScalarExactOracle oracle = ScalarExactOracle::from_problem(kernel);
    return solve_regularized(oracle, p, opts);
  }
  const auto* grid = std::get_if<DiscreteGrid2D>(&problem.spec().distribution.v);
  if (!grid)
    throw std::invalid_argument("solve_reference: AtomGrid needs a DiscreteGrid2D distribution");
  Eigen::MatrixXd atoms = grid_atoms(*grid);
  Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(atoms.rows(), 1.0 / static_cast<double>(atoms.rows()));
  SampleAverageOracle oracle(problem, atoms, &weights);
  return solve_regularized(oracle, p, opts);
}

// Full nonsmooth objective value f_N(u) = F_1N(u) + (alpha/2)||u||^2 + Psi(u).
// Bound violations report infinity; a small slack absorbs prox rounding.
inline double objective_value(const SmoothOracle& oracle, const ProxSpec& p, const P0Function& u) {
  const double l2 = p0_l2_norm(u);
  double val = oracle.value(u) + 0.5 * p.alpha * l2 * l2 + p.gamma * p0_l1_norm(u);
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(p.lower), std::abs(p.upper)));
  for (Eigen::Index c = 0; c < u.values.size(); ++c) {
    if (u.values[c] < p.lower - slack || u.values[c] > p.upper + slack)
      return std::numeric_limits<double>::infinity();
  }
  return val;
}

}  // namespace saa
