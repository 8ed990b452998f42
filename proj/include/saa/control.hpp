#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saa/distributions.hpp"
#include "saa/fem.hpp"
#include "saa/mesh.hpp"

namespace saa {

enum class DiffusionModel { Scalar, TwoBlock };
enum class RhsModel { Zero, Separable };

// Nonsmooth part gamma ||u||_L1 + indicator of [lower, upper]; bounds may be
// infinite.
struct Regularizer {
  double gamma = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool bounded() const { return std::isfinite(lower) || std::isfinite(upper); }
};

using ScalarField = std::function<double(double, double)>;

// One instance of the linear-quadratic control problem: tracking objective
// (1/2) E||y(u, xi) - y_d||^2 + (alpha/2)||u||^2 + regularizer, with the state
// solving a Dirichlet diffusion problem whose coefficient and right-hand side
// depend on the sampled parameters.
struct LQProblemSpec {
  int n = 16;
  double alpha = 1e-3;
  ScalarField target;                    // y_d, interpolated at vertices
  DiffusionModel diffusion = DiffusionModel::Scalar;
  RhsModel rhs = RhsModel::Zero;
  ScalarField rhs_profile;               // r0 in r(x, xi) = xi_2 r0(x)
  Regularizer reg;
  ParamDistribution distribution;

  void validate() const {
    if (n < 1) throw std::invalid_argument("LQProblemSpec: n must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("LQProblemSpec: alpha must be > 0");
    if (!(reg.gamma >= 0.0)) throw std::invalid_argument("LQProblemSpec: gamma must be >= 0");
    if (!(reg.lower < reg.upper)) throw std::invalid_argument("LQProblemSpec: needs lower < upper");
    if (!target) throw std::invalid_argument("LQProblemSpec: target field missing");
    if (rhs == RhsModel::Separable && !rhs_profile)
      throw std::invalid_argument("LQProblemSpec: separable rhs needs a profile");
    if (rhs == RhsModel::Separable && distribution.dimension() < 2)
      throw std::invalid_argument("LQProblemSpec: separable rhs needs a 2d parameter");
    if (diffusion == DiffusionModel::TwoBlock && n % 2 != 0)
      throw std::invalid_argument("LQProblemSpec: TwoBlock requires even n");
    if (diffusion == DiffusionModel::TwoBlock && distribution.dimension() < 2)
      throw std::invalid_argument("LQProblemSpec: TwoBlock needs a 2d parameter");
  }
};

// Finite element realization of LQProblemSpec. State equation is stored as
// A(xi) y = L u + g(xi) (the operator B of the abstract form carries the
// minus sign, so its load enters with +). A(xi) is symmetric here, so adjoint
// solves reuse the state factorization.
//
// All gradients are Riesz representatives in L^2(D): a P0 value vector v such
// that the directional derivative equals <v, du>_{L^2}.
class DiscreteLQProblem {
 public:
  explicit DiscreteLQProblem(LQProblemSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    mesh_ = build_unit_square_mesh(spec_.n);
    mass_p1_ = assemble_mass_p1(mesh_);
    load_ = assemble_control_load(mesh_);
    yd_full_.resize(mesh_.vertex_count());
    for (int v = 0; v < mesh_.vertex_count(); ++v)
      yd_full_[v] = spec_.target(mesh_.vertices(v, 0), mesh_.vertices(v, 1));
    if (spec_.rhs == RhsModel::Separable) {
      Eigen::VectorXd r0(mesh_.vertex_count());
      for (int v = 0; v < mesh_.vertex_count(); ++v)
        r0[v] = spec_.rhs_profile(mesh_.vertices(v, 0), mesh_.vertices(v, 1));
      g0_int_ = restrict_interior(mass_p1_.mat * r0);
    } else {
      g0_int_ = Eigen::VectorXd::Zero(mesh_.interior_count());
    }
    if (spec_.diffusion == DiffusionModel::Scalar) {
      unit_solver_ = std::make_shared<SpdSolver>(
          assemble_stiffness(mesh_, Eigen::VectorXd::Ones(mesh_.cell_count())));
    } else {
      upper_half_.resize(mesh_.cell_count());
      for (int c = 0; c < mesh_.cell_count(); ++c)
        upper_half_[c] = mesh_.cell_center(c)[1] > 0.5;
    }
  }

  const LQProblemSpec& spec() const { return spec_; }
  const Mesh2D& mesh() const { return mesh_; }
  const SparseSpd& mass_p1() const { return mass_p1_; }
  const Eigen::VectorXd& target_values() const { return yd_full_; }
  const SpdSolver& unit_diffusion_solver() const {
    if (!unit_solver_) throw std::logic_error("unit_diffusion_solver: scalar model only");
    return *unit_solver_;
  }
  const Eigen::VectorXd& rhs_load() const { return g0_int_; }

  // Replaces the interpolated target; used to manufacture attained targets.
  void set_target_values(Eigen::VectorXd yd_full) {
    if (yd_full.size() != mesh_.vertex_count())
      throw std::invalid_argument("set_target_values: size mismatch");
    yd_full_ = std::move(yd_full);
  }

  Eigen::VectorXd kappa_cells(const Eigen::RowVectorXd& xi) const {
    if (spec_.diffusion == DiffusionModel::Scalar) {
      if (!(xi[0] > 0.0)) throw std::invalid_argument("kappa_cells: xi_1 must be positive");
      return Eigen::VectorXd::Constant(mesh_.cell_count(), xi[0]);
    }
    if (!(xi[0] > 0.0 && xi[1] > 0.0))
      throw std::invalid_argument("kappa_cells: coefficients must be positive");
    Eigen::VectorXd kappa(mesh_.cell_count());
    for (int c = 0; c < mesh_.cell_count(); ++c) kappa[c] = upper_half_[c] ? xi[0] : xi[1];
    return kappa;
  }

  Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(mesh_.interior_count());
    for (int i = 0; i < mesh_.interior_count(); ++i) out[i] = full[mesh_.interior_vertex[i]];
    return out;
  }

  Eigen::VectorXd expand_interior(const Eigen::VectorXd& interior) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh_.vertex_count());
    for (int i = 0; i < mesh_.interior_count(); ++i) out[mesh_.interior_vertex[i]] = interior[i];
    return out;
  }

  // Solve A(xi) w = rhs on interior vertices. Scalar diffusion folds into a
  // single kappa=1 factorization; TwoBlock factors are cached per parameter
  // value (the atom distributions repeat them heavily).
  Eigen::VectorXd apply_inverse(const Eigen::RowVectorXd& xi, const Eigen::VectorXd& rhs) const {
    if (spec_.diffusion == DiffusionModel::Scalar) {
      if (!(xi[0] > 0.0)) throw std::invalid_argument("apply_inverse: xi_1 must be positive");
      return unit_solver_->solve(rhs) / xi[0];
    }
    return cached_solver(xi)->solve(rhs);
  }

  P1Function solve_state(const P0Function& u, const Eigen::RowVectorXd& xi) const {
    check_control(u);
    Eigen::VectorXd rhs = load_ * u.values;
    if (spec_.rhs == RhsModel::Separable) rhs += xi[1] * g0_int_;
    return {&mesh_, apply_inverse(xi, rhs)};
  }

  // Averages a P1 function over each cell's vertices: the L^2 Riesz
  // representative of the load-transpose in the P0 value basis.
  P0Function vertex_average(const Eigen::VectorXd& p_full) const {
    P0Function out = P0Function::zero(mesh_);
    for (int c = 0; c < mesh_.cell_count(); ++c) {
      const auto tri = mesh_.cells.row(c);
      out.values[c] = (p_full[tri[0]] + p_full[tri[1]] + p_full[tri[2]]) / 3.0;
    }
    return out;
  }

  // Gradient of the smooth integrand G_1(., xi) at u (no alpha term): state
  // solve, adjoint solve with load M (y - y_d), then the load transpose.
  P0Function sample_gradient_smooth(const P0Function& u, const Eigen::RowVectorXd& xi) const {
    Eigen::VectorXd y_full = solve_state(u, xi).full();
    Eigen::VectorXd adj = mass_p1_.mat * (y_full - yd_full_);
    return vertex_average(expand_interior(apply_inverse(xi, restrict_interior(adj))));
  }

  double sample_value_smooth(const P0Function& u, const Eigen::RowVectorXd& xi) const {
    Eigen::VectorXd diff = solve_state(u, xi).full() - yd_full_;
    return 0.5 * diff.dot(mass_p1_.mat * diff);
  }

  // K(xi)^* K(xi) v: state solve with control v and zero data, then adjoint.
  P0Function sample_hessvec_smooth(const P0Function& v, const Eigen::RowVectorXd& xi) const {
    check_control(v);
    Eigen::VectorXd y = apply_inverse(xi, load_ * v.values);
    Eigen::VectorXd adj = mass_p1_.mat * expand_interior(y);
    return vertex_average(expand_interior(apply_inverse(xi, restrict_interior(adj))));
  }

  // Sample means accumulate in sample-index order (fixed deterministic
  // reduction).
  P0Function mean_gradient_smooth(const P0Function& u, const SampleSet& s) const {
    require_samples(s);
    P0Function acc = P0Function::zero(mesh_);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      acc.values += sample_gradient_smooth(u, s.values.row(i)).values;
    acc.values /= static_cast<double>(s.size());
    return acc;
  }

  double mean_value_smooth(const P0Function& u, const SampleSet& s) const {
    require_samples(s);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) acc += sample_value_smooth(u, s.values.row(i));
    return acc / static_cast<double>(s.size());
  }

  P0Function mean_hessvec_smooth(const P0Function& v, const SampleSet& s) const {
    require_samples(s);
    P0Function acc = P0Function::zero(mesh_);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      acc.values += sample_hessvec_smooth(v, s.values.row(i)).values;
    acc.values /= static_cast<double>(s.size());
    return acc;
  }

  // SAA gradient of the full smooth objective: mean of per-sample gradients
  // plus the Tikhonov term added once.
  P0Function saa_gradient_smooth(const P0Function& u, const SampleSet& s) const {
    P0Function g = mean_gradient_smooth(u, s);
    g.values += spec_.alpha * u.values;
    return g;
  }

  double saa_value(const P0Function& u, const SampleSet& s) const {
    double sq = p0_l2_norm(u);
    return mean_value_smooth(u, s) + 0.5 * spec_.alpha * sq * sq;
  }

  P0Function saa_hessvec(const P0Function& v, const SampleSet& s) const {
    P0Function h = mean_hessvec_smooth(v, s);
    h.values += spec_.alpha * v.values;
    return h;
  }

 private:
  void check_control(const P0Function& u) const {
    if (u.mesh != &mesh_ || u.values.size() != mesh_.cell_count())
      throw std::invalid_argument("DiscreteLQProblem: control not on this mesh");
  }
  void require_samples(const SampleSet& s) const {
    if (s.size() < 1) throw std::invalid_argument("DiscreteLQProblem: empty sample set");
  }

  std::shared_ptr<const SpdSolver> cached_solver(const Eigen::RowVectorXd& xi) const {
    std::vector<double> key(xi.data(), xi.data() + std::min<Eigen::Index>(xi.size(), 2));
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      auto it = factor_cache_.find(key);
      if (it != factor_cache_.end()) return it->second;
    }
    auto solver = std::make_shared<const SpdSolver>(assemble_stiffness(mesh_, kappa_cells(xi)));
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (factor_cache_.size() >= kMaxCachedFactors) factor_cache_.clear();
    factor_cache_.emplace(key, solver);
    return solver;
  }

  static constexpr std::size_t kMaxCachedFactors = 4096;

  LQProblemSpec spec_;
  Mesh2D mesh_;
  SparseSpd mass_p1_;
  Eigen::SparseMatrix<double> load_;
  Eigen::VectorXd yd_full_;
  Eigen::VectorXd g0_int_;
  std::shared_ptr<SpdSolver> unit_solver_;
  std::vector<bool> upper_half_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::vector<double>, std::shared_ptr<const SpdSolver>> factor_cache_;
};

// Smooth-part oracle consumed by the solvers: gradient/Hessian action and
// value of F_1 (SAA or exact), never including the alpha term.
class SmoothOracle {
 public:
  virtual ~SmoothOracle() = default;
  virtual P0Function gradient(const P0Function& u) const = 0;
  virtual P0Function hessvec(const P0Function& v) const = 0;
  virtual double value(const P0Function& u) const = 0;
  virtual const Mesh2D& mesh() const = 0;
};

// Generic SAA oracle over a weighted sample list. Duplicate samples are
// grouped at construction (first-occurrence order, a fixed reduction), so
// atom-distributed draws cost one PDE pair per distinct parameter.
class SampleAverageOracle final : public SmoothOracle {
 public:
  SampleAverageOracle(const DiscreteLQProblem& problem, const Eigen::MatrixXd& samples,
                      const Eigen::VectorXd* weights = nullptr)
      : problem_(problem) {
    if (samples.rows() < 1) throw std::invalid_argument("SampleAverageOracle: empty samples");
    std::map<std::vector<double>, Eigen::Index> seen;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      std::vector<double> key(static_cast<std::size_t>(samples.cols()));
      for (Eigen::Index j = 0; j < samples.cols(); ++j)
        key[static_cast<std::size_t>(j)] = samples(i, j);
      const double w = weights ? (*weights)[i] : 1.0 / static_cast<double>(samples.rows());
      auto it = seen.find(key);
      if (it == seen.end()) {
        seen.emplace(key, static_cast<Eigen::Index>(unique_.size()));
        unique_.emplace_back(samples.row(i), w);
      } else {
        unique_[static_cast<std::size_t>(it->second)].second += w;
      }
    }
  }

  SampleAverageOracle(const DiscreteLQProblem& problem, const SampleSet& s)
      : SampleAverageOracle(problem, s.values) {}

  P0Function gradient(const P0Function& u) const override {
    P0Function acc = P0Function::zero(problem_.mesh());
    for (const auto& [xi, w] : unique_)
      acc.values += w * problem_.sample_gradient_smooth(u, xi).values;
    return acc;
  }

  P0Function hessvec(const P0Function& v) const override {
    P0Function acc = P0Function::zero(problem_.mesh());
    for (const auto& [xi, w] : unique_)
      acc.values += w * problem_.sample_hessvec_smooth(v, xi).values;
    return acc;
  }

  double value(const P0Function& u) const override {
    double acc = 0.0;
    for (const auto& [xi, w] : unique_) acc += w * problem_.sample_value_smooth(u, xi);
    return acc;
  }

  const Mesh2D& mesh() const override { return problem_.mesh(); }

 private:
  const DiscreteLQProblem& problem_;
  std::vector<std::pair<Eigen::RowVectorXd, double>> unique_;
};

// For scalar diffusion the state equation divides through by xi_1, so every
// gradient of F_1 (exact or SAA) reduces to two kappa=1 solves:
//   grad = K0^* (c_u K0 u + c_h h0 + c_yd y_d),
// with K0 the kappa=1 control-to-state map, h0 the state response of the
// rhs profile, and the c's moment combinations of (1/xi_1, xi_2).
class ScalarDiffusionKernel {
 public:
  explicit ScalarDiffusionKernel(const DiscreteLQProblem& problem) : problem_(problem) {
    if (problem.spec().diffusion != DiffusionModel::Scalar)
      throw std::invalid_argument("ScalarDiffusionKernel: scalar diffusion model only");
    h0_full_ = problem_.expand_interior(problem_.unit_diffusion_solver().solve(problem_.rhs_load()));
    load_ = assemble_control_load(problem_.mesh());
  }

  const DiscreteLQProblem& problem() const { return problem_; }
  const Eigen::VectorXd& rhs_state_full() const { return h0_full_; }

  // K0 u as a full vertex vector (one solve).
  Eigen::VectorXd state_k1(const P0Function& u) const {
    return problem_.expand_interior(problem_.unit_diffusion_solver().solve(load_ * u.values));
  }

  // K0^* z for z in the state space (one solve).
  P0Function adjoint_avg(const Eigen::VectorXd& z_full) const {
    Eigen::VectorXd load = problem_.restrict_interior(problem_.mass_p1().mat * z_full);
    return problem_.vertex_average(
        problem_.expand_interior(problem_.unit_diffusion_solver().solve(load)));
  }

  // K0^* (cu K0 u + ch h0 + cyd y_d); exactly two solves.
  P0Function gradient_mix(const P0Function& u, double cu, double ch, double cyd) const {
    Eigen::VectorXd z = cu * state_k1(u);
    if (ch != 0.0) z += ch * h0_full_;
    z += cyd * problem_.target_values();
    return adjoint_avg(z);
  }

  // F_1 value from the moment set {m1=E 1/x1, m2=E 1/x1^2, mc=E x2/x1^2,
  // m22=E x2^2/x1^2, md=E x2/x1}; one solve.
  double value_mix(const P0Function& u, double m1, double m2, double mc, double m22,
                   double md) const {
    const auto& M = problem_.mass_p1().mat;
    Eigen::VectorXd ku = state_k1(u);
    const Eigen::VectorXd& yd = problem_.target_values();
    const double kk = ku.dot(M * ku);
    const double kh = ku.dot(M * h0_full_);
    const double ky = ku.dot(M * yd);
    const double hh = h0_full_.dot(M * h0_full_);
    const double hy = h0_full_.dot(M * yd);
    const double yy = yd.dot(M * yd);
    return 0.5 * m2 * kk + mc * kh - m1 * ky + 0.5 * m22 * hh - md * hy + 0.5 * yy;
  }

 private:
  const DiscreteLQProblem& problem_;
  Eigen::VectorXd h0_full_;
  Eigen::SparseMatrix<double> load_;
};

// Moment combinations entering the reduced gradient.
struct ScalarMoments {
  double m1 = 0.0;   // E[1/x1]
  double m2 = 0.0;   // E[1/x1^2]
  double mc = 0.0;   // E[x2/x1^2]
  double m22 = 0.0;  // E[x2^2/x1^2]
  double md = 0.0;   // E[x2/x1]
};

inline ScalarMoments empirical_scalar_moments(const SampleSet& s) {
  if (s.size() < 1) throw std::invalid_argument("empirical_scalar_moments: empty sample set");
  ScalarMoments m;
  const bool has_second = s.values.cols() > 1;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double x1 = s.values(i, 0);
    if (!(x1 > 0.0)) throw std::invalid_argument("empirical_scalar_moments: xi_1 must be positive");
    const double x2 = has_second ? s.values(i, 1) : 0.0;
    m.m1 += 1.0 / x1;
    m.m2 += 1.0 / (x1 * x1);
    m.mc += x2 / (x1 * x1);
    m.m22 += x2 * x2 / (x1 * x1);
    m.md += x2 / x1;
  }
  const double inv_n = 1.0 / static_cast<double>(s.size());
  m.m1 *= inv_n; m.m2 *= inv_n; m.mc *= inv_n; m.m22 *= inv_n; m.md *= inv_n;
  return m;
}

namespace detail {

inline void component_stats(const ParamDistribution& d, double& mean, double& second_moment) {
  if (const auto* un = std::get_if<Uniform>(&d.v)) {
    mean = 0.5 * (un->lo + un->hi);
    second_moment = (un->lo * un->lo + un->lo * un->hi + un->hi * un->hi) / 3.0;
    return;
  }
  if (std::holds_alternative<StandardNormal>(d.v)) {
    mean = 0.0;
    second_moment = 1.0;
    return;
  }
  throw std::invalid_argument("component_stats: unsupported component for exact moments");
}

}  // namespace detail

// Exact moments of the scalar-diffusion law: inverse moments of the first
// (truncated normal) component to quadrature accuracy, plain moments of the
// independent second component.
inline ScalarMoments exact_scalar_moments(const ParamDistribution& dist, RhsModel rhs) {
  const auto* comps = std::get_if<std::vector<ParamDistribution>>(&dist.v);
  const ParamDistribution& first = comps ? comps->front() : dist;
  const auto* tn = std::get_if<TruncatedNormal>(&first.v);
  if (!tn) throw std::invalid_argument("exact_scalar_moments: first component must be truncated normal");
  InverseMoments im = truncated_normal_inverse_moments(tn->lo, tn->hi, tn->mean, tn->sd);
  ScalarMoments m;
  m.m1 = im.m1;
  m.m2 = im.m2;
  if (rhs == RhsModel::Separable) {
    if (!comps || comps->size() < 2)
      throw std::invalid_argument("exact_scalar_moments: separable rhs needs a second component");
    double mean2 = 0.0, sq2 = 0.0;
    detail::component_stats((*comps)[1], mean2, sq2);
    // Independence: E[x2/x1^2] = E[x2] E[1/x1^2] and so on.
    m.mc = mean2 * im.m2;
    m.m22 = sq2 * im.m2;
    m.md = mean2 * im.m1;
  }
  return m;
}

// Exact gradient of F_1 via the two-solve reduction.
class ScalarExactOracle final : public SmoothOracle {
 public:
  ScalarExactOracle(std::shared_ptr<const ScalarDiffusionKernel> kernel, ScalarMoments moments)
      : kernel_(std::move(kernel)), m_(moments) {}

  static ScalarExactOracle from_problem(std::shared_ptr<const ScalarDiffusionKernel> kernel) {
    const auto& spec = kernel->problem().spec();
    return ScalarExactOracle(kernel, exact_scalar_moments(spec.distribution, spec.rhs));
  }

  const ScalarMoments& moments() const { return m_; }

  P0Function gradient(const P0Function& u) const override {
    return kernel_->gradient_mix(u, m_.m2, m_.mc, -m_.m1);
  }
  P0Function hessvec(const P0Function& v) const override {
    return kernel_->gradient_mix(v, m_.m2, 0.0, 0.0);
  }
  double value(const P0Function& u) const override {
    return kernel_->value_mix(u, m_.m1, m_.m2, m_.mc, m_.m22, m_.md);
  }
  const Mesh2D& mesh() const override { return kernel_->problem().mesh(); }

 private:
  std::shared_ptr<const ScalarDiffusionKernel> kernel_;
  ScalarMoments m_;
};

// Empirical-moment SAA gradient of F_1; agrees with averaging the per-sample
// gradients to rounding while spending two solves total.
class ScalarSaaOracle final : public SmoothOracle {
 public:
  ScalarSaaOracle(std::shared_ptr<const ScalarDiffusionKernel> kernel, const SampleSet& s)
      : kernel_(std::move(kernel)), m_(empirical_scalar_moments(s)) {}

  const ScalarMoments& moments() const { return m_; }

  P0Function gradient(const P0Function& u) const override {
    return kernel_->gradient_mix(u, m_.m2, m_.mc, -m_.m1);
  }
  P0Function hessvec(const P0Function& v) const override {
    return kernel_->gradient_mix(v, m_.m2, 0.0, 0.0);
  }
  double value(const P0Function& u) const override {
    return kernel_->value_mix(u, m_.m1, m_.m2, m_.mc, m_.m22, m_.md);
  }
  const Mesh2D& mesh() const override { return kernel_->problem().mesh(); }

 private:
  std::shared_ptr<const ScalarDiffusionKernel> kernel_;
  ScalarMoments m_;
};

// Deviation machinery for the error estimate: at a fixed control u the
// per-sample gradient deviation is a fixed combination of three vectors,
//   dev(xi) = (1/xi1^2 - m2) w1 + (xi2/xi1^2 - mc) w2 - (1/xi1 - m1) w3,
// so sigma/tau estimation and the a-posteriori gap cost no extra solves.
struct ScalarDeviationBasis {
  P0Function w1, w2, w3;  // K0*K0 u, K0* h0, K0* y_d
  ScalarMoments exact;

  double deviation_norm(double x1, double x2) const {
    const double a = 1.0 / (x1 * x1) - exact.m2;
    const double b = x2 / (x1 * x1) - exact.mc;
    const double c = 1.0 / x1 - exact.m1;
    P0Function d{w1.mesh, a * w1.values + b * w2.values - c * w3.values};
    return p0_l2_norm(d);
  }

  // || grad F_N(u) - grad F(u) || for the sample set defining F_N.
  double gap_norm(const SampleSet& s) const {
    ScalarMoments m = empirical_scalar_moments(s);
    P0Function d{w1.mesh, (m.m2 - exact.m2) * w1.values + (m.mc - exact.mc) * w2.values -
                              (m.m1 - exact.m1) * w3.values};
    return p0_l2_norm(d);
  }
};

inline ScalarDeviationBasis make_deviation_basis(const ScalarDiffusionKernel& kernel,
                                                 const ScalarMoments& exact,
                                                 const P0Function& u_star) {
  ScalarDeviationBasis b;
  b.w1 = kernel.gradient_mix(u_star, 1.0, 0.0, 0.0);
  b.w2 = kernel.adjoint_avg(kernel.rhs_state_full());
  b.w3 = kernel.adjoint_avg(kernel.problem().target_values());
  b.exact = exact;
  return b;
}

// Smallest eigenvalue of the (alpha-free) Hessian of F_1 as an operator on
// L^2-valued P0 controls, assembled densely column by column. The P0 mass is
// a multiple of the identity, so operator and coefficient eigenvalues agree.
//
// The P0 control space always outranks the interior state space
// (2 n^2 > (n-1)^2), so the Gram operator carries an exact kernel of control
// modes invisible to the state equation. The reported value is the smallest
// eigenvalue on the complement of that kernel; it is the quantity that decays
// under refinement as the spectrum of the compact limit operator fills in.
// An added diagonal shifts the reported value by exactly that amount.
inline double f1_hessian_min_eig(const SmoothOracle& oracle, double added_diagonal = 0.0) {
  const Mesh2D& mesh = oracle.mesh();
  const int dim = mesh.cell_count();
  if (dim > 1024) throw std::invalid_argument("f1_hessian_min_eig: control dimension over budget");
  Eigen::MatrixXd H(dim, dim);
  P0Function e = P0Function::zero(mesh);
  for (int c = 0; c < dim; ++c) {
    e.values.setZero();
    e.values[c] = 1.0;
    H.col(c) = oracle.hessvec(e).values;
  }
  Eigen::MatrixXd sym = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  if (ev.minCoeff() < -1e-10 * scale)
    throw std::runtime_error("f1_hessian_min_eig: Gram operator came out indefinite");
  double lambda = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > 1e-10 * scale) {
      lambda = ev[i];  // eigenvalues are sorted ascending
      break;
    }
  }
  return lambda + added_diagonal;
}

}  // namespace saa
