#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "saa/control.hpp"
#include "saa/rng.hpp"
#include "saa/solvers.hpp"
#include "saa/statistics.hpp"
#include "saa/util.hpp"

namespace saa {

// Problem + reference strategy + oracle wiring for one replication study.
// Scalar-diffusion problems route through the two-solve kernel; everything
// else uses the generic per-sample path.
class LQExperiment {
 public:
  LQExperiment(LQProblemSpec spec, ReferenceStrategy strategy)
      : problem_(std::make_shared<DiscreteLQProblem>(std::move(spec))), strategy_(strategy) {
    if (strategy_ == ReferenceStrategy::ExactMoments) {
      kernel_ = std::make_shared<const ScalarDiffusionKernel>(*problem_);
      exact_moments_ = exact_scalar_moments(problem_->spec().distribution, problem_->spec().rhs);
    }
  }

  const DiscreteLQProblem& problem() const { return *problem_; }
  ReferenceStrategy strategy() const { return strategy_; }
  ProxSpec prox_spec() const { return ProxSpec::from(problem_->spec()); }

  std::unique_ptr<SmoothOracle> saa_oracle(const SampleSet& samples) const {
    if (kernel_) return std::make_unique<ScalarSaaOracle>(kernel_, samples);
    return std::make_unique<SampleAverageOracle>(*problem_, samples);
  }

  // Oracle of the "true" smooth objective: exact moments, or the atom grid
  // that defines the reference distribution.
  std::unique_ptr<SmoothOracle> true_oracle() const {
    if (kernel_) return std::make_unique<ScalarExactOracle>(kernel_, exact_moments_);
    const auto* grid = std::get_if<DiscreteGrid2D>(&problem_->spec().distribution.v);
    if (!grid) throw std::invalid_argument("LQExperiment: AtomGrid needs a grid distribution");
    Eigen::MatrixXd atoms = grid_atoms(*grid);
    Eigen::VectorXd weights =
        Eigen::VectorXd::Constant(atoms.rows(), 1.0 / static_cast<double>(atoms.rows()));
    return std::make_unique<SampleAverageOracle>(*problem_, atoms, &weights);
  }

  SAAResult solve_reference(const SolverOptions& opts) const {
    return saa::solve_reference(*problem_, strategy_, opts);
  }

  // Norms of grad G_1(u*, xi^i) - grad F_1(u*) for M fresh samples.
  std::vector<double> deviation_norms(const P0Function& u_star, Eigen::Index m,
                                      std::uint64_t seed) const {
    SampleSet s = draw(problem_->spec().distribution, m, seed);
    std::vector<double> out(static_cast<std::size_t>(m));
    if (kernel_) {
      ScalarDeviationBasis basis = make_deviation_basis(*kernel_, exact_moments_, u_star);
      const bool has_second = s.values.cols() > 1;
      for (Eigen::Index i = 0; i < m; ++i)
        out[static_cast<std::size_t>(i)] =
            basis.deviation_norm(s.values(i, 0), has_second ? s.values(i, 1) : 0.0);
      return out;
    }
    P0Function g_true = true_oracle()->gradient(u_star);
    // Distinct parameter values repeat heavily for atom laws; cache per value.
    std::map<std::vector<double>, double> norm_cache;
    for (Eigen::Index i = 0; i < m; ++i) {
      std::vector<double> key(static_cast<std::size_t>(s.values.cols()));
      for (Eigen::Index j = 0; j < s.values.cols(); ++j)
        key[static_cast<std::size_t>(j)] = s.values(i, j);
      auto it = norm_cache.find(key);
      if (it == norm_cache.end()) {
        P0Function g = problem_->sample_gradient_smooth(u_star, s.values.row(i));
        g.values -= g_true.values;
        it = norm_cache.emplace(key, p0_l2_norm(g)).first;
      }
      out[static_cast<std::size_t>(i)] = it->second;
    }
    return out;
  }

  // || grad F_1N(u*) - grad F_1(u*) || for a given sample set (Tikhonov terms
  // cancel in the difference).
  double gradient_gap(const P0Function& u_star, const SampleSet& samples) const {
    if (kernel_) {
      ScalarDeviationBasis basis = make_deviation_basis(*kernel_, exact_moments_, u_star);
      return basis.gap_norm(samples);
    }
    P0Function g = saa_oracle(samples)->gradient(u_star);
    g.values -= true_oracle()->gradient(u_star).values;
    return p0_l2_norm(g);
  }

 private:
  std::shared_ptr<DiscreteLQProblem> problem_;
  ReferenceStrategy strategy_;
  std::shared_ptr<const ScalarDiffusionKernel> kernel_;
  ScalarMoments exact_moments_;
};

// sigma/tau of the gradient deviations at u*, from M fresh samples.
inline SigmaTau estimate_sigma_tau(const LQExperiment& experiment, const P0Function& u_star,
                                   Eigen::Index m, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("estimate_sigma_tau: needs M >= 2");
  return estimate_sigma_tau_from_deviations(experiment.deviation_norms(u_star, m, seed));
}

struct ReplicationRecord {
  long long n = 0;
  int replication = 0;  // 1-based
  std::uint64_t seed = 0;
  double error = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  double gradient_gap = 0.0;  // || grad F_N(u*) - grad F(u*) ||
};

struct PerNStats {
  long long n = 0;
  double mean_error = 0.0;
  double mse = 0.0;
  double luxemburg = 0.0;
  double bound_mse = 0.0;       // sigma_hat^2/(alpha^2 N)
  double bound_luxemburg = 0.0; // 3 sqrt(3) tau_hat/(alpha sqrt(N))
};

struct ExceedanceCell {
  long long n = 0;
  double eps = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  double binom_se = 0.0;
};

struct TailExperimentReport {
  std::vector<long long> n_grid;
  int replications = 0;
  std::uint64_t base_seed = 0;
  double alpha = 0.0;
  double sigma_hat = 0.0;
  double tau_hat = 0.0;
  SAAResult reference;
  std::vector<ReplicationRecord> records;  // ordered by (N index, replication)
  std::vector<PerNStats> per_n;
  RateFit mean_fit;
  RateFit luxemburg_fit;
  std::vector<ExceedanceCell> exceedance;
  int aposteriori_checked = 0;
  int aposteriori_violations = 0;  // alpha * error > gap + 1e-8
  // max of alpha*error - gap; negative when the estimate holds with margin
  double aposteriori_max_slack = -std::numeric_limits<double>::infinity();
};

struct ReplicationOptions {
  SolverOptions solver;
  std::optional<SolverOptions> reference_solver;  // defaults to `solver`
  unsigned threads = 1;
  Eigen::Index sigma_tau_samples = 10000;
};

// One replication study: for every (N, r), draw a fresh sample set with seed
// derived from (base_seed, N, r), solve the SAA problem, and record the
// L^2 distance to the reference solution. Replication tasks write disjoint
// slots, so the report is identical for any thread count.
inline TailExperimentReport run_replications(const LQExperiment& experiment,
                                             const std::vector<long long>& n_grid,
                                             int replications, std::uint64_t base_seed,
                                             const ReplicationOptions& opts = {}) {
  if (n_grid.empty() || replications < 1)
    throw std::invalid_argument("run_replications: empty N grid or no replications");
  for (long long n : n_grid)
    if (n < 1) throw std::invalid_argument("run_replications: N must be >= 1");

  TailExperimentReport report;
  report.n_grid = n_grid;
  report.replications = replications;
  report.base_seed = base_seed;
  report.alpha = experiment.problem().spec().alpha;

  report.reference =
      experiment.solve_reference(opts.reference_solver ? *opts.reference_solver : opts.solver);
  const P0Function& u_star = report.reference.u;

  {
    SigmaTau st = estimate_sigma_tau(experiment, u_star, opts.sigma_tau_samples,
                                     derive_seed(base_seed, {0x7369676d61ULL}));
    report.sigma_hat = st.sigma_hat;
    report.tau_hat = st.tau_hat;
  }

  const std::size_t total = n_grid.size() * static_cast<std::size_t>(replications);
  report.records.resize(total);
  std::string failure;
  std::mutex failure_mutex;
  auto run_task = [&](std::size_t task) {
    const std::size_t ni = task / static_cast<std::size_t>(replications);
    const int r = static_cast<int>(task % static_cast<std::size_t>(replications)) + 1;
    const long long n = n_grid[ni];
    const std::uint64_t seed = derive_seed(
        base_seed, {0x726570ULL, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
    try {
      SampleSet samples = draw(experiment.problem().spec().distribution, n, seed);
      auto oracle = experiment.saa_oracle(samples);
      SAAResult res = solve_regularized(*oracle, experiment.prox_spec(), opts.solver);
      ReplicationRecord rec;
      rec.n = n;
      rec.replication = r;
      rec.seed = seed;
      P0Function diff{u_star.mesh, u_star.values - res.u.values};
      rec.error = p0_l2_norm(diff);
      rec.kkt_residual = res.kkt_residual;
      rec.iterations = res.iterations;
      rec.gradient_gap = experiment.gradient_gap(u_star, samples);
      report.records[task] = rec;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty())
        failure = "replication (N=" + std::to_string(n) + ", r=" + std::to_string(r) +
                  ") failed: " + e.what();
      throw;
    }
  };
  try {
    parallel_for(total, opts.threads, run_task);
  } catch (...) {
    if (!failure.empty()) throw SolverFailure(failure);
    throw;
  }

  // Statistics per N, rate fits, bound curves.
  std::vector<double> n_values, means, luxes;
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    std::vector<double> errors(static_cast<std::size_t>(replications));
    PerNStats s;
    s.n = n_grid[ni];
    for (int r = 0; r < replications; ++r) {
      const auto& rec = report.records[ni * static_cast<std::size_t>(replications) +
                                       static_cast<std::size_t>(r)];
      errors[static_cast<std::size_t>(r)] = rec.error;
      s.mean_error += rec.error;
      s.mse += rec.error * rec.error;
      const double slack = report.alpha * rec.error - rec.gradient_gap;
      report.aposteriori_max_slack = std::max(report.aposteriori_max_slack, slack);
      ++report.aposteriori_checked;
      if (slack > 1e-8) ++report.aposteriori_violations;
    }
    s.mean_error /= replications;
    s.mse /= replications;
    s.luxemburg = luxemburg_estimate(errors);
    s.bound_mse = bound_mean_square(report.alpha, report.sigma_hat, static_cast<double>(s.n));
    s.bound_luxemburg =
        bound_luxemburg(report.alpha, report.tau_hat, static_cast<double>(s.n));
    report.per_n.push_back(s);
    n_values.push_back(static_cast<double>(s.n));
    means.push_back(s.mean_error);
    luxes.push_back(s.luxemburg);
  }
  if (n_grid.size() >= 2) {
    bool positive = true;
    for (double v : means) positive = positive && v > 0.0;
    for (double v : luxes) positive = positive && v > 0.0;
    if (positive) {
      report.mean_fit = fit_rate(n_values, means);
      report.luxemburg_fit = fit_rate(n_values, luxes);
    }
  }

  // Exceedance table at pooled-error quantiles {0.5, 0.75, 0.9}.
  std::vector<double> pooled;
  pooled.reserve(report.records.size());
  for (const auto& rec : report.records) pooled.push_back(rec.error);
  std::sort(pooled.begin(), pooled.end());
  for (double quantile : {0.5, 0.75, 0.9}) {
    const std::size_t pos = std::min(pooled.size() - 1,
                                     static_cast<std::size_t>(quantile * (pooled.size() - 1)));
    const double eps = pooled[pos];
    if (!(eps > 0.0)) continue;
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
      ExceedanceCell cell;
      cell.n = n_grid[ni];
      cell.eps = eps;
      int count = 0;
      for (int r = 0; r < replications; ++r)
        if (report.records[ni * static_cast<std::size_t>(replications) +
                           static_cast<std::size_t>(r)]
                .error >= eps)
          ++count;
      cell.empirical = static_cast<double>(count) / replications;
      cell.bound = report.tau_hat > 0.0
                       ? bound_tail_pinelis(report.alpha, report.tau_hat,
                                            static_cast<double>(cell.n), eps)
                       : 1.0;
      cell.binom_se = std::sqrt(cell.empirical * (1.0 - cell.empirical) /
                                static_cast<double>(replications));
      report.exceedance.push_back(cell);
    }
  }
  return report;
}

// Raw-error CSV: one row per (N, replication), 17 significant digits for the
// floating columns so reruns are byte-identical.
inline std::string errors_csv(const std::vector<ReplicationRecord>& records) {
  std::string out = "N,replication,seed,error,kkt_residual,iterations\n";
  for (const auto& rec : records) {
    out += std::to_string(rec.n);
    out += ',';
    out += std::to_string(rec.replication);
    out += ',';
    out += std::to_string(rec.seed);
    out += ',';
    out += fmt17(rec.error);
    out += ',';
    out += fmt17(rec.kkt_residual);
    out += ',';
    out += std::to_string(rec.iterations);
    out += '\n';
  }
  return out;
}

// Reference-solution field dump: header names the mesh size, then one row per
// cell with its center coordinates.
inline std::string field_csv(const P0Function& u) {
  const Mesh2D& mesh = *u.mesh;
  std::string out = "# n=" + std::to_string(mesh.n) + "\n";
  out += "cell_index,x_center,y_center,u_value\n";
  for (int c = 0; c < mesh.cell_count(); ++c) {
    Eigen::Vector2d center = mesh.cell_center(c);
    out += std::to_string(c);
    out += ',';
    out += fmt17(center[0]);
    out += ',';
    out += fmt17(center[1]);
    out += ',';
    out += fmt17(u.values[c]);
    out += '\n';
  }
  return out;
}

}  // namespace saa
