// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "saa/analytic.hpp"
#include "saa/experiments.hpp"
#include "saa/harness.hpp"
#include "saa/problems.hpp"
#include "saa/solvers.hpp"
#include "saa/statistics.hpp"

using namespace saa;

namespace {

constexpr std::uint64_t kSeed = 20240811ULL;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

TailExperimentReport run_example1_desk() {
  LQExperiment experiment(example1_problem_spec(32), ReferenceStrategy::ExactMoments);
  ReplicationOptions opts;
  opts.sigma_tau_samples = 10000;
  return run_replications(experiment, {2, 4, 8, 16, 32, 64, 128, 256}, 50, kSeed, opts);
}

TailExperimentReport run_example2_desk() {
  LQExperiment experiment(example2_problem_spec(16, 10), ReferenceStrategy::AtomGrid);
  ReplicationOptions opts;
  opts.sigma_tau_samples = 10000;
  return run_replications(experiment, {2, 4, 8, 16, 32, 64, 128}, 50, kSeed + 1, opts);
}

Outcome criterion1(const TailExperimentReport& rep) {
  Outcome o;
  const double mean_rate = rep.mean_fit.rate;
  const double lux_rate = rep.luxemburg_fit.rate;
  o.pass = in_range(mean_rate, -0.65, -0.35) && in_range(lux_rate, -0.65, -0.35);
  o.detail = "mean slope " + fmt(mean_rate) + ", luxemburg slope " + fmt(lux_rate) +
             ", target [-0.65, -0.35]";
  return o;
}

Outcome criterion2(const TailExperimentReport& rep) {
  Outcome o;
  o.pass = in_range(rep.mean_fit.rate, -0.65, -0.35);
  o.detail = "mean slope " + fmt(rep.mean_fit.rate) + ", target [-0.65, -0.35]";
  return o;
}

Outcome criterion3(const TailExperimentReport& rep) {
  Outcome o;
  o.pass = rep.aposteriori_checked == 400 && rep.aposteriori_violations == 0;
  o.detail = std::to_string(rep.aposteriori_checked) + " replications checked, " +
             std::to_string(rep.aposteriori_violations) + " violations, max slack " +
             fmt(rep.aposteriori_max_slack);
  return o;
}

Outcome criterion4(const TailExperimentReport& rep) {
  Outcome o;
  double worst = 0.0;
  for (const auto& s : rep.per_n) {
    const double ratio = s.mse / (1.5 * s.bound_mse);
    worst = std::max(worst, ratio);
    if (s.mse > 1.5 * s.bound_mse) o.pass = false;
  }
  o.detail = "max MSE / (1.5 sigma^2/(alpha^2 N)) = " + fmt(worst) + " (sigma_hat " +
             fmt(rep.sigma_hat) + ")";
  return o;
}

Outcome criterion5() {
  Outcome o;
  OptimalityExampleSpec spec;
  spec.alpha = 1.0;
  spec.n = 16;
  spec.replications = 100000;
  spec.seed = kSeed;
  std::vector<double> errors = optimality_example_errors(spec);
  double worst_sigmas = 0.0;
  for (double f : {0.5, 1.0, 1.5}) {
    const double eps = f / (spec.alpha * std::sqrt(static_cast<double>(spec.n)));
    long long count = 0;
    for (double e : errors)
      if (e >= eps) ++count;
    const double empirical = static_cast<double>(count) / static_cast<double>(errors.size());
    const double exact = optimality_exact_tail(spec.alpha, static_cast<double>(spec.n), eps);
    const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(errors.size()));
    const double sigmas = std::abs(empirical - exact) / se;
    worst_sigmas = std::max(worst_sigmas, sigmas);
    if (sigmas > 3.0) o.pass = false;
  }
  OptimalityGap gap = optimality_gap_constant();
  bool dominated = true;
  for (double n : {1.0, 4.0, 16.0, 64.0, 256.0, 4096.0})
    for (double eps : {0.01, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0})
      dominated = dominated && bound_tail_pinelis(1.0, std::sqrt(gap.tau_sq), n, eps) >=
                                   optimality_exact_tail(1.0, n, eps);
  const double ratio_err = std::abs(gap.exponent_ratio - 1.5 * gap.tau_sq);
  const bool anchor = std::abs(gap.constant - 4.7459) <= 1e-3;
  o.pass = o.pass && dominated && ratio_err <= 1e-6 && anchor;
  o.detail = "max tail deviation " + fmt(worst_sigmas) + " SE, bound dominates: " +
             (dominated ? "yes" : "no") + ", exponent ratio " + fmt(gap.exponent_ratio) +
             " (= 3 tau^2/2 within " + fmt(ratio_err) + ")";
  return o;
}

Outcome criterion6() {
  Outcome o;
  const double e = std::exp(1.0);
  const double moment = chi2_exp_moment(matched_tau_sq());
  const long long n = sample_size_for(1.0, 1.0, 0.1, 0.05);
  const double lux = bound_luxemburg(1.0, 1.0, 27.0);
  o.pass = std::abs(moment - e) <= 1e-12 && n == 1107 && std::abs(lux - 1.0) <= 1e-12;
  o.detail = "chi2 moment err " + fmt(std::abs(moment - e)) + ", N = " + std::to_string(n) +
             ", luxemburg bound err " + fmt(std::abs(lux - 1.0));
  return o;
}

Outcome criterion7() {
  Outcome o;
  DiscreteLQProblem problem(example1_problem_spec(8));
  const Mesh2D& mesh = problem.mesh();
  RandomStream rng(derive_seed(kSeed, {7}));
  SampleSet xis = draw(problem.spec().distribution, 3, derive_seed(kSeed, {70}));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < xis.size(); ++i) {
    Eigen::RowVectorXd xi = xis.values.row(i);
    P0Function u{&mesh, Eigen::VectorXd(mesh.cell_count())};
    for (int c = 0; c < mesh.cell_count(); ++c) u.values[c] = rng.uniform(-0.5, 0.5);
    P0Function g = problem.sample_gradient_smooth(u, xi);
    for (int k = 0; k < 5; ++k) {
      P0Function d{&mesh, Eigen::VectorXd(mesh.cell_count())};
      for (int c = 0; c < mesh.cell_count(); ++c) d.values[c] = rng.uniform(-1.0, 1.0);
      const double step = 1e-4;
      P0Function up{&mesh, u.values + step * d.values};
      P0Function dn{&mesh, u.values - step * d.values};
      const double fd =
          (problem.sample_value_smooth(up, xi) - problem.sample_value_smooth(dn, xi)) / (2 * step);
      const double rel = std::abs(p0_inner(g, d) - fd) / std::max(1e-12, std::abs(fd));
      worst = std::max(worst, rel);
      // Hessian-vector product against gradient differences.
      Eigen::VectorXd hfd = (problem.sample_gradient_smooth(up, xi).values -
                             problem.sample_gradient_smooth(dn, xi).values) /
                            (2 * step);
      Eigen::VectorXd hv = problem.sample_hessvec_smooth(d, xi).values;
      const double hrel = (hv - hfd).norm() / std::max(1e-12, hfd.norm());
      worst = std::max(worst, hrel);
    }
  }
  o.pass = worst <= 1e-5;
  o.detail = "max relative FD error " + fmt(worst) + " (tolerance 1e-5)";
  return o;
}

Outcome criterion8() {
  Outcome o;
  DiscreteLQProblem problem(example1_problem_spec(8));
  auto kernel = std::make_shared<const ScalarDiffusionKernel>(problem);
  SampleSet s = draw(problem.spec().distribution, 4, derive_seed(kSeed, {8}));
  ScalarSaaOracle oracle(kernel, s);
  ProxSpec p = ProxSpec::from(problem.spec());
  SAAResult res = semismooth_newton(oracle, p);
  const bool bounds_exact = res.u.values.maxCoeff() <= 1.0 && res.u.values.minCoeff() >= -1.0;
  bool nonexpansive = true;
  RandomStream rng(derive_seed(kSeed, {88}));
  const Mesh2D& mesh = problem.mesh();
  for (int k = 0; k < 1000; ++k) {
    P0Function q1{&mesh, Eigen::VectorXd(mesh.cell_count())};
    P0Function q2{&mesh, Eigen::VectorXd(mesh.cell_count())};
    for (int c = 0; c < mesh.cell_count(); ++c) {
      q1.values[c] = rng.uniform(-2.0, 2.0);
      q2.values[c] = rng.uniform(-2.0, 2.0);
    }
    P0Function du{&mesh, prox(q1, p).values - prox(q2, p).values};
    P0Function dq{&mesh, q1.values - q2.values};
    nonexpansive =
        nonexpansive && p0_l2_norm(du) <= (1.0 / p.alpha) * p0_l2_norm(dq) + 1e-14;
  }
  o.pass = res.kkt_residual <= 1e-10 && res.iterations <= 10 && bounds_exact && nonexpansive;
  o.detail = "kkt " + fmt(res.kkt_residual) + ", outer iterations " +
             std::to_string(res.iterations) + ", bounds exact: " + (bounds_exact ? "yes" : "no") +
             ", prox nonexpansive over 1000 pairs: " + (nonexpansive ? "yes" : "no");
  return o;
}

Outcome criterion9() {
  Outcome o;
  std::vector<double> eigs;
  for (int n : {2, 4, 8}) {
    DiscreteLQProblem problem(example1_problem_spec(n));
    auto kernel = std::make_shared<const ScalarDiffusionKernel>(problem);
    ScalarExactOracle oracle = ScalarExactOracle::from_problem(kernel);
    eigs.push_back(f1_hessian_min_eig(oracle));
  }
  o.pass = eigs[0] > eigs[1] && eigs[1] > eigs[2] && eigs[2] >= 0.0;
  o.detail = "min eigenvalues " + fmt(eigs[0]) + " > " + fmt(eigs[1]) + " > " + fmt(eigs[2]);
  return o;
}

Outcome criterion10() {
  Outcome o;
  const double alpha = 1e-3;
  const double residual = lognormal_normal_equation_residual(alpha);
  bool threshold_ok = true;
  const double xi_star = lognormal_threshold_xi(alpha);
  for (int i = 0; i < 100; ++i) {
    const double xi = xi_star + 6.0 * i / 99.0;
    if (lognormal_gradient_norm(alpha, xi) <
        std::exp(xi) / (M_PI * M_PI) * yd_eigen_l2_norm() * (1.0 - 1e-12))
      threshold_ok = false;
  }
  LognormalDemoSpec spec;
  spec.alpha = alpha;
  spec.tau_grid = {10.0};
  spec.sample_counts = {1000, 10000, 100000, 1000000};
  spec.seed = kSeed;
  LognormalViolationReport rep = lognormal_violation_evidence(spec);
  const auto& ln = rep.lognormal[0];
  const auto& tr = rep.contrast[0];
  const bool grows = ln.estimates[3] > ln.estimates[1];
  const bool stabilizes =
      std::abs(tr.estimates[3] - tr.estimates[2]) <= 0.01 * tr.estimates[3] &&
      tr.estimates[3] <= std::exp(1.0);
  o.pass = residual <= 1e-12 && threshold_ok && grows && stabilizes;
  char growth[128];
  std::snprintf(growth, sizeof(growth), "%.8g -> %.8g, contrast settles at %.8g",
                ln.estimates[1], ln.estimates[3], tr.estimates[3]);
  o.detail = "normal-equation residual " + fmt(residual) + ", threshold grid: " +
             (threshold_ok ? "holds" : "fails") + ", exp-moment growth " + growth;
  return o;
}

Outcome criterion11() {
  Outcome o;
  ExpMomentCheckReport moment =
      check_exp_moment_inequality(1.0, {0.0, 0.5, 1.0, 2.0, 4.0}, 1000000, derive_seed(kSeed, {11}));
  HilbertTailReport tail2 = check_hilbert_sum_tail(2, 16, 100000, derive_seed(kSeed, {112}));
  HilbertTailReport tail10 = check_hilbert_sum_tail(10, 8, 100000, derive_seed(kSeed, {113}));
  o.pass = moment.violations == 0 && tail2.violations == 0 && tail10.violations == 0;
  o.detail = "violations: exp-moment " + std::to_string(moment.violations) + ", hilbert dim 2: " +
             std::to_string(tail2.violations) + ", dim 10: " + std::to_string(tail10.violations);
  return o;
}

Outcome criterion12() {
  Outcome o;
  json config = default_config("example1");
  config["n"] = 16;
  config["n_grid"] = json::array({2, 8, 32});
  config["replications"] = 10;
  config["sigma_tau_samples"] = 500;
  config["seed"] = kSeed;
  RunOutput a = execute_experiment(config);
  RunOutput b = execute_experiment(config);
  json threaded = config;
  threaded["threads"] = 4;
  RunOutput c = execute_experiment(threaded);
  const bool rerun_equal = a.files.at("errors.csv") == b.files.at("errors.csv");
  const bool thread_equal = a.files.at("errors.csv") == c.files.at("errors.csv");
  o.pass = rerun_equal && thread_equal;
  o.detail = std::string("rerun byte-identical: ") + (rerun_equal ? "yes" : "no") +
             ", threads 1 vs 4 byte-identical: " + (thread_equal ? "yes" : "no");
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  const auto suite_start = std::chrono::steady_clock::now();

  TailExperimentReport rep1, rep2;
  std::string setup_error;
  try {
    rep1 = run_example1_desk();
    rep2 = run_example2_desk();
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Entry> entries = {
      {1, "rate reproduction, scalar-diffusion example (n=32, R=50)",
       [&] { return criterion1(rep1); }},
      {2, "rate reproduction, two-block example (n=16, atom grid 10)",
       [&] { return criterion2(rep2); }},
      {3, "a-posteriori error estimate holds for every replication",
       [&] { return criterion3(rep1); }},
      {4, "empirical MSE within 1.5x the mean-square bound", [&] { return criterion4(rep1); }},
      {5, "chi-square example: exact tail, bound dominance, exponent ratio", criterion5},
      {6, "closed-form checks (moment, sample size, luxemburg bound)", criterion6},
      {7, "finite-difference gradient and Hessian checks", criterion7},
      {8, "semismooth Newton contract and prox nonexpansiveness", criterion8},
      {9, "smallest Hessian eigenvalue decreases under refinement", criterion9},
      {10, "log-normal violation demo", criterion10},
      {11, "concentration inequality checks without violations", criterion11},
      {12, "byte-identical raw errors across reruns and thread counts", criterion12},
  };

  for (const auto& entry : entries) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      if (!setup_error.empty() && (entry.id <= 4)) {
        o.pass = false;
        o.detail = "setup failed: " + setup_error;
      } else {
        o = entry.run();
      }
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2d: %s -- %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", entry.id,
                entry.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
  std::printf("%d/%zu criteria passed [total %.1fs]\n", static_cast<int>(entries.size()) - failures,
              entries.size(), total);
  return failures;
}
