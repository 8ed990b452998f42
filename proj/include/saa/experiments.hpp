#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "saa/analytic.hpp"
#include "saa/harness.hpp"
#include "saa/problems.hpp"
#include "saa/util.hpp"
#include "saa/version.hpp"

namespace saa {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Distribution <-> JSON
// ---------------------------------------------------------------------------

inline json distribution_to_json(const ParamDistribution& d);

namespace detail {

inline ParamDistribution distribution_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type"))
    throw ConfigError(where + ": distribution needs an object with a 'type'");
  const std::string type = j.at("type").get<std::string>();
  auto need = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> allowed{"type"};
    for (const char* k : keys) allowed.insert(k);
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (!allowed.count(key)) throw ConfigError(where + ": unknown distribution key '" + key + "'");
    }
    for (const char* k : keys)
      if (!j.contains(k)) throw ConfigError(where + ": distribution key '" + std::string(k) + "' missing");
  };
  try {
    if (type == "truncated_normal") {
      need({"lo", "hi", "mean", "sd"});
      return ParamDistribution::truncated_normal(j.at("lo").get<double>(), j.at("hi").get<double>(),
                                                 j.at("mean").get<double>(), j.at("sd").get<double>());
    }
    if (type == "uniform") {
      need({"lo", "hi"});
      return ParamDistribution::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    }
    if (type == "standard_normal") {
      need({});
      return ParamDistribution::standard_normal();
    }
    if (type == "discrete_grid_2d") {
      need({"lo1", "hi1", "lo2", "hi2", "k"});
      return discrete_grid(j.at("lo1").get<double>(), j.at("hi1").get<double>(),
                           j.at("lo2").get<double>(), j.at("hi2").get<double>(),
                           j.at("k").get<int>());
    }
    if (type == "product") {
      need({"components"});
      std::vector<ParamDistribution> comps;
      for (const auto& c : j.at("components"))
        comps.push_back(distribution_from_json(c, where + ".components"));
      return ParamDistribution::product(std::move(comps));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown distribution type '" + type + "'");
}

}  // namespace detail

inline json distribution_to_json(const ParamDistribution& d) {
  if (const auto* tn = std::get_if<TruncatedNormal>(&d.v))
    return {{"type", "truncated_normal"}, {"lo", tn->lo}, {"hi", tn->hi}, {"mean", tn->mean},
            {"sd", tn->sd}};
  if (const auto* un = std::get_if<Uniform>(&d.v))
    return {{"type", "uniform"}, {"lo", un->lo}, {"hi", un->hi}};
  if (const auto* g = std::get_if<DiscreteGrid2D>(&d.v))
    return {{"type", "discrete_grid_2d"}, {"lo1", g->lo1}, {"hi1", g->hi1},
            {"lo2", g->lo2}, {"hi2", g->hi2}, {"k", g->k}};
  if (std::holds_alternative<StandardNormal>(d.v)) return {{"type", "standard_normal"}};
  json comps = json::array();
  for (const auto& c : std::get<std::vector<ParamDistribution>>(d.v))
    comps.push_back(distribution_to_json(c));
  return {{"type", "product"}, {"components", comps}};
}

// ---------------------------------------------------------------------------
// Experiment kinds, defaults, scale presets
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "example1", "example2", "optimality5", "lognormal61", "dimension8", "bounds3", "solve-once"};
  return kinds;
}

namespace detail {

inline json default_distribution_for(const std::string& base, int atoms_per_axis) {
  if (base == "example1") return distribution_to_json(example1_distribution());
  return distribution_to_json(example2_distribution(atoms_per_axis));
}

inline std::vector<long long> dyadic_grid(long long max_n) {
  std::vector<long long> grid;
  for (long long n = 2; n <= max_n; n *= 2) grid.push_back(n);
  return grid;
}

}  // namespace detail

// Desk-scale defaults; `apply_scale_presets` switches the mesh and atom-grid
// resolution to the full-scale presets without touching anything else.
inline json default_config(const std::string& kind) {
  json c;
  c["experiment"] = kind;
  c["scale"] = "desk";
  c["seed"] = 20240811ULL;
  c["threads"] = 1;
  if (kind == "example1" || kind == "example2" || kind == "solve-once") {
    const std::string base =
        (kind == "solve-once") ? "example1" : kind;
    if (kind == "solve-once") {
      c["base"] = base;
      c["n_samples"] = 0;
    } else {
      c["n_grid"] = detail::dyadic_grid(kind == "example1" ? 256 : 128);
      c["replications"] = 50;
      c["sigma_tau_samples"] = 10000;
    }
    c["n"] = (base == "example1") ? 32 : 16;
    c["alpha"] = (base == "example1") ? 1e-3 : 1e-4;
    c["gamma"] = (base == "example1") ? 5.5e-4 : 0.0;
    if (base == "example1")
      c["bounds"] = json::array({-1.0, 1.0});
    else
      c["bounds"] = nullptr;
    c["atoms_per_axis"] = 10;
    c["reference"] = (base == "example1") ? "exact-moments" : "atom-grid";
    c["distribution"] = detail::default_distribution_for(base, 10);
    c["solver_tol"] = 1e-10;
    c["max_outer"] = 50;
  } else if (kind == "optimality5") {
    c["alpha"] = 1.0;
    c["n_grid"] = json::array({16, 64, 256});
    c["replications"] = 10000;
    c["eps_factors"] = json::array({0.5, 1.0, 1.5});
  } else if (kind == "lognormal61") {
    c["alpha"] = 1e-3;
    c["tau_grid"] = json::array({2.0, 5.0, 10.0, 20.0});
    c["sample_counts"] = json::array({1000, 10000, 100000, 1000000});
    c["xi_grid_points"] = 100;
  } else if (kind == "dimension8") {
    c["finite"] = {{"dim", 10}, {"sigma_sq", 1.0}, {"eps", 0.1}, {"trials", 10000}};
    c["infinite"] =
        {{"k_trunc", 100}, {"c", 1.0}, {"eps", 0.5}, {"delta", 0.05}, {"trials", 10000}};
  } else if (kind == "bounds3") {
    c["gauss_sd"] = 1.0;
    c["lambda_grid"] = json::array({0.0, 0.5, 1.0, 2.0, 4.0});
    c["trials"] = 1000000;
    c["hilbert"] = {{"dim", 2}, {"n", 16}, {"trials", 100000}};
  } else {
    throw ConfigError("unknown experiment kind '" + kind + "'");
  }
  return c;
}

// The "paper" presets: example1 n=256, example2 n=64 with a 50x50 atom grid.
inline void apply_scale_presets(json& config, const std::string& scale) {
  if (scale != "desk" && scale != "paper") throw ConfigError("scale must be 'desk' or 'paper'");
  config["scale"] = scale;
  const std::string kind = config.value("experiment", "");
  const std::string base = (kind == "solve-once") ? config.value("base", "example1") : kind;
  if (kind != "example1" && kind != "example2" && kind != "solve-once") return;
  const bool paper = scale == "paper";
  if (base == "example1") {
    config["n"] = paper ? 256 : 32;
  } else {
    config["n"] = paper ? 64 : 16;
    const int k = paper ? 50 : 10;
    config["atoms_per_axis"] = k;
    if (config.contains("distribution") &&
        config["distribution"].value("type", "") == "discrete_grid_2d")
      config["distribution"]["k"] = k;
  }
}

// ---------------------------------------------------------------------------
// Validation: unknown keys are rejected before any computation.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double positive(const json& j, const char* key, const std::string& where) {
  const double v = j.at(key).get<double>();
  if (!(v > 0.0)) throw ConfigError(where + ": '" + key + "' must be positive");
  return v;
}

}  // namespace detail

inline void validate_config(const json& config) {
  if (!config.is_object() || !config.contains("experiment"))
    throw ConfigError("config: missing 'experiment'");
  const std::string kind = config.at("experiment").get<std::string>();
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
    throw ConfigError("config: unknown experiment '" + kind + "'");
  const std::string scale = config.value("scale", "desk");
  if (scale != "desk" && scale != "paper") throw ConfigError("config: bad scale");
  if (config.contains("threads") && config.at("threads").get<int>() < 1)
    throw ConfigError("config: threads must be >= 1");

  if (kind == "example1" || kind == "example2" || kind == "solve-once") {
    std::set<std::string> allowed = {"experiment", "scale",  "seed",          "threads",
                                     "n",          "alpha",  "gamma",         "bounds",
                                     "atoms_per_axis",       "reference",     "distribution",
                                     "solver_tol", "max_outer"};
    if (kind == "solve-once") {
      allowed.insert("base");
      allowed.insert("n_samples");
    } else {
      allowed.insert("n_grid");
      allowed.insert("replications");
      allowed.insert("sigma_tau_samples");
    }
    detail::check_keys(config, allowed, "config");
    if (config.at("n").get<int>() < 1) throw ConfigError("config: n must be >= 1");
    detail::positive(config, "alpha", "config");
    if (config.at("gamma").get<double>() < 0.0) throw ConfigError("config: gamma must be >= 0");
    const json& b = config.at("bounds");
    if (!b.is_null()) {
      if (!b.is_array() || b.size() != 2 ||
          !(b[0].get<double>() < b[1].get<double>()))
        throw ConfigError("config: bounds must be null or [lo, hi] with lo < hi");
    }
    const std::string ref = config.at("reference").get<std::string>();
    if (ref != "exact-moments" && ref != "atom-grid")
      throw ConfigError("config: reference must be 'exact-moments' or 'atom-grid'");
    detail::distribution_from_json(config.at("distribution"), "config.distribution");
    detail::positive(config, "solver_tol", "config");
    if (config.at("max_outer").get<int>() < 1) throw ConfigError("config: max_outer must be >= 1");
    if (kind == "solve-once") {
      const std::string base = config.at("base").get<std::string>();
      if (base != "example1" && base != "example2")
        throw ConfigError("config: base must be 'example1' or 'example2'");
      if (config.at("n_samples").get<long long>() < 0)
        throw ConfigError("config: n_samples must be >= 0");
    } else {
      const auto grid = config.at("n_grid").get<std::vector<long long>>();
      if (grid.empty()) throw ConfigError("config: n_grid must be nonempty");
      for (long long n : grid)
        if (n < 1) throw ConfigError("config: n_grid entries must be >= 1");
      if (config.at("replications").get<int>() < 1)
        throw ConfigError("config: replications must be >= 1");
      if (config.at("sigma_tau_samples").get<long long>() < 2)
        throw ConfigError("config: sigma_tau_samples must be >= 2");
    }
    return;
  }
  if (kind == "optimality5") {
    detail::check_keys(config, {"experiment", "scale", "seed", "threads", "alpha", "n_grid",
                                "replications", "eps_factors"},
                       "config");
    detail::positive(config, "alpha", "config");
    for (long long n : config.at("n_grid").get<std::vector<long long>>())
      if (n < 1) throw ConfigError("config: n_grid entries must be >= 1");
    if (config.at("replications").get<long long>() < 1)
      throw ConfigError("config: replications must be >= 1");
    for (double f : config.at("eps_factors").get<std::vector<double>>())
      if (!(f > 0.0)) throw ConfigError("config: eps_factors must be positive");
    return;
  }
  if (kind == "lognormal61") {
    detail::check_keys(config, {"experiment", "scale", "seed", "threads", "alpha", "tau_grid",
                                "sample_counts", "xi_grid_points"},
                       "config");
    detail::positive(config, "alpha", "config");
    for (double t : config.at("tau_grid").get<std::vector<double>>())
      if (!(t > 0.0)) throw ConfigError("config: tau_grid must be positive");
    for (long long n : config.at("sample_counts").get<std::vector<long long>>())
      if (n < 1) throw ConfigError("config: sample_counts must be >= 1");
    if (config.at("xi_grid_points").get<int>() < 2)
      throw ConfigError("config: xi_grid_points must be >= 2");
    return;
  }
  if (kind == "dimension8") {
    detail::check_keys(config, {"experiment", "scale", "seed", "threads", "finite", "infinite"},
                       "config");
    detail::check_keys(config.at("finite"), {"dim", "sigma_sq", "eps", "trials"}, "config.finite");
    detail::check_keys(config.at("infinite"), {"k_trunc", "c", "eps", "delta", "trials"},
                       "config.infinite");
    return;
  }
  // bounds3
  detail::check_keys(config,
                     {"experiment", "scale", "seed", "threads", "gauss_sd", "lambda_grid",
                      "trials", "hilbert"},
                     "config");
  detail::check_keys(config.at("hilbert"), {"dim", "n", "trials"}, "config.hilbert");
  detail::positive(config, "gauss_sd", "config");
}

// ---------------------------------------------------------------------------
// Problem construction for the two PDE examples
// ---------------------------------------------------------------------------

inline LQProblemSpec make_problem_spec(const std::string& base, const json& config) {
  LQProblemSpec spec;
  spec.n = config.at("n").get<int>();
  spec.alpha = config.at("alpha").get<double>();
  spec.target = standard_target_field();
  spec.reg.gamma = config.at("gamma").get<double>();
  const json& b = config.at("bounds");
  if (!b.is_null()) {
    spec.reg.lower = b[0].get<double>();
    spec.reg.upper = b[1].get<double>();
  }
  spec.distribution = detail::distribution_from_json(config.at("distribution"), "config.distribution");
  if (base == "example1") {
    spec.diffusion = DiffusionModel::Scalar;
    spec.rhs = RhsModel::Separable;
    spec.rhs_profile = standard_rhs_profile();
  } else {
    spec.diffusion = DiffusionModel::TwoBlock;
    spec.rhs = RhsModel::Zero;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Execution: pure (config -> file contents), IO kept separate.
// ---------------------------------------------------------------------------

struct RunOutput {
  json summary;
  json manifest;
  std::map<std::string, std::string> files;  // filename -> bytes (includes the JSONs)
};

namespace detail {

inline json saa_result_json(const SAAResult& r) {
  return {{"kkt_residual", r.kkt_residual},
          {"iterations", r.iterations},
          {"cg_iterations", r.cg_iterations}};
}

inline json report_json(const TailExperimentReport& rep) {
  json per_n = json::array();
  for (const auto& s : rep.per_n)
    per_n.push_back({{"N", s.n},
                     {"mean_error", s.mean_error},
                     {"mse", s.mse},
                     {"luxemburg", s.luxemburg},
                     {"bound_mse", s.bound_mse},
                     {"bound_luxemburg", s.bound_luxemburg}});
  json exc = json::array();
  for (const auto& c : rep.exceedance)
    exc.push_back({{"N", c.n},
                   {"eps", c.eps},
                   {"empirical", c.empirical},
                   {"bound", c.bound},
                   {"binom_se", c.binom_se}});
  return {{"alpha", rep.alpha},
          {"sigma_hat", rep.sigma_hat},
          {"tau_hat", rep.tau_hat},
          {"replications", rep.replications},
          {"base_seed", rep.base_seed},
          {"reference", saa_result_json(rep.reference)},
          {"per_N", per_n},
          {"fit_mean", {{"logC", rep.mean_fit.logC}, {"rate", rep.mean_fit.rate}}},
          {"fit_luxemburg",
           {{"logC", rep.luxemburg_fit.logC}, {"rate", rep.luxemburg_fit.rate}}},
          {"exceedance", exc},
          {"aposteriori",
           {{"checked", rep.aposteriori_checked},
            {"violations", rep.aposteriori_violations},
            {"max_slack", rep.aposteriori_max_slack}}}};
}

inline RunOutput finalize(const json& config, json summary,
                          std::map<std::string, std::string> files) {
  RunOutput out;
  summary["config"] = config;
  summary["config_digest"] = Sha256::of(config.dump());
  summary["version"] = kVersion;
  out.summary = std::move(summary);
  files["summary.json"] = out.summary.dump(2) + "\n";
  json manifest;
  manifest["experiment"] = config.at("experiment");
  manifest["version"] = kVersion;
  manifest["config_digest"] = Sha256::of(config.dump());
  manifest["base_seed"] = config.value("seed", 0ULL);
  json names = json::array();
  for (const auto& [name, bytes] : files) {
    (void)bytes;
    names.push_back(name);
  }
  names.push_back("manifest.json");
  manifest["files"] = names;
  out.manifest = manifest;
  files["manifest.json"] = manifest.dump(2) + "\n";
  out.files = std::move(files);
  return out;
}

inline RunOutput run_replication_experiment(const json& config) {
  const std::string kind = config.at("experiment").get<std::string>();
  LQProblemSpec spec = make_problem_spec(kind, config);
  const ReferenceStrategy strategy = config.at("reference").get<std::string>() == "exact-moments"
                                         ? ReferenceStrategy::ExactMoments
                                         : ReferenceStrategy::AtomGrid;
  LQExperiment experiment(std::move(spec), strategy);
  ReplicationOptions opts;
  opts.solver.tol = config.at("solver_tol").get<double>();
  opts.solver.max_outer = config.at("max_outer").get<int>();
  opts.threads = static_cast<unsigned>(config.value("threads", 1));
  opts.sigma_tau_samples = config.at("sigma_tau_samples").get<long long>();
  TailExperimentReport rep =
      run_replications(experiment, config.at("n_grid").get<std::vector<long long>>(),
                       config.at("replications").get<int>(), config.at("seed").get<std::uint64_t>(),
                       opts);
  std::map<std::string, std::string> files;
  files["errors.csv"] = errors_csv(rep.records);
  files["reference_u.csv"] = field_csv(rep.reference.u);
  return finalize(config, report_json(rep), std::move(files));
}

inline RunOutput run_optimality_experiment(const json& config) {
  const double alpha = config.at("alpha").get<double>();
  const auto n_grid = config.at("n_grid").get<std::vector<long long>>();
  const long long replications = config.at("replications").get<long long>();
  const auto eps_factors = config.at("eps_factors").get<std::vector<double>>();
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();

  std::vector<ReplicationRecord> records;
  json per_n = json::array();
  std::vector<double> n_values, means, luxes;
  const double tau_sq = matched_tau_sq();
  for (long long n : n_grid) {
    OptimalityExampleSpec s;
    s.alpha = alpha;
    s.n = n;
    s.replications = replications;
    s.seed = derive_seed(seed, {0x746c31ULL, static_cast<std::uint64_t>(n)});
    std::vector<double> errors = optimality_example_errors(s);
    double mean = 0.0, mse = 0.0;
    for (std::size_t r = 0; r < errors.size(); ++r) {
      mean += errors[r];
      mse += errors[r] * errors[r];
      ReplicationRecord rec;
      rec.n = n;
      rec.replication = static_cast<int>(r) + 1;
      rec.seed = s.seed;
      rec.error = errors[r];
      records.push_back(rec);
    }
    mean /= static_cast<double>(errors.size());
    mse /= static_cast<double>(errors.size());
    const double lux = luxemburg_estimate(errors);
    json tails = json::array();
    for (double f : eps_factors) {
      const double eps = f / (alpha * std::sqrt(static_cast<double>(n)));
      long long count = 0;
      for (double e : errors)
        if (e >= eps) ++count;
      const double empirical = static_cast<double>(count) / static_cast<double>(errors.size());
      const double exact = optimality_exact_tail(alpha, static_cast<double>(n), eps);
      tails.push_back(
          {{"eps", eps},
           {"empirical", empirical},
           {"exact", exact},
           {"pinelis", bound_tail_pinelis(alpha, std::sqrt(tau_sq), static_cast<double>(n), eps)},
           {"binom_se",
            std::sqrt(exact * (1.0 - exact) / static_cast<double>(errors.size()))}});
    }
    per_n.push_back({{"N", n},
                     {"mean_error", mean},
                     {"mse", mse},
                     {"luxemburg", lux},
                     {"tails", tails}});
    n_values.push_back(static_cast<double>(n));
    means.push_back(mean);
    luxes.push_back(lux);
  }
  json summary;
  summary["per_N"] = per_n;
  if (n_values.size() >= 2) {
    RateFit mf = fit_rate(n_values, means);
    RateFit lf = fit_rate(n_values, luxes);
    summary["fit_mean"] = {{"logC", mf.logC}, {"rate", mf.rate}};
    summary["fit_luxemburg"] = {{"logC", lf.logC}, {"rate", lf.rate}};
  }
  OptimalityGap gap = optimality_gap_constant();
  summary["tau_sq"] = gap.tau_sq;
  summary["exponent_ratio"] = gap.exponent_ratio;
  summary["gap_constant"] = gap.constant;
  summary["chi2_exp_moment_at_matched_tau"] = chi2_exp_moment(gap.tau_sq);
  std::map<std::string, std::string> files;
  files["errors.csv"] = errors_csv(records);
  return finalize(config, std::move(summary), std::move(files));
}

inline RunOutput run_lognormal_experiment(const json& config) {
  LognormalDemoSpec spec;
  spec.alpha = config.at("alpha").get<double>();
  spec.tau_grid = config.at("tau_grid").get<std::vector<double>>();
  spec.sample_counts = config.at("sample_counts").get<std::vector<long long>>();
  spec.seed = config.at("seed").get<std::uint64_t>();
  LognormalViolationReport rep = lognormal_violation_evidence(spec);

  const int grid_points = config.at("xi_grid_points").get<int>();
  bool threshold_ok = true;
  const double lo = rep.threshold_xi;
  const double hi = rep.threshold_xi + 5.0;
  for (int i = 0; i < grid_points; ++i) {
    const double xi = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
    const double lhs = lognormal_gradient_norm(spec.alpha, xi);
    const double rhs = std::exp(xi) / (M_PI * M_PI) * yd_eigen_l2_norm();
    if (lhs < rhs) threshold_ok = false;
  }

  auto traces_json = [](const std::vector<ExpMomentTrace>& traces) {
    json arr = json::array();
    for (const auto& t : traces)
      arr.push_back({{"tau", t.tau},
                     {"estimates", t.estimates},
                     {"exceeds_e", t.exceeds_e},
                     {"growing", t.growing}});
    return arr;
  };
  json summary;
  summary["alpha"] = rep.alpha;
  summary["c_star"] = rep.c_star;
  summary["normal_equation_residual"] = rep.normal_equation_residual;
  summary["threshold_xi"] = rep.threshold_xi;
  summary["threshold_inequality_holds"] = threshold_ok;
  summary["yd_l2_norm"] = yd_eigen_l2_norm();
  summary["lognormal"] = traces_json(rep.lognormal);
  summary["contrast_truncated"] = traces_json(rep.contrast);
  return finalize(config, std::move(summary), {});
}

inline RunOutput run_dimension_experiment(const json& config) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const json& fin = config.at("finite");
  FiniteDimensionDemo finite = dimension_demo_finite(
      fin.at("dim").get<int>(), fin.at("sigma_sq").get<double>(), fin.at("eps").get<double>(),
      fin.at("trials").get<long long>(), derive_seed(seed, {0x66696eULL}));
  const json& inf = config.at("infinite");
  InfiniteDimensionDemo infinite = dimension_demo_infinite(
      inf.at("k_trunc").get<int>(), inf.at("c").get<double>(), inf.at("eps").get<double>(),
      inf.at("delta").get<double>(), inf.at("trials").get<long long>(),
      derive_seed(seed, {0x696e66ULL}));
  json summary;
  summary["finite"] = {{"dim", finite.dim},
                       {"sigma_sq", finite.sigma_sq},
                       {"eps", finite.eps},
                       {"expected_sq_norm", finite.expected_sq_norm},
                       {"chi2_mean", finite.chi2_mean},
                       {"required_N", finite.required_n},
                       {"N_values", finite.n_values},
                       {"exceedance", finite.exceedance}};
  summary["infinite"] = {{"k_trunc", infinite.k_trunc},
                         {"c", infinite.variance_scale},
                         {"eps", infinite.eps},
                         {"delta", infinite.delta},
                         {"expected_sq_norm", infinite.expected_sq_norm},
                         {"sufficient_N", infinite.sufficient_n},
                         {"success_frequency", infinite.success_frequency}};
  return finalize(config, std::move(summary), {});
}

inline RunOutput run_bounds_experiment(const json& config) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  ExpMomentCheckReport moment = check_exp_moment_inequality(
      config.at("gauss_sd").get<double>(), config.at("lambda_grid").get<std::vector<double>>(),
      config.at("trials").get<long long>(), derive_seed(seed, {0x626e64ULL, 1}));
  const json& h = config.at("hilbert");
  HilbertTailReport tail =
      check_hilbert_sum_tail(h.at("dim").get<int>(), h.at("n").get<long long>(),
                             h.at("trials").get<long long>(), derive_seed(seed, {0x626e64ULL, 2}));
  json rows = json::array();
  for (const auto& r : moment.rows)
    rows.push_back({{"lambda", r.lambda},
                    {"lhs", r.lhs},
                    {"rhs", r.rhs},
                    {"se", r.se},
                    {"violated", r.violated}});
  json tails = json::array();
  for (const auto& r : tail.rows)
    tails.push_back({{"eps", r.eps},
                     {"empirical", r.empirical},
                     {"bound", r.bound},
                     {"se", r.se},
                     {"violated", r.violated}});
  json summary;
  summary["exp_moment"] = {{"gauss_sd", moment.gauss_sd},
                           {"sigma_sq", moment.sigma_sq},
                           {"rows", rows},
                           {"violations", moment.violations}};
  summary["hilbert_tail"] = {{"dim", tail.dim},
                             {"N", tail.n},
                             {"sigma_sq", tail.sigma_sq},
                             {"rows", tails},
                             {"violations", tail.violations}};
  return finalize(config, std::move(summary), {});
}

inline RunOutput run_solve_once(const json& config) {
  const std::string base = config.at("base").get<std::string>();
  LQProblemSpec spec = make_problem_spec(base, config);
  DiscreteLQProblem problem(std::move(spec));
  SolverOptions opts;
  opts.tol = config.at("solver_tol").get<double>();
  opts.max_outer = config.at("max_outer").get<int>();
  const long long n_samples = config.at("n_samples").get<long long>();
  SAAResult res;
  if (n_samples == 0) {
    const ReferenceStrategy strategy = config.at("reference").get<std::string>() == "exact-moments"
                                           ? ReferenceStrategy::ExactMoments
                                           : ReferenceStrategy::AtomGrid;
    res = solve_reference(problem, strategy, opts);
  } else {
    SampleSet samples = draw(problem.spec().distribution, n_samples,
                             config.at("seed").get<std::uint64_t>());
    SampleAverageOracle oracle(problem, samples);
    res = solve_regularized(oracle, ProxSpec::from(problem.spec()), opts);
  }
  json summary;
  summary["solve"] = saa_result_json(res);
  summary["n_samples"] = n_samples;
  summary["u_l2_norm"] = p0_l2_norm(res.u);
  summary["u_l1_norm"] = p0_l1_norm(res.u);
  std::map<std::string, std::string> files;
  files["reference_u.csv"] = field_csv(res.u);
  return finalize(config, std::move(summary), std::move(files));
}

}  // namespace detail

// Validates and runs a resolved config; returns all artifacts as bytes.
inline RunOutput execute_experiment(const json& config) {
  validate_config(config);
  const std::string kind = config.at("experiment").get<std::string>();
  if (kind == "example1" || kind == "example2") return detail::run_replication_experiment(config);
  if (kind == "optimality5") return detail::run_optimality_experiment(config);
  if (kind == "lognormal61") return detail::run_lognormal_experiment(config);
  if (kind == "dimension8") return detail::run_dimension_experiment(config);
  if (kind == "bounds3") return detail::run_bounds_experiment(config);
  return detail::run_solve_once(config);
}

inline void write_run(const RunOutput& out, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
  for (const auto& [name, bytes] : out.files) {
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + path.string() + "'");
  }
}

}  // namespace saa
