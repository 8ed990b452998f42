// Experiment driver: `saa_experiments run <kind-or-config> [flags]` resolves a
// config (built-in defaults merged with the file, scale presets, then
// overrides), runs the experiment, and writes errors.csv / reference_u.csv /
// summary.json / manifest.json into the output directory.
//
// Exit codes: 0 ok, 2 config error, 3 solver failure, 4 IO error. Failures
// print a machine-readable error JSON on stdout.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "saa/experiments.hpp"

namespace {

saa::json load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw saa::IoError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return saa::json::parse(buf.str());
  } catch (const std::exception& e) {
    throw saa::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(saa::json& config, const std::string& assignment) {
  const auto pos = assignment.find('=');
  if (pos == std::string::npos || pos == 0)
    throw saa::ConfigError("--set expects key=value, got '" + assignment + "'");
  std::string key = assignment.substr(0, pos);
  const std::string value = assignment.substr(pos + 1);
  for (auto& ch : key)
    if (ch == '.') ch = '/';
  saa::json parsed;
  try {
    parsed = saa::json::parse(value);
  } catch (...) {
    parsed = value;  // bare strings stay strings
  }
  config[saa::json::json_pointer("/" + key)] = parsed;
}

int fail(int code, const std::string& kind, const std::string& message) {
  saa::json err;
  err["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
  std::cout << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAA convergence experiments for linear-quadratic elliptic control"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "resolve a config and run one experiment");
  std::string what;
  std::string config_path;
  std::string out_dir = "out";
  std::string scale;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::vector<std::string> overrides;
  run->add_option("what", what, "experiment kind (example1, example2, optimality5, lognormal61, "
                                "dimension8, bounds3, solve-once) or a config file path");
  run->add_option("--config", config_path, "config file (JSON)");
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; }, "base seed");
  run->add_option("--scale", scale, "desk or paper presets")
      ->check(CLI::IsMember({"desk", "paper"}));
  run->add_option("--threads", threads, "worker threads for replication sweeps");
  run->add_option("--set", overrides, "dotted-path config override, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "config", std::string("argument error: ") + e.what());
  }

  try {
    saa::json config;
    const auto& kinds = saa::experiment_kinds();
    const bool what_is_kind = std::find(kinds.begin(), kinds.end(), what) != kinds.end();
    if (!config_path.empty()) {
      config = load_config_file(config_path);
    } else if (what_is_kind) {
      config = saa::default_config(what);
    } else if (!what.empty()) {
      config = load_config_file(what);
    } else {
      throw saa::ConfigError("nothing to run: pass an experiment kind or --config PATH");
    }
    if (!config.is_object() || !config.contains("experiment"))
      throw saa::ConfigError("config: missing 'experiment'");

    // Partial files inherit the kind's defaults, so the resolved config in
    // summary.json is always complete and reruns exactly.
    saa::json resolved = saa::default_config(config.at("experiment").get<std::string>());
    for (const auto& [key, value] : config.items()) resolved[key] = value;
    if (!scale.empty()) saa::apply_scale_presets(resolved, scale);
    if (seed_set) resolved["seed"] = seed;
    if (threads > 0) resolved["threads"] = threads;
    for (const auto& o : overrides) apply_override(resolved, o);

    saa::RunOutput output = saa::execute_experiment(resolved);
    saa::write_run(output, out_dir);
    for (const auto& [name, bytes] : output.files)
      std::cout << "wrote " << (std::filesystem::path(out_dir) / name).string() << " ("
                << bytes.size() << " bytes)\n";
    return 0;
  } catch (const saa::ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const saa::SolverFailure& e) {
    return fail(3, "solver", e.what());
  } catch (const saa::SpdSolveError& e) {
    return fail(3, "solver", e.what());
  } catch (const saa::IoError& e) {
    return fail(4, "io", e.what());
  } catch (const std::exception& e) {
    return fail(2, "config", e.what());
  }
}
