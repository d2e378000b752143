#include "patopa/errors.hpp"
#include "patopa/harness.hpp"
#include "patopa/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace patopa;

struct Flags {
  std::string config;
  std::string feeder;
  std::string method;
  std::vector<double> noise_levels;
  std::optional<int> trials;
  std::optional<Index> samples;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string input;
  std::vector<Index> missing;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "experiment config JSON");
  cmd->add_option("--feeder", f.feeder, "feeder JSON");
  cmd->add_option("--method", f.method, "OLS, TLS, GLRA_DIAG or PATOPA (comma-separated)");
  cmd->add_option("--noise-level", f.noise_levels, "relative noise level(s)")->delimiter(',');
  cmd->add_option("--trials", f.trials, "trials per noise level");
  cmd->add_option("--samples", f.samples, "time steps T");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--workers", f.workers, "parallel trial workers");
  cmd->add_option("--out", f.out, "output directory or file");
  cmd->add_option("--missing-angle", f.missing, "non-slack buses without angle data")
      ->delimiter(',');
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(parse_method(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

ExperimentConfig resolve_config(const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.feeder.empty()) cfg.feeder = f.feeder;
  if (!f.method.empty()) cfg.methods = parse_methods(f.method);
  if (!f.noise_levels.empty()) cfg.noise_levels = f.noise_levels;
  if (f.trials) cfg.trials = *f.trials;
  if (f.samples) cfg.samples = *f.samples;
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.missing.empty()) cfg.missing_angle_buses = f.missing;
  if (cfg.feeder.empty()) throw InvalidArgument("a feeder file is required (--feeder or config)");
  cfg.validate();
  return cfg;
}

int cmd_generate(const Flags& f) {
  const ExperimentConfig cfg = resolve_config(f);
  const std::size_t files = run_generate(cfg);
  spdlog::info("wrote {} measurement files to {}", files, cfg.output_dir.string());
  return 0;
}

int cmd_estimate(const Flags& f) {
  if (f.input.empty()) throw InvalidArgument("estimate needs a measurement CSV");
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  const Method method = f.method.empty() ? Method::kPatopa : parse_method(f.method);
  const double level = f.noise_levels.empty() ? 0.0 : f.noise_levels.front();
  const auto& missing = f.missing.empty() ? cfg.missing_angle_buses : f.missing;
  const MeasurementSet ms = read_measurements_csv(f.input);
  const EstimateOutput out = run_estimate(ms, method, level, cfg.estimator, missing);
  const std::string text = estimate_to_json(out);
  if (f.out.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream file(f.out, std::ios::trunc);
    if (!file) throw IoError("cannot write " + f.out);
    file << text << '\n';
  }
  return 0;
}

int cmd_experiment(const Flags& f) {
  const ExperimentConfig cfg = resolve_config(f);
  const ExperimentOutput out = run_experiment(cfg);
  std::size_t failed = 0;
  for (const TrialReport& r : out.trials) failed += r.ok() ? 0 : 1;
  spdlog::info("{} trial runs, {} failed; results in {}", out.trials.size(), failed,
               cfg.output_dir.string());
  std::cout << run_report(cfg.output_dir);
  return failed == out.trials.size() ? 1 : 0;
}

int cmd_report(const Flags& f) {
  std::cout << run_report(f.out.empty() ? std::string("out") : f.out);
  return 0;
}

void configure_logging() {
  spdlog::set_default_logger(spdlog::stderr_logger_mt("patopa"));
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("PATOPA_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Joint topology and line parameter estimation for distribution grids"};
  app.require_subcommand(1);
  Flags flags;

  auto* generate = app.add_subcommand("generate", "simulate measurement files");
  add_common(generate, flags);
  auto* estimate = app.add_subcommand("estimate", "estimate from one measurement CSV");
  add_common(estimate, flags);
  estimate->add_option("input", flags.input, "measurement CSV (t,bus,v,theta,p,q)")->required();
  auto* experiment = app.add_subcommand("experiment", "run a noise-level sweep");
  add_common(experiment, flags);
  auto* report = app.add_subcommand("report", "summarize trials.csv in --out");
  add_common(report, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(flags);
    if (estimate->parsed()) return cmd_estimate(flags);
    if (experiment->parsed()) return cmd_experiment(flags);
    return cmd_report(flags);
  } catch (const Error& e) {
    std::cerr << error_to_json(e.category(), e.what()) << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    const nlohmann::json doc{
        {"error", {{"category", "internal"}, {"exit_code", 1}, {"message", e.what()}}}};
    std::cerr << doc.dump(2) << '\n';
    return 1;
  }
}
