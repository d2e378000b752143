#include "patopa/harness.hpp"

#include "patopa/errors.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace patopa {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// CSV cells never carry separators.
std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::string describe(const Error& e) {
  return std::string(to_string(e.category())) + ": " + e.what();
}

GlraOptions glra_options(const EstimatorConfig& est, bool track_condition) {
  return {.max_iter = est.max_iter, .tol = est.tol, .track_condition = track_condition};
}

PatopaOptions patopa_options(const EstimatorConfig& est) {
  PatopaOptions opts;
  opts.glra = glra_options(est, false);
  opts.glra.track_condition = false;
  opts.search.likelihood_slack = est.likelihood_slack;
  opts.search.probe_glra.tol = est.tol;
  opts.variance_floor = est.variance_floor;
  return opts;
}

NoiseInfo noise_info(const MeasurementSet& ms, double level, const EstimatorConfig& est,
                     std::span<const Index> missing) {
  NoiseInfo info;
  info.stds = noise_stds_from_levels(ms, NoiseSpec::uniform(level, 0));
  info.missing_angle_buses.assign(missing.begin(), missing.end());
  info.missing_angle_std = est.missing_angle_std;
  return info;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::size_t representative_level(const std::vector<double>& levels) {
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] <= 0.0) continue;
    const double gap = std::abs(levels[i] - 0.05);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

void write_level_figures(const std::filesystem::path& dir, std::span<const SummaryRow> rows) {
  auto fig3 = open_for_write(dir / "fig3_mse.csv");
  fig3 << "method,noise_level,mse_mean,mse_std\n";
  auto fig4 = open_for_write(dir / "fig4_jaccard.csv");
  fig4 << "method,noise_level,jaccard_mean,jaccard_std\n";
  for (const SummaryRow& r : rows) {
    fig3 << to_string(r.method) << ',' << format_double(r.noise_level) << ','
         << format_double(r.mse.mean) << ',' << format_double(r.mse.std) << '\n';
    fig4 << to_string(r.method) << ',' << format_double(r.noise_level) << ','
         << format_double(r.jaccard.mean) << ',' << format_double(r.jaccard.std) << '\n';
  }
}

void write_iteration_figures(const std::filesystem::path& dir, const Feeder& feeder,
                             const GridTopology& candidates, const ExperimentConfig& config) {
  auto fig5 = open_for_write(dir / "fig5_likelihood.csv");
  fig5 << "iteration,glra_log_likelihood,tls_log_likelihood\n";
  auto fig6 = open_for_write(dir / "fig6_condition.csv");
  fig6 << "iteration,condition_number\n";
  try {
    const TrialData data =
        simulate_trial(feeder, config, representative_level(config.noise_levels), 0);
    const FeatureSystem fs = assemble_feature_system(candidates, data.measurements, data.noise,
                                                     config.estimator.variance_floor);
    const double tls_ll = tls(fs).log_likelihood;
    const EstimationResult fit = glra_diag(fs, glra_options(config.estimator, true));
    for (std::size_t k = 0; k < fit.ll_trace.size(); ++k) {
      fig5 << k + 1 << ',' << format_double(fit.ll_trace[k]) << ',' << format_double(tls_ll)
           << '\n';
    }
    for (std::size_t k = 0; k < fit.cond_trace.size(); ++k) {
      fig6 << k + 1 << ',' << format_double(fit.cond_trace[k]) << '\n';
    }
  } catch (const Error& e) {
    spdlog::warn("iteration figures skipped: {}", describe(e));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (samples < 2) throw InvalidArgument("samples must be at least 2");
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (workers < 1) throw InvalidArgument("workers must be at least 1");
  if (noise_levels.empty()) throw InvalidArgument("at least one noise level is required");
  for (double level : noise_levels) {
    if (!std::isfinite(level) || level < 0.0) {
      throw InvalidArgument("noise levels must be finite and nonnegative");
    }
  }
  if (methods.empty()) throw InvalidArgument("at least one method is required");
  if (estimator.max_iter < 1) throw InvalidArgument("max_iter must be positive");
  if (!(estimator.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!(estimator.likelihood_slack >= 0.0)) {
    throw InvalidArgument("likelihood_slack must be nonnegative");
  }
  if (!(estimator.variance_floor > 0.0)) throw InvalidArgument("variance_floor must be positive");
  if (!(estimator.missing_angle_std > 0.0)) {
    throw InvalidArgument("missing_angle_std must be positive");
  }
  if (estimator.truncation && !(*estimator.truncation > 0.0)) {
    throw InvalidArgument("truncation must be positive");
  }
  for (Index bus : missing_angle_buses) {
    if (bus <= 0) throw InvalidArgument("missing-angle buses must be non-slack (index > 0)");
  }
  if (candidate_extra_edges && *candidate_extra_edges < 0) {
    throw InvalidArgument("candidate_extra_edges must be nonnegative");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig cfg;
  try {
    const json doc = json::parse(json_text);
    if (!doc.is_object()) throw ParseError("config must be a JSON object");
    if (doc.contains("feeder")) cfg.feeder = doc["feeder"].get<std::string>();
    if (doc.contains("samples")) cfg.samples = doc["samples"].get<Index>();
    if (doc.contains("noise_levels")) cfg.noise_levels = doc["noise_levels"].get<std::vector<double>>();
    if (doc.contains("trials")) cfg.trials = doc["trials"].get<int>();
    if (doc.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : doc["methods"]) cfg.methods.push_back(parse_method(name.get<std::string>()));
    }
    if (doc.contains("estimator")) {
      const json& e = doc["estimator"];
      cfg.estimator.tol = e.value("tol", cfg.estimator.tol);
      cfg.estimator.max_iter = e.value("max_iter", cfg.estimator.max_iter);
      cfg.estimator.likelihood_slack = e.value("likelihood_slack", cfg.estimator.likelihood_slack);
      cfg.estimator.variance_floor = e.value("variance_floor", cfg.estimator.variance_floor);
      cfg.estimator.missing_angle_std =
          e.value("missing_angle_std", cfg.estimator.missing_angle_std);
      if (e.contains("truncation") && !e["truncation"].is_null()) {
        cfg.estimator.truncation = e["truncation"].get<double>();
      }
    }
    if (doc.contains("missing_angle_buses")) {
      cfg.missing_angle_buses = doc["missing_angle_buses"].get<std::vector<Index>>();
    }
    if (doc.contains("candidate_extra_edges") && !doc["candidate_extra_edges"].is_null()) {
      cfg.candidate_extra_edges = doc["candidate_extra_edges"].get<Index>();
    }
    if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("workers")) cfg.workers = doc["workers"].get<int>();
    if (doc.contains("record_runtime")) cfg.record_runtime = doc["record_runtime"].get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path));
}

std::string config_to_json(const ExperimentConfig& config) {
  json doc;
  doc["feeder"] = config.feeder.string();
  doc["samples"] = config.samples;
  doc["noise_levels"] = config.noise_levels;
  doc["trials"] = config.trials;
  json methods = json::array();
  for (Method m : config.methods) methods.push_back(std::string(to_string(m)));
  doc["methods"] = methods;
  json est;
  est["tol"] = config.estimator.tol;
  est["max_iter"] = config.estimator.max_iter;
  est["likelihood_slack"] = config.estimator.likelihood_slack;
  est["variance_floor"] = config.estimator.variance_floor;
  est["missing_angle_std"] = config.estimator.missing_angle_std;
  est["truncation"] = config.estimator.truncation ? json(*config.estimator.truncation) : json();
  doc["estimator"] = est;
  doc["missing_angle_buses"] = config.missing_angle_buses;
  doc["candidate_extra_edges"] =
      config.candidate_extra_edges ? json(*config.candidate_extra_edges) : json();
  doc["output_dir"] = config.output_dir.string();
  doc["seed"] = config.seed;
  doc["workers"] = config.workers;
  doc["record_runtime"] = config.record_runtime;
  return doc.dump(2);
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t level_index, std::size_t trial_index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(level_index));
  return splitmix64(h ^ static_cast<std::uint64_t>(trial_index));
}

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kInvalidArgument: return 2;
    case ErrorCategory::kSingularSystem: return 3;
    case ErrorCategory::kNongenericTls: return 4;
    case ErrorCategory::kCannotNormalize: return 5;
    case ErrorCategory::kIterationFailure: return 6;
    case ErrorCategory::kInsufficientData: return 7;
    case ErrorCategory::kParseError: return 8;
    case ErrorCategory::kIoError: return 9;
  }
  return 1;
}

TrialData simulate_trial(const Feeder& feeder, const ExperimentConfig& config,
                         std::size_t level_index, std::size_t trial_index) {
  TrialData data;
  data.level_index = level_index;
  data.trial_index = trial_index;
  data.level = config.noise_levels.at(level_index);
  data.seed = trial_seed(config.seed, level_index, trial_index);
  const MeasurementSet clean =
      generate_measurements(feeder.topology, feeder.params, config.samples, data.seed);
  NoiseSpec spec = NoiseSpec::uniform(data.level, splitmix64(data.seed));
  spec.truncation_d = config.estimator.truncation;
  spec.missing_angle_buses = config.missing_angle_buses;
  data.measurements = apply_noise(clean, spec);
  data.noise = noise_info(data.measurements, data.level, config.estimator,
                          config.missing_angle_buses);
  return data;
}

GridTopology candidate_set(const Feeder& feeder, const ExperimentConfig& config) {
  const Index n = feeder.topology.n_bus();
  if (!config.candidate_extra_edges) return complete_candidate_graph(n);
  std::set<Edge> chosen(feeder.topology.edges().begin(), feeder.topology.edges().end());
  const Index available = n * (n - 1) / 2 - static_cast<Index>(chosen.size());
  const Index extra = std::min(*config.candidate_extra_edges, available);
  std::mt19937_64 rng(splitmix64(config.seed ^ 0xC0FFEEULL));
  std::uniform_int_distribution<Index> bus(0, n - 1);
  Index added = 0;
  while (added < extra) {
    const Index a = bus(rng);
    const Index b = bus(rng);
    if (a == b) continue;
    if (chosen.insert({std::min(a, b), std::max(a, b)}).second) ++added;
  }
  return GridTopology::from_edges(n, std::vector<Edge>(chosen.begin(), chosen.end()));
}

double baseline_threshold(const Feeder& feeder) {
  if (feeder.params.g.size() == 0) return 0.0;
  return 0.5 * feeder.params.g.minCoeff();
}

TrialReport run_trial(const Feeder& feeder, const GridTopology& candidates,
                      const ExperimentConfig& config, const TrialData& data, Method method) {
  TrialReport report;
  report.method = method;
  report.noise_level = data.level;
  report.trial = static_cast<int>(data.trial_index);
  report.seed = data.seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (method == Method::kPatopa) {
      PatopaOptions opts = patopa_options(config.estimator);
      opts.candidates = candidates;
      const PatopaResult res = patopa(data.measurements, data.noise, opts);
      report.runtime = seconds_since(start);
      report.converged = res.final_fit.converged;
      report.param_mse = param_mse(res.edges, res.params, feeder.topology, feeder.params,
                                   candidates);
      report.jaccard = jaccard(res.edges, feeder.topology);
    } else {
      const FeatureSystem fs = assemble_feature_system(candidates, data.measurements, data.noise,
                                                       config.estimator.variance_floor);
      const EstimationResult res = estimate(fs, method, glra_options(config.estimator, false));
      report.runtime = seconds_since(start);
      report.converged = res.converged;
      report.param_mse =
          param_mse(res.params(), align_params(feeder.topology, feeder.params, candidates));
      report.jaccard = jaccard(
          threshold_topology(candidates, res.g_hat, baseline_threshold(feeder)), feeder.topology);
    }
  } catch (const Error& e) {
    report.error = describe(e);
  } catch (const std::exception& e) {
    report.error = std::string("internal: ") + e.what();
  }
  if (!config.record_runtime) report.runtime = 0.0;
  return report;
}

std::size_t run_generate(const ExperimentConfig& config) {
  config.validate();
  const Feeder feeder = load_feeder(config.feeder);
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  json manifest;
  manifest["config"] = json::parse(config_to_json(config));
  json files = json::array();
  std::size_t count = 0;
  for (std::size_t li = 0; li < config.noise_levels.size(); ++li) {
    for (int ti = 0; ti < config.trials; ++ti) {
      const TrialData data = simulate_trial(feeder, config, li, static_cast<std::size_t>(ti));
      const std::string tag = "L" + std::to_string(li) + "_T" + std::to_string(ti);
      write_measurements_csv(config.output_dir / ("meas_" + tag + ".csv"), data.measurements);
      write_measurements_csv(config.output_dir / ("truth_" + tag + ".csv"),
                             *data.measurements.truth);
      files.push_back({{"measurements", "meas_" + tag + ".csv"},
                       {"truth", "truth_" + tag + ".csv"},
                       {"noise_level", data.level},
                       {"seed", data.seed}});
      ++count;
    }
  }
  manifest["files"] = files;
  auto out = open_for_write(config.output_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return count;
}

EstimateOutput run_estimate(const MeasurementSet& ms, Method method, double noise_level,
                            const EstimatorConfig& options,
                            std::span<const Index> missing_angle_buses) {
  if (!std::isfinite(noise_level) || noise_level < 0.0) {
    throw InvalidArgument("noise level must be finite and nonnegative");
  }
  ms.validate();
  const NoiseInfo noise = noise_info(ms, noise_level, options, missing_angle_buses);
  EstimateOutput out;
  out.method = method;
  if (method == Method::kPatopa) {
    const PatopaResult res =
        missing_angle_buses.empty()
            ? patopa(ms, noise, patopa_options(options))
            : estimate_with_missing_angles(ms, noise, missing_angle_buses, patopa_options(options));
    out.edges = res.edges;
    out.params = res.params;
    out.fit = res.final_fit;
    out.outer_iterations = res.outer_iterations;
    out.trace = res.trace;
    return out;
  }
  out.edges = complete_candidate_graph(ms.buses());
  const FeatureSystem fs =
      assemble_feature_system(out.edges, ms, noise, options.variance_floor);
  out.fit = estimate(fs, method, glra_options(options, true));
  out.params = out.fit.params();
  return out;
}

std::string estimate_to_json(const EstimateOutput& out) {
  json doc;
  doc["method"] = std::string(to_string(out.method));
  doc["n_bus"] = out.edges.n_bus();
  json edges = json::array();
  for (const Edge& e : out.edges.edges()) edges.push_back({e.from, e.to});
  doc["edges"] = edges;
  doc["g"] = std::vector<double>(out.params.g.begin(), out.params.g.end());
  doc["b"] = std::vector<double>(out.params.b.begin(), out.params.b.end());
  doc["log_likelihood"] = out.fit.log_likelihood;
  doc["iterations"] = out.fit.iterations;
  doc["converged"] = out.fit.converged;
  doc["ll_trace"] = out.fit.ll_trace;
  doc["cond_trace"] = out.fit.cond_trace;
  if (out.method == Method::kPatopa) {
    doc["outer_iterations"] = out.outer_iterations;
    json trace = json::array();
    for (const OuterIteration& it : out.trace) {
      trace.push_back({{"edges", it.edges}, {"log_likelihood", it.log_likelihood}, {"cut", it.cut}});
    }
    doc["trace"] = trace;
  }
  return doc.dump(2);
}

std::string error_to_json(ErrorCategory category, const std::string& message) {
  json doc;
  doc["error"] = {{"category", std::string(to_string(category))},
                  {"exit_code", exit_code(category)},
                  {"message", message}};
  return doc.dump(2);
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Feeder feeder = load_feeder(config.feeder);
  const GridTopology candidates = candidate_set(feeder, config);
  const std::size_t levels = config.noise_levels.size();
  const auto trials = static_cast<std::size_t>(config.trials);
  const std::size_t methods = config.methods.size();
  const std::size_t jobs = levels * trials;

  ExperimentOutput out;
  out.trials.resize(jobs * methods);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t li = job / trials;
      const std::size_t ti = job % trials;
      std::optional<TrialData> data;
      std::string sim_error;
      try {
        data = simulate_trial(feeder, config, li, ti);
      } catch (const Error& e) {
        sim_error = describe(e);
      }
      for (std::size_t k = 0; k < methods; ++k) {
        TrialReport& slot = out.trials[job * methods + k];
        if (data) {
          slot = run_trial(feeder, candidates, config, *data, config.methods[k]);
        } else {
          slot.method = config.methods[k];
          slot.noise_level = config.noise_levels[li];
          slot.trial = static_cast<int>(ti);
          slot.seed = trial_seed(config.seed, li, ti);
          slot.error = sim_error;
        }
        if (!slot.ok()) {
          std::lock_guard lock(log_mutex);
          spdlog::warn("level {} trial {} {}: {}", slot.noise_level, ti,
                       to_string(config.methods[k]), slot.error);
        }
      }
    }
  };
  const auto workers = static_cast<std::size_t>(config.workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, jobs); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  out.summary = aggregate(out.trials);
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  write_trials_csv(config.output_dir / "trials.csv", out.trials);
  write_summary_csv(config.output_dir / "summary.csv", out.summary);
  write_level_figures(config.output_dir, out.summary);
  write_iteration_figures(config.output_dir, feeder, candidates, config);
  return out;
}

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialReport> trials) {
  auto out = open_for_write(path);
  out << "method,noise_level,trial,seed,param_mse,jaccard,runtime,converged,error\n";
  for (const TrialReport& r : trials) {
    out << to_string(r.method) << ',' << format_double(r.noise_level) << ',' << r.trial << ','
        << r.seed << ',' << format_double(r.param_mse) << ',' << format_double(r.jaccard) << ','
        << format_double(r.runtime) << ',' << (r.converged ? 1 : 0) << ',' << sanitize(r.error)
        << '\n';
  }
}

std::vector<TrialReport> read_trials_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) ||
      line != "method,noise_level,trial,seed,param_mse,jaccard,runtime,converged,error") {
    throw ParseError(path.string() + ": unexpected trials header");
  }
  std::vector<TrialReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) +
                       ": expected 9 fields");
    }
    try {
      TrialReport r;
      r.method = parse_method(f[0]);
      r.noise_level = std::stod(f[1]);
      r.trial = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.param_mse = std::stod(f[4]);
      r.jaccard = std::stod(f[5]);
      r.runtime = std::stod(f[6]);
      r.converged = f[7] == "1";
      r.error = f[8];
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows) {
  auto out = open_for_write(path);
  out << "method,noise_level,trials,mse_mean,mse_std,jaccard_mean,jaccard_std,runtime_mean\n";
  for (const SummaryRow& r : rows) {
    out << to_string(r.method) << ',' << format_double(r.noise_level) << ',' << r.trials << ','
        << format_double(r.mse.mean) << ',' << format_double(r.mse.std) << ','
        << format_double(r.jaccard.mean) << ',' << format_double(r.jaccard.std) << ','
        << format_double(r.runtime_mean) << '\n';
  }
}

std::string run_report(const std::filesystem::path& dir) {
  const auto trials = read_trials_csv(dir / "trials.csv");
  const auto rows = aggregate(trials);
  write_summary_csv(dir / "summary.csv", rows);
  write_level_figures(dir, rows);
  std::ostringstream table;
  table << std::left << std::setw(10) << "method" << std::setw(8) << "level" << std::setw(8)
        << "trials" << std::setw(8) << "failed" << std::setw(14) << "mse_mean" << std::setw(14)
        << "jaccard_mean" << "runtime_s\n";
  for (const SummaryRow& r : rows) {
    table << std::left << std::setw(10) << to_string(r.method) << std::setw(8) << r.noise_level
          << std::setw(8) << r.trials << std::setw(8) << r.failures << std::setw(14)
          << std::setprecision(4) << r.mse.mean << std::setw(14) << r.jaccard.mean
          << r.runtime_mean << '\n';
  }
  return table.str();
}

}  // namespace patopa
