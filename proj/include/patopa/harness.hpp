#pragma once

#include "patopa/errors.hpp"
#include "patopa/estimators.hpp"
#include "patopa/io.hpp"
#include "patopa/joint.hpp"
#include "patopa/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace patopa {

/// Estimator knobs shared by every method in a run.
struct EstimatorConfig {
  double tol = 1e-10;
  int max_iter = 500;
  double likelihood_slack = 0.2;
  double variance_floor = kVarianceFloor;
  double missing_angle_std = 0.01;
  /// Truncation bound in units of sigma; empty means plain Gaussian noise.
  std::optional<double> truncation;
};

/// JSON schema (all keys optional):
///   feeder, samples, noise_levels, trials, methods, estimator{...},
///   missing_angle_buses, candidate_extra_edges, output_dir, seed, workers,
///   record_runtime.
struct ExperimentConfig {
  std::filesystem::path feeder;
  Index samples = 500;
  std::vector<double> noise_levels{0.01, 0.05, 0.10};
  int trials = 30;
  std::vector<Method> methods{Method::kOls, Method::kTls, Method::kGlraDiag, Method::kPatopa};
  EstimatorConfig estimator;
  std::vector<Index> missing_angle_buses;
  /// When set, candidates are the true edges plus this many random extra
  /// pairs instead of the complete graph.
  std::optional<Index> candidate_extra_edges;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 20240601;
  int workers = 1;
  /// Off makes every output byte-identical across reruns (runtimes become 0).
  bool record_runtime = true;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

/// Stable per-trial seed: splitmix64 chained over (master, level, trial).
std::uint64_t trial_seed(std::uint64_t master, std::size_t level_index, std::size_t trial_index);

/// Exit status for each error category; 0 is success, 1 an unexpected error.
int exit_code(ErrorCategory category) noexcept;

/// One simulated data set of a sweep.
struct TrialData {
  std::size_t level_index = 0;
  std::size_t trial_index = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
  MeasurementSet measurements;
  NoiseInfo noise;
};

TrialData simulate_trial(const Feeder& feeder, const ExperimentConfig& config,
                         std::size_t level_index, std::size_t trial_index);

/// Candidate edge set used by a sweep.
GridTopology candidate_set(const Feeder& feeder, const ExperimentConfig& config);

/// Baseline methods threshold conductances at half the smallest true one.
double baseline_threshold(const Feeder& feeder);

/// Runs one method on one data set. Failures are reported in `error`.
TrialReport run_trial(const Feeder& feeder, const GridTopology& candidates,
                      const ExperimentConfig& config, const TrialData& data, Method method);

/// Writes meas_L{i}_T{k}.csv and truth_L{i}_T{k}.csv per (level, trial) plus
/// manifest.json. Returns the number of measurement files.
std::size_t run_generate(const ExperimentConfig& config);

/// Single estimation outcome, ready for JSON output.
struct EstimateOutput {
  Method method = Method::kPatopa;
  GridTopology edges;
  LineParams params;
  EstimationResult fit;
  int outer_iterations = 0;
  /// PaToPa outer-loop history; empty for single-shot methods.
  std::vector<OuterIteration> trace;
};

EstimateOutput run_estimate(const MeasurementSet& ms, Method method, double noise_level,
                            const EstimatorConfig& options,
                            std::span<const Index> missing_angle_buses = {});
std::string estimate_to_json(const EstimateOutput& out);
std::string error_to_json(ErrorCategory category, const std::string& message);

struct ExperimentOutput {
  std::vector<TrialReport> trials;
  std::vector<SummaryRow> summary;
};

/// Full sweep. Writes trials.csv, summary.csv, fig3_mse.csv, fig4_jaccard.csv,
/// fig5_likelihood.csv and fig6_condition.csv into the output directory.
ExperimentOutput run_experiment(const ExperimentConfig& config);

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialReport> trials);
std::vector<TrialReport> read_trials_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows);

/// Re-aggregates trials.csv from `dir`, rewrites summary.csv and the
/// level-sweep figure tables, and returns a plain-text table.
std::string run_report(const std::filesystem::path& dir);

}  // namespace patopa
