#pragma once

#include "patopa/estimators.hpp"
#include "patopa/grid_model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace patopa {

/// Outcome of one (method, noise level, trial) run.
struct TrialReport {
  Method method = Method::kOls;
  double noise_level = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double param_mse = 0.0;
  double jaccard = 0.0;
  double runtime = 0.0;
  bool converged = true;
  /// Empty on success; otherwise "<category>: <message>".
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

/// |A n B| / |A u B| on undirected edges; 1 when both sets are empty.
double jaccard(std::span<const Edge> a, std::span<const Edge> b);
double jaccard(const GridTopology& a, const GridTopology& b);

/// Mean of (est - truth)^2 over the stacked [g; b] of equal-length vectors.
double param_mse(const LineParams& est, const LineParams& truth);

/// Aligns both parameter sets onto `candidates` (absent edges are zero) first.
double param_mse(const GridTopology& est_edges, const LineParams& est,
                 const GridTopology& true_edges, const LineParams& truth,
                 const GridTopology& candidates);

/// |est - truth| / |truth| for every entry of [g; b] with nonzero truth.
Eigen::VectorXd relative_errors(const LineParams& est, const LineParams& truth);

/// Edges whose conductance strictly exceeds `threshold`.
GridTopology threshold_topology(const GridTopology& topo, const Eigen::VectorXd& g,
                                double threshold);

struct SummaryStats {
  double mean = 0.0;
  /// Population standard deviation.
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SummaryStats summarize(std::span<const double> values);

struct SummaryRow {
  Method method = Method::kOls;
  double noise_level = 0.0;
  int trials = 0;
  int failures = 0;
  SummaryStats mse;
  SummaryStats jaccard;
  double runtime_mean = 0.0;
};

/// Groups by (method, noise level), sorted by method then level. Failed
/// trials are counted but excluded from the statistics.
std::vector<SummaryRow> aggregate(std::span<const TrialReport> reports);

}  // namespace patopa
