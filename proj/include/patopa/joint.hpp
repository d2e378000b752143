#pragma once

#include "patopa/estimators.hpp"
#include "patopa/features.hpp"
#include "patopa/grid_model.hpp"
#include "patopa/scenario.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace patopa {

/// Binary-search bookkeeping over the ascending conductance order.
struct TopoSearchState {
  Index i_min = 0;
  Index i_max = 0;
  Index i_curr = 0;
  double baseline_ll = 0.0;
  Index accepted_cut = 0;
};

struct TopoEstOptions {
  /// A probe is accepted when ll_probe > ll_full - slack * |ll_full| - abs_slack * rows.
  double likelihood_slack = 0.2;
  /// Per validation row; absorbs round-off when both likelihoods sit at the
  /// floating-point floor (noise-free data).
  double likelihood_abs_slack = 1e-6;
  /// Share of time steps used to refit each probe; the rest validate.
  double train_fraction = 2.0 / 3.0;
  GlraOptions probe_glra{.max_iter = 50, .tol = 1e-10, .track_condition = false};
};

struct TopoProbe {
  Index position = 0;
  Index kept = 0;
  double log_likelihood = 0.0;
  bool accepted = false;
};

struct TopoEstResult {
  /// Index into the ascending order; edges with g >= g[order[cut]] survive.
  Index cut = 0;
  double baseline_ll = 0.0;
  std::vector<TopoProbe> probes;
};

/// Positions of `g` sorted by value (stable, ascending).
std::vector<Index> ascending_order(const Eigen::VectorXd& g);

/// Train / validation split by whole time steps: the first ceil(fraction * T)
/// steps train.
std::pair<FeatureSystem, FeatureSystem> split_train_validation(const FeatureSystem& fs,
                                                               double train_fraction);

/// Refits on `train` restricted to `keep` and scores the fit on `validation`.
double refit_and_validate(const FeatureSystem& train, const FeatureSystem& validation,
                          std::span<const Index> keep, const GlraOptions& options);

/// Largest cut of the conductance order whose refit stays within the
/// likelihood slack of the all-edges model. `ascending` must order `params.g`
/// nondecreasingly (InvalidArgument otherwise).
TopoEstResult topo_est(const FeatureSystem& fs, const LineParams& params,
                       std::span<const Index> ascending, const TopoEstOptions& options = {});

/// Edge positions with g >= (cut-th smallest g).
std::vector<Index> kept_edges(const Eigen::VectorXd& g, Index cut);

/// Restricts `edges` to kept_edges(g, cut).
GridTopology update_topo(const GridTopology& edges, const Eigen::VectorXd& g, Index cut);

struct PatopaOptions {
  GlraOptions glra{.max_iter = 500, .tol = 1e-10, .track_condition = false};
  TopoEstOptions search;
  double variance_floor = kVarianceFloor;
  /// Starting edge set; the complete graph when empty.
  std::optional<GridTopology> candidates;
};

struct OuterIteration {
  Index edges = 0;
  double log_likelihood = 0.0;
  Index cut = 0;
};

struct PatopaResult {
  GridTopology candidates;
  GridTopology edges;
  /// Parameters on `edges`.
  LineParams params;
  /// Parameters on `candidates`; removed edges carry zero.
  LineParams candidate_params;
  int outer_iterations = 0;
  std::vector<OuterIteration> trace;
  /// Last estimator run on the converged edge set.
  EstimationResult final_fit;
};

/// Joint parameter and topology estimation: alternate the weighted fit with
/// likelihood-validated pruning until the edge set stops shrinking.
PatopaResult patopa(const MeasurementSet& ms, const NoiseInfo& noise,
                    const PatopaOptions& options = {});

/// patopa with the angles of `missing` buses treated as zero-valued
/// measurements carrying `noise.missing_angle_std` of error.
PatopaResult estimate_with_missing_angles(const MeasurementSet& ms, NoiseInfo noise,
                                          std::span<const Index> missing,
                                          const PatopaOptions& options = {});

}  // namespace patopa
