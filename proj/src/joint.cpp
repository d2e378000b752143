#include "patopa/joint.hpp"

#include "patopa/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace patopa {

std::vector<Index> ascending_order(const Eigen::VectorXd& g) {
  std::vector<Index> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return g(a) < g(b); });
  return order;
}

std::pair<FeatureSystem, FeatureSystem> split_train_validation(const FeatureSystem& fs,
                                                               double train_fraction) {
  const Index samples = fs.samples();
  const auto train = static_cast<Index>(std::ceil(train_fraction * double(samples)));
  if (train < 1 || train >= samples) {
    throw InsufficientData("train/validation split of " + std::to_string(samples) +
                               " time steps leaves an empty side",
                           2);
  }
  return {fs.time_slice(0, train), fs.time_slice(train, samples)};
}

double refit_and_validate(const FeatureSystem& train, const FeatureSystem& validation,
                          std::span<const Index> keep, const GlraOptions& options) {
  const FeatureSystem fit_fs = train.select_edges(keep);
  const EstimationResult fit = glra_diag(fit_fs, options);
  return eiv_log_likelihood(validation.select_edges(keep), fit.params());
}

std::vector<Index> kept_edges(const Eigen::VectorXd& g, Index cut) {
  if (g.size() == 0) return {};
  if (cut < 0 || cut >= g.size()) {
    throw InvalidArgument("cut " + std::to_string(cut) + " outside 0.." +
                          std::to_string(g.size() - 1));
  }
  const auto order = ascending_order(g);
  const double threshold = g(order[static_cast<std::size_t>(cut)]);
  std::vector<Index> keep;
  for (Index j = 0; j < g.size(); ++j) {
    if (g(j) >= threshold) keep.push_back(j);
  }
  return keep;
}

GridTopology update_topo(const GridTopology& edges, const Eigen::VectorXd& g, Index cut) {
  if (g.size() != edges.n_edges()) {
    throw InvalidArgument("conductance vector does not match the edge set");
  }
  return restrict_topology(edges, kept_edges(g, cut));
}

TopoEstResult topo_est(const FeatureSystem& fs, const LineParams& params,
                       std::span<const Index> ascending, const TopoEstOptions& options) {
  const Index m = fs.n_edges;
  if (m < 2) throw InvalidArgument("topology search needs at least two candidate edges");
  if (params.size() != m) throw InvalidArgument("parameters do not match the feature system");
  if (static_cast<Index>(ascending.size()) != m) {
    throw InvalidArgument("conductance order must list every edge once");
  }
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  for (std::size_t k = 0; k < ascending.size(); ++k) {
    const Index j = ascending[k];
    if (j < 0 || j >= m || seen[static_cast<std::size_t>(j)]) {
      throw InvalidArgument("conductance order is not a permutation");
    }
    seen[static_cast<std::size_t>(j)] = true;
    if (k > 0 && params.g(j) < params.g(ascending[k - 1])) {
      throw InvalidArgument("conductances are not in ascending order at position " +
                            std::to_string(k));
    }
  }

  const auto [train, validation] = split_train_validation(fs, options.train_fraction);

  TopoSearchState state;
  state.baseline_ll = eiv_log_likelihood(validation, params);
  const double threshold = state.baseline_ll -
                           options.likelihood_slack * std::abs(state.baseline_ll) -
                           options.likelihood_abs_slack * double(validation.rows());
  state.i_min = 0;
  state.i_max = m - 1;

  TopoEstResult out;
  out.baseline_ll = state.baseline_ll;
  int probe_index = 0;
  while (state.i_max > state.i_min + 1) {
    state.i_curr = (state.i_min + state.i_max) / 2;
    const double cut_value = params.g(ascending[static_cast<std::size_t>(state.i_curr)]);
    std::vector<Index> keep;
    for (Index j = 0; j < m; ++j) {
      if (params.g(j) >= cut_value) keep.push_back(j);
    }
    double ll = 0.0;
    try {
      ll = refit_and_validate(train, validation, keep, options.probe_glra);
    } catch (const Error& e) {
      throw IterationFailure("topology probe " + std::to_string(probe_index) +
                                 " (cut " + std::to_string(state.i_curr) + ") failed: " + e.what(),
                             probe_index);
    }
    const bool accepted = ll > threshold;
    out.probes.push_back({state.i_curr, static_cast<Index>(keep.size()), ll, accepted});
    spdlog::debug("topo_est: probe {} cut {} keeps {} edges, ll {} vs threshold {} -> {}",
                  probe_index, state.i_curr, keep.size(), ll, threshold,
                  accepted ? "accept" : "reject");
    if (accepted) {
      state.i_min = state.i_curr;
    } else {
      state.i_max = state.i_curr;
    }
    ++probe_index;
  }
  state.accepted_cut = state.i_min;
  out.cut = state.accepted_cut;
  return out;
}

PatopaResult patopa(const MeasurementSet& ms, const NoiseInfo& noise,
                    const PatopaOptions& options) {
  ms.validate();
  const Index n = ms.buses();
  PatopaResult out;
  out.candidates = options.candidates ? *options.candidates : complete_candidate_graph(n);
  if (out.candidates.n_bus() != n) {
    throw InvalidArgument("candidate set has " + std::to_string(out.candidates.n_bus()) +
                          " buses, measurements have " + std::to_string(n));
  }
  if (out.candidates.n_edges() == 0) throw InvalidArgument("candidate set is empty");

  const FeatureSystem full = assemble_feature_system(out.candidates, ms, noise,
                                                     options.variance_floor);
  std::vector<Index> active(static_cast<std::size_t>(out.candidates.n_edges()));
  std::iota(active.begin(), active.end(), Index{0});

  for (;;) {
    const auto m = static_cast<Index>(active.size());
    if (full.rows() < 2 * m + 1) {
      const Index need = (2 * m + 1 + 2 * n - 1) / (2 * n);
      throw InsufficientData("estimating " + std::to_string(m) + " edges needs at least " +
                                 std::to_string(need) + " time steps, have " +
                                 std::to_string(ms.samples()),
                             need);
    }
    const FeatureSystem fs = full.select_edges(active);
    out.final_fit = glra_diag(fs, options.glra);
    ++out.outer_iterations;
    OuterIteration step{m, out.final_fit.log_likelihood, 0};
    spdlog::debug("patopa: outer iteration {} with {} edges, ll {}", out.outer_iterations, m,
                  step.log_likelihood);
    if (m < 2) {
      out.trace.push_back(step);
      break;
    }
    const auto order = ascending_order(out.final_fit.g_hat);
    step.cut = topo_est(fs, out.final_fit.params(), order, options.search).cut;
    out.trace.push_back(step);
    const auto keep = kept_edges(out.final_fit.g_hat, step.cut);
    if (static_cast<Index>(keep.size()) == m) break;
    std::vector<Index> next;
    next.reserve(keep.size());
    for (Index k : keep) next.push_back(active[static_cast<std::size_t>(k)]);
    active = std::move(next);
  }

  out.edges = restrict_topology(out.candidates, active);
  out.params = out.final_fit.params();
  out.candidate_params = align_params(out.edges, out.params, out.candidates);
  return out;
}

PatopaResult estimate_with_missing_angles(const MeasurementSet& ms, NoiseInfo noise,
                                          std::span<const Index> missing,
                                          const PatopaOptions& options) {
  const Index n = ms.buses();
  if (static_cast<Index>(missing.size()) >= n) {
    throw InvalidArgument("at least one bus must keep its phase angle");
  }
  for (Index bus : missing) {
    if (bus < 0 || bus >= n) {
      throw InvalidArgument("missing-angle bus " + std::to_string(bus) + " out of range");
    }
    if (bus == 0) throw InvalidArgument("the slack bus angle is always known");
  }
  noise.missing_angle_buses.assign(missing.begin(), missing.end());
  std::sort(noise.missing_angle_buses.begin(), noise.missing_angle_buses.end());
  noise.missing_angle_buses.erase(
      std::unique(noise.missing_angle_buses.begin(), noise.missing_angle_buses.end()),
      noise.missing_angle_buses.end());
  return patopa(ms, noise, options);
}

}  // namespace patopa
