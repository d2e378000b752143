#include "patopa/metrics.hpp"

#include "patopa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <utility>

namespace patopa {

namespace {

std::set<Edge> canonical(std::span<const Edge> edges) {
  std::set<Edge> out;
  for (const Edge& e : edges) out.insert({std::min(e.from, e.to), std::max(e.from, e.to)});
  return out;
}

}  // namespace

double jaccard(std::span<const Edge> a, std::span<const Edge> b) {
  const auto sa = canonical(a);
  const auto sb = canonical(b);
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const Edge& e : sa) common += sb.count(e);
  const std::size_t united = sa.size() + sb.size() - common;
  return double(common) / double(united);
}

double jaccard(const GridTopology& a, const GridTopology& b) {
  return jaccard(std::span<const Edge>(a.edges()), std::span<const Edge>(b.edges()));
}

double param_mse(const LineParams& est, const LineParams& truth) {
  if (est.g.size() != truth.g.size() || est.b.size() != truth.b.size() ||
      est.g.size() != est.b.size()) {
    throw InvalidArgument("parameter vectors are not aligned");
  }
  if (est.g.size() == 0) throw InvalidArgument("no parameters to compare");
  const double sum = (est.g - truth.g).squaredNorm() + (est.b - truth.b).squaredNorm();
  return sum / double(2 * est.g.size());
}

double param_mse(const GridTopology& est_edges, const LineParams& est,
                 const GridTopology& true_edges, const LineParams& truth,
                 const GridTopology& candidates) {
  return param_mse(align_params(est_edges, est, candidates),
                   align_params(true_edges, truth, candidates));
}

Eigen::VectorXd relative_errors(const LineParams& est, const LineParams& truth) {
  if (est.g.size() != truth.g.size() || est.b.size() != truth.b.size()) {
    throw InvalidArgument("parameter vectors are not aligned");
  }
  std::vector<double> errs;
  auto collect = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& t) {
    for (Index i = 0; i < t.size(); ++i) {
      if (t(i) != 0.0) errs.push_back(std::abs(e(i) - t(i)) / std::abs(t(i)));
    }
  };
  collect(est.g, truth.g);
  collect(est.b, truth.b);
  return Eigen::Map<Eigen::VectorXd>(errs.data(), static_cast<Index>(errs.size()));
}

GridTopology threshold_topology(const GridTopology& topo, const Eigen::VectorXd& g,
                                double threshold) {
  if (threshold < 0.0) throw InvalidArgument("threshold must be nonnegative");
  if (g.size() != topo.n_edges()) {
    throw InvalidArgument("conductance vector does not match the edge set");
  }
  std::vector<Index> keep;
  for (Index j = 0; j < g.size(); ++j) {
    if (g(j) > threshold) keep.push_back(j);
  }
  return restrict_topology(topo, keep);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan};
  }
  SummaryStats s;
  double sum = 0.0;
  s.min = values.front();
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / double(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / double(values.size()));
  return s;
}

std::vector<SummaryRow> aggregate(std::span<const TrialReport> reports) {
  if (reports.empty()) throw InvalidArgument("no trial reports to aggregate");

  // Sort each group's values by trial index so the float sums do not depend
  // on the order reports arrive in.
  std::map<std::pair<int, double>, std::vector<const TrialReport*>> groups;
  for (const TrialReport& r : reports) {
    groups[{static_cast<int>(r.method), r.noise_level}].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const TrialReport* a, const TrialReport* b) {
      return std::tuple{a->trial, a->seed, a->param_mse, a->jaccard, a->runtime} <
             std::tuple{b->trial, b->seed, b->param_mse, b->jaccard, b->runtime};
    });
    std::vector<double> mse;
    std::vector<double> jac;
    double runtime = 0.0;
    SummaryRow row;
    row.method = static_cast<Method>(key.first);
    row.noise_level = key.second;
    for (const TrialReport* r : members) {
      if (!r->ok()) {
        ++row.failures;
        continue;
      }
      mse.push_back(r->param_mse);
      jac.push_back(r->jaccard);
      runtime += r->runtime;
    }
    row.trials = static_cast<int>(mse.size());
    row.mse = summarize(mse);
    row.jaccard = summarize(jac);
    row.runtime_mean = row.trials > 0 ? runtime / row.trials
                                      : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace patopa
