#include "patopa/grid_model.hpp"

#include "patopa/errors.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace patopa {

GridTopology GridTopology::from_edges(Index n_bus, std::vector<Edge> edges) {
  if (n_bus < 1) {
    throw InvalidArgument("topology needs at least one bus, got " + std::to_string(n_bus));
  }
  std::set<Edge> seen;
  for (auto& e : edges) {
    if (e.from == e.to) {
      throw InvalidArgument("self-loop at bus " + std::to_string(e.from));
    }
    if (e.from < 0 || e.to < 0 || e.from >= n_bus || e.to >= n_bus) {
      throw InvalidArgument("edge (" + std::to_string(e.from) + ", " + std::to_string(e.to) +
                            ") outside 0.." + std::to_string(n_bus - 1));
    }
    if (e.from > e.to) std::swap(e.from, e.to);
    if (!seen.insert(e).second) {
      throw InvalidArgument("duplicate edge (" + std::to_string(e.from) + ", " +
                            std::to_string(e.to) + ")");
    }
  }

  GridTopology topo;
  topo.n_bus_ = n_bus;
  topo.edges_ = std::move(edges);
  const Index m = topo.n_edges();
  topo.incidence_ = Eigen::MatrixXi::Zero(m, n_bus);
  topo.endpoints_.resize(m, 2);
  for (Index i = 0; i < m; ++i) {
    const Edge& e = topo.edges_[static_cast<std::size_t>(i)];
    topo.incidence_(i, e.from) = 1;
    topo.incidence_(i, e.to) = -1;
    topo.endpoints_(i, 0) = static_cast<int>(e.from);
    topo.endpoints_(i, 1) = static_cast<int>(e.to);
  }
  return topo;
}

std::optional<Index> GridTopology::find(Index a, Index b) const {
  const Edge key{std::min(a, b), std::max(a, b)};
  const auto it = std::find(edges_.begin(), edges_.end(), key);
  if (it == edges_.end()) return std::nullopt;
  return static_cast<Index>(it - edges_.begin());
}

GridTopology complete_candidate_graph(Index n_bus) {
  if (n_bus < 2) {
    throw InvalidArgument("complete candidate graph needs n_bus >= 2, got " +
                          std::to_string(n_bus));
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n_bus * (n_bus - 1) / 2));
  for (Index i = 0; i < n_bus; ++i) {
    for (Index j = i + 1; j < n_bus; ++j) edges.push_back({i, j});
  }
  return GridTopology::from_edges(n_bus, std::move(edges));
}

GridTopology restrict_topology(const GridTopology& topo, std::span<const Index> keep) {
  std::vector<bool> kept(static_cast<std::size_t>(topo.n_edges()), false);
  for (Index k : keep) {
    if (k < 0 || k >= topo.n_edges()) {
      throw InvalidArgument("edge index " + std::to_string(k) + " outside 0.." +
                            std::to_string(topo.n_edges() - 1));
    }
    kept[static_cast<std::size_t>(k)] = true;
  }
  std::vector<Edge> edges;
  for (Index i = 0; i < topo.n_edges(); ++i) {
    if (kept[static_cast<std::size_t>(i)]) edges.push_back(topo.edge(i));
  }
  return GridTopology::from_edges(topo.n_bus(), std::move(edges));
}

AdmittanceMatrix assemble_admittance(const GridTopology& topo, const LineParams& params) {
  if (params.g.size() != topo.n_edges() || params.b.size() != topo.n_edges()) {
    throw InvalidArgument("line parameters have " + std::to_string(params.g.size()) + "/" +
                          std::to_string(params.b.size()) + " entries for " +
                          std::to_string(topo.n_edges()) + " edges");
  }
  const Index n = topo.n_bus();
  AdmittanceMatrix y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (Index i = 0; i < topo.n_edges(); ++i) {
    const auto [j, k] = topo.edge(i);
    const double g = params.g(i);
    const double b = params.b(i);
    y.G(j, k) -= g;
    y.G(k, j) -= g;
    y.G(j, j) += g;
    y.G(k, k) += g;
    y.B(j, k) -= b;
    y.B(k, j) -= b;
    y.B(j, j) += b;
    y.B(k, k) += b;
  }
  return y;
}

std::vector<Index> edge_positions(const GridTopology& subset, const GridTopology& superset) {
  if (subset.n_bus() != superset.n_bus()) {
    throw InvalidArgument("topologies have different bus counts");
  }
  std::vector<Index> pos;
  pos.reserve(subset.edges().size());
  for (const Edge& e : subset.edges()) {
    const auto at = superset.find(e.from, e.to);
    if (!at) {
      throw InvalidArgument("edge (" + std::to_string(e.from) + ", " + std::to_string(e.to) +
                            ") not in target edge set");
    }
    pos.push_back(*at);
  }
  return pos;
}

LineParams align_params(const GridTopology& source, const LineParams& params,
                        const GridTopology& target) {
  if (params.size() != source.n_edges()) {
    throw InvalidArgument("parameter length does not match source topology");
  }
  const auto pos = edge_positions(source, target);
  LineParams out = LineParams::zeros(target.n_edges());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    out.g(pos[i]) = params.g(static_cast<Index>(i));
    out.b(pos[i]) = params.b(static_cast<Index>(i));
  }
  return out;
}

}  // namespace patopa
