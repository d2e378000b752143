#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace patopa {

using Index = Eigen::Index;

/// Undirected branch between two buses, stored with `from < to`.
struct Edge {
  Index from = 0;
  Index to = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Bus network with a fixed, ordered candidate edge set.
///
/// Row i of the incidence matrix carries +1 at column `U(i,0)` (the lower bus
/// index) and -1 at column `U(i,1)`. Immutable once built.
class GridTopology {
 public:
  GridTopology() = default;

  /// Validates and canonicalizes `edges` (endpoints are swapped so that
  /// from < to). Throws InvalidArgument on self-loops, duplicates, or
  /// out-of-range buses.
  static GridTopology from_edges(Index n_bus, std::vector<Edge> edges);

  Index n_bus() const noexcept { return n_bus_; }
  Index n_edges() const noexcept { return static_cast<Index>(edges_.size()); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(Index i) const { return edges_.at(static_cast<std::size_t>(i)); }

  /// m x n incidence matrix S.
  const Eigen::MatrixXi& incidence() const noexcept { return incidence_; }
  /// m x 2 endpoint index matrix U.
  const Eigen::MatrixXi& endpoints() const noexcept { return endpoints_; }

  /// Position of the edge joining a and b (either order), if present.
  std::optional<Index> find(Index a, Index b) const;

  friend bool operator==(const GridTopology& lhs, const GridTopology& rhs) {
    return lhs.n_bus_ == rhs.n_bus_ && lhs.edges_ == rhs.edges_;
  }

 private:
  Index n_bus_ = 0;
  std::vector<Edge> edges_;
  Eigen::MatrixXi incidence_;
  Eigen::MatrixXi endpoints_;
};

/// Per-branch series conductance and susceptance, aligned with a topology's
/// edge order.
struct LineParams {
  Eigen::VectorXd g;
  Eigen::VectorXd b;

  Index size() const noexcept { return g.size(); }
  static LineParams zeros(Index m) {
    return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  }
};

/// Real and imaginary parts of the nodal admittance matrix.
struct AdmittanceMatrix {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
};

/// All n(n-1)/2 bus pairs, ordered lexicographically by (from, to).
GridTopology complete_candidate_graph(Index n_bus);

/// Keeps the listed edges in their original relative order. Duplicate
/// indices are collapsed.
GridTopology restrict_topology(const GridTopology& topo, std::span<const Index> keep);

AdmittanceMatrix assemble_admittance(const GridTopology& topo, const LineParams& params);

/// Maps parameters given on `source` onto the edge order of `target`. Edges
/// of `target` absent from `source` get zero. Throws InvalidArgument when an
/// edge of `source` is missing from `target` or bus counts differ.
LineParams align_params(const GridTopology& source, const LineParams& params,
                        const GridTopology& target);

/// Indices of `subset`'s edges inside `superset`; throws if one is absent.
std::vector<Index> edge_positions(const GridTopology& subset, const GridTopology& superset);

}  // namespace patopa
