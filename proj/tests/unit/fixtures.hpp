#pragma once

#include "patopa/grid_model.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace fixtures {

using patopa::Edge;
using patopa::GridTopology;
using patopa::Index;
using patopa::LineParams;

// Radial 8-bus feeder: trunk 0-1-2-3-4 with laterals 1-5-6 and 2-7.
inline GridTopology feeder8() {
  return GridTopology::from_edges(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 5}, {5, 6}, {2, 7}});
}

// Looked up by endpoint so the table does not depend on edge order.
inline LineParams feeder8_params() {
  const GridTopology topo = feeder8();
  LineParams p = LineParams::zeros(topo.n_edges());
  const std::vector<std::pair<Edge, std::pair<double, double>>> table{
      {{0, 1}, {4.0, -8.1}}, {{1, 2}, {3.2, -6.0}}, {{2, 3}, {2.5, -5.2}}, {{3, 4}, {1.8, -3.5}},
      {{1, 5}, {2.9, -6.3}}, {{5, 6}, {2.1, -4.4}}, {{2, 7}, {3.6, -7.0}}};
  for (const auto& [e, gb] : table) {
    const Index j = *topo.find(e.from, e.to);
    p.g(j) = gb.first;
    p.b(j) = gb.second;
  }
  return p;
}

inline std::string data_path(const std::string& rel) { return std::string(PATOPA_DATA_DIR) + "/" + rel; }

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

}  // namespace fixtures
