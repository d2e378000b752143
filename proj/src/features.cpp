#include "patopa/features.hpp"

#include "patopa/errors.hpp"

#include <algorithm>
#include <string>

namespace patopa {

Eigen::MatrixXd FeatureSystem::augmented() const {
  Eigen::MatrixXd a(X.rows(), X.cols() + 1);
  a << X, y;
  return a;
}

FeatureSystem FeatureSystem::time_slice(Index begin, Index end) const {
  if (begin < 0 || end > samples() || begin >= end) {
    throw InvalidArgument("time slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") outside 0.." + std::to_string(samples()));
  }
  const Index block = 2 * n_bus;
  const Index first = begin * block;
  const Index count = (end - begin) * block;
  FeatureSystem out;
  out.X = X.middleRows(first, count);
  out.y = y.segment(first, count);
  if (W.size() > 0) out.W = W.middleRows(first, count);
  out.n_bus = n_bus;
  out.n_edges = n_edges;
  return out;
}

FeatureSystem FeatureSystem::select_edges(std::span<const Index> keep) const {
  const Index k = static_cast<Index>(keep.size());
  FeatureSystem out;
  out.n_bus = n_bus;
  out.n_edges = k;
  out.X.resize(X.rows(), 2 * k);
  if (W.size() > 0) out.W.resize(W.rows(), 2 * k + 1);
  for (Index i = 0; i < k; ++i) {
    const Index j = keep[static_cast<std::size_t>(i)];
    if (j < 0 || j >= n_edges) {
      throw InvalidArgument("edge column " + std::to_string(j) + " out of range");
    }
    out.X.col(i) = X.col(j);
    out.X.col(k + i) = X.col(n_edges + j);
    if (W.size() > 0) {
      out.W.col(i) = W.col(j);
      out.W.col(k + i) = W.col(n_edges + j);
    }
  }
  out.y = y;
  if (W.size() > 0) out.W.col(2 * k) = W.col(2 * n_edges);
  return out;
}

namespace {

void check_shapes(const GridTopology& topo, const Eigen::MatrixXd& V,
                  const Eigen::MatrixXd& Theta) {
  const Index n = topo.n_bus();
  if (V.cols() != n || Theta.cols() != n || V.rows() != Theta.rows()) {
    throw InvalidArgument("voltage matrices must be T x " + std::to_string(n));
  }
}

}  // namespace

FeatureSystem build_features(const GridTopology& topo, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& P,
                             const Eigen::MatrixXd& Q) {
  check_shapes(topo, V, Theta);
  if (P.rows() != V.rows() || Q.rows() != V.rows() || P.cols() != V.cols() ||
      Q.cols() != V.cols()) {
    throw InvalidArgument("injection matrices must match the voltage shape");
  }
  const Index n = topo.n_bus();
  const Index m = topo.n_edges();
  const Index samples = V.rows();

  FeatureSystem fs;
  fs.n_bus = n;
  fs.n_edges = m;
  fs.X = Eigen::MatrixXd::Zero(2 * n * samples, 2 * m);
  fs.y.resize(2 * n * samples);

  for (Index t = 0; t < samples; ++t) {
    const Index p_row = t * 2 * n;
    const Index q_row = p_row + n;
    fs.y.segment(p_row, n) = P.row(t).transpose();
    fs.y.segment(q_row, n) = Q.row(t).transpose();
    for (Index j = 0; j < m; ++j) {
      const auto [a, b] = topo.edge(j);
      for (const auto& [i, k] : {std::pair{a, b}, std::pair{b, a}}) {
        const double c = feature_c(V(t, i), V(t, k), Theta(t, i), Theta(t, k));
        const double d = feature_d(V(t, i), V(t, k), Theta(t, i), Theta(t, k));
        fs.X(p_row + i, j) = c;
        fs.X(p_row + i, m + j) = d;
        fs.X(q_row + i, j) = d;
        fs.X(q_row + i, m + j) = -c;
      }
    }
  }
  return fs;
}

FeatureGradients feature_gradients(const GridTopology& topo, const Eigen::VectorXd& phi) {
  const Index n = topo.n_bus();
  const Index m = topo.n_edges();
  if (phi.size() != 2 * n) {
    throw InvalidArgument("phi must have length " + std::to_string(2 * n));
  }
  FeatureGradients grads{Eigen::MatrixXd::Zero(n * m, 2 * n), Eigen::MatrixXd::Zero(n * m, 2 * n)};
  for (Index j = 0; j < m; ++j) {
    const auto [a, b] = topo.edge(j);
    for (const auto& [i, k] : {std::pair{a, b}, std::pair{b, a}}) {
      const auto g = feature_entry_gradient(phi(i), phi(k), phi(n + i), phi(n + k));
      const Index row = i * m + j;
      const std::array<Index, 4> at{i, k, n + i, n + k};
      for (std::size_t s = 0; s < 4; ++s) {
        grads.c(row, at[s]) += g.c[s];
        grads.d(row, at[s]) += g.d[s];
      }
    }
  }
  return grads;
}

Eigen::MatrixXd propagate_variances(const GridTopology& topo, const Eigen::MatrixXd& V,
                                    const Eigen::MatrixXd& Theta, const NoiseInfo& noise,
                                    double variance_floor) {
  check_shapes(topo, V, Theta);
  const Index n = topo.n_bus();
  const Index m = topo.n_edges();
  const Index samples = V.rows();
  const NoiseStds& sd = noise.stds;
  auto shaped = [&](const Eigen::MatrixXd& s) { return s.rows() == samples && s.cols() == n; };
  if (!shaped(sd.v) || !shaped(sd.theta) || !shaped(sd.p) || !shaped(sd.q)) {
    throw InvalidArgument("noise standard deviations must be T x n");
  }
  Eigen::MatrixXd sigma_theta = sd.theta;
  for (Index bus : noise.missing_angle_buses) {
    if (bus < 0 || bus >= n) {
      throw InvalidArgument("missing-angle bus " + std::to_string(bus) + " out of range");
    }
    sigma_theta.col(bus).setConstant(noise.missing_angle_std);
  }

  // Structurally zero entries keep the floor.
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(2 * n * samples, 2 * m + 1);
  for (Index t = 0; t < samples; ++t) {
    const Index p_row = t * 2 * n;
    const Index q_row = p_row + n;
    for (Index i = 0; i < n; ++i) {
      var(p_row + i, 2 * m) = sd.p(t, i) * sd.p(t, i);
      var(q_row + i, 2 * m) = sd.q(t, i) * sd.q(t, i);
    }
    for (Index j = 0; j < m; ++j) {
      const auto [a, b] = topo.edge(j);
      for (const auto& [i, k] : {std::pair{a, b}, std::pair{b, a}}) {
        const auto g = feature_entry_gradient(V(t, i), V(t, k), Theta(t, i), Theta(t, k));
        const std::array<double, 4> s2{sd.v(t, i) * sd.v(t, i), sd.v(t, k) * sd.v(t, k),
                                       sigma_theta(t, i) * sigma_theta(t, i),
                                       sigma_theta(t, k) * sigma_theta(t, k)};
        double var_c = 0.0;
        double var_d = 0.0;
        for (std::size_t s = 0; s < 4; ++s) {
          var_c += g.c[s] * g.c[s] * s2[s];
          var_d += g.d[s] * g.d[s] * s2[s];
        }
        var(p_row + i, j) = var_c;
        var(p_row + i, m + j) = var_d;
        var(q_row + i, j) = var_d;
        var(q_row + i, m + j) = var_c;
      }
    }
  }
  return var.cwiseMax(variance_floor).cwiseInverse();
}

FeatureSystem assemble_feature_system(const GridTopology& topo, const MeasurementSet& ms,
                                      const NoiseInfo& noise, double variance_floor) {
  ms.validate();
  Eigen::MatrixXd theta = ms.Theta;
  for (Index bus : noise.missing_angle_buses) {
    if (bus <= 0 || bus >= ms.buses()) {
      throw InvalidArgument("missing-angle bus " + std::to_string(bus) +
                            " must be a non-slack bus");
    }
    theta.col(bus).setZero();
  }
  FeatureSystem fs = build_features(topo, ms.V, theta, ms.P, ms.Q);
  fs.W = propagate_variances(topo, ms.V, theta, noise, variance_floor);
  return fs;
}

}  // namespace patopa
