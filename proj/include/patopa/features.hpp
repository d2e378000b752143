#pragma once

#include "patopa/grid_model.hpp"
#include "patopa/scenario.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace patopa {

/// Default variance floor (per-unit squared) for entries with no propagated noise.
inline constexpr double kVarianceFloor = 1e-12;

/// Linear system y = X [g; b] stacked over time, with per-entry weights for
/// the augmented matrix [X, y].
///
/// Time step t owns rows t*2n .. t*2n+2n-1: the first n rows are the real-power
/// equations (columns [C, D]) and the next n are the reactive-power equations
/// (columns [D, -C]). Columns 0..m-1 multiply g, columns m..2m-1 multiply b.
struct FeatureSystem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  /// Reciprocal variances, (2nT) x (2m+1); the last column belongs to y.
  Eigen::MatrixXd W;
  Index n_bus = 0;
  Index n_edges = 0;

  Index samples() const noexcept { return n_bus == 0 ? 0 : X.rows() / (2 * n_bus); }
  Index rows() const noexcept { return X.rows(); }
  Index unknowns() const noexcept { return X.cols(); }

  /// [X, y].
  Eigen::MatrixXd augmented() const;
  /// Time steps [begin, end).
  FeatureSystem time_slice(Index begin, Index end) const;
  /// Keeps the g and b columns of the listed edges (in the given order).
  FeatureSystem select_edges(std::span<const Index> keep) const;
};

/// Partial derivatives of one (c, d) feature pair for a bus `i` on branch
/// (i, k), with respect to (v_i, v_k, theta_i, theta_k).
template <typename Scalar>
struct EntryGradient {
  std::array<Scalar, 4> c;
  std::array<Scalar, 4> d;
};

/// c = v_i^2 - v_i v_k cos(theta_i - theta_k).
template <typename Scalar>
Scalar feature_c(Scalar vi, Scalar vk, Scalar thi, Scalar thk) {
  return vi * vi - vi * vk * std::cos(thi - thk);
}

/// d = -v_i v_k sin(theta_i - theta_k).
template <typename Scalar>
Scalar feature_d(Scalar vi, Scalar vk, Scalar thi, Scalar thk) {
  return -vi * vk * std::sin(thi - thk);
}

template <typename Scalar>
EntryGradient<Scalar> feature_entry_gradient(Scalar vi, Scalar vk, Scalar thi, Scalar thk) {
  const Scalar cs = std::cos(thi - thk);
  const Scalar sn = std::sin(thi - thk);
  const Scalar vv = vi * vk;
  return {{Scalar(2) * vi - vk * cs, -vi * cs, vv * sn, -vv * sn},
          {-vk * sn, -vi * sn, -vv * cs, vv * cs}};
}

/// Builds X and y (W is left empty).
FeatureSystem build_features(const GridTopology& topo, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& P,
                             const Eigen::MatrixXd& Q);

/// Dense gradients of every c_ij and d_ij with respect to phi = [v; theta].
struct FeatureGradients {
  /// Row i*m + j holds grad c_ij (length 2n); zero when bus i is not on branch j.
  Eigen::MatrixXd c;
  /// Same layout for d_ij.
  Eigen::MatrixXd d;
};

FeatureGradients feature_gradients(const GridTopology& topo, const Eigen::VectorXd& phi);

/// First-order propagation of direct-measurement noise to reciprocal
/// variances of [X, y]. Buses listed in `noise.missing_angle_buses` use
/// `noise.missing_angle_std` for their angle.
Eigen::MatrixXd propagate_variances(const GridTopology& topo, const Eigen::MatrixXd& V,
                                    const Eigen::MatrixXd& Theta, const NoiseInfo& noise,
                                    double variance_floor = kVarianceFloor);

/// build_features + propagate_variances on one measurement set. Angles of
/// missing buses are read as zero regardless of the stored column.
FeatureSystem assemble_feature_system(const GridTopology& topo, const MeasurementSet& ms,
                                      const NoiseInfo& noise,
                                      double variance_floor = kVarianceFloor);

}  // namespace patopa
