#pragma once

#include "patopa/grid_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace patopa {

/// Time series of nodal measurements; every matrix is T x n (row = time step).
struct MeasurementSet {
  Eigen::MatrixXd V;
  Eigen::MatrixXd Theta;
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  /// Noiseless copy, when known.
  std::shared_ptr<const MeasurementSet> truth;

  Index samples() const noexcept { return V.rows(); }
  Index buses() const noexcept { return V.cols(); }

  /// Throws InvalidArgument on shape mismatch or non-positive magnitudes.
  void validate() const;
};

/// Relative noise levels per channel: the noise standard deviation of a
/// measurement column is `level * stddev(noiseless column)`.
struct NoiseSpec {
  double v = 0.0;
  double theta = 0.0;
  double p = 0.0;
  double q = 0.0;
  /// Truncation half-width in units of the channel sigma.
  std::optional<double> truncation_d;
  std::vector<Index> missing_angle_buses;
  std::uint64_t seed = 0;

  static NoiseSpec uniform(double level, std::uint64_t seed) {
    NoiseSpec spec;
    spec.v = spec.theta = spec.p = spec.q = level;
    spec.seed = seed;
    return spec;
  }

  void validate() const;
};

/// Sampling bands for synthetic voltage profiles.
struct VoltageBands {
  double v_min = 0.95;
  double v_max = 1.05;
  double theta_half_width = 0.05;
};

struct VoltageProfiles {
  Eigen::MatrixXd V;
  Eigen::MatrixXd Theta;
};

struct Injections {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
};

/// Uniform i.i.d. magnitudes and angles; bus 0 is the slack with angle 0.
VoltageProfiles sample_voltage_profiles(const GridTopology& topo, Index samples,
                                        std::uint64_t seed, const VoltageBands& bands = {});

/// Power injections from the branch-parameter form of the AC power flow.
Injections forward_injections(const GridTopology& topo, const LineParams& params,
                              const Eigen::MatrixXd& V, const Eigen::MatrixXd& Theta);

/// Noiseless scenario: sampled voltages plus exact injections.
MeasurementSet generate_measurements(const GridTopology& topo, const LineParams& params,
                                     Index samples, std::uint64_t seed,
                                     const VoltageBands& bands = {});

/// Adds per-column Gaussian (optionally truncated) noise and zeroes the angle
/// columns of buses without phasor data. The result keeps a pointer to the
/// noiseless data.
MeasurementSet apply_noise(const MeasurementSet& ms, const NoiseSpec& spec);

/// Sample standard deviation of every column.
Eigen::RowVectorXd column_stddev(const Eigen::MatrixXd& m);

/// Per-entry noise standard deviations (T x n each) for the direct measurements.
struct NoiseStds {
  Eigen::MatrixXd v;
  Eigen::MatrixXd theta;
  Eigen::MatrixXd p;
  Eigen::MatrixXd q;

  static NoiseStds zeros(Index samples, Index buses);
  /// Repeats per-bus standard deviations over every time step.
  static NoiseStds per_bus(Index samples, const Eigen::RowVectorXd& v,
                           const Eigen::RowVectorXd& theta, const Eigen::RowVectorXd& p,
                           const Eigen::RowVectorXd& q);
  /// Keeps time steps [begin, end).
  NoiseStds rows(Index begin, Index end) const;
};

/// Noise model handed to the estimators.
struct NoiseInfo {
  NoiseStds stds;
  std::vector<Index> missing_angle_buses;
  /// Standard deviation assumed for an angle replaced by zero.
  double missing_angle_std = 0.01;
};

/// Exact standard deviations used by apply_noise (needs the noiseless data).
NoiseStds noise_stds_from_truth(const MeasurementSet& truth, const NoiseSpec& spec);

/// Standard deviations recovered from noisy data and the relative levels:
/// var(noisy) = var(true) (1 + level^2), so sigma = level * sd(noisy) / sqrt(1 + level^2).
NoiseStds noise_stds_from_levels(const MeasurementSet& noisy, const NoiseSpec& levels);

}  // namespace patopa
