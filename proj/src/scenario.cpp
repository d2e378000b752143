#include "patopa/scenario.hpp"

#include "patopa/errors.hpp"
#include "patopa/truncated_normal.hpp"

#include <cmath>
#include <random>
#include <string>

namespace patopa {

void MeasurementSet::validate() const {
  const Index t = V.rows();
  const Index n = V.cols();
  auto same = [&](const Eigen::MatrixXd& m) { return m.rows() == t && m.cols() == n; };
  if (!same(Theta) || !same(P) || !same(Q)) {
    throw InvalidArgument("measurement matrices must share the shape " + std::to_string(t) +
                          "x" + std::to_string(n));
  }
  if (t > 0 && n > 0 && (V.array() <= 0.0).any()) {
    throw InvalidArgument("voltage magnitudes must be positive");
  }
}

void NoiseSpec::validate() const {
  if (v < 0.0 || theta < 0.0 || p < 0.0 || q < 0.0) {
    throw InvalidArgument("relative noise levels must be nonnegative");
  }
  if (truncation_d && !(*truncation_d > 0.0)) {
    throw InvalidArgument("truncation width must be positive");
  }
}

VoltageProfiles sample_voltage_profiles(const GridTopology& topo, Index samples,
                                        std::uint64_t seed, const VoltageBands& bands) {
  if (samples < 1) {
    throw InvalidArgument("need at least one sample, got " + std::to_string(samples));
  }
  if (!(bands.v_min > 0.0) || bands.v_max < bands.v_min || bands.theta_half_width < 0.0) {
    throw InvalidArgument("invalid voltage sampling bands");
  }
  const Index n = topo.n_bus();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(bands.v_min, bands.v_max);
  std::uniform_real_distribution<double> ang(-bands.theta_half_width, bands.theta_half_width);

  VoltageProfiles out{Eigen::MatrixXd(samples, n), Eigen::MatrixXd(samples, n)};
  for (Index t = 0; t < samples; ++t) {
    for (Index i = 0; i < n; ++i) out.V(t, i) = mag(rng);
    out.Theta(t, 0) = 0.0;
    for (Index i = 1; i < n; ++i) out.Theta(t, i) = ang(rng);
  }
  return out;
}

Injections forward_injections(const GridTopology& topo, const LineParams& params,
                              const Eigen::MatrixXd& V, const Eigen::MatrixXd& Theta) {
  const Index n = topo.n_bus();
  if (V.cols() != n || Theta.cols() != n || V.rows() != Theta.rows()) {
    throw InvalidArgument("voltage matrices must be T x " + std::to_string(n));
  }
  if (params.g.size() != topo.n_edges() || params.b.size() != topo.n_edges()) {
    throw InvalidArgument("line parameters do not match the edge count");
  }
  const Index samples = V.rows();
  Injections out{Eigen::MatrixXd::Zero(samples, n), Eigen::MatrixXd::Zero(samples, n)};
  for (Index t = 0; t < samples; ++t) {
    for (Index j = 0; j < topo.n_edges(); ++j) {
      const auto [from, to] = topo.edge(j);
      const double vv = V(t, from) * V(t, to);
      const double g = params.g(j);
      const double b = params.b(j);
      // s = +1 at `from`, -1 at `to`; s * (theta_from - theta_to) is the
      // angle difference seen from the bus itself.
      for (const auto& [bus, s] : {std::pair{from, 1.0}, std::pair{to, -1.0}}) {
        const double angle = s * (Theta(t, from) - Theta(t, to));
        const double vi2 = V(t, bus) * V(t, bus);
        const double cs = std::cos(angle);
        const double sn = std::sin(angle);
        out.P(t, bus) += g * (vi2 - vv * cs) - b * vv * sn;
        out.Q(t, bus) += b * (vv * cs - vi2) - g * vv * sn;
      }
    }
  }
  return out;
}

MeasurementSet generate_measurements(const GridTopology& topo, const LineParams& params,
                                     Index samples, std::uint64_t seed,
                                     const VoltageBands& bands) {
  auto [V, Theta] = sample_voltage_profiles(topo, samples, seed, bands);
  auto [P, Q] = forward_injections(topo, params, V, Theta);
  MeasurementSet ms{std::move(V), std::move(Theta), std::move(P), std::move(Q), nullptr};
  return ms;
}

Eigen::RowVectorXd column_stddev(const Eigen::MatrixXd& m) {
  const Index rows = m.rows();
  Eigen::RowVectorXd sd = Eigen::RowVectorXd::Zero(m.cols());
  if (rows < 2) return sd;
  const Eigen::RowVectorXd mean = m.colwise().mean();
  sd = ((m.rowwise() - mean).array().square().colwise().sum() / double(rows - 1)).sqrt();
  return sd;
}

namespace {

void perturb(Eigen::MatrixXd& data, const Eigen::RowVectorXd& sigma,
             const std::optional<double>& truncation, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index col = 0; col < data.cols(); ++col) {
    const double s = sigma(col);
    for (Index t = 0; t < data.rows(); ++t) {
      if (s <= 0.0) continue;
      data(t, col) += truncation ? sample_truncated_normal(rng, s, *truncation * s)
                                 : s * normal(rng);
    }
  }
}

}  // namespace

MeasurementSet apply_noise(const MeasurementSet& ms, const NoiseSpec& spec) {
  spec.validate();
  ms.validate();
  for (Index bus : spec.missing_angle_buses) {
    if (bus < 0 || bus >= ms.buses()) {
      throw InvalidArgument("missing-angle bus " + std::to_string(bus) + " out of range");
    }
  }
  auto clean = ms.truth ? ms.truth : std::make_shared<const MeasurementSet>(
                                         MeasurementSet{ms.V, ms.Theta, ms.P, ms.Q, nullptr});
  MeasurementSet out{ms.V, ms.Theta, ms.P, ms.Q, clean};

  std::mt19937_64 rng(spec.seed);
  perturb(out.V, spec.v * column_stddev(clean->V), spec.truncation_d, rng);
  perturb(out.Theta, spec.theta * column_stddev(clean->Theta), spec.truncation_d, rng);
  perturb(out.P, spec.p * column_stddev(clean->P), spec.truncation_d, rng);
  perturb(out.Q, spec.q * column_stddev(clean->Q), spec.truncation_d, rng);
  for (Index bus : spec.missing_angle_buses) out.Theta.col(bus).setZero();
  return out;
}

NoiseStds NoiseStds::zeros(Index samples, Index buses) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(samples, buses);
  return {z, z, z, z};
}

NoiseStds NoiseStds::per_bus(Index samples, const Eigen::RowVectorXd& v,
                             const Eigen::RowVectorXd& theta, const Eigen::RowVectorXd& p,
                             const Eigen::RowVectorXd& q) {
  return {v.replicate(samples, 1), theta.replicate(samples, 1), p.replicate(samples, 1),
          q.replicate(samples, 1)};
}

NoiseStds NoiseStds::rows(Index begin, Index end) const {
  const Index count = end - begin;
  return {v.middleRows(begin, count), theta.middleRows(begin, count),
          p.middleRows(begin, count), q.middleRows(begin, count)};
}

NoiseStds noise_stds_from_truth(const MeasurementSet& truth, const NoiseSpec& spec) {
  return NoiseStds::per_bus(truth.samples(), spec.v * column_stddev(truth.V),
                            spec.theta * column_stddev(truth.Theta),
                            spec.p * column_stddev(truth.P), spec.q * column_stddev(truth.Q));
}

NoiseStds noise_stds_from_levels(const MeasurementSet& noisy, const NoiseSpec& levels) {
  auto scaled = [](double level, const Eigen::MatrixXd& m) -> Eigen::RowVectorXd {
    return (level / std::sqrt(1.0 + level * level)) * column_stddev(m);
  };
  return NoiseStds::per_bus(noisy.samples(), scaled(levels.v, noisy.V),
                            scaled(levels.theta, noisy.Theta), scaled(levels.p, noisy.P),
                            scaled(levels.q, noisy.Q));
}

}  // namespace patopa
