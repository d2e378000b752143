#pragma once

#include <cmath>
#include <numbers>
#include <random>

namespace patopa {

/// Standard normal CDF.
template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

/// CDF of a zero-mean normal with scale `sigma` truncated to [-bound, bound].
/// Arguments outside the support clamp to 0 or 1.
template <typename Scalar>
Scalar truncated_normal_cdf(Scalar x, Scalar sigma, Scalar bound) {
  if (x <= -bound) return Scalar(0);
  if (x >= bound) return Scalar(1);
  const Scalar lo = normal_cdf(-bound / sigma);
  const Scalar hi = normal_cdf(bound / sigma);
  return (normal_cdf(x / sigma) - lo) / (hi - lo);
}

/// Zero-mean normal draw restricted to [-bound, bound].
///
/// Rejection from the untruncated normal when the window holds most of the
/// mass; uniform proposals with exp(-x^2/2) acceptance for narrow windows.
template <typename Scalar, typename Rng>
Scalar sample_truncated_normal(Rng& rng, Scalar sigma, Scalar bound) {
  if (sigma <= Scalar(0)) return Scalar(0);
  const Scalar z_bound = bound / sigma;
  if (z_bound >= Scalar(0.5)) {
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    for (;;) {
      const Scalar z = normal(rng);
      if (std::abs(z) <= z_bound) return sigma * z;
    }
  }
  std::uniform_real_distribution<Scalar> uniform(-z_bound, z_bound);
  std::uniform_real_distribution<Scalar> accept(Scalar(0), Scalar(1));
  for (;;) {
    const Scalar z = uniform(rng);
    if (accept(rng) <= std::exp(-Scalar(0.5) * z * z)) return sigma * z;
  }
}

}  // namespace patopa
