#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

namespace wfdual {

/// Quadratic-variation rate of the difference of two independent standard
/// Brownian motions.
inline constexpr double kPairVarianceRate = 2.0;

/// Level-0 semimartingale local time of a Brownian bridge with variance rate
/// v running from a to b over time dt, sampled by inversion from u in (0,1):
///   L = max(0, sqrt((a-b)^2 - 2 v dt ln u) - |a| - |b|).
inline double pair_local_time_from_uniform(double a, double b, double dt, double u,
                                           double v = kPairVarianceRate) {
  if (!(dt > 0.0)) throw std::invalid_argument("local time step must be positive");
  const double d = a - b;
  const double r = std::sqrt(d * d - 2.0 * v * dt * std::log(u));
  const double l = r - std::abs(a) - std::abs(b);
  return l > 0.0 ? l : 0.0;
}

/// Probability that the bridge touches zero, i.e. that the sampled local time
/// is positive: 1 if the endpoints straddle 0, else exp(-2ab / (v dt)).
inline double pair_hit_probability(double a, double b, double dt, double v = kPairVarianceRate) {
  const double ab = a * b;
  return ab <= 0.0 ? 1.0 : std::exp(-2.0 * ab / (v * dt));
}

template <typename Rng>
double sample_pair_local_time(double a, double b, double dt, Rng& rng, double v = kPairVarianceRate) {
  if (!(dt > 0.0)) throw std::invalid_argument("local time step must be positive");
  // (0,1): generate_canonical may return 0
  double u;
  do {
    u = std::generate_canonical<double, 53>(rng);
  } while (u <= 0.0);
  return pair_local_time_from_uniform(a, b, dt, u, v);
}

}  // namespace wfdual
