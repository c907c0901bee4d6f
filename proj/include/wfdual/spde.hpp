#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "drift.hpp"
#include "initial.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace wfdual {

/// Uniform mesh x_j = -half_width + j dx, j = 0..cells, on [-half_width, half_width].
struct Domain {
  double half_width = 8.0;
  double dx = 1.0 / 32.0;

  std::size_t cells() const {
    const double n = 2.0 * half_width / dx;
    const double r = std::round(n);
    if (!(dx > 0.0) || !(half_width > 0.0) || std::abs(n - r) > 1e-9 * std::max(1.0, n))
      throw std::invalid_argument("domain width must be a positive multiple of dx");
    return static_cast<std::size_t>(r);
  }
  double x(std::size_t j) const noexcept { return -half_width + static_cast<double>(j) * dx; }
};

/// The drift actually integrated by the field solver: b itself, or the
/// smoothed family b^(m)(z) = sum_k b_k z^(k wedge m) - z/m.
struct FieldDrift {
  DriftSpec spec;
  int truncation_m = 0;  // 0: exact drift with the atom at z = 1

  double operator()(double z) const {
    return truncation_m > 0 ? eval_truncated_drift(spec, truncation_m, z) : eval_drift(spec, z);
  }
};

/// Polynomial stand-in for the atom: b_inf 1{z=1} replaced by b_inf z^m.
inline DriftSpec approximating_drift(const DriftSpec& spec, int m) {
  if (m < 2) throw std::invalid_argument("approximation order m must be >= 2");
  std::vector<double> c = spec.coeffs();
  if (c.size() < static_cast<std::size_t>(m) + 1) c.resize(static_cast<std::size_t>(m) + 1, 0.0);
  c[static_cast<std::size_t>(m)] += spec.b_inf();
  return DriftSpec(std::move(c), 0.0, spec.tail_mass());
}

struct FieldState {
  Domain domain;
  std::vector<double> values;
  double t = 0.0;

  /// Linear interpolation between the two adjacent nodes.
  double at(double x) const {
    const double s = (x + domain.half_width) / domain.dx;
    if (s < 0.0 || s > static_cast<double>(values.size() - 1))
      throw std::out_of_range("probe point outside the simulated domain");
    const auto j = std::min(static_cast<std::size_t>(s), values.size() - 2);
    const double w = s - static_cast<double>(j);
    return (1.0 - w) * values[j] + w * values[j + 1];
  }
};

inline FieldState discretize(const InitialCondition& f, const Domain& domain) {
  FieldState s{domain, std::vector<double>(domain.cells() + 1), 0.0};
  for (std::size_t j = 0; j < s.values.size(); ++j) s.values[j] = f(domain.x(j));
  return s;
}

inline void require_stable(const Domain& domain, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("field time step must be positive");
  if (dt > 0.5 * domain.dx * domain.dx * (1.0 + 1e-12))
    throw std::invalid_argument("explicit scheme requires dt <= dx^2 / 2");
}

/// One explicit Euler-Maruyama step with Neumann (reflecting ghost node)
/// boundaries, followed by clamping to [0,1]. `scratch` is reused storage.
template <typename Rng>
void step_field(FieldState& state, const FieldDrift& drift, double dt, Rng& rng,
                std::vector<double>& scratch) {
  require_stable(state.domain, dt);
  auto& u = state.values;
  const std::size_t n = u.size();
  scratch.resize(n);
  const double dx = state.domain.dx;
  const double diffusion = dt / (2.0 * dx * dx);
  const double noise_scale = std::sqrt(dt / dx);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::size_t j = 0; j < n; ++j) {
    const double left = u[j == 0 ? 1 : j - 1];
    const double right = u[j + 1 == n ? n - 2 : j + 1];
    const double v = u[j];
    double next = v + diffusion * (left - 2.0 * v + right) + dt * drift(v);
    const double var = v * (1.0 - v);
    // sigma vanishes at 0 and 1; no draw is consumed there
    if (var > 0.0) next += std::sqrt(var) * noise_scale * normal(rng);
    scratch[j] = std::clamp(next, 0.0, 1.0);
  }
  u.swap(scratch);
  state.t += dt;
}

template <typename Rng>
void step_field(FieldState& state, const FieldDrift& drift, double dt, Rng& rng) {
  std::vector<double> scratch;
  step_field(state, drift, dt, rng, scratch);
}

/// Probe points must keep 8 heat-kernel standard deviations away from the
/// Neumann walls.
inline bool probe_points_safe(std::span<const double> points, double half_width, double T) {
  double reach = 0.0;
  for (double x : points) reach = std::max(reach, std::abs(x));
  return reach + 8.0 * std::sqrt(std::max(T, 0.0)) <= half_width;
}

struct FieldRun {
  FieldState terminal;
  std::vector<FieldState> snapshots;
};

/// Deterministic in (seed, parameters). Snapshots are taken at the first step
/// boundary at or after each requested time.
inline FieldRun simulate_field(const InitialCondition& f, const FieldDrift& drift, const Domain& domain,
                               double T, double dt, std::uint64_t seed,
                               std::span<const double> snapshot_times = {}) {
  require_stable(domain, dt);
  if (!(T >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  FieldRun run{discretize(f, domain), {}};
  std::mt19937_64 rng(seed);
  std::vector<double> scratch;

  std::vector<double> pending(snapshot_times.begin(), snapshot_times.end());
  std::sort(pending.begin(), pending.end());
  auto next_snap = pending.begin();
  auto take_snapshots = [&] {
    while (next_snap != pending.end() && *next_snap <= run.terminal.t + 1e-12) {
      run.snapshots.push_back(run.terminal);
      ++next_snap;
    }
  };

  take_snapshots();
  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  for (std::size_t k = 0; k < steps; ++k) {
    const double h = std::min(dt, T - static_cast<double>(k) * dt);
    if (h <= 0.0) break;
    step_field(run.terminal, drift, h, rng, scratch);
    take_snapshots();
  }
  run.terminal.t = T;
  return run;
}

struct FieldConfig {
  Domain domain;
  double dt = 1.0 / 4096.0;
  unsigned threads = 0;
};

/// Monte Carlo estimate of E_f[prod_i u_T(x_i)]; replica r uses the seed
/// mix(seed, lhs-tag, r).
inline MonteCarloEstimate estimate_lhs(const InitialCondition& f, const FieldDrift& drift,
                                       std::span<const double> points, double T, std::size_t reps,
                                       std::uint64_t seed, const FieldConfig& cfg) {
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  if (!probe_points_safe(points, cfg.domain.half_width, T))
    throw std::invalid_argument("probe points outside the safe sub-domain");
  if (points.empty()) {
    Accumulator acc;
    for (std::size_t r = 0; r < reps; ++r) acc.add(1.0);
    return MonteCarloEstimate::from(acc);
  }
  const std::vector<double> probe(points.begin(), points.end());
  const auto values = run_replicas<double>(reps, cfg.threads, [&](std::size_t r) {
    const auto run = simulate_field(f, drift, cfg.domain, T, cfg.dt, replica_seed(seed, StreamTag::lhs, r));
    double prod = 1.0;
    for (double x : probe) prod *= run.terminal.at(x);
    return prod;
  });
  Accumulator acc;
  for (double v : values) acc.add(v);
  return MonteCarloEstimate::from(acc);
}

}  // namespace wfdual
