#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "drift.hpp"
#include "initial.hpp"
#include "particles.hpp"
#include "rng.hpp"
#include "spde.hpp"
#include "stats.hpp"

namespace wfdual {

struct DualConfig {
  double dt = 1e-3;
  Truncation truncation;
  std::optional<KMode> k_mode;  // unset: truncated iff m is finite
  std::size_t population_cap = 1'000'000;
  unsigned threads = 0;

  KMode resolved_k_mode() const {
    if (k_mode) return *k_mode;
    return truncation.m > 0 ? KMode::truncated : KMode::untruncated;
  }
};

/// Reports with more aborted replicas than this are invalid.
inline constexpr double kMaxAbortFraction = 0.01;

namespace detail {

inline double product_of(const InitialCondition& f, const RunSummary& run) {
  double prod = 1.0;
  for (const auto& [label, x] : run.terminal) prod *= f(x);
  return prod;
}

}  // namespace detail

/// E[(-1)^{n_branch_neg} e^{K_T} prod_{alive} f(X_T)] over `reps` replicas
/// seeded from the rhs stream. Aborted replicas are excluded and counted.
inline MonteCarloEstimate estimate_rhs(const InitialCondition& f, const DriftSpec& spec,
                                       std::span<const double> points, double T, std::size_t reps,
                                       std::uint64_t seed, const DualConfig& cfg) {
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  SystemConfig sc;
  sc.initial.assign(points.begin(), points.end());
  sc.truncation = cfg.truncation;
  sc.k_mode = cfg.resolved_k_mode();
  sc.horizon = T;
  sc.dt = cfg.dt;
  sc.population_cap = cfg.population_cap;
  const auto values = run_replicas<std::optional<double>>(reps, cfg.threads, [&](std::size_t r) {
    const auto run = run_system(spec, sc, replica_seed(seed, StreamTag::rhs, r));
    if (run.aborted) return std::optional<double>{};
    const double sign = run.n_branch_neg % 2 ? -1.0 : 1.0;
    return std::optional<double>{sign * std::exp(run.K) * detail::product_of(f, run)};
  });
  return collect_estimate(values);
}

struct DualityReport {
  MonteCarloEstimate lhs;
  MonteCarloEstimate rhs;
  double z = 0.0;
  double threshold = 3.0;
  bool valid = true;  // abort fraction within kMaxAbortFraction
  bool pass = false;
};

/// The field side integrates b itself, or b^(m) when the particle side uses
/// truncated-K weights.
inline FieldDrift field_drift_for(const DriftSpec& spec, const DualConfig& dual) {
  if (dual.resolved_k_mode() == KMode::truncated) {
    if (dual.truncation.m < 2) throw std::invalid_argument("truncated-K mode needs m >= 2");
    return FieldDrift{spec, static_cast<int>(dual.truncation.m)};
  }
  return FieldDrift{spec, 0};
}

inline DualityReport verify_duality(const InitialCondition& f, const DriftSpec& spec,
                                    std::span<const double> points, double T, const FieldConfig& field,
                                    const DualConfig& dual, std::size_t lhs_reps, std::size_t rhs_reps,
                                    std::uint64_t seed, double z_threshold = 3.0) {
  if (!(z_threshold > 0.0)) throw std::invalid_argument("z threshold must be positive");
  if (spec.p_infinite() > 0.0 && dual.truncation.m == 0)
    throw std::invalid_argument("an atom at z=1 needs a finite m-truncation on the particle side");
  if (dual.truncation.l > 0 && dual.truncation.l < points.size())
    throw std::invalid_argument("l-truncation would drop probe points from the product");
  DualityReport rep;
  rep.threshold = z_threshold;
  rep.lhs = estimate_lhs(f, field_drift_for(spec, dual), points, T, lhs_reps, seed, field);
  rep.rhs = estimate_rhs(f, spec, points, T, rhs_reps, seed, dual);
  rep.z = z_score(rep.lhs, rep.rhs);
  rep.valid = rep.rhs.abort_fraction() <= kMaxAbortFraction;
  rep.pass = rep.valid && std::abs(rep.z) < z_threshold;
  return rep;
}

/// Rejects drifts outside the b_1 z + b_inf 1{z=1} family.
inline void require_moment_family(const DriftSpec& spec) {
  const auto& c = spec.coeffs();
  for (std::size_t k = 0; k < c.size(); ++k)
    if (k != 1 && c[k] != 0.0) throw std::invalid_argument("moment estimator needs b_k = 0 for every finite k != 1");
  if (spec.b_inf() == 0.0) throw std::invalid_argument("moment estimator needs b_inf != 0");
}

struct MomentConfig {
  double dt = 1e-3;
  std::size_t population_cap = 1'000'000;
  unsigned threads = 0;
};

/// Dual estimate of E[u_t(x)^l] for b(z) = b_1 z + b_inf 1{z=1}: l particles
/// at x, offspring capped at m, weight exp((b_1 + |b_inf|) int |I|) and sign
/// (-1)^{n_branch} when b_inf < 0.
inline MonteCarloEstimate estimate_moment_l(const InitialCondition& f, const DriftSpec& spec, double x, double t,
                                            std::uint32_t l, std::uint32_t m, std::size_t reps,
                                            std::uint64_t seed, const MomentConfig& cfg = {}) {
  require_moment_family(spec);
  if (m == 0) throw std::invalid_argument("moment estimator needs a finite m");
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  if (l == 0) {
    Accumulator acc;
    for (std::size_t r = 0; r < reps; ++r) acc.add(1.0);
    return MonteCarloEstimate::from(acc);
  }
  SystemConfig sc;
  sc.initial.assign(l, x);
  sc.truncation = {l, m};
  sc.horizon = t;
  sc.dt = cfg.dt;
  sc.population_cap = cfg.population_cap;
  const double rate = spec.b1() + std::abs(spec.b_inf());
  const bool signed_weights = spec.b_inf() < 0.0;
  const std::uint64_t stream = combine(seed, {l, m});
  const auto values = run_replicas<std::optional<double>>(reps, cfg.threads, [&](std::size_t r) {
    const auto run = run_system(spec, sc, replica_seed(stream, StreamTag::moments, r));
    if (run.aborted) return std::optional<double>{};
    const double sign = signed_weights && run.n_branch % 2 ? -1.0 : 1.0;
    return std::optional<double>{sign * std::exp(rate * run.occupation) * detail::product_of(f, run)};
  });
  return collect_estimate(values);
}

struct MomentEntry {
  std::uint32_t l = 0;
  std::uint32_t m = 0;
  MonteCarloEstimate estimate;
};

struct IndicatorTable {
  std::vector<MomentEntry> grid;      // every (l, m) pair, l-major
  std::vector<MomentEntry> diagonal;  // (l_list[i], m_list[i])
  double estimate = 0.0;              // last diagonal mean
  double estimate_stderr = 0.0;
  bool stabilized = false;            // last two diagonal entries within 3 combined stderr
};

/// Grid of moment estimates converging to P(u_t(x) = 1). Each (l, m) cell has
/// its own stream, so diagonal comparisons use independent estimates.
inline IndicatorTable estimate_indicator(const InitialCondition& f, const DriftSpec& spec, double x, double t,
                                         const std::vector<std::uint32_t>& l_list,
                                         const std::vector<std::uint32_t>& m_list, std::size_t reps,
                                         std::uint64_t seed, const MomentConfig& cfg = {},
                                         bool diagonal_only = false) {
  if (l_list.empty() || m_list.empty()) throw std::invalid_argument("l and m lists must be nonempty");
  if (!std::is_sorted(l_list.begin(), l_list.end()) || !std::is_sorted(m_list.begin(), m_list.end()))
    throw std::invalid_argument("l and m lists must be ascending");
  IndicatorTable table;
  const std::size_t nd = std::min(l_list.size(), m_list.size());
  for (std::size_t i = 0; i < nd; ++i)
    table.diagonal.push_back({l_list[i], m_list[i],
                              estimate_moment_l(f, spec, x, t, l_list[i], m_list[i], reps, seed, cfg)});
  if (!diagonal_only) {
    for (auto l : l_list) {
      for (auto m : m_list) {
        auto hit = std::find_if(table.diagonal.begin(), table.diagonal.end(),
                                [&](const MomentEntry& e) { return e.l == l && e.m == m; });
        table.grid.push_back(hit != table.diagonal.end()
                                 ? *hit
                                 : MomentEntry{l, m, estimate_moment_l(f, spec, x, t, l, m, reps, seed, cfg)});
      }
    }
  }
  const auto& last = table.diagonal.back().estimate;
  table.estimate = last.mean;
  table.estimate_stderr = last.std_error;
  if (nd >= 2) table.stabilized = std::abs(z_score(table.diagonal[nd - 2].estimate, last)) < 3.0;
  return table;
}

}  // namespace wfdual
