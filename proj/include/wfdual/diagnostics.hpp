#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drift.hpp"
#include "particles.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace wfdual {

// Flags are never raised from fewer effective replicas than this.
inline constexpr std::size_t kMinEffectiveReps = 100;

struct ParticleRunConfig {
  double dt = 1e-3;
  std::size_t population_cap = 1'000'000;
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// E[n_branch(T)] = mu E[int_0^T |I_s| ds], paired per replica.

struct BranchingIdentityResult {
  MonteCarloEstimate branches;      // n_branch at T
  MonteCarloEstimate compensator;   // mu * int |I|
  MonteCarloEstimate difference;    // per-replica n_branch - mu int |I|
  double z = 0.0;
  bool pass = false;
};

inline BranchingIdentityResult check_branching_identity(const DriftSpec& spec, const std::vector<double>& initial,
                                                        Truncation truncation, double T, std::size_t reps,
                                                        std::uint64_t seed, const ParticleRunConfig& cfg = {}) {
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  if (spec.p_infinite() > 0.0 && truncation.m == 0)
    throw std::invalid_argument("branching identity needs a finite offspring law or m-truncation");
  SystemConfig sc;
  sc.initial = initial;
  sc.truncation = truncation;
  sc.horizon = T;
  sc.dt = cfg.dt;
  sc.population_cap = cfg.population_cap;
  struct Pair {
    double branches;
    double compensator;
    bool aborted;
  };
  const auto rows = run_replicas<Pair>(reps, cfg.threads, [&](std::size_t r) {
    const auto run = run_system(spec, sc, replica_seed(seed, StreamTag::diagnostics, r));
    return Pair{static_cast<double>(run.n_branch), spec.mu() * run.occupation, run.aborted};
  });
  Accumulator b, c, d;
  std::size_t aborted = 0;
  for (const auto& p : rows) {
    if (p.aborted) {
      ++aborted;
      continue;
    }
    b.add(p.branches);
    c.add(p.compensator);
    d.add(p.branches - p.compensator);
  }
  BranchingIdentityResult out{MonteCarloEstimate::from(b, aborted), MonteCarloEstimate::from(c, aborted),
                              MonteCarloEstimate::from(d, aborted), paired_z(d), false};
  out.pass = std::abs(out.z) < 3.0 && out.difference.abort_fraction() <= 0.01;
  return out;
}

// ---------------------------------------------------------------------------
// Z_t = exp(K_t) R^{|I_t|} is a supermartingale when the drift satisfies the
// growth condition at R.

struct SupermartingaleRow {
  double t = 0.0;
  MonteCarloEstimate z;
  bool bound_ok = false;  // mean - 3 se <= R^n
};

struct SupermartingaleResult {
  double R = 1.0;
  double bound = 1.0;  // R^n
  std::vector<SupermartingaleRow> rows;
  std::vector<double> step_z;  // paired z of Z_{t_{i+1}} - Z_{t_i}
  bool monotone_ok = false;
  bool pass = false;
};

inline SupermartingaleResult check_supermartingale(const DriftSpec& spec, double R, const std::vector<double>& initial,
                                                   std::vector<double> times, std::size_t reps, std::uint64_t seed,
                                                   const ParticleRunConfig& cfg = {}) {
  if (!check_condition(spec, R)) throw std::invalid_argument("growth condition fails at the requested R");
  if (spec.p_infinite() > 0.0) throw std::invalid_argument("supermartingale check needs a finite offspring law");
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  if (times.empty()) throw std::invalid_argument("need at least one time");
  std::sort(times.begin(), times.end());
  if (times.front() < 0.0) throw std::invalid_argument("times must be nonnegative");

  SystemConfig sc;
  sc.initial = initial;
  sc.horizon = times.back();
  sc.dt = cfg.dt;
  sc.sample_times = times;
  sc.population_cap = cfg.population_cap;
  const auto paths = run_replicas<std::optional<std::vector<double>>>(reps, cfg.threads, [&](std::size_t r) {
    const auto run = run_system(spec, sc, replica_seed(seed, StreamTag::diagnostics, r));
    if (run.aborted) return std::optional<std::vector<double>>{};
    std::vector<double> z;
    z.reserve(run.trajectory.size());
    for (const auto& p : run.trajectory) z.push_back(std::exp(p.K) * std::pow(R, static_cast<double>(p.population)));
    return std::optional<std::vector<double>>{std::move(z)};
  });

  SupermartingaleResult out;
  out.R = R;
  out.bound = std::pow(R, static_cast<double>(initial.size()));
  std::vector<Accumulator> level(times.size()), steps(times.size() > 0 ? times.size() - 1 : 0);
  std::size_t aborted = 0;
  for (const auto& p : paths) {
    if (!p) {
      ++aborted;
      continue;
    }
    for (std::size_t i = 0; i < times.size(); ++i) level[i].add((*p)[i]);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) steps[i].add((*p)[i + 1] - (*p)[i]);
  }
  bool bounds = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    SupermartingaleRow row{times[i], MonteCarloEstimate::from(level[i], aborted), false};
    row.bound_ok = row.z.mean - 3.0 * row.z.std_error <= out.bound;
    bounds = bounds && row.bound_ok;
    out.rows.push_back(row);
  }
  out.monotone_ok = true;
  for (const auto& s : steps) {
    out.step_z.push_back(paired_z(s));
    if (s.mean() > 3.0 * s.stderr_of_mean()) out.monotone_ok = false;
  }
  out.pass = bounds && out.monotone_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Killing-coalescing system (p_0 = 1) from l particles at one site.

struct ComingDownRow {
  std::uint32_t l = 0;
  double t = 0.0;
  MonteCarloEstimate population;
};

struct ComingDownResult {
  std::vector<ComingDownRow> rows;  // l-major
  std::vector<double> stabilization_z;  // top two l, per t
  double shape_ratio = 0.0;  // max/min of E|I_t| sqrt(t) for the largest l
  bool stabilized = false;
  bool shape_ok = false;
  bool pass = false;
};

/// Offspring law p_0 = 1 at rate mu: b(z) = mu - mu z.
inline DriftSpec killing_drift(double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("killing rate must be positive");
  return DriftSpec({mu, -mu}, 0.0);
}

inline ComingDownResult check_coming_down(double mu, std::vector<std::uint32_t> l_list, double x,
                                          std::vector<double> t_list, std::size_t reps, std::uint64_t seed,
                                          const ParticleRunConfig& cfg = {}) {
  if (l_list.empty() || t_list.empty()) throw std::invalid_argument("l and t lists must be nonempty");
  if (reps < 2) throw std::invalid_argument("need at least 2 replicas for a standard error");
  std::sort(l_list.begin(), l_list.end());
  std::sort(t_list.begin(), t_list.end());
  if (t_list.front() <= 0.0) throw std::invalid_argument("times must be positive");
  const DriftSpec spec = killing_drift(mu);

  ComingDownResult out;
  std::vector<std::vector<MonteCarloEstimate>> table;
  for (auto l : l_list) {
    SystemConfig sc;
    sc.initial.assign(l, x);
    sc.horizon = t_list.back();
    sc.dt = cfg.dt;
    sc.sample_times = t_list;
    sc.population_cap = cfg.population_cap;
    const std::uint64_t stream = combine(seed, l);
    const auto paths = run_replicas<std::optional<std::vector<double>>>(reps, cfg.threads, [&](std::size_t r) {
      const auto run = run_system(spec, sc, replica_seed(stream, StreamTag::diagnostics, r));
      if (run.aborted) return std::optional<std::vector<double>>{};
      std::vector<double> n;
      for (const auto& p : run.trajectory) n.push_back(static_cast<double>(p.population));
      return std::optional<std::vector<double>>{std::move(n)};
    });
    std::vector<Accumulator> acc(t_list.size());
    std::size_t aborted = 0;
    for (const auto& p : paths) {
      if (!p) {
        ++aborted;
        continue;
      }
      for (std::size_t i = 0; i < t_list.size(); ++i) acc[i].add((*p)[i]);
    }
    table.emplace_back();
    for (std::size_t i = 0; i < t_list.size(); ++i) {
      table.back().push_back(MonteCarloEstimate::from(acc[i], aborted));
      out.rows.push_back({l, t_list[i], table.back().back()});
    }
  }

  const auto& top = table.back();
  const bool enough = top.front().reps >= kMinEffectiveReps;
  if (table.size() >= 2) {
    const auto& second = table[table.size() - 2];
    out.stabilized = enough;
    for (std::size_t i = 0; i < t_list.size(); ++i) {
      out.stabilization_z.push_back(z_score(top[i], second[i]));
      if (!(std::abs(out.stabilization_z.back()) < 3.0)) out.stabilized = false;
    }
  }
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    const double s = top[i].mean * std::sqrt(t_list[i]);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out.shape_ratio = lo > 0.0 ? hi / lo : INFINITY;
  out.shape_ok = enough && out.shape_ratio < 4.0;
  out.pass = out.stabilized && out.shape_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Population delta after the first (capped infinite) branching event.

struct ReflectionRow {
  std::uint32_t m = 0;
  MonteCarloEstimate population;  // |I_{tau_1 + delta}|
  std::size_t excluded = 0;       // no branching (or no room for delta) before the horizon
};

struct ReflectionResult {
  double delta = 0.0;
  std::vector<ReflectionRow> rows;
  double z = 0.0;  // top two m
  bool pass = false;
};

inline ReflectionResult check_reflection(const DriftSpec& spec, std::vector<std::uint32_t> m_list, double delta,
                                         std::size_t reps, std::uint64_t seed, const ParticleRunConfig& cfg = {},
                                         std::vector<double> initial = {0.0}, double horizon = 100.0) {
  if (spec.b_inf() == 0.0) throw std::invalid_argument("reflection check needs b_inf != 0");
  if (m_list.empty()) throw std::invalid_argument("m list must be nonempty");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  std::sort(m_list.begin(), m_list.end());
  ReflectionResult out;
  out.delta = delta;
  for (auto m : m_list) {
    SystemConfig sc;
    sc.initial = initial;
    sc.truncation = {0, m};
    sc.horizon = horizon;
    sc.dt = cfg.dt;
    sc.population_cap = cfg.population_cap;
    sc.stop_after_first_branch = delta;
    const std::uint64_t stream = combine(seed, m);
    const auto values = run_replicas<std::optional<double>>(reps, cfg.threads, [&](std::size_t r) {
      const auto run = run_system(spec, sc, replica_seed(stream, StreamTag::diagnostics, r));
      if (run.aborted || !run.first_branch_time || run.end_time < *run.first_branch_time + delta - 1e-12)
        return std::optional<double>{};
      return std::optional<double>{static_cast<double>(run.population)};
    });
    const auto est = collect_estimate(values);
    out.rows.push_back({m, est, est.aborted});
  }
  if (out.rows.size() >= 2) {
    const auto& a = out.rows[out.rows.size() - 2].population;
    const auto& b = out.rows.back().population;
    out.z = z_score(a, b);
    out.pass = a.reps >= kMinEffectiveReps && b.reps >= kMinEffectiveReps && std::abs(out.z) < 3.0;
  }
  return out;
}

}  // namespace wfdual
