#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "drift.hpp"
#include "label.hpp"
#include "local_time.hpp"
#include "rng.hpp"

namespace wfdual {

/// (l, m)-truncation: keep the first l initial particles and cap every
/// offspring count at m. Zero means "no truncation".
struct Truncation {
  std::uint32_t l = 0;
  std::uint32_t m = 0;

  bool operator==(const Truncation&) const = default;
};

/// Weight in K_t = rate * int_0^t |I_s| ds: mu + b_1, or mu + b_1 - 1/m.
enum class KMode { untruncated, truncated };

inline double k_rate(const DriftSpec& spec, KMode mode, std::uint32_t m) {
  double rate = spec.mu() + spec.b1();
  if (mode == KMode::truncated) {
    if (m == 0) throw std::invalid_argument("truncated-K mode needs a finite m");
    rate -= 1.0 / m;
  }
  return rate;
}

struct SystemConfig {
  std::vector<double> initial;  // x_1..x_n
  Truncation truncation;
  KMode k_mode = KMode::untruncated;
  double horizon = 0.0;
  double dt = 1e-3;
  std::vector<double> sample_times;  // hit exactly by shortening steps
  bool record_labels = false;
  bool record_events = false;
  std::size_t population_cap = 1'000'000;
  /// When set, stop delta time units after the first branching event.
  std::optional<double> stop_after_first_branch;
};

struct Particle {
  Label label;
  std::uint64_t key = 0;
  std::uint32_t uid = 0;
  double position = 0.0;  // at max(step start, birth)
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();
  double branch_time = std::numeric_limits<double>::infinity();
  std::uint32_t offspring = 0;  // untruncated draw
  double offspring_coeff = 0.0;
  // Lineage state at the start of the current step: the ancestor alive then
  // and its position (the extended path used for pair local times).
  std::uint32_t anchor_uid = 0;
  double anchor_position = 0.0;
  bool alive = true;
};

enum class EventKind { branch, coalesce };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::branch;
  Label label;     // parent (branch) or removed particle (coalesce)
  Label partner;   // survivor of a coalescence
  std::uint32_t children = 0;
};

struct TrajectoryPoint {
  double t = 0.0;
  std::size_t population = 0;
  std::size_t n_branch = 0;
  std::size_t n_branch_neg = 0;
  double occupation = 0.0;  // int_0^t |I_s| ds
  double K = 0.0;
};

struct RunSummary {
  std::vector<std::pair<Label, double>> terminal;  // alive at the horizon, in label order
  std::size_t population = 0;
  std::size_t n_branch = 0;
  std::size_t n_branch_neg = 0;
  double occupation = 0.0;
  double K = 0.0;
  double end_time = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<std::vector<Label>> label_sets;  // parallel to trajectory when requested
  std::vector<Event> events;
  bool aborted = false;
  std::optional<double> first_branch_time;
};

namespace detail {
enum : std::uint64_t {
  kTagClock = 0xC10C,
  kTagOffspring = 0x0FF5,
  kTagMove = 0x30E1,
  kTagPartial = 0x9A27,
  kTagPair = 0x9A18,
  kTagBridge = 0xB81D,
};
// Pairs whose bridge hits zero with probability below exp(-40) are skipped.
inline constexpr double kBridgeSkipExponent = 40.0;
}  // namespace detail

/// Branching-coalescing Brownian particles on a time grid. Branching clocks
/// are sampled exactly; coalescences are resolved at step boundaries from
/// exact bridge local-time increments. Every random draw is keyed by label
/// (or label pair) and step index, so an m-truncated system is a
/// deterministic sub-system of any M-truncated one with M >= m.
class ParticleSystem {
 public:
  ParticleSystem(const DriftSpec& spec, const SystemConfig& cfg, std::uint64_t seed)
      : spec_(spec), cfg_(cfg), draws_{seed}, k_rate_(k_rate(spec, cfg.k_mode, cfg.truncation.m)) {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("particle time step must be positive");
    if (spec.p_infinite() > 0.0 && cfg.truncation.m == 0)
      throw std::invalid_argument("infinite offspring needs a finite m-truncation");
    std::size_t n = cfg.initial.size();
    if (cfg.truncation.l > 0) n = std::min<std::size_t>(n, cfg.truncation.l);
    alive_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(cfg.initial[i])) throw std::invalid_argument("initial positions must be finite");
      alive_.push_back(make_particle(Label::root(static_cast<std::uint32_t>(i + 1)), cfg.initial[i], 0.0));
    }
    sort_alive();
  }

  double time() const noexcept { return t_; }
  std::size_t population() const noexcept { return alive_.size(); }
  std::size_t n_branch() const noexcept { return n_branch_; }
  std::size_t n_branch_neg() const noexcept { return n_branch_neg_; }
  double occupation() const noexcept { return occupation_; }
  double K() const noexcept { return k_rate_ * occupation_; }
  bool aborted() const noexcept { return aborted_; }
  const std::vector<Particle>& alive() const noexcept { return alive_; }
  const std::vector<Event>& events() const noexcept { return events_; }
  std::optional<double> first_branch_time() const noexcept { return first_branch_; }

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(alive_.size());
    for (const auto& p : alive_) out.push_back(p.label);
    return out;
  }

  TrajectoryPoint snapshot() const {
    return {t_, alive_.size(), n_branch_, n_branch_neg_, occupation_, K()};
  }

  /// Advance by h: branchings in firing-time order, then diffusion to the
  /// step end, then coalescences in label order.
  void step(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("step length must be positive");
    if (aborted_) return;
    const double t0 = t_;
    const double t1 = t_ + h;
    if (alive_.empty()) {
      t_ = t1;
      ++step_index_;
      return;
    }

    for (auto& p : alive_) {
      p.anchor_uid = p.uid;
      p.anchor_position = p.position;
    }

    branched_in_step_.clear();
    bool births = resolve_branchings(t0, t1);
    if (aborted_) return;

    // diffuse survivors to the step end and accumulate occupation time
    for (auto& p : alive_) {
      const double start = std::max(t0, p.birth);
      occupation_ += t1 - start;
      const double span = t1 - start;
      if (span > 0.0)
        p.position += std::sqrt(span) * draws_.normal(combine(p.key, {detail::kTagMove, step_index_}));
    }
    if (births) sort_alive();

    resolve_coalescences(h, t1);
    t_ = t1;
    ++step_index_;
  }

 private:
  Particle make_particle(Label label, double position, double birth) {
    Particle p;
    p.key = label.key();
    p.label = std::move(label);
    p.uid = next_uid_++;
    p.position = position;
    p.birth = birth;
    p.anchor_uid = p.uid;
    p.anchor_position = position;
    if (spec_.mu() > 0.0) {
      p.branch_time = birth + draws_.exponential(combine(p.key, detail::kTagClock), spec_.mu());
      const auto& o = spec_.sample_offspring(draws_.uniform(combine(p.key, detail::kTagOffspring)));
      p.offspring = o.children;
      p.offspring_coeff = o.coefficient;
    }
    return p;
  }

  void sort_alive() {
    std::sort(alive_.begin(), alive_.end(),
              [](const Particle& a, const Particle& b) { return label_less(a.label, b.label); });
  }

  bool resolve_branchings(double t0, double t1) {
    using Item = std::pair<double, std::uint32_t>;  // (firing time, uid)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    std::unordered_map<std::uint32_t, std::size_t> index;
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (alive_[i].branch_time < t1) {
        queue.emplace(alive_[i].branch_time, alive_[i].uid);
        index.emplace(alive_[i].uid, i);
      }
    }
    if (queue.empty()) return false;

    std::vector<Particle> born;
    std::size_t deaths = 0;
    // particles created this step are looked up in `born` by uid
    std::unordered_map<std::uint32_t, std::size_t> born_index;

    while (!queue.empty()) {
      const auto [tau, uid] = queue.top();
      queue.pop();
      Particle* parent = nullptr;
      if (auto it = index.find(uid); it != index.end()) parent = &alive_[it->second];
      else parent = &born[born_index.at(uid)];

      const double start = std::max(t0, parent->birth);
      const double at = parent->position +
                        std::sqrt(tau - start) * draws_.normal(combine(parent->key, {detail::kTagPartial, step_index_}));
      occupation_ += tau - start;
      parent->alive = false;
      parent->death = tau;
      ++n_branch_;
      if (parent->offspring_coeff < 0.0) ++n_branch_neg_;
      if (!first_branch_) first_branch_ = tau;
      branched_in_step_.emplace(parent->key, tau);

      std::uint32_t children = parent->offspring;
      if (cfg_.truncation.m > 0) children = std::min(children, cfg_.truncation.m);
      if (children == kInfiniteOffspring) throw std::logic_error("untruncated infinite offspring");
      if (cfg_.record_events) events_.push_back({tau, EventKind::branch, parent->label, {}, children});

      const Label parent_label = parent->label;
      const std::uint32_t anchor_uid = parent->anchor_uid;
      const double anchor_pos = parent->anchor_position;
      ++deaths;

      if (alive_.size() + born.size() + children > cfg_.population_cap + deaths) {
        aborted_ = true;
        return false;
      }
      for (std::uint32_t k = 1; k <= children; ++k) {
        Particle c = make_particle(parent_label.child(k), at, tau);
        c.anchor_uid = anchor_uid;
        c.anchor_position = anchor_pos;
        if (c.branch_time < t1) queue.emplace(c.branch_time, c.uid);
        born_index.emplace(c.uid, born.size());
        born.push_back(std::move(c));
      }
    }

    std::erase_if(alive_, [](const Particle& p) { return !p.alive; });
    for (auto& c : born)
      if (c.alive) alive_.push_back(std::move(c));
    return true;
  }

  void resolve_coalescences(double h, double t1) {
    const std::size_t n = alive_.size();
    if (n < 2) return;
    std::vector<char> removed(n, 0);
    bool any = false;
    for (std::size_t j = 1; j < n; ++j) {
      const Particle& beta = alive_[j];
      for (std::size_t i = 0; i < j; ++i) {
        if (removed[i]) continue;
        const Particle& alpha = alive_[i];
        double a;
        double span = h;
        if (alpha.anchor_uid == beta.anchor_uid) {
          // same lineage at step start: paths coincide until they split
          a = 0.0;
          span = t1 - split_time(alpha.label, beta.label);
          if (!(span > 0.0)) continue;
        } else {
          a = alpha.anchor_position - beta.anchor_position;
        }
        const double b = alpha.position - beta.position;
        if (a * b > detail::kBridgeSkipExponent * span) continue;

        const double u = draws_.uniform(combine(alpha.key, {beta.key, detail::kTagBridge, step_index_}));
        const double dl = pair_local_time_from_uniform(a, b, span, u);
        if (dl <= 0.0) continue;
        const std::uint64_t pair = (static_cast<std::uint64_t>(alpha.uid) << 32) | beta.uid;
        double& acc = pair_local_time_[pair];
        acc += dl;
        // rate-1/2 clock in local time: fires when L/2 exceeds an Exp(1) threshold
        const double threshold = draws_.exponential(combine(alpha.key, {beta.key, detail::kTagPair}));
        if (0.5 * acc >= threshold) {
          removed[j] = 1;
          any = true;
          if (cfg_.record_events) events_.push_back({t1, EventKind::coalesce, beta.label, alpha.label, 0});
          break;
        }
      }
    }
    if (!any) return;
    std::size_t w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (removed[i]) {
        alive_[i].alive = false;
        alive_[i].death = t1;
        continue;
      }
      if (w != i) alive_[w] = std::move(alive_[i]);
      ++w;
    }
    alive_.resize(w);
  }

  double split_time(const Label& a, const Label& b) const {
    const std::size_t c = a.common_prefix(b);
    const Label lca(std::vector<std::uint32_t>(a.entries().begin(), a.entries().begin() + c));
    const auto it = branched_in_step_.find(lca.key());
    if (it == branched_in_step_.end()) throw std::logic_error("lineage split outside the current step");
    return it->second;
  }

  DriftSpec spec_;
  SystemConfig cfg_;
  KeyedDraws draws_;
  double k_rate_ = 0.0;

  std::vector<Particle> alive_;
  std::unordered_map<std::uint64_t, double> pair_local_time_;
  std::unordered_map<std::uint64_t, double> branched_in_step_;
  std::vector<Event> events_;
  double t_ = 0.0;
  std::uint64_t step_index_ = 0;
  std::uint32_t next_uid_ = 0;
  std::size_t n_branch_ = 0;
  std::size_t n_branch_neg_ = 0;
  double occupation_ = 0.0;
  bool aborted_ = false;
  std::optional<double> first_branch_;
};

inline void step_system(ParticleSystem& system, double dt) { system.step(dt); }

/// Runs to the horizon, hitting every sample time exactly.
inline RunSummary run_system(const DriftSpec& spec, const SystemConfig& cfg, std::uint64_t seed) {
  if (!(cfg.horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  ParticleSystem sys(spec, cfg, seed);
  RunSummary out;

  std::vector<double> samples;
  for (double s : cfg.sample_times)
    if (s >= 0.0 && s <= cfg.horizon) samples.push_back(s);
  std::sort(samples.begin(), samples.end());
  auto next_sample = samples.begin();

  auto record_due = [&] {
    while (next_sample != samples.end() && *next_sample <= sys.time() + 1e-12) {
      auto point = sys.snapshot();
      point.t = *next_sample;
      out.trajectory.push_back(point);
      if (cfg.record_labels) out.label_sets.push_back(sys.labels());
      ++next_sample;
    }
  };

  double stop = cfg.horizon;
  bool stop_fixed = false;
  record_due();
  while (sys.time() < stop - 1e-12 && !sys.aborted()) {
    double target = stop;
    if (next_sample != samples.end()) target = std::min(target, *next_sample);
    double h = std::min(cfg.dt, target - sys.time());
    // avoid a sliver step from floating-point drift
    if (target - (sys.time() + h) < 1e-12 * std::max(1.0, target)) h = target - sys.time();
    sys.step(h);
    if (cfg.stop_after_first_branch && !stop_fixed && sys.first_branch_time()) {
      stop = std::min(cfg.horizon, *sys.first_branch_time() + *cfg.stop_after_first_branch);
      stop_fixed = true;
    }
    record_due();
  }

  out.aborted = sys.aborted();
  out.population = sys.population();
  out.n_branch = sys.n_branch();
  out.n_branch_neg = sys.n_branch_neg();
  out.occupation = sys.occupation();
  out.K = sys.K();
  out.end_time = sys.time();
  out.first_branch_time = sys.first_branch_time();
  out.terminal.reserve(sys.population());
  for (const auto& p : sys.alive()) out.terminal.emplace_back(p.label, p.position);
  if (cfg.record_events) out.events = sys.events();
  return out;
}

/// Runs every m in m_list on the same keyed randomness. Initial particles are
/// capped at min(l, m) so each run is the (m, m)-truncation.
inline std::vector<RunSummary> run_coupled_truncations(const DriftSpec& spec, SystemConfig cfg,
                                                       const std::vector<std::uint32_t>& m_list,
                                                       std::uint64_t seed) {
  if (m_list.empty()) throw std::invalid_argument("m_list must be nonempty");
  if (!std::is_sorted(m_list.begin(), m_list.end()) || m_list.front() == 0)
    throw std::invalid_argument("m_list must be ascending positive integers");
  cfg.record_labels = true;
  const std::uint32_t l = cfg.truncation.l;
  std::vector<RunSummary> out;
  out.reserve(m_list.size());
  for (auto m : m_list) {
    SystemConfig c = cfg;
    c.truncation.m = m;
    c.truncation.l = l == 0 ? m : std::min(l, m);
    out.push_back(run_system(spec, c, seed));
  }
  return out;
}

/// Labels of `master` with largest entry at most m.
inline std::vector<Label> filter_by_norm(const std::vector<Label>& master, std::uint32_t m) {
  std::vector<Label> out;
  for (const auto& l : master)
    if (l.norm() <= m) out.push_back(l);
  return out;
}

/// Checks I^(m)_t = {a in I^(M)_t : |a|_inf <= m} at every recorded time.
inline bool coupling_identity_holds(const RunSummary& master, const RunSummary& derived, std::uint32_t m) {
  if (master.label_sets.size() != derived.label_sets.size()) return false;
  for (std::size_t k = 0; k < master.label_sets.size(); ++k)
    if (filter_by_norm(master.label_sets[k], m) != derived.label_sets[k]) return false;
  return true;
}

}  // namespace wfdual
