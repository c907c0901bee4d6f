#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace wfdual {

/// Running (count, sum, sum of squares). Merging is associative.
class Accumulator {
 public:
  void add(double x) noexcept {
    ++count_;
    sum_ += x;
    sumsq_ += static_cast<long double>(x) * x;
  }

  void merge(const Accumulator& other) noexcept {
    count_ += other.count_;
    sum_ += other.sum_;
    sumsq_ += other.sumsq_;
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return count_ ? static_cast<double>(sum_ / count_) : 0.0; }

  double variance() const noexcept {
    if (count_ < 2) return 0.0;
    const long double n = count_;
    const long double v = (sumsq_ - sum_ * sum_ / n) / (n - 1);
    return v > 0 ? static_cast<double>(v) : 0.0;
  }

  double stderr_of_mean() const noexcept {
    return count_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  long double sum_ = 0;
  long double sumsq_ = 0;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  std::size_t aborted = 0;

  static MonteCarloEstimate from(const Accumulator& acc, std::size_t aborted = 0) {
    return {acc.mean(), acc.stderr_of_mean(), acc.count(), aborted};
  }

  double abort_fraction() const noexcept {
    const auto total = reps + aborted;
    return total ? static_cast<double>(aborted) / static_cast<double>(total) : 0.0;
  }
};

/// Empty entries are aborted replicas: excluded from the mean and counted.
inline MonteCarloEstimate collect_estimate(const std::vector<std::optional<double>>& values) {
  Accumulator acc;
  std::size_t aborted = 0;
  for (const auto& v : values) {
    if (v) acc.add(*v);
    else ++aborted;
  }
  return MonteCarloEstimate::from(acc, aborted);
}

/// Two-sample z statistic; 0 when both errors vanish and the means agree.
inline double z_score(const MonteCarloEstimate& a, const MonteCarloEstimate& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  const double diff = a.mean - b.mean;
  if (se == 0.0) {
    if (diff == 0.0) return 0.0;
    return diff > 0 ? INFINITY : -INFINITY;
  }
  return diff / se;
}

/// Mean of a paired difference divided by its standard error.
inline double paired_z(const Accumulator& diff) {
  const double se = diff.stderr_of_mean();
  if (se == 0.0) {
    if (diff.mean() == 0.0) return 0.0;
    return diff.mean() > 0 ? INFINITY : -INFINITY;
  }
  return diff.mean() / se;
}

/// Thread count: WFDUAL_THREADS overrides the requested value; 0 means "all cores".
inline unsigned resolve_threads(unsigned requested = 0) {
  if (const char* env = std::getenv("WFDUAL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on a bounded worker pool and returns the
/// results in index order, so downstream merges do not depend on scheduling.
template <typename Result, typename Body>
std::vector<Result> run_replicas(std::size_t n, unsigned threads, Body&& body) {
  std::vector<std::optional<Result>> slots(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(resolve_threads(threads),
                                                           static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(body(i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<Result> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace wfdual
