#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace wfdual {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t combine(std::uint64_t h, std::initializer_list<std::uint64_t> vs) noexcept {
  for (auto v : vs) h = combine(h, v);
  return h;
}

/// Stream tags keep the seed domains of independent consumers disjoint.
enum class StreamTag : std::uint64_t {
  field = 0x5350444531ULL,
  particles = 0x4455414c31ULL,
  lhs = 0x4c48533031ULL,
  rhs = 0x5248533031ULL,
  diagnostics = 0x4449414731ULL,
  moments = 0x4d4f4d3031ULL,
};

/// Per-replica seed: mix(master_seed, stream_tag, replica_index).
constexpr std::uint64_t replica_seed(std::uint64_t master, StreamTag tag,
                                     std::uint64_t replica) noexcept {
  return combine(combine(master, static_cast<std::uint64_t>(tag)), replica);
}

/// Uniform on the open interval (0,1) from a 64-bit hash.
constexpr double to_unit(std::uint64_t h) noexcept {
  return (static_cast<double>(h >> 12) + 0.5) * 0x1.0p-52;
}

/// Counter-based draws: every value is a pure function of its key, so the
/// same key yields the same draw regardless of which system asks for it.
struct KeyedDraws {
  std::uint64_t seed = 0;

  double uniform(std::uint64_t key) const noexcept { return to_unit(combine(seed, key)); }

  double exponential(std::uint64_t key, double rate = 1.0) const noexcept {
    return -std::log(uniform(key)) / rate;
  }

  // Box-Muller, cosine branch only
  double normal(std::uint64_t key) const noexcept {
    const std::uint64_t h = combine(seed, key);
    const double u1 = to_unit(mix64(h));
    const double u2 = to_unit(mix64(h ^ 0xA5A5A5A5A5A5A5A5ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

}  // namespace wfdual
