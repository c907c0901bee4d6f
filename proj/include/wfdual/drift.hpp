#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfdual {

/// Offspring count used for the atom at z = 1 (infinitely many children).
inline constexpr std::uint32_t kInfiniteOffspring = std::numeric_limits<std::uint32_t>::max();

struct OffspringOutcome {
  std::uint32_t children = 0;  // kInfiniteOffspring for the atom
  double probability = 0.0;
  double coefficient = 0.0;  // b_k driving this outcome; its sign feeds the duality sign
};

struct ValidationReport {
  bool sign_at_zero = false;  // b(0) >= 0
  bool sign_at_one = false;   // b(1) <= 0
  bool linear_only = false;   // no k >= 2 or atom coefficients: pure killing/coalescing dual
  bool offspring_well_formed = false;
  double mu = 0.0;
  double offspring_mass = 0.0;

  bool pass() const noexcept { return sign_at_zero && sign_at_one && offspring_well_formed; }
};

/// Drift b(z) = sum_k b_k z^k + b_inf 1{z = 1} together with the branching
/// rate and offspring law of its dual particle system. Immutable.
class DriftSpec {
 public:
  DriftSpec() : DriftSpec(std::vector<double>{}, 0.0) {}

  DriftSpec(std::vector<double> coeffs, double b_inf, double tail_mass = 0.0)
      : coeffs_(std::move(coeffs)), b_inf_(b_inf), tail_mass_(tail_mass) {
    for (double c : coeffs_)
      if (!std::isfinite(c)) throw std::invalid_argument("drift coefficients must be finite");
    if (!std::isfinite(b_inf_)) throw std::invalid_argument("b_inf must be finite");

    mu_ = std::abs(b_inf_);
    for (std::size_t k = 0; k < coeffs_.size(); ++k)
      if (k != 1) mu_ += std::abs(coeffs_[k]);

    if (mu_ > 0) {
      for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        if (k == 1 || coeffs_[k] == 0.0) continue;
        offspring_.push_back({static_cast<std::uint32_t>(k), std::abs(coeffs_[k]) / mu_, coeffs_[k]});
      }
      if (b_inf_ != 0.0) offspring_.push_back({kInfiniteOffspring, std::abs(b_inf_) / mu_, b_inf_});
    }
  }

  const std::vector<double>& coeffs() const noexcept { return coeffs_; }
  double coeff(std::size_t k) const noexcept { return k < coeffs_.size() ? coeffs_[k] : 0.0; }
  double b_inf() const noexcept { return b_inf_; }
  double b0() const noexcept { return coeff(0); }
  double b1() const noexcept { return coeff(1); }
  double mu() const noexcept { return mu_; }
  /// Mass of coefficients dropped by an explicit series truncation.
  double tail_mass() const noexcept { return tail_mass_; }
  const std::vector<OffspringOutcome>& offspring() const noexcept { return offspring_; }

  double p_infinite() const noexcept {
    for (const auto& o : offspring_)
      if (o.children == kInfiniteOffspring) return o.probability;
    return 0.0;
  }

  /// Largest finite offspring count with positive probability.
  std::uint32_t max_finite_offspring() const noexcept {
    std::uint32_t m = 0;
    for (const auto& o : offspring_)
      if (o.children != kInfiniteOffspring && o.children > m) m = o.children;
    return m;
  }

  bool linear_only() const noexcept {
    if (b_inf_ != 0.0) return false;
    for (std::size_t k = 2; k < coeffs_.size(); ++k)
      if (coeffs_[k] != 0.0) return false;
    return true;
  }

  /// Inverse-CDF draw from the offspring law given u in (0,1).
  const OffspringOutcome& sample_offspring(double u) const {
    if (offspring_.empty()) throw std::logic_error("drift has no branching (mu == 0)");
    double acc = 0.0;
    for (const auto& o : offspring_) {
      acc += o.probability;
      if (u < acc) return o;
    }
    return offspring_.back();
  }

  bool operator==(const DriftSpec& other) const noexcept {
    return coeffs_ == other.coeffs_ && b_inf_ == other.b_inf_ && tail_mass_ == other.tail_mass_;
  }

 private:
  std::vector<double> coeffs_;
  double b_inf_ = 0.0;
  double tail_mass_ = 0.0;
  double mu_ = 0.0;
  std::vector<OffspringOutcome> offspring_;
};

inline ValidationReport validate(const DriftSpec& spec) {
  ValidationReport r;
  r.mu = spec.mu();
  r.linear_only = spec.linear_only();
  r.sign_at_zero = spec.b0() >= 0.0;
  double at_one = spec.b_inf();
  for (double c : spec.coeffs()) at_one += c;
  r.sign_at_one = at_one <= 0.0;

  double mass = 0.0;
  bool in_range = true;
  for (const auto& o : spec.offspring()) {
    mass += o.probability;
    in_range = in_range && o.probability >= 0.0 && o.probability <= 1.0;
  }
  r.offspring_mass = mass;
  r.offspring_well_formed = in_range && (spec.mu() == 0.0 || std::abs(mass - 1.0) <= 1e-12);
  return r;
}

/// b_1 <= -sum_{k != 1} |b_k| R^(k-1), with R^(inf-1) read as 1 at R = 1 and
/// +inf for R > 1.
inline bool check_condition(const DriftSpec& spec, double R) {
  if (!(R >= 1.0)) throw std::invalid_argument("check_condition requires R >= 1");
  if (spec.b_inf() != 0.0 && R > 1.0) return false;
  double bound = std::abs(spec.b_inf());
  const auto& c = spec.coeffs();
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (k == 1) continue;
    bound += std::abs(c[k]) * std::pow(R, static_cast<double>(k) - 1.0);
  }
  return spec.b1() <= -bound;
}

/// Truncated coefficients of b(z) = -(1-z)^q z: b_1 = -1, b_k = (-1)^k C(q, k-1).
inline DriftSpec binomial_coeffs(double q, int K) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("binomial drift needs 0 < q < 1");
  if (K < 2) throw std::invalid_argument("binomial drift needs K >= 2");
  std::vector<double> b(static_cast<std::size_t>(K) + 1, 0.0);
  b[1] = -1.0;
  // C(q, j) built by the recurrence C(q, j) = C(q, j-1) (q - j + 1) / j
  double binom = 1.0;
  double kept = 0.0;
  for (int k = 2; k <= K; ++k) {
    const int j = k - 1;
    binom *= (q - (j - 1)) / j;
    b[static_cast<std::size_t>(k)] = ((k % 2 == 0) ? 1.0 : -1.0) * binom;
    kept += b[static_cast<std::size_t>(k)];
  }
  // the k >= 2 coefficients are nonnegative and sum to 1
  const double tail = std::max(0.0, 1.0 - kept);
  return DriftSpec(std::move(b), 0.0, tail);
}

inline void require_unit_interval(double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("drift argument must lie in [0,1]");
}

/// Horner evaluation of the polynomial part; the atom fires on exact z == 1.
inline double eval_drift(const DriftSpec& spec, double z) {
  require_unit_interval(z);
  const auto& c = spec.coeffs();
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * z + c[k];
  if (z == 1.0) v += spec.b_inf();
  return v;
}

/// sum_k b_k z^(k wedge m) - z/m; the atom contributes b_inf z^m.
inline double eval_truncated_drift(const DriftSpec& spec, int m, double z) {
  require_unit_interval(z);
  if (m < 2) throw std::invalid_argument("truncation level m must be >= 2");
  const auto& c = spec.coeffs();
  const double zm = std::pow(z, m);
  double v = spec.b_inf() * zm;
  double zk = 1.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    v += c[k] * (static_cast<int>(k) < m ? zk : zm);
    zk *= z;
  }
  return v - z / m;
}

}  // namespace wfdual
