#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace wfdual {

/// Initial profile f : R -> [0,1], analytically evaluable everywhere.
class InitialCondition {
 public:
  enum class Kind { constant, gaussian_bump, one, zero };

  static InitialCondition constant(double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("constant initial value must lie in [0,1]");
    return InitialCondition(Kind::constant, c, 0.0);
  }

  /// a + b exp(-x^2)
  static InitialCondition gaussian_bump(double a, double b) {
    if (!(a >= 0.0 && b >= 0.0 && a + b <= 1.0))
      throw std::invalid_argument("gaussian bump needs a, b >= 0 and a + b <= 1");
    return InitialCondition(Kind::gaussian_bump, a, b);
  }

  static InitialCondition one() { return InitialCondition(Kind::one, 1.0, 0.0); }
  static InitialCondition zero() { return InitialCondition(Kind::zero, 0.0, 0.0); }

  Kind kind() const noexcept { return kind_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

  double operator()(double x) const noexcept {
    switch (kind_) {
      case Kind::constant: return a_;
      case Kind::gaussian_bump: return a_ + b_ * std::exp(-x * x);
      case Kind::one: return 1.0;
      case Kind::zero: return 0.0;
    }
    return 0.0;
  }

  bool operator==(const InitialCondition&) const = default;

 private:
  InitialCondition(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_;
  double a_;
  double b_;
};

inline std::string to_string(InitialCondition::Kind k) {
  switch (k) {
    case InitialCondition::Kind::constant: return "constant";
    case InitialCondition::Kind::gaussian_bump: return "gaussian_bump";
    case InitialCondition::Kind::one: return "one";
    case InitialCondition::Kind::zero: return "zero";
  }
  return "unknown";
}

}  // namespace wfdual
