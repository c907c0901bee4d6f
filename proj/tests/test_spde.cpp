#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wfdual/spde.hpp"

using namespace wfdual;
using Catch::Approx;

namespace {

// heat semigroup of (1/2) Laplacian applied to a + b exp(-x^2)
double heat_bump(double a, double b, double T, double x) {
  const double s = 1.0 + 2.0 * T;
  return a + b * std::exp(-x * x / s) / std::sqrt(s);
}

const Domain kSmall{4.0, 1.0 / 16};
constexpr double kSmallDt = 1.0 / 1024;

}  // namespace

TEST_CASE("domain mesh") {
  CHECK(Domain{}.cells() == 512);
  CHECK(Domain{}.x(0) == -8.0);
  CHECK(Domain{}.x(512) == 8.0);
  CHECK_THROWS(Domain{1.0, 0.3}.cells());
  CHECK_THROWS(Domain{1.0, 0.0}.cells());
}

TEST_CASE("CFL condition is enforced") {
  auto s = discretize(InitialCondition::constant(0.5), kSmall);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(step_field(s, FieldDrift{DriftSpec({0.0}, 0.0)}, 0.5 * kSmall.dx * kSmall.dx * 1.01, rng),
                  std::invalid_argument);
  CHECK_NOTHROW(step_field(s, FieldDrift{DriftSpec({0.0}, 0.0)}, 0.5 * kSmall.dx * kSmall.dx, rng));
}

TEST_CASE("absorbing states are exact fixed points") {
  const FieldDrift atom{DriftSpec({0.0, -1.0}, 0.7)};
  const FieldDrift balanced{DriftSpec({10.0, -9.0, -1.0}, 0.0)};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto zero = simulate_field(InitialCondition::zero(), atom, kSmall, 0.5, kSmallDt, seed);
    for (double v : zero.terminal.values) REQUIRE(v == 0.0);
    const auto one = simulate_field(InitialCondition::one(), balanced, kSmall, 0.5, kSmallDt, seed);
    for (double v : one.terminal.values) REQUIRE(v == 1.0);
  }
}

TEST_CASE("property: values stay in [0,1] for arbitrary drifts") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    const DriftSpec spec({std::abs(u(gen)), u(gen), u(gen), u(gen)}, u(gen));
    auto state = discretize(InitialCondition::gaussian_bump(0.2, 0.6), kSmall);
    std::mt19937_64 rng(i);
    std::vector<double> scratch;
    for (int k = 0; k < 200; ++k) {
      step_field(state, FieldDrift{spec}, kSmallDt, rng, scratch);
      for (double v : state.values) REQUIRE((v >= 0.0 && v <= 1.0));
    }
  }
}

TEST_CASE("T = 0 returns the discretized initial condition") {
  const auto f = InitialCondition::gaussian_bump(0.3, 0.4);
  const auto run = simulate_field(f, FieldDrift{DriftSpec({0.0}, 0.0)}, kSmall, 0.0, kSmallDt, 9);
  for (std::size_t j = 0; j < run.terminal.values.size(); ++j) CHECK(run.terminal.values[j] == f(kSmall.x(j)));
}

TEST_CASE("determinism and snapshots") {
  const auto f = InitialCondition::gaussian_bump(0.3, 0.4);
  const FieldDrift d{DriftSpec({0.5, -1.0}, 0.0)};
  const std::vector<double> snaps = {0.0, 0.125, 0.25};
  const auto a = simulate_field(f, d, kSmall, 0.25, kSmallDt, 77, snaps);
  const auto b = simulate_field(f, d, kSmall, 0.25, kSmallDt, 77, snaps);
  const auto c = simulate_field(f, d, kSmall, 0.25, kSmallDt, 78, snaps);
  CHECK(a.terminal.values == b.terminal.values);
  CHECK(a.terminal.values != c.terminal.values);
  REQUIRE(a.snapshots.size() == 3);
  CHECK(a.snapshots[0].t == 0.0);
  CHECK(a.snapshots[1].t == Approx(0.125));
  CHECK(a.snapshots[2].values == a.terminal.values);
}

TEST_CASE("approximating family replaces the atom by a power") {
  const DriftSpec spec({0.0, -1.0}, 1.0);
  const auto approx = approximating_drift(spec, 4);
  CHECK(approx.b_inf() == 0.0);
  CHECK(approx.coeff(4) == 1.0);
  CHECK(eval_drift(approx, 1.0) == 0.0);
  CHECK(eval_drift(approx, 0.5) == Approx(-0.5 + 0.0625));
  const auto run = simulate_field(InitialCondition::constant(0.9), FieldDrift{approx}, kSmall, 0.1, kSmallDt, 5);
  for (double v : run.terminal.values) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("interpolation between nodes") {
  FieldState s{kSmall, std::vector<double>(kSmall.cells() + 1, 0.0), 0.0};
  for (std::size_t j = 0; j < s.values.size(); ++j) s.values[j] = 0.5 + 0.1 * kSmall.x(j);
  CHECK(s.at(0.03) == Approx(0.503));
  CHECK(s.at(-4.0) == Approx(0.1));
  CHECK_THROWS(s.at(4.5));
}

TEST_CASE("probe safety rule") {
  const std::vector<double> ok = {0.0, 0.5};
  CHECK(probe_points_safe(ok, 8.0, 0.25));
  CHECK_FALSE(probe_points_safe(ok, 4.0, 0.25));
  CHECK_THROWS(estimate_lhs(InitialCondition::one(), FieldDrift{DriftSpec({0.0}, 0.0)}, ok, 0.25, 10, 1,
                            FieldConfig{kSmall, kSmallDt, 1}));
  const std::vector<double> none;
  CHECK_THROWS(estimate_lhs(InitialCondition::one(), FieldDrift{DriftSpec({0.0}, 0.0)}, none, 0.1, 1, 1,
                            FieldConfig{kSmall, kSmallDt, 1}));
}

TEST_CASE("estimate_lhs: constant field") {
  const std::vector<double> pts = {0.0, 0.3, -0.2};
  const auto e = estimate_lhs(InitialCondition::one(), FieldDrift{DriftSpec({10.0, -9.0, -1.0}, 0.0)}, pts, 0.1, 20,
                              3, FieldConfig{kSmall, kSmallDt, 1});
  CHECK(e.mean == 1.0);
  CHECK(e.std_error == 0.0);
  CHECK(e.reps == 20);
  const std::vector<double> none;
  const auto empty = estimate_lhs(InitialCondition::constant(0.2), FieldDrift{DriftSpec({0.0}, 0.0)}, none, 0.1, 5,
                                  3, FieldConfig{kSmall, kSmallDt, 1});
  CHECK(empty.mean == 1.0);
}

TEST_CASE("zero drift preserves a constant mean") {
  const std::vector<double> pts = {0.0};
  const auto e = estimate_lhs(InitialCondition::constant(0.5), FieldDrift{DriftSpec({0.0}, 0.0)}, pts, 0.0625, 2000,
                              21, FieldConfig{kSmall, kSmallDt, 0});
  CHECK(std::abs(e.mean - 0.5) < 3 * e.std_error);
}

TEST_CASE("zero drift mean matches the heat-kernel convolution") {
  const FieldConfig cfg{Domain{8.0, 1.0 / 16}, 1.0 / 1024, 0};
  for (double x : {0.0, 0.7}) {
    const std::vector<double> pts = {x};
    const auto e = estimate_lhs(InitialCondition::gaussian_bump(0.3, 0.4), FieldDrift{DriftSpec({0.0}, 0.0)}, pts,
                                0.25, 1500, 31, cfg);
    INFO("x=" << x << " mean=" << e.mean << " se=" << e.std_error);
    CHECK(std::abs(e.mean - heat_bump(0.3, 0.4, 0.25, x)) < 3 * e.std_error);
  }
}

TEST_CASE("second moment dominates the squared mean") {
  const FieldConfig cfg{kSmall, kSmallDt, 0};
  const std::vector<double> one = {0.0}, two = {0.0, 0.0};
  const auto f = InitialCondition::gaussian_bump(0.2, 0.5);
  const FieldDrift d{DriftSpec({0.0}, 0.0)};
  const auto m1 = estimate_lhs(f, d, one, 0.0625, 800, 8, cfg);
  const auto m2 = estimate_lhs(f, d, two, 0.0625, 800, 8, cfg);
  CHECK(m2.mean >= m1.mean * m1.mean - 3 * m2.std_error);
}

TEST_CASE("zero drift conserves the spatial average") {
  // trapezoid weights: the ghost-node Laplacian conserves this sum exactly
  const auto f = InitialCondition::gaussian_bump(0.2, 0.5);
  auto average = [](const FieldState& s) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s.values.size(); ++j)
      sum += (j == 0 || j + 1 == s.values.size() ? 0.5 : 1.0) * s.values[j];
    return sum / static_cast<double>(s.values.size() - 1);
  };
  const double start = average(discretize(f, kSmall));
  Accumulator acc;
  for (std::uint64_t r = 0; r < 400; ++r)
    acc.add(average(simulate_field(f, FieldDrift{DriftSpec({0.0}, 0.0)}, kSmall, 0.125, kSmallDt, r).terminal));
  CHECK(std::abs(acc.mean() - start) < 3 * acc.stderr_of_mean());
}

TEST_CASE("thread count does not change estimates") {
  const std::vector<double> pts = {0.0, 0.5};
  const auto f = InitialCondition::gaussian_bump(0.3, 0.4);
  const FieldDrift d{DriftSpec({0.5, -1.0}, 0.0)};
  const auto a = estimate_lhs(f, d, pts, 0.0625, 16, 99, FieldConfig{kSmall, kSmallDt, 1});
  const auto b = estimate_lhs(f, d, pts, 0.0625, 16, 99, FieldConfig{kSmall, kSmallDt, 3});
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
}
