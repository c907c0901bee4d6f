#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "wfdual/diagnostics.hpp"

using namespace wfdual;
using Catch::Approx;

TEST_CASE("branching identity: no branching gives exact zeros") {
  const auto r = check_branching_identity(DriftSpec({0.0, -1.0}, 0.0), {0.0, 0.5}, {}, 0.5, 50, 1);
  CHECK(r.branches.mean == 0.0);
  CHECK(r.compensator.mean == 0.0);
  CHECK(r.z == 0.0);
  CHECK(r.pass);
}

TEST_CASE("branching identity holds for mixed offspring") {
  const auto r = check_branching_identity(DriftSpec({0.3, -1.0, 0.4, 0.3}, 0.0), {0.0, 0.0, 0.2}, {}, 0.5, 4000, 2);
  INFO(r.branches.mean << " vs " << r.compensator.mean << " z=" << r.z);
  CHECK(r.pass);
}

TEST_CASE("branching identity under atom truncation") {
  const auto r = check_branching_identity(DriftSpec({0.0, -1.0}, 1.0), {0.0}, {0, 4}, 0.3, 4000, 3);
  CHECK(r.pass);
  CHECK_THROWS(check_branching_identity(DriftSpec({0.0, -1.0}, 1.0), {0.0}, {}, 0.3, 10, 3));
}

TEST_CASE("short horizon: branch count is about mu n T") {
  // coalescence and offspring barely change |I| over T = 0.01
  const auto r = check_branching_identity(DriftSpec({0.0, -2.0, 2.0}, 0.0), {-1.0, 0.0, 1.0}, {}, 0.01, 20000, 4);
  CHECK(std::abs(r.branches.mean - 2.0 * 3 * 0.01) < 3 * r.branches.std_error + 0.002);
  CHECK(r.compensator.mean == Approx(0.06).epsilon(0.05));
}

TEST_CASE("supermartingale: t = 0 is exactly R^n") {
  const DriftSpec spec({10.0, -9.0, -1.0}, 0.0);
  const auto r = check_supermartingale(spec, 2.0, {0.0, 0.5}, {0.0, 0.05}, 200, 5);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.bound == 4.0);
  CHECK(r.rows[0].z.mean == 4.0);
  CHECK(r.rows[0].z.std_error == 0.0);
  CHECK(r.rows[0].bound_ok);
}

TEST_CASE("supermartingale at R = 1 is e^K, never above 1") {
  const auto spec = binomial_coeffs(0.5, 8);
  const auto r = check_supermartingale(spec, 1.0, {0.0, 0.3}, {0.1, 0.3}, 500, 6);
  for (const auto& row : r.rows) CHECK(row.z.mean <= 1.0);
  CHECK(r.pass);
  CHECK(r.step_z.size() == 1);
}

TEST_CASE("supermartingale argument checks") {
  CHECK_THROWS(check_supermartingale(DriftSpec({10.0, -9.0, -1.0}, 0.0), 1.0, {0.0}, {0.1}, 10, 1));
  CHECK_THROWS(check_supermartingale(DriftSpec({0.0, -1.0}, 0.5), 1.0, {0.0}, {0.1}, 10, 1));
  CHECK_THROWS(check_supermartingale(DriftSpec({10.0, -9.0, -1.0}, 0.0), 2.0, {0.0}, {}, 10, 1));
  CHECK_THROWS(check_supermartingale(DriftSpec({10.0, -9.0, -1.0}, 0.0), 2.0, {0.0}, {-0.1}, 10, 1));
}

TEST_CASE("coming down: one particle is exponential survival") {
  const auto r = check_coming_down(1.0, {1}, 0.0, {0.5}, 20000, 7, ParticleRunConfig{1e-2});
  REQUIRE(r.rows.size() == 1);
  CHECK(std::abs(r.rows[0].population.mean - std::exp(-0.5)) < 3 * r.rows[0].population.std_error);
}

TEST_CASE("coming down: the system dies out and rows are l-major") {
  const auto r = check_coming_down(2.0, {4, 8}, 0.0, {0.01, 5.0}, 200, 8);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].l == 4);
  CHECK(r.rows[1].t == 5.0);
  CHECK(r.rows[2].l == 8);
  CHECK(r.rows[3].population.mean < 0.05);
  CHECK(r.stabilization_z.size() == 2);
  CHECK(r.rows[2].population.mean >= r.rows[0].population.mean);
  CHECK_THROWS(check_coming_down(0.0, {4}, 0.0, {0.1}, 10, 1));
  CHECK_THROWS(check_coming_down(1.0, {4}, 0.0, {0.0}, 10, 1));
}

TEST_CASE("coming down: too few replicas cannot pass") {
  const auto r = check_coming_down(1.0, {2, 4}, 0.0, {0.1, 0.2}, 20, 9);
  CHECK_FALSE(r.stabilized);
  CHECK_FALSE(r.pass);
}

TEST_CASE("reflection: delta = 0 leaves about m particles") {
  // the run ends with the step holding tau_1, so up to one step of
  // coalescence among m coinciding children: C(m,2) * E[L]/2, E[L] = sqrt(pi dt)
  const double dt = 1e-4;
  const auto r = check_reflection(DriftSpec({0.0, -1.0}, 1.0), {4, 8}, 0.0, 200, 10, ParticleRunConfig{dt});
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].m == 4);
  CHECK(r.rows[0].excluded == 0);
  for (const auto& row : r.rows) {
    const double loss = 0.5 * row.m * (row.m - 1) / 2.0 * std::sqrt(std::numbers::pi * dt);
    CHECK(row.population.mean <= row.m);
    CHECK(row.population.mean >= row.m - 1.5 * loss - 3 * row.population.std_error);
  }
}

TEST_CASE("reflection: short horizons exclude replicas") {
  const auto r = check_reflection(DriftSpec({0.0, -1.0}, 1.0), {4}, 0.05, 400, 11, ParticleRunConfig{}, {0.0}, 0.5);
  // rate-1 clock: P(tau_1 + delta > 0.5) = exp(-0.45)
  const double p = std::exp(-0.45);
  const double se = std::sqrt(p * (1 - p) / 400);
  CHECK(std::abs(r.rows[0].excluded / 400.0 - p) < 4 * se);
  CHECK(r.rows[0].population.reps + r.rows[0].excluded == 400);
  CHECK_THROWS(check_reflection(DriftSpec({0.0, -1.0}, 0.0), {4}, 0.05, 10, 1));
}
