// Fine-grid occupation-time estimate of E L_dt for the difference of two
// Brownian motions started together (variance rate 2):
//   L ~ (1/2h) int_0^dt 1{|D_s| < h} d<D>_s,  dt_fine = 1e-6, h = 1e-3.
// Run once; the printed mean and stderr are frozen into the tests.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "wfdual/stats.hpp"

int main(int argc, char** argv) {
  const double dt = 0.01;
  const double dt_fine = 1e-6;
  const double h = 1e-3;
  const double v = 2.0;
  const std::size_t reps = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
  const auto steps = static_cast<std::size_t>(std::llround(dt / dt_fine));

  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal(0.0, std::sqrt(v * dt_fine));
  wfdual::Accumulator acc;
  for (std::size_t r = 0; r < reps; ++r) {
    double d = 0.0;
    std::size_t inside = 0;
    for (std::size_t k = 0; k < steps; ++k) {
      // left-point rule
      if (std::abs(d) < h) ++inside;
      d += normal(rng);
    }
    acc.add(static_cast<double>(inside) * v * dt_fine / (2.0 * h));
  }
  std::printf("reps %zu mean %.6f stderr %.6f  (2 sqrt(dt/pi) = %.6f)\n", acc.count(), acc.mean(),
              acc.stderr_of_mean(), 2.0 * std::sqrt(dt / M_PI));
}
