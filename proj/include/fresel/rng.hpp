#pragma once

#include <cstdint>
#include <random>

namespace fresel {

// Standard normal quantile (Wichura's AS241, ~1e-15 absolute accuracy).
// Also used to evaluate simulated quantile responses on the level grid, so it
// lives here rather than in the sampler.
double norm_quantile(double p);

// Standard normal CDF via erfc.
double norm_cdf(double x);

// Deterministic draws on top of mt19937_64. Distribution transforms are done
// by hand (inverse CDF, Marsaglia-Tsang) instead of std::*_distribution so the
// streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1), safe to feed into inverse CDFs.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double normal() { return norm_quantile(uniform_open()); }

  // Gamma(shape, scale), shape > 0.
  double gamma(double shape, double scale);

  // Uniform integer in [0, n).
  int uniform_index(int n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace fresel
