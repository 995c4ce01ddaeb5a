#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rdm {

// Seeded random source. All randomness in the library flows through an
// explicit Rng so that a run is fully determined by its seed. The mapping
// from engine output to doubles/ints is done by hand rather than through
// std::*_distribution, whose algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  int uniform_int(int n) {
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    const std::uint64_t accept_below = UINT64_MAX / range * range;
    std::uint64_t v = engine_();
    while (v >= accept_below) v = engine_();
    return static_cast<int>(v % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard Gumbel(0, 1) draw.
  double gumbel() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(-std::log(u));
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rdm
