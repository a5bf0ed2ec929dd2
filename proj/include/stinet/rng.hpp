#pragma once

#include <cmath>
#include <cstdint>

namespace stinet {

// Deterministic counter-free RNG built on splitmix64. Unlike the std
// distributions, the exact output sequence is the same on every platform,
// which keeps seeded runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return n ? next_u64() % n : 0; }

  // Standard normal via Box-Muller (one value per call, second discarded so
  // the stream stays stateless and easy to reason about).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derive an independent stream; used to give each component its own seed.
  Rng fork(uint64_t stream) {
    uint64_t z = state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    z = (z ^ (z >> 29)) * 0xFF51AFD7ED558CCDULL;
    return Rng(z ^ (z >> 32));
  }

 private:
  uint64_t state_;
};

}  // namespace stinet
