#pragma once

#include <cmath>
#include <cstdint>

namespace scare {

// SplitMix64. Used everywhere randomness is needed so that results are
// reproducible bit-for-bit across platforms (std::normal_distribution is
// implementation-defined, so we roll our own Gaussian).
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; one spare cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Deterministic seed derivation: one root seed per run, split per module /
// stream / index. Order-independent, so parallel Monte Carlo fan-out can be
// merged by index without races affecting the draws.
inline uint64_t split_seed(uint64_t root, uint64_t stream, uint64_t index = 0) {
  Rng mix(root ^ (0x9e3779b97f4a7c15ull * (stream + 1)) ^ (0xc2b2ae3d27d4eb4full * (index + 1)));
  return mix.next_u64();
}

} // namespace scare
