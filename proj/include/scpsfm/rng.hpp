#pragma once

#include <cmath>
#include <cstdint>

namespace scpsfm {

/// SplitMix64: portable, seedable, bit-identical across platforms.
/// std:: distributions are implementation-defined, so uniforms and gaussians
/// are derived here by hand (Box-Muller).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller (one value per call; cache holds the pair).
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  /// Derive an independent stream for a named purpose.
  static Rng stream(uint64_t seed, uint64_t purpose) {
    Rng mix(seed ^ (purpose * 0x9e3779b97f4a7c15ULL));
    return Rng(mix.next_u64());
  }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace scpsfm
