#pragma once

#include <cmath>
#include <cstdint>

namespace hepato {

// Small deterministic generator (splitmix64). Used instead of <random>
// engines/distributions so that streams are identical across platforms
// and standard-library versions.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // standard normal via Box-Muller (one value per call; spare discarded
  // to keep the stream position independent of call parity)
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // derive an independent stream, e.g. one per z-slice
  static uint64_t derive(uint64_t seed, uint64_t salt) {
    Rng r(seed ^ (0x5851f42d4c957f2dULL * (salt + 1)));
    return r.next_u64();
  }
};

}  // namespace hepato
