#pragma once

#include <cstdint>

namespace specsim {

// splitmix64: cheap, seedable, and good enough for trial decorrelation.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed = 1) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, n)
  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  // [lo, hi] inclusive
  int64_t range(int64_t lo, int64_t hi) {
    return lo + int64_t(below(uint64_t(hi - lo + 1)));
  }

  bool chance_pct(uint32_t pct) { return below(100) < pct; }
};

// Derives an independent stream per (seed, salt) pair.
inline uint64_t substream(uint64_t seed, uint64_t salt) {
  Rng r(seed ^ (salt * 0x2545f4914f6cdd1dull + 0x9e3779b97f4a7c15ull));
  return r.next();
}

}  // namespace specsim
