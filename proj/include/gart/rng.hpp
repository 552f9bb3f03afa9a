#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gart/error.hpp"

namespace gart {

// Deterministic splittable generator (SplitMix64 core). All derived draws are
// built from integer arithmetic and libm calls only, so sequences are
// identical across platforms for a given seed. std::random distributions are
// avoided on purpose: their outputs are not specified bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Child generator whose stream is independent of subsequent draws here.
  Rng split() {
    uint64_t s = next_u64();
    return Rng(s ^ 0x5851f42d4c957f2dull);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). Lemire-style multiply-shift with rejection.
  uint64_t randint(uint64_t n) {
    contract_check(n > 0, "Rng::randint: n must be positive");
    uint64_t x = next_u64();
    __uint128_t m = (__uint128_t)x * (__uint128_t)n;
    uint64_t l = (uint64_t)m;
    if (l < n) {
      uint64_t t = (0 - n) % n;
      while (l < t) {
        x = next_u64();
        m = (__uint128_t)x * (__uint128_t)n;
        l = (uint64_t)m;
      }
    }
    return (uint64_t)(m >> 64);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = (size_t)randint(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Permutation of [0, n): identity shuffled in place.
  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p((size_t)n);
    for (int64_t i = 0; i < n; ++i) p[(size_t)i] = i;
    shuffle(p);
    return p;
  }

  // Serializable state, used by cache snapshots to resume draw-for-draw.
  struct State {
    uint64_t state;
    uint64_t has_cached;
    double cached;
  };
  State save_state() const { return {state_, has_cached_ ? 1ull : 0ull, cached_}; }
  void restore_state(const State& s) {
    state_ = s.state;
    has_cached_ = s.has_cached != 0;
    cached_ = s.cached;
  }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gart
