#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace pfrlab {

// splitmix64, used both as a stream generator and as a seed mixer.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent child seed from a base seed and a list of salts.
// Stateless: the same inputs always yield the same child, which keeps
// training resumable without persisting generator state.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts) {
  std::uint64_t s = base;
  (void)splitmix64(s);
  for (std::uint64_t salt : salts) {
    s ^= salt + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    (void)splitmix64(s);
  }
  return splitmix64(s);
}

// xoshiro256** with splitmix64 seeding. Self-contained so streams are
// bit-identical across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bull) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
    has_gauss_ = false;
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
  // the small ranges used here, but we reject anyway to stay exact.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Marsaglia polar method.
  double normal01() {
    if (has_gauss_) {
      has_gauss_ = false;
      return gauss_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    gauss_ = v * m;
    has_gauss_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_[4] = {};
  bool has_gauss_ = false;
  double gauss_ = 0.0;
};

}  // namespace pfrlab
