#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace capvo {

// Deterministic random source. std::mt19937_64 is bit-specified by the
// standard; the float conversions below are done by hand because the
// stdlib *distributions* are not, and reproducible streams matter here
// (dataset generation, dropout masks, weight init).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Box-Muller; one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Independent child stream; splitmix64 of (state-seed, stream id) so
  // forks never overlap the parent sequence.
  Rng fork(std::uint64_t stream) {
    const std::uint64_t base = eng_();
    return Rng(splitmix64(base ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Hash a few integers into a seed (per-pixel / per-frame / per-layer streams).
inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  std::uint64_t h = Rng::splitmix64(a);
  h = Rng::splitmix64(h ^ (b + 0x9e3779b97f4a7c15ULL));
  h = Rng::splitmix64(h ^ (c + 0x85ebca6b0f6bcd1fULL));
  return h;
}

}  // namespace capvo
