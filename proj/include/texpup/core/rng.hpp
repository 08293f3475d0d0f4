#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace texpup {

/// Deterministic random source. All sampling goes through this class so a
/// fixed seed reproduces every draw bit-for-bit, independent of the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : eng_(seed), seed_mix_(splitmix(seed ^ 0xa5a5a5a5a5a5a5a5ULL)) {}

  std::uint64_t raw() { return eng_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the distribution exactly uniform.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (unbuffered).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Independent substream, e.g. one per view during dataset generation.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t s = seed_mix_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(splitmix(s));
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  std::uint64_t seed_mix_ = 0;
};

}  // namespace texpup
