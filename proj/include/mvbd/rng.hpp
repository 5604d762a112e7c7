#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mvbd {

/// SplitMix64 finalizer; derives independent stream seeds from a master
/// seed so that replica r always sees the same stream regardless of which
/// worker runs it.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t salt = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(salt)) + stream);
}

/// 64-bit Mersenne Twister with hand-rolled variate transforms, so draws are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1).
  double uniform() {
    for (;;) {
      double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw exactly uniform
    const std::uint64_t limit = (0 - n) % n;
    for (;;) {
      std::uint64_t x = engine_();
      if (x >= limit) return x % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvbd
