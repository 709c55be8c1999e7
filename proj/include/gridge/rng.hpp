#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gridge {

/// Seeded random stream with fully specified output. The variate
/// transforms are implemented here (not via std::*_distribution, whose
/// output is implementation-defined) so that a seed reproduces the same
/// numbers on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1), 53 bits of randomness.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Unbiased integer in [0, n); Lemire's multiply-and-shift rejection.
  std::uint64_t integer_below(std::uint64_t n) {
    std::uint64_t x = engine_();
    __uint128_t product = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(product);
    if (low < n) {
      const std::uint64_t floor = (-n) % n;
      while (low < floor) {
        x = engine_();
        product = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gridge
