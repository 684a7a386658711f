#pragma once

// Seeded random draws shared by every identity check.

#include <cstdint>
#include <random>

namespace concircle {

inline constexpr std::uint64_t kDefaultSeed = 42;

class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed = kDefaultSeed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on [-2, -0.5] U [0.5, 2], the default range for jet components.
  double component() {
    const double magnitude = uniform(0.5, 2.0);
    return uniform() < 0.5 ? -magnitude : magnitude;
  }

 private:
  std::mt19937_64 engine_;
};

/// Zero test with cancellation awareness: |value| <= atol + rtol * scale,
/// where scale bounds the magnitude of the terms before they cancelled.
struct Tolerance {
  double atol = 1e-9;
  double rtol = 1e-7;

  bool accepts(double value, double scale) const noexcept;
  /// value / (atol + rtol * scale); <= 1 means accepted.
  double ratio(double value, double scale) const noexcept;
};

}  // namespace concircle
