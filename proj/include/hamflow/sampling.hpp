#pragma once

// Deterministic low-discrepancy point sets. Nothing here draws from a
// pseudorandom generator, so every consumer is bit-reproducible.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hamflow/geometry.hpp"

namespace hamflow::sampling {

/// Van der Corput radical inverse of `index` in `base`, in [0, 1).
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
  const double inv_base = 1.0 / base;
  double inv = inv_base;
  double result = 0.0;
  while (index > 0) {
    result += static_cast<double>(index % base) * inv;
    index /= base;
    inv *= inv_base;
  }
  return result;
}

/// Point `index` of the 2D Halton sequence (bases 2 and 3).
inline Vec2 halton2(std::uint64_t index) {
  return {radical_inverse(index, 2), radical_inverse(index, 3)};
}

/// Point `index` of the 3D Halton sequence (bases 2, 3 and 5).
struct Unit3 {
  double a, b, c;
};
inline Unit3 halton3(std::uint64_t index) {
  return {radical_inverse(index, 2), radical_inverse(index, 3), radical_inverse(index, 5)};
}

/// Point i of the Fibonacci lattice with n = F_k points and generator F_{k-1}.
/// Shifted by half a cell so no coordinate is exactly 0.
class FibonacciLattice {
 public:
  /// Smallest Fibonacci lattice with at least `min_points` points.
  explicit FibonacciLattice(std::uint64_t min_points) {
    std::uint64_t a = 1, b = 2;
    while (b < min_points) {
      const std::uint64_t c = a + b;
      a = b;
      b = c;
    }
    size_ = b;
    generator_ = a;
  }

  std::uint64_t size() const { return size_; }

  Vec2 operator[](std::uint64_t i) const {
    const double n = static_cast<double>(size_);
    const double u = (static_cast<double>(i) + 0.5) / n;
    const std::uint64_t k = (i * generator_) % size_;
    const double v = (static_cast<double>(k) + 0.5) / n;
    return {u, v};
  }

 private:
  std::uint64_t size_{1};
  std::uint64_t generator_{1};
};

/// `count` Halton points mapped onto the open disk B(center, radius).
/// Index 0 (the center) is skipped; area-uniform via the sqrt radius map.
inline std::vector<Vec2> disk_points(const Vec2& center, double radius, std::size_t count) {
  std::vector<Vec2> pts;
  pts.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    const Vec2 u = halton2(i);
    const double r = radius * std::sqrt(u.x);
    const double th = 2.0 * pi * u.y;
    pts.push_back({center.x + r * std::cos(th), center.y + r * std::sin(th)});
  }
  return pts;
}

/// `count` Halton points in the rectangle [lo, hi].
inline std::vector<Vec2> box_points(const Vec2& lo, const Vec2& hi, std::size_t count) {
  std::vector<Vec2> pts;
  pts.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    const Vec2 u = halton2(i);
    pts.push_back({lo.x + (hi.x - lo.x) * u.x, lo.y + (hi.y - lo.y) * u.y});
  }
  return pts;
}

}  // namespace hamflow::sampling
