#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hamflow {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Rotation by +90 degrees: (a, b) -> (-b, a).
constexpr Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

/// Axis-aligned rectangle. The default window is the whole plane.
struct Window {
  double x_min{-std::numeric_limits<double>::infinity()};
  double x_max{std::numeric_limits<double>::infinity()};
  double y_min{-std::numeric_limits<double>::infinity()};
  double y_max{std::numeric_limits<double>::infinity()};

  constexpr bool contains(const Vec2& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

/// A closed interval of the real line; used for 1D windows.
struct Interval {
  double lo{0.0};
  double hi{0.0};

  constexpr double length() const { return hi - lo; }
  constexpr bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Field or potential evaluated where it is not defined.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or input file problems.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double pi = 3.14159265358979323846;

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace hamflow
