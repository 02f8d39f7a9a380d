#pragma once

// Named fields, potentials and initial data, selected by name + parameters.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hamflow/counterexample.hpp"
#include "hamflow/energy1d.hpp"
#include "hamflow/fields.hpp"
#include "hamflow/geometry.hpp"

namespace hamflow::scenarios {

inline double param(const std::vector<double>& p, std::size_t i, double fallback) {
  return i < p.size() ? p[i] : fallback;
}

/// linear [c1, c2]: H = c1 x1 + c2 x2 (default x2)
/// shear [a]:       H = x2 + a x1^2 (default a = 1)
/// quadratic:       H = (x1^2 + x2^2) / 2, b is the rotation (-x2, x1)
/// counterexample:  the piecewise Hamiltonian with a singular field at the origin
inline ScalarField2D field(const std::string& name, const std::vector<double>& p = {}, Window w = {}) {
  if (name == "linear") {
    const double c1 = param(p, 0, 0.0), c2 = param(p, 1, 1.0);
    return ScalarField2D::analytic([c1, c2](const Vec2& x) { return c1 * x.x + c2 * x.y; }, w,
                                   [c1, c2](const Vec2&) { return Vec2{c1, c2}; });
  }
  if (name == "shear") {
    const double a = param(p, 0, 1.0);
    return ScalarField2D::analytic([a](const Vec2& x) { return x.y + a * x.x * x.x; }, w,
                                   [a](const Vec2& x) { return Vec2{2.0 * a * x.x, 1.0}; });
  }
  if (name == "quadratic") {
    return ScalarField2D::analytic([](const Vec2& x) { return 0.5 * (x.x * x.x + x.y * x.y); }, w,
                                   [](const Vec2& x) { return x; });
  }
  if (name == "counterexample") return counterexample::hamiltonian_field(w);
  throw ConfigError("unknown field '" + name + "'");
}

/// The field of a named Hamiltonian; the counterexample uses its closed form.
inline PlanarVectorField vector_field(const std::string& name, const ScalarField2D& H, Window w = {}) {
  if (name == "counterexample") return counterexample::vector_field(w);
  return derive_field(H);
}

/// harmonic [k]: k x^2 / 2     abs: |x|     free: 0
/// double_well: (x^2 - 1)^2    quartic_negative: -x^4 (fails the growth condition)
inline Potential1D potential(const std::string& name, const std::vector<double>& p, Interval window) {
  if (name == "harmonic") {
    const double k = param(p, 0, 1.0);
    return Potential1D::analytic([k](double x) { return 0.5 * k * x * x; }, window, [k](double x) { return k * x; });
  }
  if (name == "abs") return Potential1D::analytic([](double x) { return std::abs(x); }, window);
  if (name == "free") return Potential1D::analytic([](double) { return 0.0; }, window, [](double) { return 0.0; });
  if (name == "double_well")
    return Potential1D::analytic([](double x) { return (x * x - 1.0) * (x * x - 1.0); }, window,
                                 [](double x) { return 4.0 * x * (x * x - 1.0); });
  if (name == "quartic_negative")
    return Potential1D::analytic([](double x) { return -x * x * x * x; }, window,
                                 [](double x) { return -4.0 * x * x * x; });
  throw ConfigError("unknown potential '" + name + "'");
}

using Datum = std::function<double(const Vec2&)>;

/// const [c] | x1 | x2 | x1_box (x1 on [-1,1]^2, 0 outside) | sin [a] (sin(a x1) + x2)
/// | gauss [c1, c2, s] (exp(-|x - c|^2 / s^2))
inline Datum datum(const std::string& name, const std::vector<double>& p = {}) {
  if (name == "const") {
    const double c = param(p, 0, 1.0);
    return [c](const Vec2&) { return c; };
  }
  if (name == "x1") return [](const Vec2& x) { return x.x; };
  if (name == "x2") return [](const Vec2& x) { return x.y; };
  if (name == "x1_box") return [](const Vec2& x) { return (std::abs(x.x) <= 1.0 && std::abs(x.y) <= 1.0) ? x.x : 0.0; };
  if (name == "sin") {
    const double a = param(p, 0, 3.0);
    return [a](const Vec2& x) { return std::sin(a * x.x) + x.y; };
  }
  if (name == "gauss") {
    const Vec2 c{param(p, 0, 0.0), param(p, 1, 0.0)};
    const double s = param(p, 2, 0.5);
    return [c, s](const Vec2& x) {
      const Vec2 d = x - c;
      return std::exp(-dot(d, d) / (s * s));
    };
  }
  throw ConfigError("unknown datum '" + name + "'");
}

}  // namespace hamflow::scenarios
