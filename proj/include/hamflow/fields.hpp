#pragma once

// Hamiltonians (stream functions) and the divergence-free fields they generate.
//
// Sign convention: b = grad(H) rotated by +90 degrees, i.e.
//     b1 = -dH/dx2,   b2 = dH/dx1.
// Every module in this library relies on this orientation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hamflow/csv.hpp"
#include "hamflow/geometry.hpp"
#include "hamflow/sampling.hpp"

namespace hamflow {

enum class FieldKind { Analytic, GridBilinear };

class ScalarField2D {
 public:
  using Eval = std::function<double(const Vec2&)>;
  using Gradient = std::function<Vec2(const Vec2&)>;

  /// Closed-form field. `gradient` is optional; without it derivatives are
  /// taken by centered differences.
  static ScalarField2D analytic(Eval f, Window window = {}, Gradient gradient = {}) {
    ScalarField2D s;
    s.kind_ = FieldKind::Analytic;
    s.eval_ = std::move(f);
    s.gradient_ = std::move(gradient);
    s.window_ = window;
    return s;
  }

  /// Tensor grid, values[j * xs.size() + i] sampled at (xs[i], ys[j]).
  static ScalarField2D grid(std::vector<double> xs, std::vector<double> ys, std::vector<double> values) {
    if (xs.size() < 2 || ys.size() < 2 || values.size() != xs.size() * ys.size())
      throw ConfigError("grid field: need at least 2x2 nodes and nx*ny values");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw ConfigError("grid field: x nodes not increasing");
    for (std::size_t j = 1; j < ys.size(); ++j)
      if (!(ys[j] > ys[j - 1])) throw ConfigError("grid field: y nodes not increasing");
    ScalarField2D s;
    s.kind_ = FieldKind::GridBilinear;
    s.window_ = {xs.front(), xs.back(), ys.front(), ys.back()};
    auto data = std::make_shared<GridData>(GridData{std::move(xs), std::move(ys), std::move(values)});
    s.grid_ = data;
    s.eval_ = [data](const Vec2& p) { return data->bilinear(p); };
    return s;
  }

  /// Loads a grid field from CSV with header `x,y,value`. Every (x, y) pair of
  /// the tensor grid must appear exactly once; row order is free.
  static ScalarField2D from_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const std::size_t cx = t.column("x"), cy = t.column("y"), cv = t.column("value");
    std::map<double, std::size_t> xi, yi;
    for (const auto& r : t.rows) {
      xi.emplace(r[cx], 0);
      yi.emplace(r[cy], 0);
    }
    std::vector<double> xs, ys;
    for (auto& [k, v] : xi) { v = xs.size(); xs.push_back(k); }
    for (auto& [k, v] : yi) { v = ys.size(); ys.push_back(k); }
    if (t.rows.size() != xs.size() * ys.size()) throw ConfigError("grid field: " + path + " is not a full tensor grid");
    std::vector<double> values(xs.size() * ys.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : t.rows) {
      double& slot = values[yi[r[cy]] * xs.size() + xi[r[cx]]];
      if (!std::isnan(slot)) throw ConfigError("grid field: duplicate node in " + path);
      slot = r[cv];
    }
    return grid(std::move(xs), std::move(ys), std::move(values));
  }

  double operator()(const Vec2& p) const {
    if (!window_.contains(p))
      throw EvaluationError("scalar field evaluated outside its window at (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ")");
    return eval_(p);
  }

  FieldKind kind() const { return kind_; }
  const Window& window() const { return window_; }
  const Gradient& gradient() const { return gradient_; }

  /// Smallest node spacing per axis (grid kind only; 0 for analytic).
  Vec2 spacing() const {
    if (!grid_) return {0.0, 0.0};
    auto min_gap = [](const std::vector<double>& v) {
      double g = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < v.size(); ++i) g = std::min(g, v[i] - v[i - 1]);
      return g;
    };
    return {min_gap(grid_->xs), min_gap(grid_->ys)};
  }

 private:
  struct GridData {
    std::vector<double> xs, ys, values;

    static std::size_t cell(const std::vector<double>& g, double v) {
      auto it = std::upper_bound(g.begin(), g.end(), v);
      std::size_t k = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
      return std::min(k, g.size() - 2);
    }
    double bilinear(const Vec2& p) const {
      const std::size_t i = cell(xs, p.x), j = cell(ys, p.y);
      const double s = (p.x - xs[i]) / (xs[i + 1] - xs[i]);
      const double r = (p.y - ys[j]) / (ys[j + 1] - ys[j]);
      const std::size_t nx = xs.size();
      const double v00 = values[j * nx + i], v10 = values[j * nx + i + 1];
      const double v01 = values[(j + 1) * nx + i], v11 = values[(j + 1) * nx + i + 1];
      return (1 - s) * (1 - r) * v00 + s * (1 - r) * v10 + (1 - s) * r * v01 + s * r * v11;
    }
  };

  FieldKind kind_{FieldKind::Analytic};
  Eval eval_;
  Gradient gradient_;
  Window window_{};
  std::shared_ptr<const GridData> grid_;
};

class PlanarVectorField {
 public:
  using Eval = std::function<Vec2(const Vec2&)>;

  PlanarVectorField() = default;
  explicit PlanarVectorField(Eval eval, std::optional<ScalarField2D> source = std::nullopt)
      : eval_(std::move(eval)), source_(std::move(source)) {}

  Vec2 operator()(const Vec2& p) const { return eval_(p); }
  const std::optional<ScalarField2D>& source() const { return source_; }

 private:
  Eval eval_;
  std::optional<ScalarField2D> source_;
};

namespace detail {

/// Centered difference of H along `axis` (0 or 1) with step h, falling back to
/// a one-sided quotient when p +/- h leaves the window.
inline double partial(const ScalarField2D& H, const Vec2& p, int axis, double h) {
  const Vec2 e = axis == 0 ? Vec2{h, 0.0} : Vec2{0.0, h};
  const Window& w = H.window();
  const bool fwd = w.contains(p + e), bwd = w.contains(p - e);
  if (fwd && bwd) return (H(p + e) - H(p - e)) / (2.0 * h);
  if (fwd) return (H(p + e) - H(p)) / h;
  if (bwd) return (H(p) - H(p - e)) / h;
  throw EvaluationError("partial derivative: window narrower than the difference step");
}

}  // namespace detail

/// b = (-dH/dx2, dH/dx1). Uses the analytic gradient when H carries one,
/// centered differences otherwise (grid spacing for grid fields).
inline PlanarVectorField derive_field(const ScalarField2D& H) {
  if (H.gradient()) {
    auto g = H.gradient();
    Window w = H.window();
    return PlanarVectorField(
        [g, w](const Vec2& p) {
          if (!w.contains(p)) throw EvaluationError("vector field evaluated outside its window");
          return perp(g(p));
        },
        H);
  }
  if (H.kind() == FieldKind::GridBilinear) {
    const Vec2 h = H.spacing();
    return PlanarVectorField(
        [H, h](const Vec2& p) {
          return Vec2{-detail::partial(H, p, 1, h.y), detail::partial(H, p, 0, h.x)};
        },
        H);
  }
  return PlanarVectorField(
      [H](const Vec2& p) {
        const double step = 6e-6;
        const double hx = step * std::max(1.0, std::abs(p.x));
        const double hy = step * std::max(1.0, std::abs(p.y));
        return Vec2{-detail::partial(H, p, 1, hy), detail::partial(H, p, 0, hx)};
      },
      H);
}

/// Evidence for the local direction condition: b(y) . direction >= alpha on the
/// sampled points of B(center, radius).
struct PxWitness {
  Vec2 direction;
  double alpha{0.0};
  double radius{0.0};
};

/// Minimum of b . xi over `n_samples` Halton points of B(x, eps).
inline double sampled_min_along(const PlanarVectorField& b, const Vec2& x, double eps, const Vec2& xi,
                                std::size_t n_samples) {
  double m = std::numeric_limits<double>::infinity();
  for (const Vec2& y : sampling::disk_points(x, eps, n_samples)) m = std::min(m, dot(b(y), xi));
  return m;
}

/// Sampled test of the direction condition at x. Tries `n_dirs` equally spaced
/// unit directions and keeps the one whose sampled minimum of b . xi is largest.
/// This is a sufficient test at sampling resolution, not a certificate.
inline std::optional<PxWitness> check_px(const PlanarVectorField& b, const Vec2& x, double eps,
                                         std::size_t n_dirs = 64, std::size_t n_samples = 2048) {
  if (!(eps > 0.0)) throw std::invalid_argument("check_px: radius must be positive");
  if (n_dirs < 8) throw std::invalid_argument("check_px: need at least 8 directions");
  std::vector<Vec2> values;
  values.reserve(n_samples);
  for (const Vec2& y : sampling::disk_points(x, eps, n_samples)) values.push_back(b(y));

  double best = -std::numeric_limits<double>::infinity();
  Vec2 best_dir{};
  for (std::size_t k = 0; k < n_dirs; ++k) {
    const double th = 2.0 * pi * static_cast<double>(k) / static_cast<double>(n_dirs);
    // Snap the four axis directions so they are exact.
    Vec2 xi{std::cos(th), std::sin(th)};
    if (4 * k % n_dirs == 0) {
      const std::size_t q = 4 * k / n_dirs;
      xi = q == 0 ? Vec2{1, 0} : q == 1 ? Vec2{0, 1} : q == 2 ? Vec2{-1, 0} : Vec2{0, -1};
    }
    double m = std::numeric_limits<double>::infinity();
    for (const Vec2& v : values) {
      m = std::min(m, dot(v, xi));
      if (m <= best) break;
    }
    if (m > best) {
      best = m;
      best_dir = xi;
    }
  }
  if (!(best > 0.0)) return std::nullopt;
  return PxWitness{best_dir, best, eps};
}

enum class PointClass { P, O, Z };

inline const char* to_string(PointClass c) {
  switch (c) {
    case PointClass::P: return "P";
    case PointClass::O: return "O";
    case PointClass::Z: return "Z";
  }
  return "?";
}

struct PxParams {
  double radius{0.1};
  std::size_t n_dirs{64};
  std::size_t n_samples{2048};
  double vanish_threshold{0.0};  // O when max |b| on the ball is <= this
};

/// O if b (sampled) vanishes on the ball, P if a direction witness exists, Z otherwise.
inline PointClass classify_point(const PlanarVectorField& b, const Vec2& x, const PxParams& params) {
  double max_norm = 0.0;
  for (const Vec2& y : sampling::disk_points(x, params.radius, params.n_samples))
    max_norm = std::max(max_norm, norm(b(y)));
  if (max_norm <= params.vanish_threshold) return PointClass::O;
  if (check_px(b, x, params.radius, params.n_dirs, params.n_samples)) return PointClass::P;
  return PointClass::Z;
}

}  // namespace hamflow
