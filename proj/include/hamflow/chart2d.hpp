#pragma once

// Local straightening chart around a point where the direction condition
// holds. With direction xi and fiber direction zeta = (xi2, -xi1) (so that
// dH/dzeta = b . xi > 0), a point x = x0 + s xi + r zeta of the square
// U = (-eta, eta)^2 is sent to
//
//     Phi(x) = (s, H(x)).
//
// Along each fiber s = const the map r -> H is strictly increasing, so Phi is
// inverted by bisection. The Jacobian |D Phi| equals b . xi.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamflow/csv.hpp"
#include "hamflow/fields.hpp"
#include "hamflow/quadrature.hpp"

namespace hamflow {

/// Raised when the field is not monotone along a fiber of the chart, which
/// means the direction witness did not hold at sampling resolution.
class ChartError : public std::runtime_error {
 public:
  ChartError(const std::string& what, double fiber_level) : std::runtime_error(what), fiber_level_(fiber_level) {}
  double fiber_level() const { return fiber_level_; }

 private:
  double fiber_level_;
};

struct ChartOptions {
  std::size_t profile_samples{257};
  std::size_t fiber_checks{65};
  double fiber_tol{1e-12};
};

class Chart {
 public:
  Chart(ScalarField2D H, PlanarVectorField b, const Vec2& center, const Vec2& direction, double half_width,
        double alpha, const ChartOptions& opt)
      : H_(std::move(H)),
        b_(std::move(b)),
        center_(center),
        xi_(direction),
        zeta_{direction.y, -direction.x},
        eta_(half_width),
        alpha_(alpha),
        tol_(opt.fiber_tol) {}

  const Vec2& center() const { return center_; }
  const Vec2& direction() const { return xi_; }
  const Vec2& fiber_direction() const { return zeta_; }
  double half_width() const { return eta_; }
  double alpha() const { return alpha_; }
  const ScalarField2D& hamiltonian() const { return H_; }
  const PlanarVectorField& field() const { return b_; }

  Vec2 point(double s, double r) const { return center_ + s * xi_ + r * zeta_; }

  /// Frame coordinates (s, r) of x.
  Vec2 frame(const Vec2& x) const {
    const Vec2 d = x - center_;
    return {dot(d, xi_), dot(d, zeta_)};
  }

  bool in_domain(const Vec2& x) const {
    const Vec2 f = frame(x);
    return std::abs(f.x) < eta_ && std::abs(f.y) < eta_;
  }

  Vec2 forward(const Vec2& x) const { return {dot(x - center_, xi_), H_(x)}; }

  double lower_at(double y1) const { return H_(point(y1, -eta_)); }
  double upper_at(double y1) const { return H_(point(y1, eta_)); }

  /// Phi^{-1}(y), or nothing when y is not in the open image V.
  std::optional<Vec2> inverse(const Vec2& y) const {
    if (!(std::abs(y.x) < eta_)) return std::nullopt;
    const double lo = lower_at(y.x), hi = upper_at(y.x);
    if (!(y.y > lo && y.y < hi)) return std::nullopt;
    return point(y.x, fiber_coordinate(y));
  }

  /// Like inverse() but clamps y2 onto [lower, upper]; used at fiber endpoints.
  Vec2 inverse_clamped(const Vec2& y) const {
    const double s = std::clamp(y.x, -eta_, eta_);
    const double lo = lower_at(s), hi = upper_at(s);
    if (y.y <= lo) return point(s, -eta_);
    if (y.y >= hi) return point(s, eta_);
    return point(s, fiber_coordinate({s, y.y}));
  }

  /// J = (b . xi) o Phi^{-1}, the Jacobian of the chart read on the image.
  double jacobian(const Vec2& y) const { return dot(b_(inverse_clamped(y)), xi_); }

  /// Conservative membership of V from the sampled boundary profiles: the
  /// profiles are shrunk inward by one interpolation cell of slack.
  bool in_image(const Vec2& y) const {
    if (profile_y1_.size() < 2) return false;
    const double cell = profile_y1_[1] - profile_y1_[0];
    if (!(y.x > -eta_ + cell && y.x < eta_ - cell)) return false;
    const auto k = static_cast<std::size_t>((y.x + eta_) / cell);
    const std::size_t i = std::min(k, profile_y1_.size() - 2);
    const double lo = std::max(lower_[i], lower_[i + 1]);
    const double hi = std::min(upper_[i], upper_[i + 1]);
    const double slack_lo = std::abs(lower_[i + 1] - lower_[i]);
    const double slack_hi = std::abs(upper_[i + 1] - upper_[i]);
    return y.y > lo + slack_lo && y.y < hi - slack_hi;
  }

  const std::vector<double>& profile_y1() const { return profile_y1_; }
  const std::vector<double>& lower_profile() const { return lower_; }
  const std::vector<double>& upper_profile() const { return upper_; }
  double min_jacobian() const { return min_jacobian_; }

  csv::Table dump() const {
    csv::Table t{{"y1", "lower", "upper"}, {}};
    for (std::size_t i = 0; i < profile_y1_.size(); ++i) t.rows.push_back({profile_y1_[i], lower_[i], upper_[i]});
    return t;
  }

 private:
  friend Chart build_chart(const ScalarField2D&, const PlanarVectorField&, const Vec2&, const PxWitness&, double,
                           const ChartOptions&);

  double fiber_coordinate(const Vec2& y) const {
    const double s = y.x;
    return quad::bisect([&](double r) { return H_(point(s, r)) - y.y; }, -eta_, eta_, tol_);
  }

  ScalarField2D H_;
  PlanarVectorField b_;
  Vec2 center_, xi_, zeta_;
  double eta_, alpha_, tol_;
  double min_jacobian_{0.0};
  std::vector<double> profile_y1_, lower_, upper_;
};

/// Builds and verifies the chart on the square of half-width eta around x0.
/// Throws ChartError if H is not strictly increasing along some sampled fiber,
/// if the profile gap drops below 2 eta alpha, or if b . xi < alpha somewhere.
inline Chart build_chart(const ScalarField2D& H, const PlanarVectorField& b, const Vec2& x0,
                         const PxWitness& witness, double eta, const ChartOptions& opt = {}) {
  if (!(eta > 0.0)) throw std::invalid_argument("build_chart: half-width must be positive");
  if (eta > witness.radius / std::sqrt(2.0) * (1.0 + 1e-12))
    throw std::invalid_argument("build_chart: square does not fit in the witness ball");
  Chart c(H, b, x0, witness.direction, eta, witness.alpha, opt);

  const std::size_t n = std::max<std::size_t>(opt.profile_samples, 3);
  const std::size_t m = std::max<std::size_t>(opt.fiber_checks, 3);
  const double rel = 1e-9;
  double min_j = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -eta + 2.0 * eta * static_cast<double>(i) / static_cast<double>(n - 1);
    const double lo = c.lower_at(s), hi = c.upper_at(s);
    if (!(hi - lo >= 2.0 * eta * witness.alpha * (1.0 - rel)))
      throw ChartError("build_chart: profile gap below 2*eta*alpha on fiber y1=" + std::to_string(s), s);
    double prev = lo;
    for (std::size_t k = 1; k < m; ++k) {
      const double r = -eta + 2.0 * eta * static_cast<double>(k) / static_cast<double>(m - 1);
      const double v = H(c.point(s, r));
      if (!(v > prev)) throw ChartError("build_chart: H not increasing along fiber y1=" + std::to_string(s), s);
      prev = v;
      const double j = dot(b(c.point(s, r - eta / static_cast<double>(m - 1))), c.direction());
      min_j = std::min(min_j, j);
    }
    c.profile_y1_.push_back(s);
    c.lower_.push_back(lo);
    c.upper_.push_back(hi);
  }
  if (min_j < witness.alpha * (1.0 - 1e-6))
    throw ChartError("build_chart: b.xi fell below alpha inside the chart", 0.0);
  c.min_jacobian_ = min_j;
  return c;
}

/// Convenience overload deriving b from H.
inline Chart build_chart(const ScalarField2D& H, const Vec2& x0, const PxWitness& witness, double eta,
                         const ChartOptions& opt = {}) {
  return build_chart(H, derive_field(H), x0, witness, eta, opt);
}

/// Both sides of the change-of-variables identity
///     int_U f(Phi(x)) |D Phi(x)| dx = int_V f(y) dy
/// by tensor midpoint quadrature with n nodes per axis.
struct CovResult {
  double lhs{0.0};
  double rhs{0.0};
  double difference{0.0};
  double tolerance{0.0};  // Richardson-style estimate from the n/2 grid
  bool within_tolerance{true};
};

namespace detail {

template <class F>
std::pair<double, double> cov_sides(const Chart& c, F&& f, std::size_t n) {
  const double eta = c.half_width();
  const double h = 2.0 * eta / static_cast<double>(n);
  double lhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -eta + (static_cast<double>(i) + 0.5) * h;
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = -eta + (static_cast<double>(k) + 0.5) * h;
      const Vec2 x = c.point(s, r);
      row += f(c.forward(x)) * dot(c.field()(x), c.direction());
    }
    lhs += row;
  }
  lhs *= h * h;

  double rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y1 = -eta + (static_cast<double>(i) + 0.5) * h;
    const double lo = c.lower_at(y1), hi = c.upper_at(y1);
    const double hy = (hi - lo) / static_cast<double>(n);
    double col = 0.0;
    for (std::size_t k = 0; k < n; ++k) col += f(Vec2{y1, lo + (static_cast<double>(k) + 0.5) * hy});
    rhs += col * hy;
  }
  rhs *= h;
  return {lhs, rhs};
}

}  // namespace detail

template <class F>
CovResult cov_integral(const Chart& c, F&& f, std::size_t n = 64) {
  n = std::max<std::size_t>(n, 2);
  const auto [lhs, rhs] = detail::cov_sides(c, f, n);
  const auto [lhs2, rhs2] = detail::cov_sides(c, f, n / 2);
  CovResult r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.difference = std::abs(lhs - rhs);
  r.tolerance = 4.0 * (std::abs(lhs - lhs2) + std::abs(rhs - rhs2)) / 3.0 + 1e-12 * (1.0 + std::abs(lhs));
  r.within_tolerance = r.difference <= r.tolerance;
  return r;
}

/// One connected piece (a, b) of a fiber {y1 : (y1, level) in V}, with a
/// primitive F of 1/J tabulated on it (F(a) = 0).
class FiberReduction {
 public:
  FiberReduction(double level, double a, double b, quad::MonotoneHermite F)
      : level_(level), a_(a), b_(b), F_(std::move(F)) {}

  double level() const { return level_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double F(double y1) const { return F_(y1); }
  double F_inverse(double z) const { return F_.inverse(z); }
  double F_a() const { return F_.y_front(); }
  double F_b() const { return F_.y_back(); }
  bool contains(double y1) const { return y1 > a_ && y1 < b_; }

  csv::Table dump(std::size_t samples = 201) const {
    csv::Table t{{"x", "F"}, {}};
    for (std::size_t i = 0; i < samples; ++i) {
      const double x = a_ + (b_ - a_) * static_cast<double>(i) / static_cast<double>(samples - 1);
      t.rows.push_back({x, F(x)});
    }
    return t;
  }

 private:
  double level_, a_, b_;
  quad::MonotoneHermite F_;
};

struct FiberOptions {
  std::size_t knots{65};
  std::size_t scan{513};
  quad::RichardsonOptions quad{1e-14, 1e-12, 2, 1u << 12};
};

/// Tabulates F on a 1D fiber with generic J (used directly by tests that
/// exercise F without a chart).
template <class JFn>
FiberReduction tabulate_fiber(double level, double a, double b, JFn&& J, const FiberOptions& opt = {}) {
  const std::size_t n = std::max<std::size_t>(opt.knots, 2);
  std::vector<double> x(n), F(n), slope(n);
  auto inv = [&](double s) { return 1.0 / J(s); };
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    slope[k] = inv(x[k]);
  }
  x.back() = b;
  F[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const auto q = quad::integrate(inv, x[k - 1], x[k], opt.quad);
    F[k] = F[k - 1] + q.value;
  }
  return FiberReduction(level, a, b, quad::MonotoneHermite(std::move(x), std::move(F), slope));
}

/// All connected components of the fiber at `level`, each reduced.
inline std::vector<FiberReduction> reduce_fiber_all(const Chart& c, double level, const FiberOptions& opt = {}) {
  const double eta = c.half_width();
  auto inside = [&](double y1) { return level > c.lower_at(y1) && level < c.upper_at(y1); };
  const std::size_t n = std::max<std::size_t>(opt.scan, 3);
  std::vector<std::pair<double, double>> pieces;
  bool in = false;
  double start = -eta, prev = -eta;
  for (std::size_t i = 0; i < n; ++i) {
    const double y1 = -eta + 2.0 * eta * static_cast<double>(i) / static_cast<double>(n - 1);
    const bool now = inside(y1);
    if (now && !in) start = i == 0 ? -eta : quad::bisect_predicate(inside, prev, y1);
    if (!now && in) pieces.emplace_back(start, quad::bisect_predicate(inside, prev, y1));
    in = now;
    prev = y1;
  }
  if (in) pieces.emplace_back(start, eta);
  std::vector<FiberReduction> out;
  for (const auto& [a, b] : pieces) {
    if (!(b > a)) continue;
    out.push_back(tabulate_fiber(level, a, b, [&](double y1) { return c.jacobian({y1, level}); }, opt));
  }
  return out;
}

/// The fiber component at `level` containing `y1_hint` (or the first one).
inline FiberReduction reduce_fiber(const Chart& c, double level, std::optional<double> y1_hint = std::nullopt,
                                   const FiberOptions& opt = {}) {
  auto all = reduce_fiber_all(c, level, opt);
  if (all.empty()) throw std::domain_error("reduce_fiber: empty fiber at level " + std::to_string(level));
  if (y1_hint) {
    for (auto& r : all)
      if (*y1_hint >= r.a() && *y1_hint <= r.b()) return r;
  }
  return all.front();
}

/// Flow on a fiber: F^{-1}(F(x) + t), or nothing if it leaves the fiber.
inline std::optional<double> fiber_flow(const FiberReduction& red, double x, double t) {
  if (!red.contains(x)) return std::nullopt;
  if (t == 0.0) return x;
  const double z = red.F(x) + t;
  if (!(z > red.F_a() && z < red.F_b())) return std::nullopt;
  return red.F_inverse(z);
}

/// Thread-safe memo of fiber reductions keyed by the exact level bits.
class FiberCache {
 public:
  explicit FiberCache(Chart chart, FiberOptions opt = {}) : chart_(std::move(chart)), opt_(opt) {}

  std::shared_ptr<const std::vector<FiberReduction>> at(double level) const {
    std::uint64_t key;
    std::memcpy(&key, &level, sizeof key);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto v = std::make_shared<const std::vector<FiberReduction>>(reduce_fiber_all(chart_, level, opt_));
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(v)).first->second;
  }

  const Chart& chart() const { return chart_; }

 private:
  Chart chart_;
  FiberOptions opt_;
  mutable std::mutex mu_;
  mutable std::map<std::uint64_t, std::shared_ptr<const std::vector<FiberReduction>>> cache_;
};

}  // namespace hamflow
