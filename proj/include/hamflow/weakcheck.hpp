#pragma once

// Weak-form residuals of transport solutions against smooth bump test
// functions, and the renormalization check over a family of beta.
//
//   R(u, phi) = | int_0^inf int u (d_t phi + b . grad phi) dx dt + int u0 phi(0, .) dx |

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamflow/fields.hpp"
#include "hamflow/geometry.hpp"
#include "hamflow/parallel.hpp"
#include "hamflow/transport.hpp"

namespace hamflow {

namespace bump {

/// exp(-1/(1 - s^2)) on (-1, 1), zero outside.
inline double value(double s) {
  if (!(std::abs(s) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

inline double derivative(double s) {
  if (!(std::abs(s) < 1.0)) return 0.0;
  const double q = 1.0 - s * s;
  return value(s) * (-2.0 * s / (q * q));
}

}  // namespace bump

enum class Profile { Tensor, Radial, Modulated };

inline const char* to_string(Profile p) {
  switch (p) {
    case Profile::Tensor: return "tensor";
    case Profile::Radial: return "radial";
    case Profile::Modulated: return "modulated";
  }
  return "?";
}

class TestFunction {
 public:
  TestFunction(double t0, const Vec2& x0, double rt, double rx, Profile profile = Profile::Tensor)
      : t0_(t0), x0_(x0), rt_(rt), rx_(rx), profile_(profile) {
    if (!(rt > 0.0 && rx > 0.0)) throw std::invalid_argument("test function radii must be positive");
  }

  double t0() const { return t0_; }
  const Vec2& x0() const { return x0_; }
  double rt() const { return rt_; }
  double rx() const { return rx_; }
  Profile profile() const { return profile_; }

  /// Support box [t_lo, t_hi] x [lo, hi]; t_lo may be negative.
  double t_lo() const { return t0_ - rt_; }
  double t_hi() const { return t0_ + rt_; }
  Vec2 lo() const { return {x0_.x - rx_, x0_.y - rx_}; }
  Vec2 hi() const { return {x0_.x + rx_, x0_.y + rx_}; }

  double operator()(double t, const Vec2& x) const { return time(t) * space(x); }
  double dt(double t, const Vec2& x) const { return bump::derivative((t - t0_) / rt_) / rt_ * space(x); }
  Vec2 grad(double t, const Vec2& x) const { return time(t) * space_grad(x); }

  std::string name() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s(t0=%g,x0=(%g,%g),rt=%g,rx=%g)", to_string(profile_), t0_, x0_.x, x0_.y, rt_,
                  rx_);
    return buf;
  }

 private:
  double time(double t) const { return bump::value((t - t0_) / rt_); }

  double space(const Vec2& x) const {
    const double s1 = (x.x - x0_.x) / rx_, s2 = (x.y - x0_.y) / rx_;
    switch (profile_) {
      case Profile::Tensor: return bump::value(s1) * bump::value(s2);
      case Profile::Radial: return bump::value(std::hypot(s1, s2));
      case Profile::Modulated: return bump::value(s1) * bump::value(s2) * (1.0 + s1);
    }
    return 0.0;
  }

  Vec2 space_grad(const Vec2& x) const {
    const double s1 = (x.x - x0_.x) / rx_, s2 = (x.y - x0_.y) / rx_;
    const double p1 = bump::value(s1), p2 = bump::value(s2);
    const double d1 = bump::derivative(s1), d2 = bump::derivative(s2);
    switch (profile_) {
      case Profile::Tensor: return Vec2{d1 * p2, p1 * d2} * (1.0 / rx_);
      case Profile::Radial: {
        const double r = std::hypot(s1, s2);
        if (r == 0.0) return {0.0, 0.0};
        const double d = bump::derivative(r) / (r * rx_);
        return {d * s1, d * s2};
      }
      case Profile::Modulated: {
        const double m = 1.0 + s1;
        return Vec2{d1 * p2 * m + p1 * p2, p1 * d2 * m} * (1.0 / rx_);
      }
    }
    return {0.0, 0.0};
  }

  double t0_;
  Vec2 x0_;
  double rt_, rx_;
  Profile profile_;
};

/// Centers x radii x profiles, all with the same time window.
inline std::vector<TestFunction> test_family(double t0, double rt, const std::vector<Vec2>& centers,
                                             const std::vector<double>& radii,
                                             const std::vector<Profile>& profiles = {Profile::Tensor, Profile::Radial,
                                                                                     Profile::Modulated}) {
  std::vector<TestFunction> out;
  for (const Vec2& c : centers)
    for (double r : radii)
      for (Profile p : profiles) out.emplace_back(t0, c, rt, r, p);
  return out;
}

struct WeakGrid {
  std::size_t n_t{16};
  std::size_t n_x{16};
  double exclusion{0.0};  // refuse supports meeting |x2| < exclusion
  unsigned threads{1};
  /// Polar midpoint grid around this point instead of the Cartesian one:
  /// n_x radial cells and 2 n_x angular cells, with cell edges on the rays at
  /// multiples of pi/4. Used when b or u jump across rays from a point.
  std::optional<Vec2> polar_center;
};

namespace detail {

struct SpaceNode {
  Vec2 x;
  double w;
};

inline std::vector<SpaceNode> space_nodes(const TestFunction& phi, const WeakGrid& g) {
  std::vector<SpaceNode> nodes;
  const Vec2 lo = phi.lo(), hi = phi.hi();
  const std::size_t n = g.n_x;
  if (!g.polar_center) {
    const double h1 = (hi.x - lo.x) / static_cast<double>(n), h2 = (hi.y - lo.y) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        nodes.push_back({{lo.x + (static_cast<double>(i) + 0.5) * h1, lo.y + (static_cast<double>(j) + 0.5) * h2},
                         h1 * h2});
    return nodes;
  }
  const Vec2 c = *g.polar_center;
  const double dx = std::max({0.0, lo.x - c.x, c.x - hi.x}), dy = std::max({0.0, lo.y - c.y, c.y - hi.y});
  const double r_lo = std::hypot(dx, dy);
  const double r_hi = std::hypot(std::max(std::abs(lo.x - c.x), std::abs(hi.x - c.x)),
                                 std::max(std::abs(lo.y - c.y), std::abs(hi.y - c.y)));
  const std::size_t m = 2 * std::max<std::size_t>(4, 4 * ((n + 3) / 4));
  const double hr = (r_hi - r_lo) / static_cast<double>(n), ha = 2.0 * pi / static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double a = (static_cast<double>(k) + 0.5) * ha;
    const Vec2 e{std::cos(a), std::sin(a)};
    for (std::size_t i = 0; i < n; ++i) {
      const double r = r_lo + (static_cast<double>(i) + 0.5) * hr;
      nodes.push_back({c + r * e, r * hr * ha});
    }
  }
  return nodes;
}

}  // namespace detail

/// Tensor midpoint quadrature of the weak form. In time the midpoint rule is
/// applied piecewise between the solution's break hints. Throws
/// EvaluationError when u is undefined at a node inside the support, or when
/// the support meets the exclusion band.
inline double weak_residual(const TransportSolution& u, const PlanarVectorField& b, const TestFunction& phi,
                            const WeakGrid& grid) {
  if (grid.exclusion > 0.0 && phi.lo().y < grid.exclusion && phi.hi().y > -grid.exclusion)
    throw EvaluationError("weak_residual: support of " + phi.name() + " meets the exclusion band |x2| < " +
                          std::to_string(grid.exclusion));
  const double ta = std::max(0.0, phi.t_lo()), tb = phi.t_hi();
  const std::size_t nt = grid.n_t;
  const auto nodes = detail::space_nodes(phi, grid);

  auto time_integral = [&](const Vec2& x, const Vec2& bx, double a, double c, std::size_t k) {
    const double h = (c - a) / static_cast<double>(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = a + (static_cast<double>(i) + 0.5) * h;
      const double w = phi.dt(t, x) + dot(bx, phi.grad(t, x));
      if (w == 0.0) continue;
      const auto v = u(t, x);
      if (!v) throw EvaluationError("weak_residual: solution undefined at t=" + std::to_string(t) + ", x=(" +
                                    std::to_string(x.x) + ", " + std::to_string(x.y) + ") inside " + phi.name());
      sum += *v * w;
    }
    return sum * h;
  };

  std::vector<double> parts(nodes.size(), 0.0);
  parallel_for(nodes.size(), grid.threads, [&](std::size_t i) {
    const Vec2& x = nodes[i].x;
    if (phi(phi.t0(), x) == 0.0) return;
    const Vec2 bx = b(x);
    std::vector<double> cuts{ta};
    for (double s : u.breaks(x))
      if (s > ta && s < tb) cuts.push_back(s);
    cuts.push_back(tb);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double len = cuts[k + 1] - cuts[k];
      const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(nt * len / (tb - ta))));
      acc += time_integral(x, bx, cuts[k], cuts[k + 1], m);
    }
    if (ta == 0.0) acc += u.initial(x) * phi(0.0, x);
    parts[i] = acc * nodes[i].w;
  });
  double sum = 0.0;
  for (double r : parts) sum += r;
  return std::abs(sum);
}

struct Thresholds {
  double min_order{1.0};
  double floor{1e-10};  // residuals at or below count as converged
};

/// Observed order between consecutive refinements (grid halves each step).
inline std::vector<double> observed_orders(const std::vector<double>& residuals, double floor) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < residuals.size(); ++k) {
    const double a = std::max(residuals[k], floor), c = std::max(residuals[k + 1], floor);
    out.push_back(std::log2(a / c));
  }
  return out;
}

/// Order over the whole ladder, log2(r_first / r_last) / (levels - 1).
inline double overall_order(const std::vector<double>& residuals, double floor) {
  if (residuals.size() < 2) return 0.0;
  const double a = std::max(residuals.front(), floor), c = std::max(residuals.back(), floor);
  return std::log2(a / c) / static_cast<double>(residuals.size() - 1);
}

/// Converged when the finest residual is at the floor, or the ladder decays
/// at `min_order` overall. Single steps may stall: for piecewise smooth
/// integrands the midpoint error oscillates in sign under refinement.
inline bool ladder_passes(const std::vector<double>& residuals, const Thresholds& th) {
  if (residuals.empty()) return false;
  if (residuals.back() <= th.floor) return true;
  return overall_order(residuals, th.floor) >= th.min_order;
}

struct ResidualReport {
  struct Row {
    std::string beta;
    std::string test_function;
    std::vector<std::size_t> grid;  // n_x per level (n_t scales with it)
    std::vector<double> residuals;
    std::vector<double> orders;  // per refinement step
    double order{0.0};           // over the whole ladder
    bool pass{false};
  };
  Thresholds thresholds;
  std::vector<Row> rows;

  bool pass() const {
    for (const Row& r : rows)
      if (!r.pass) return false;
    return !rows.empty();
  }
};

/// Residual ladder of one (solution, test function) pair over n, 2n, 4n, ...
inline ResidualReport::Row residual_ladder(const TransportSolution& u, const PlanarVectorField& b,
                                           const TestFunction& phi, const std::vector<std::size_t>& schedule,
                                           const WeakGrid& base, const Thresholds& th, const std::string& beta = "id") {
  ResidualReport::Row row;
  row.beta = beta;
  row.test_function = phi.name();
  for (std::size_t n : schedule) {
    WeakGrid g = base;
    g.n_x = n;
    g.n_t = n;
    row.grid.push_back(n);
    row.residuals.push_back(weak_residual(u, b, phi, g));
  }
  row.orders = observed_orders(row.residuals, th.floor);
  row.order = overall_order(row.residuals, th.floor);
  row.pass = ladder_passes(row.residuals, th);
  return row;
}

/// For every beta and phi: residual ladder of beta(u) against datum beta(u0).
inline ResidualReport check_R(const TransportSolution& u, const PlanarVectorField& b, const RenormalizationFamily& betas,
                              const std::vector<TestFunction>& phis, const std::vector<std::size_t>& schedule,
                              const WeakGrid& base = {}, const Thresholds& th = {}) {
  ResidualReport rep;
  rep.thresholds = th;
  for (const Beta& beta : betas.members()) {
    const TransportSolution v = renormalize(u, beta);
    for (const TestFunction& phi : phis) rep.rows.push_back(residual_ladder(v, b, phi, schedule, base, th, beta.name));
  }
  return rep;
}

/// Doubling schedule n, 2n, ..., 2^(levels-1) n.
inline std::vector<std::size_t> doubling_schedule(std::size_t n, std::size_t levels = 4) {
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k < levels; ++k) s.push_back(n << k);
  return s;
}

}  // namespace hamflow
