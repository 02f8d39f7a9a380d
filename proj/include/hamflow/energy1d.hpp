#pragma once

// Classical Hamiltonians H(x, y) = y^2/2 + V(x).
//
// The sublevel set {V < E} of an energy E splits into open intervals (a, b).
// On each interval the time coordinate
//
//     F(x) = int dx / sqrt(2 (E - V(x)))
//
// straightens the motion on both sheets y > 0 and y < 0. When both ends are
// regular turning points the two sheets glue into a circle of circumference
// 2 l, with l = F(b) - F(a), and the flow is a rotation of that circle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hamflow/csv.hpp"
#include "hamflow/geometry.hpp"
#include "hamflow/parallel.hpp"
#include "hamflow/quadrature.hpp"

namespace hamflow {

enum class PotentialKind { Analytic, Tabulated };

class Potential1D {
 public:
  using Fn = std::function<double(double)>;

  static Potential1D analytic(Fn V, Interval window, Fn dV = {}) {
    Potential1D p;
    p.kind_ = PotentialKind::Analytic;
    p.V_ = std::move(V);
    p.dV_ = std::move(dV);
    p.window_ = window;
    p.confined_ = p.growth_check();
    return p;
  }

  /// Piecewise linear through (xs[i], vs[i]); beyond the table the end slopes
  /// are extended linearly (only the growth check looks there).
  static Potential1D tabulated(std::vector<double> xs, std::vector<double> vs) {
    if (xs.size() < 2 || xs.size() != vs.size()) throw ConfigError("potential table: need >= 2 matching rows");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw ConfigError("potential table: x not increasing");
    auto data = std::make_shared<const std::pair<std::vector<double>, std::vector<double>>>(std::move(xs), std::move(vs));
    Potential1D p;
    p.kind_ = PotentialKind::Tabulated;
    p.window_ = {data->first.front(), data->first.back()};
    p.V_ = [data](double x) {
      const auto& [X, Y] = *data;
      auto it = std::upper_bound(X.begin(), X.end(), x);
      std::size_t k = it == X.begin() ? 0 : static_cast<std::size_t>(it - X.begin()) - 1;
      k = std::min(k, X.size() - 2);
      const double s = (x - X[k]) / (X[k + 1] - X[k]);
      return Y[k] + s * (Y[k + 1] - Y[k]);
    };
    p.confined_ = p.growth_check();
    return p;
  }

  /// CSV with header `x,V`.
  static Potential1D from_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const std::size_t cx = t.column("x"), cv = t.column("V");
    std::vector<std::pair<double, double>> rows;
    for (const auto& r : t.rows) rows.emplace_back(r[cx], r[cv]);
    std::sort(rows.begin(), rows.end());
    std::vector<double> xs, vs;
    for (const auto& [x, v] : rows) {
      xs.push_back(x);
      vs.push_back(v);
    }
    return tabulated(std::move(xs), std::move(vs));
  }

  double operator()(double x) const { return V_(x); }

  /// V'(x): the analytic derivative when given, a centered difference otherwise.
  double derivative(double x) const {
    if (dV_) return dV_(x);
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    return (V_(x + h) - V_(x - h)) / (2.0 * h);
  }
  bool has_derivative() const { return static_cast<bool>(dV_); }

  PotentialKind kind() const { return kind_; }
  const Interval& window() const { return window_; }

  /// Numerical test that int [max(1, -V)]^{-1/2} diverges toward both ends,
  /// i.e. that no trajectory escapes to infinity in finite time. Over a
  /// sequence of doubling extensions the integral increments must not decay
  /// geometrically (ratio >= 0.75 on the last steps).
  bool confined() const { return confined_; }

 private:
  bool growth_check() const {
    auto g = [this](double x) { return 1.0 / std::sqrt(std::max(1.0, -V_(x))); };
    const double L = std::max(window_.length(), 1.0);
    auto tail = [&](double start, double dir) {
      std::vector<double> inc;
      double r = start, len = L;
      for (int k = 0; k < 12; ++k) {
        const double a = r, b = r + dir * len;
        quad::RichardsonOptions o;
        o.abs_tol = 1e-12;
        o.rel_tol = 1e-8;
        o.max_nodes = 1u << 14;
        const auto q = quad::integrate(g, std::min(a, b), std::max(a, b), o);
        inc.push_back(q.value);
        r = b;
        len *= 2.0;
      }
      for (std::size_t k = inc.size() - 4; k < inc.size(); ++k)
        if (!(inc[k] >= 0.75 * inc[k - 1])) return false;
      return true;
    };
    if (!std::isfinite(window_.lo) || !std::isfinite(window_.hi)) return true;
    return tail(window_.hi, 1.0) && tail(window_.lo, -1.0);
  }

  PotentialKind kind_{PotentialKind::Analytic};
  Fn V_, dV_;
  Interval window_{};
  bool confined_{false};
};

enum class EndpointKind { Regular, Irregular, Unbounded };

inline const char* to_string(EndpointKind k) {
  switch (k) {
    case EndpointKind::Regular: return "regular";
    case EndpointKind::Irregular: return "irregular";
    case EndpointKind::Unbounded: return "unbounded";
  }
  return "?";
}

class OrbitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time coordinate F on one interval, with F(midpoint) = 0. Each half is
/// parameterized from its endpoint by x = end -/+ s^2 (turning point) or
/// x = end -/+ s (window edge); the substitution removes the inverse square
/// root singularity, and G(s) = int_0^s g is tabulated as a monotone cubic.
class TimeParam {
 public:
  struct Half {
    double end{0.0};     // a or b
    double dir{1.0};     // +1: x = end + phi(s) (left half), -1: x = end - phi(s)
    bool sqrt_map{true};
    double s_max{0.0};
    quad::MonotoneHermite G;

    double x_of(double s) const { return end + dir * (sqrt_map ? s * s : s); }
    double s_of(double x) const {
      const double d = std::max(0.0, dir * (x - end));
      return sqrt_map ? std::sqrt(d) : d;
    }
    double total() const { return G.y_back(); }
  };

  TimeParam(double a, double b, Half left, Half right)
      : a_(a), b_(b), mid_(0.5 * (a + b)), left_(std::move(left)), right_(std::move(right)) {}

  double a() const { return a_; }
  double b() const { return b_; }
  double F_a() const { return -left_.total(); }
  double F_b() const { return right_.total(); }
  /// Half-traversal time l = F(b) - F(a).
  double half_period() const { return left_.total() + right_.total(); }

  double F(double x) const {
    x = std::clamp(x, a_, b_);
    if (x <= mid_) return left_.G(std::min(left_.s_of(x), left_.s_max)) - left_.total();
    return right_.total() - right_.G(std::min(right_.s_of(x), right_.s_max));
  }

  double F_inverse(double z) const {
    z = std::clamp(z, F_a(), F_b());
    if (z < 0.0) return left_.x_of(left_.G.inverse(z + left_.total()));
    return right_.x_of(right_.G.inverse(right_.total() - z));
  }

 private:
  double a_, b_, mid_;
  Half left_, right_;
};

struct SliceInterval {
  double a{0.0};
  double b{0.0};
  EndpointKind left{EndpointKind::Unbounded};
  EndpointKind right{EndpointKind::Unbounded};
  double left_slope{0.0};   // outward one-sided slope estimate at a
  double right_slope{0.0};  // at b
  std::optional<TimeParam> time;
  std::string diagnostic;  // set when time could not be computed

  bool closed() const { return left == EndpointKind::Regular && right == EndpointKind::Regular; }
  bool contains(double x, double tol = 0.0) const { return x >= a - tol && x <= b + tol; }
};

struct EnergySlice {
  double energy{0.0};
  Interval window{};
  Potential1D potential;
  std::vector<SliceInterval> intervals;

  /// Index of the interval whose closure contains x, if any.
  std::optional<std::size_t> locate(double x) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    for (std::size_t i = 0; i < intervals.size(); ++i)
      if (intervals[i].contains(x, tol)) return i;
    return std::nullopt;
  }

  csv::Table dump() const {
    csv::Table t{{"n", "a_n", "b_n", "l_n", "left_flag", "right_flag"}, {}};
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const auto& iv = intervals[i];
      const double l = iv.time ? iv.time->half_period() : std::numeric_limits<double>::quiet_NaN();
      t.rows.push_back({static_cast<double>(i), iv.a, iv.b, l, static_cast<double>(iv.left),
                        static_cast<double>(iv.right)});
    }
    return t;
  }
};

struct SliceOptions {
  std::size_t scan{4096};
  std::size_t knots{257};       // per half of each interval
  bool with_time{true};
  quad::RichardsonOptions quad{1e-15, 1e-13, 2, 1u << 12};
};

namespace detail {

/// Free-zone test at a finite endpoint p with outward direction
/// `dir`: V > E on a scanned outer neighbourhood, and the averaged outward
/// slopes (V(p + dir d) - V(p)) / d stay positive and do not collapse to zero
/// as d shrinks geometrically. Returns the flag and the smallest-d slope.
inline std::pair<EndpointKind, double> free_zone(const Potential1D& V, double E, double p, double dir,
                                                 double scale, const Interval& window) {
  double d0 = 1e-2 * std::max(scale, 1e-6);
  const double room = dir > 0 ? window.hi - p : p - window.lo;
  if (room <= 0.0) return {EndpointKind::Irregular, 0.0};
  d0 = std::min(d0, room);
  for (int k = 1; k <= 64; ++k)
    if (!(V(p + dir * d0 * k / 64.0) > E)) return {EndpointKind::Irregular, 0.0};
  const double vp = V(p);
  double max_slope = 0.0, last = 0.0;
  double d = d0;
  for (int j = 0; j <= 20; ++j, d *= 0.5) {
    const double s = (V(p + dir * d) - vp) / d;
    if (!(s > 0.0)) return {EndpointKind::Irregular, 0.0};
    max_slope = std::max(max_slope, s);
    last = s;
  }
  if (last < 0.1 * max_slope || last < 1e-8) return {EndpointKind::Irregular, last};
  return {EndpointKind::Regular, last};
}

}  // namespace detail

/// Per-endpoint regularity flags for every interval of the slice (modifies the
/// flags in place and returns them).
inline std::vector<std::pair<EndpointKind, EndpointKind>> free_zone_check(EnergySlice& slice) {
  std::vector<std::pair<EndpointKind, EndpointKind>> flags;
  for (auto& iv : slice.intervals) {
    const double scale = iv.b - iv.a;
    if (iv.left != EndpointKind::Unbounded) {
      auto [k, s] = detail::free_zone(slice.potential, slice.energy, iv.a, -1.0, scale, slice.window);
      iv.left = k;
      iv.left_slope = s;
      if (k == EndpointKind::Regular && slice.potential.has_derivative())
        iv.left_slope = std::abs(slice.potential.derivative(iv.a));
    }
    if (iv.right != EndpointKind::Unbounded) {
      auto [k, s] = detail::free_zone(slice.potential, slice.energy, iv.b, 1.0, scale, slice.window);
      iv.right = k;
      iv.right_slope = s;
      if (k == EndpointKind::Regular && slice.potential.has_derivative())
        iv.right_slope = std::abs(slice.potential.derivative(iv.b));
    }
    flags.emplace_back(iv.left, iv.right);
  }
  return flags;
}

/// Builds F on interval `index`. Throws OrbitError if an endpoint is irregular
/// (the inverse square root is then not integrable there in general).
inline TimeParam time_param(const EnergySlice& slice, std::size_t index, const SliceOptions& opt = {}) {
  const SliceInterval& iv = slice.intervals.at(index);
  if (iv.left == EndpointKind::Irregular || iv.right == EndpointKind::Irregular)
    throw OrbitError("time_param: irregular endpoint on interval " + std::to_string(index) +
                     ", time integral not certified");
  const Potential1D& V = slice.potential;
  const double E = slice.energy;
  const double mid = 0.5 * (iv.a + iv.b);

  auto make_half = [&](double end, double dir, bool turning, double end_slope) {
    TimeParam::Half h;
    h.end = end;
    h.dir = dir;
    h.sqrt_map = turning;
    const double len = std::abs(mid - end);
    h.s_max = turning ? std::sqrt(len) : len;
    auto g = [&](double s) {
      const double x = h.x_of(s);
      const double v = std::sqrt(2.0 * std::max(0.0, E - V(x)));
      return turning ? 2.0 * s / v : 1.0 / v;
    };
    const std::size_t n = std::max<std::size_t>(opt.knots, 2);
    std::vector<double> s(n), G(n), slope(n);
    for (std::size_t k = 0; k < n; ++k) s[k] = h.s_max * static_cast<double>(k) / static_cast<double>(n - 1);
    s.back() = h.s_max;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == 0 && turning) slope[k] = 2.0 / std::sqrt(2.0 * end_slope);
      else slope[k] = g(s[k]);
    }
    G[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const auto q = quad::integrate(g, s[k - 1], s[k], opt.quad);
      if (!std::isfinite(q.value)) throw OrbitError("time_param: quadrature did not converge");
      G[k] = G[k - 1] + q.value;
    }
    h.G = quad::MonotoneHermite(std::move(s), std::move(G), slope);
    return h;
  };

  TimeParam::Half left = make_half(iv.a, 1.0, iv.left == EndpointKind::Regular, iv.left_slope);
  TimeParam::Half right = make_half(iv.b, -1.0, iv.right == EndpointKind::Regular, iv.right_slope);
  return TimeParam(iv.a, iv.b, std::move(left), std::move(right));
}

/// Decomposes {x in window : V(x) < E} into maximal open intervals by scanning
/// for sign changes of V - E and polishing each crossing by bisection.
/// Endpoints on the window edge are marked unbounded.
inline EnergySlice energy_slice(const Potential1D& V, double E, Interval window, const SliceOptions& opt = {}) {
  if (!(std::isfinite(window.lo) && std::isfinite(window.hi) && window.hi > window.lo))
    throw std::invalid_argument("energy_slice: window must be bounded");
  EnergySlice slice{E, window, V, {}};
  auto inside = [&](double x) { return V(x) < E; };
  const std::size_t n = std::max<std::size_t>(opt.scan, 3);
  bool in = false;
  double start = window.lo, prev = window.lo;
  EndpointKind start_kind = EndpointKind::Unbounded;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = window.lo + window.length() * static_cast<double>(i) / static_cast<double>(n - 1);
    const bool now = inside(x);
    if (now && !in) {
      if (i == 0) {
        start = window.lo;
        start_kind = EndpointKind::Unbounded;
      } else {
        start = quad::bisect_predicate(inside, prev, x);
        start_kind = EndpointKind::Regular;
      }
    }
    if (!now && in) {
      SliceInterval iv;
      iv.a = start;
      iv.left = start_kind;
      iv.b = quad::bisect_predicate(inside, prev, x);
      iv.right = EndpointKind::Regular;
      slice.intervals.push_back(iv);
    }
    in = now;
    prev = x;
  }
  if (in) {
    SliceInterval iv;
    iv.a = start;
    iv.left = start_kind;
    iv.b = window.hi;
    iv.right = EndpointKind::Unbounded;
    slice.intervals.push_back(iv);
  }
  // Points where V touches E from below inside an interval are invisible to the
  // sign scan; look for discrete local maxima of V and polish them.
  const double h = window.length() / static_cast<double>(n - 1);
  const double touch_tol = 1e-12 * std::max(1.0, std::abs(E));
  std::vector<SliceInterval> split;
  for (const SliceInterval& iv : slice.intervals) {
    SliceInterval cur = iv;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double x = window.lo + h * static_cast<double>(i);
      if (!(x - h > cur.a && x + h < cur.b)) continue;
      const double v = V(x);
      if (!(v >= V(x - h) && v >= V(x + h))) continue;
      // golden-section search for the maximum of V on [x - h, x + h]
      double lo = x - h, hi = x + h;
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
      double vc = V(c), vd = V(d);
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(x)); ++it) {
        if (vc > vd) {
          hi = d;
          d = c;
          vd = vc;
          c = hi - g * (hi - lo);
          vc = V(c);
        } else {
          lo = c;
          c = d;
          vc = vd;
          d = lo + g * (hi - lo);
          vd = V(d);
        }
      }
      const double xm = 0.5 * (lo + hi);
      if (E - V(xm) > touch_tol) continue;
      SliceInterval left = cur;
      left.b = xm;
      left.right = EndpointKind::Regular;
      split.push_back(left);
      cur.a = xm;
      cur.left = EndpointKind::Regular;
    }
    split.push_back(cur);
  }
  slice.intervals = std::move(split);
  free_zone_check(slice);
  if (opt.with_time) {
    for (std::size_t i = 0; i < slice.intervals.size(); ++i) {
      try {
        slice.intervals[i].time = time_param(slice, i, opt);
      } catch (const OrbitError& e) {
        slice.intervals[i].diagnostic = e.what();
      }
    }
  }
  return slice;
}

struct PhasePoint {
  double x{0.0};
  double y{0.0};
};

inline double energy(const Potential1D& V, const PhasePoint& p) { return 0.5 * p.y * p.y + V(p.x); }

/// Moves p along its energy level for time t. Returns nothing when the
/// trajectory leaves the window within |t| (open orbits only). Throws
/// OrbitError if p is not on the slice or its interval has an irregular end.
///
/// At a turning point (y = 0) the point is taken as entering the sheet of the
/// coming motion: y < 0 after the right end b, y > 0 after the left end a.
inline std::optional<PhasePoint> orbit_flow(const EnergySlice& slice, const PhasePoint& p, double t) {
  const Potential1D& V = slice.potential;
  const double E = slice.energy;
  const double Ep = energy(V, p);
  if (std::abs(Ep - E) > 1e-9 * std::max(1.0, std::abs(E)))
    throw OrbitError("orbit_flow: phase point energy " + std::to_string(Ep) + " does not match slice energy");
  const auto idx = slice.locate(p.x);
  if (!idx) {
    if (p.y == 0.0) return p;  // rest point at the bottom of a well
    throw OrbitError("orbit_flow: position outside every interval of the slice");
  }
  const SliceInterval& iv = slice.intervals[*idx];
  if (iv.left == EndpointKind::Irregular || iv.right == EndpointKind::Irregular)
    throw OrbitError("orbit_flow: interval has an irregular endpoint");
  if (!iv.time) throw OrbitError("orbit_flow: no time parameterization: " + iv.diagnostic);
  const TimeParam& F = *iv.time;
  auto speed = [&](double x) { return std::sqrt(2.0 * std::max(0.0, E - V(x))); };
  const double l = F.half_period();
  const double Fx = F.F(p.x);
  const bool near_b = std::abs(p.x - iv.b) < std::abs(p.x - iv.a);

  if (iv.closed()) {
    double theta;
    if (p.y > 0.0) theta = Fx - F.F_a();
    else if (p.y < 0.0) theta = 2.0 * l - (Fx - F.F_a());
    else theta = near_b ? l : 0.0;
    double th = std::fmod(theta + t, 2.0 * l);
    if (th < 0.0) th += 2.0 * l;
    if (th <= l) {
      const double x = F.F_inverse(F.F_a() + th);
      return PhasePoint{x, th == l ? 0.0 : speed(x)};
    }
    const double x = F.F_inverse(F.F_a() + (2.0 * l - th));
    return PhasePoint{x, -speed(x)};
  }

  if (!V.confined()) throw OrbitError("orbit_flow: potential fails the growth condition; open orbit rejected");
  const double span = F.F_b() - F.F_a();
  if (iv.left == EndpointKind::Regular) {
    // Comes in from the right on the lower sheet, bounces at a, leaves on the upper sheet.
    const double theta = p.y > 0.0 ? Fx - F.F_a() : (p.y < 0.0 ? -(Fx - F.F_a()) : 0.0);
    const double th = theta + t;
    if (!(std::abs(th) < span)) return std::nullopt;
    if (th >= 0.0) {
      const double x = F.F_inverse(F.F_a() + th);
      return PhasePoint{x, speed(x)};
    }
    const double x = F.F_inverse(F.F_a() - th);
    return PhasePoint{x, -speed(x)};
  }
  if (iv.right == EndpointKind::Regular) {
    const double theta = p.y > 0.0 ? Fx - F.F_b() : (p.y < 0.0 ? F.F_b() - Fx : 0.0);
    const double th = theta + t;
    if (!(std::abs(th) < span)) return std::nullopt;
    if (th <= 0.0) {
      const double x = F.F_inverse(F.F_b() + th);
      return PhasePoint{x, th == 0.0 ? 0.0 : speed(x)};
    }
    const double x = F.F_inverse(F.F_b() - th);
    return PhasePoint{x, -speed(x)};
  }
  const double z = p.y >= 0.0 ? Fx + t : Fx - t;
  if (!(z > F.F_a() && z < F.F_b())) return std::nullopt;
  const double x = F.F_inverse(z);
  return PhasePoint{x, p.y >= 0.0 ? speed(x) : -speed(x)};
}

/// Caches slices by energy. Energies are pooled into fixed buckets of width
/// `pool_tol`, and each bucket's slice is built at the bucket center, so the
/// result does not depend on the order of requests. Thread-safe; references
/// stay valid for the cache's lifetime.
class SliceCache {
 public:
  SliceCache(Potential1D V, Interval window, SliceOptions opt = {}, double pool_tol = 1e-12)
      : V_(std::move(V)), window_(window), opt_(opt), pool_tol_(pool_tol) {}

  const EnergySlice& at(double E) {
    const double q = E / pool_tol_;
    const bool bucketed = std::abs(q) < 1e18;
    const long long key = bucketed ? std::llround(q) : 0;
    const double rep = bucketed ? static_cast<double>(key) * pool_tol_ : E;
    std::lock_guard<std::mutex> lock(mu_);
    if (!bucketed) {
      auto it = exact_.find(E);
      if (it != exact_.end()) return it->second;
      return exact_.emplace(E, energy_slice(V_, E, window_, opt_)).first->second;
    }
    auto it = slices_.find(key);
    if (it != slices_.end()) return it->second;
    return slices_.emplace(key, energy_slice(V_, rep, window_, opt_)).first->second;
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return slices_.size() + exact_.size();
  }

 private:
  mutable std::mutex mu_;
  Potential1D V_;
  Interval window_;
  SliceOptions opt_;
  double pool_tol_;
  std::map<long long, EnergySlice> slices_;
  std::map<double, EnergySlice> exact_;
};

struct ClassicalSample {
  PhasePoint point;
  std::optional<double> value;  // nothing when the characteristic left the window or failed
};

/// u(t, p) = u0(orbit_flow(p, -t)) on every point of `points`. Slices are
/// built once per distinct energy; evaluation is parallel over points.
template <class U0>
std::vector<ClassicalSample> solve_classical_transport(const Potential1D& V, U0&& u0, double t,
                                                       const std::vector<PhasePoint>& points, Interval window,
                                                       unsigned threads = 1, const SliceOptions& opt = {}) {
  SliceCache cache(V, window, opt);
  std::vector<const EnergySlice*> slice_of(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) slice_of[i] = &cache.at(energy(V, points[i]));
  std::vector<ClassicalSample> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    out[i].point = points[i];
    try {
      const auto q = orbit_flow(*slice_of[i], points[i], -t);
      if (q) out[i].value = u0(q->x, q->y);
    } catch (const OrbitError&) {
    }
  });
  return out;
}

}  // namespace hamflow
