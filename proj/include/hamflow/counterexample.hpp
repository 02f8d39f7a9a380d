#pragma once

// A divergence-free field with a non-unique a.e. flow.
//
//   H = -x1/|x2|            on |x1| <= |x2|
//   H = -(x1 - |x2| + 1)    on  x1 >  |x2|
//   H = -(x1 + |x2| - 1)    on  x1 < -|x2|
//
// Mass in the upper cone J = {|x1| < x2} moves radially into the origin and
// arrives at time x2^2/2; it then leaves through the lower cone I = {|x1| < -x2}.
// Which lower half-line a given upper half-line continues on is not fixed by
// the field: every measure-preserving Psi of (-1, 1) gives an a.e. flow X_Psi.
// In I we label half-lines by x1/|x2|, so Psi = id is the flow that keeps H
// constant.
//
// Note: J and I here are the full open cones; the upper-right and lower-right
// halves of them are the sets usually drawn, the rest follows by the mirror
// symmetry in x1.

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

#include "hamflow/fields.hpp"
#include "hamflow/geometry.hpp"
#include "hamflow/quadrature.hpp"
#include "hamflow/transport.hpp"

namespace hamflow::counterexample {

/// H, or nothing at the origin.
inline std::optional<double> h_example(const Vec2& x) {
  const double a1 = std::abs(x.x), a2 = std::abs(x.y);
  if (a1 <= a2) {
    if (a2 == 0.0) return std::nullopt;
    return -x.x / a2;
  }
  if (x.x > a2) return -(x.x - a2 + 1.0);
  return -(x.x + a2 - 1.0);
}

/// b = (-dH/dx2, dH/dx1), or nothing on {x2 = 0}.
inline std::optional<Vec2> b_example(const Vec2& x) {
  if (x.y == 0.0) return std::nullopt;
  const double a1 = std::abs(x.x), a2 = std::abs(x.y);
  const double s2 = sign(x.y);
  if (a1 <= a2) return Vec2{-s2 * x.x / (a2 * a2), -1.0 / a2};
  return Vec2{-s2 * sign(x.x), -1.0};
}

inline ScalarField2D hamiltonian_field(Window w = {}) {
  return ScalarField2D::analytic(
      [](const Vec2& x) {
        const auto h = h_example(x);
        if (!h) throw EvaluationError("example Hamiltonian undefined at the origin");
        return *h;
      },
      w);
}

inline PlanarVectorField vector_field(Window w = {}) {
  return PlanarVectorField(
      [w](const Vec2& x) {
        if (!w.contains(x)) throw EvaluationError("example field evaluated outside its window");
        const auto b = b_example(x);
        if (!b) throw EvaluationError("example field undefined on {x2 = 0}");
        return *b;
      },
      hamiltonian_field(w));
}

/// Interval exchange of a domain interval: each piece maps [src, src + len)
/// onto [tgt, tgt + len) by translation (+1) or reflection (-1).
class MeasurePreservingMap {
 public:
  struct Piece {
    Interval source;
    Interval target;
    int orientation{1};
  };

  MeasurePreservingMap(std::vector<Piece> pieces, Interval domain = {-1.0, 1.0})
      : pieces_(std::move(pieces)), domain_(domain) {
    validate();
  }

  static MeasurePreservingMap identity(Interval d = {-1.0, 1.0}) { return MeasurePreservingMap({{d, d, 1}}, d); }
  static MeasurePreservingMap reflection(Interval d = {-1.0, 1.0}) { return MeasurePreservingMap({{d, d, -1}}, d); }
  /// Exchanges the two halves of the domain by translation.
  static MeasurePreservingMap swap_halves(Interval d = {-1.0, 1.0}) {
    const double m = 0.5 * (d.lo + d.hi);
    return MeasurePreservingMap({{{d.lo, m}, {m, d.hi}, 1}, {{m, d.hi}, {d.lo, m}, 1}}, d);
  }

  double operator()(double lambda) const { return apply(lambda, false); }
  double inverse(double mu) const { return apply(mu, true); }

  const std::vector<Piece>& pieces() const { return pieces_; }
  const Interval& domain() const { return domain_; }

  /// True when the map is the identity on every piece.
  bool is_identity() const {
    for (const Piece& p : pieces_)
      if (p.orientation != 1 || p.source.lo != p.target.lo) return false;
    return true;
  }

 private:
  static void check_tiling(std::vector<Interval> parts, const Interval& d, const char* what) {
    std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    const double tol = 1e-12 * std::max(1.0, d.length());
    double at = d.lo;
    for (const Interval& p : parts) {
      if (!(p.hi > p.lo)) throw ConfigError(std::string("interval exchange: empty ") + what + " piece");
      if (std::abs(p.lo - at) > tol) throw ConfigError(std::string("interval exchange: ") + what + " pieces do not tile");
      at = p.hi;
    }
    if (std::abs(at - d.hi) > tol) throw ConfigError(std::string("interval exchange: ") + what + " pieces do not tile");
  }

  void validate() const {
    if (pieces_.empty()) throw ConfigError("interval exchange: no pieces");
    std::vector<Interval> src, tgt;
    for (const Piece& p : pieces_) {
      if (p.orientation != 1 && p.orientation != -1) throw ConfigError("interval exchange: orientation must be +1 or -1");
      if (std::abs(p.source.length() - p.target.length()) > 1e-12 * std::max(1.0, domain_.length()))
        throw ConfigError("interval exchange: source and target lengths differ");
      src.push_back(p.source);
      tgt.push_back(p.target);
    }
    check_tiling(src, domain_, "source");
    check_tiling(tgt, domain_, "target");
  }

  double apply(double v, bool inverse) const {
    for (const Piece& p : pieces_) {
      const Interval& from = inverse ? p.target : p.source;
      const Interval& to = inverse ? p.source : p.target;
      const bool last = from.hi >= domain_.hi;
      if (v >= from.lo && (v < from.hi || (last && v <= from.hi))) {
        const double d = v - from.lo;
        return p.orientation == 1 ? to.lo + d : to.hi - d;
      }
    }
    throw std::domain_error("interval exchange: argument outside the domain");
  }

  std::vector<Piece> pieces_;
  Interval domain_;
};

enum class RegionTag { Origin, UpperCone, LowerCone, UpperWedge, LowerWedge, UpperWedgeMirror, LowerWedgeMirror };

inline const char* to_string(RegionTag r) {
  switch (r) {
    case RegionTag::Origin: return "origin";
    case RegionTag::UpperCone: return "J";
    case RegionTag::LowerCone: return "I";
    case RegionTag::UpperWedge: return "upper-wedge";
    case RegionTag::LowerWedge: return "lower-wedge";
    case RegionTag::UpperWedgeMirror: return "upper-wedge-mirror";
    case RegionTag::LowerWedgeMirror: return "lower-wedge-mirror";
  }
  return "?";
}

/// Region of x. Boundaries: the diagonals belong to the outer wedges, the
/// positive x1 axis to the upper wedge (the region the motion leaves from).
inline RegionTag region(const Vec2& x) {
  if (x.x == 0.0 && x.y == 0.0) return RegionTag::Origin;
  if (std::abs(x.x) < x.y) return RegionTag::UpperCone;
  if (std::abs(x.x) < -x.y) return RegionTag::LowerCone;
  if (x.x > 0.0) return x.y >= 0.0 ? RegionTag::UpperWedge : RegionTag::LowerWedge;
  return x.y >= 0.0 ? RegionTag::UpperWedgeMirror : RegionTag::LowerWedgeMirror;
}

namespace detail {

// Outer wedges for x1 > 0 (|x2| <= x1), any time sign.
inline Vec2 wedge_flow(double t, const Vec2& x) {
  if (x.y >= 0.0) {
    if (t <= x.y) return {x.x - t, x.y - t};
    return {x.x - 2.0 * x.y + t, x.y - t};
  }
  if (t >= x.y) return {x.x + t, x.y - t};
  return {x.x + 2.0 * x.y - t, x.y - t};
}

}  // namespace detail

/// X_Psi(t, x) for any real t.
inline Vec2 flow_X_psi(const MeasurePreservingMap& psi, double t, const Vec2& x) {
  if (t == 0.0) return x;
  switch (region(x)) {
    case RegionTag::Origin:
      return x;
    case RegionTag::UpperWedge:
    case RegionTag::LowerWedge:
      return detail::wedge_flow(t, x);
    case RegionTag::UpperWedgeMirror:
    case RegionTag::LowerWedgeMirror: {
      const Vec2 m = detail::wedge_flow(t, {-x.x, x.y});
      return {-m.x, m.y};
    }
    case RegionTag::UpperCone: {
      const double q = 2.0 * t / (x.y * x.y);
      if (q <= 1.0) return std::sqrt(1.0 - q) * x;
      const double r = std::sqrt(q - 1.0) * x.y;
      return {psi(x.x / x.y) * r, -r};
    }
    case RegionTag::LowerCone: {
      const double q = 2.0 * t / (x.y * x.y);
      if (q >= -1.0) return std::sqrt(1.0 + q) * x;
      const double h = std::sqrt(-2.0 * t - x.y * x.y);
      return {h * psi.inverse(x.x / std::abs(x.y)), h};
    }
  }
  return x;
}

inline Vec2 flow_X(double t, const Vec2& x) {
  static const MeasurePreservingMap id = MeasurePreservingMap::identity();
  return flow_X_psi(id, t, x);
}

using Datum = std::function<double(const Vec2&)>;

/// u(t, x) = u_tilde(X(-t, x)) on I after the origin crossing, u0(X(-t, x)) elsewhere.
inline TransportSolution solution_family(Datum u0, Datum u_tilde) {
  auto eval = [u0, u_tilde](double t, const Vec2& x) -> std::optional<double> {
    const Vec2 y = flow_X(-t, x);
    if (region(x) == RegionTag::LowerCone && 2.0 * t >= x.y * x.y) return u_tilde(y);
    return u0(y);
  };
  // Backward characteristics switch branch at the origin (I) or the x1 axis (lower wedges).
  auto breaks = [](const Vec2& x) -> std::vector<double> {
    switch (region(x)) {
      case RegionTag::LowerCone: return {0.5 * x.y * x.y};
      case RegionTag::LowerWedge:
      case RegionTag::LowerWedgeMirror: return {-x.y};
      default: return {};
    }
  };
  return TransportSolution(eval, std::move(u0), Provenance::CounterexampleFamily, breaks);
}

/// The datum on J produced by X_Psi: u_tilde(y) = u0(y2 Psi^{-1}(y1/y2), y2).
inline Datum rearranged_datum(Datum u0, MeasurePreservingMap psi) {
  return [u0 = std::move(u0), psi = std::move(psi)](const Vec2& y) {
    if (!(y.y > 0.0)) return u0(y);
    return u0({y.y * psi.inverse(std::clamp(y.x / y.y, -1.0, 1.0)), y.y});
  };
}

/// The segment average of u0 at height y2, as a datum on J (n midpoint
/// nodes, memoized per height).
inline Datum averaged_datum(Datum u0, std::size_t n = 4096) {
  struct Memo {
    std::mutex mu;
    std::map<double, double> values;
  };
  auto memo = std::make_shared<Memo>();
  return [u0 = std::move(u0), n, memo](const Vec2& y) {
    if (!(y.y > 0.0)) return u0(y);
    {
      std::lock_guard<std::mutex> lock(memo->mu);
      auto it = memo->values.find(y.y);
      if (it != memo->values.end()) return it->second;
    }
    const double v = quad::midpoint([&](double s) { return u0({s, y.y}); }, -y.y, y.y, n) / (2.0 * y.y);
    std::lock_guard<std::mutex> lock(memo->mu);
    memo->values.emplace(y.y, v);
    return v;
  };
}

/// int_{-x2}^{x2} f(x1) dx1 by Richardson-checked midpoint on 2^k nodes.
inline double segment_integral(const std::function<double(double)>& f, double x2) {
  quad::RichardsonOptions o;
  o.abs_tol = 1e-14;
  o.rel_tol = 1e-13;
  o.max_nodes = 1u << 16;
  return quad::integrate(f, -x2, x2, o).value;
}

struct LevelResidual {
  double level{0.0};
  std::string label;  // beta or moment name; empty for plain mass
  double residual{0.0};
};

inline std::vector<LevelResidual> check_masscons(const Datum& u_tilde, const Datum& u0,
                                                 const std::vector<double>& levels) {
  std::vector<LevelResidual> out;
  for (double x2 : levels) {
    const double a = segment_integral([&](double s) { return u_tilde({s, x2}); }, x2);
    const double b = segment_integral([&](double s) { return u0({s, x2}); }, x2);
    out.push_back({x2, "", std::abs(a - b)});
  }
  return out;
}

inline std::vector<LevelResidual> check_masscons2(const Datum& u_tilde, const Datum& u0,
                                                  const RenormalizationFamily& betas,
                                                  const std::vector<double>& levels) {
  std::vector<LevelResidual> out;
  for (double x2 : levels)
    for (const Beta& beta : betas.members()) {
      const double a = segment_integral([&](double s) { return beta(u_tilde({s, x2})); }, x2);
      const double b = segment_integral([&](double s) { return beta(u0({s, x2})); }, x2);
      out.push_back({x2, beta.name, std::abs(a - b)});
    }
  return out;
}

/// Moments against f(s) = s^k, k = 0..degree.
inline std::vector<LevelResidual> hamiltonian_moment_residual(const Datum& u_tilde, const Datum& u0, int degree,
                                                              const std::vector<double>& levels) {
  std::vector<LevelResidual> out;
  for (double x2 : levels)
    for (int k = 0; k <= degree; ++k) {
      auto f = [k](double s) { return std::pow(s, k); };
      const double a = segment_integral([&](double s) { return u_tilde({s, x2}) * f(s); }, x2);
      const double b = segment_integral([&](double s) { return u0({s, x2}) * f(s); }, x2);
      out.push_back({x2, "s^" + std::to_string(k), std::abs(a - b)});
    }
  return out;
}

struct Candidate {
  std::string name;
  Datum u_tilde;
};

struct SelectionReport {
  struct Row {
    std::string name;
    double max_residual{0.0};
    bool admitted{false};       // all moment residuals below tolerance
    bool equals_datum{false};   // u_tilde == u0 on the sampled segments
  };
  std::vector<Row> rows;
  bool selecting{false};  // admitted exactly the candidates equal to u0
};

/// Runs the moment family on every candidate and reports whether it admits
/// exactly those candidates that coincide with u0 on the sampled segments.
inline SelectionReport select_by_moments(const std::vector<Candidate>& candidates, const Datum& u0, int degree,
                                         const std::vector<double>& levels, double tol = 1e-8) {
  SelectionReport rep;
  rep.selecting = true;
  for (const Candidate& c : candidates) {
    SelectionReport::Row row{c.name, 0.0, false, true};
    for (const auto& r : hamiltonian_moment_residual(c.u_tilde, u0, degree, levels))
      row.max_residual = std::max(row.max_residual, r.residual);
    row.admitted = row.max_residual <= tol;
    for (double x2 : levels)
      for (int i = 0; i < 257; ++i) {
        const double s = x2 * (-1.0 + 2.0 * (i + 0.5) / 257.0);
        if (std::abs(c.u_tilde({s, x2}) - u0({s, x2})) > tol) row.equals_datum = false;
      }
    if (row.admitted != row.equals_datum) rep.selecting = false;
    rep.rows.push_back(row);
  }
  return rep;
}

/// Midpoint L1 distance of u(t, .) and v(t, .) over the part of `box` where
/// `keep` holds, on an n x n grid. Undefined values count as errors.
inline double l1_difference(const TransportSolution& u, const TransportSolution& v, double t, const Vec2& lo,
                            const Vec2& hi, const std::function<bool(const Vec2&)>& keep, std::size_t n) {
  const double hx = (hi.x - lo.x) / static_cast<double>(n), hy = (hi.y - lo.y) / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 x{lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy};
      if (!keep(x)) continue;
      const auto a = u(t, x), b = v(t, x);
      if (!a || !b) throw EvaluationError("l1_difference: solution undefined inside the region");
      sum += std::abs(*a - *b);
    }
  return sum * hx * hy;
}

}  // namespace hamflow::counterexample
