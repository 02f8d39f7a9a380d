#pragma once

// Transport solutions u(t, x) evaluated by backward characteristics, and their
// renormalizations beta(u).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hamflow/chart2d.hpp"
#include "hamflow/energy1d.hpp"
#include "hamflow/geometry.hpp"

namespace hamflow {

enum class Provenance { ChartPullback, Classical, CounterexampleFamily };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ChartPullback: return "chart-pullback";
    case Provenance::Classical: return "classical";
    case Provenance::CounterexampleFamily: return "counterexample-family";
  }
  return "?";
}

class TransportSolution {
 public:
  /// Returns nothing where the value is undefined (characteristic left the domain).
  using Eval = std::function<std::optional<double>(double, const Vec2&)>;
  using Datum = std::function<double(const Vec2&)>;

  /// Times at which t -> u(t, x) may fail to be smooth (optional hint for quadrature).
  using Breaks = std::function<std::vector<double>(const Vec2&)>;

  TransportSolution(Eval eval, Datum u0, Provenance provenance, Breaks breaks = {})
      : eval_(std::move(eval)), u0_(std::move(u0)), provenance_(provenance), breaks_(std::move(breaks)) {}

  std::optional<double> operator()(double t, const Vec2& x) const { return eval_(t, x); }
  double initial(const Vec2& x) const { return u0_(x); }
  const Datum& datum() const { return u0_; }
  Provenance provenance() const { return provenance_; }
  std::vector<double> breaks(const Vec2& x) const { return breaks_ ? breaks_(x) : std::vector<double>{}; }
  const Breaks& break_hint() const { return breaks_; }

 private:
  Eval eval_;
  Datum u0_;
  Provenance provenance_;
  Breaks breaks_;
};

/// z -> w0(z - t), the solution of d_t w + d_z w = 0.
inline std::function<double(double)> translate_1d(std::function<double(double)> w0, double t) {
  if (t == 0.0) return w0;
  return [w0 = std::move(w0), t](double z) { return w0(z - t); };
}

/// u(t, x) = u0(Phi^{-1}(X_fiber(-t, Phi(x)))). Undefined where x is outside U,
/// or where the backward trajectory leaves the chart within time t.
inline TransportSolution chart_pullback_solution(std::shared_ptr<const FiberCache> fibers,
                                                 TransportSolution::Datum u0) {
  auto eval = [fibers, u0](double t, const Vec2& x) -> std::optional<double> {
    const Chart& c = fibers->chart();
    if (!c.in_domain(x)) return std::nullopt;
    if (t == 0.0) return u0(x);
    const Vec2 y = c.forward(x);
    const auto reds = fibers->at(y.y);
    for (const FiberReduction& red : *reds) {
      if (!red.contains(y.x)) continue;
      const auto z = fiber_flow(red, y.x, -t);
      if (!z) return std::nullopt;
      const auto back = c.inverse({*z, y.y});
      if (!back) return std::nullopt;
      return u0(*back);
    }
    return std::nullopt;
  };
  return TransportSolution(eval, std::move(u0), Provenance::ChartPullback);
}

/// Phase-plane solution for H = y^2/2 + V(x); points are (x, y).
inline TransportSolution classical_solution(const Potential1D& V, TransportSolution::Datum u0, Interval window,
                                            const SliceOptions& opt = {}) {
  auto cache = std::make_shared<SliceCache>(V, window, opt);
  auto eval = [cache, V, u0](double t, const Vec2& p) -> std::optional<double> {
    if (t == 0.0) return u0(p);
    const PhasePoint q{p.x, p.y};
    try {
      const auto r = orbit_flow(cache->at(energy(V, q)), q, -t);
      if (!r) return std::nullopt;
      return u0({r->x, r->y});
    } catch (const OrbitError&) {
      return std::nullopt;
    }
  };
  return TransportSolution(eval, std::move(u0), Provenance::Classical);
}

/// A C^1 (or Lipschitz, for clip) function with bounded derivative on bounded sets.
struct Beta {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;

  double operator()(double s) const { return f(s); }
};

namespace beta {

inline Beta identity() {
  return {"id", [](double s) { return s; }, [](double) { return 1.0; }};
}
inline Beta square() {
  return {"square", [](double s) { return s * s; }, [](double s) { return 2.0 * s; }};
}
inline Beta arctan() {
  return {"arctan", [](double s) { return std::atan(s); }, [](double s) { return 1.0 / (1.0 + s * s); }};
}
/// Clamp to [lo, hi]; Lipschitz, derivative defined off {lo, hi}.
inline Beta clip(double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("clip: need lo < hi");
  return {"clip", [lo, hi](double s) { return std::clamp(s, lo, hi); },
          [lo, hi](double s) { return (s > lo && s < hi) ? 1.0 : 0.0; }};
}

/// Builds a named beta; `params` is only read by clip ([lo, hi], default [-1, 1]).
inline Beta by_name(const std::string& name, const std::vector<double>& params = {}) {
  if (name == "id") return identity();
  if (name == "square") return square();
  if (name == "arctan") return arctan();
  if (name == "clip") {
    if (params.empty()) return clip(-1.0, 1.0);
    if (params.size() != 2) throw ConfigError("clip takes two parameters [lo, hi]");
    return clip(params[0], params[1]);
  }
  throw ConfigError("unknown beta '" + name + "'");
}

}  // namespace beta

class RenormalizationFamily {
 public:
  RenormalizationFamily() = default;
  explicit RenormalizationFamily(std::vector<Beta> members) : members_(std::move(members)) {}

  const std::vector<Beta>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const Beta& operator[](std::size_t i) const { return members_[i]; }

  /// Largest sampled |beta'| per member over [lo, hi]; throws if one is not finite.
  std::vector<double> derivative_bounds(double lo, double hi, std::size_t samples = 1001) const {
    std::vector<double> out;
    for (const Beta& b : members_) {
      double m = 0.0;
      for (std::size_t i = 0; i < samples; ++i) {
        const double s = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
        const double d = std::abs(b.df(s));
        if (!std::isfinite(d)) throw ConfigError("beta '" + b.name + "' has unbounded derivative on the datum range");
        m = std::max(m, d);
      }
      out.push_back(m);
    }
    return out;
  }

 private:
  std::vector<Beta> members_;
};

/// beta o u, with datum beta o u0.
inline TransportSolution renormalize(const TransportSolution& sol, const Beta& b) {
  auto eval = [sol, b](double t, const Vec2& x) -> std::optional<double> {
    const auto v = sol(t, x);
    if (!v) return std::nullopt;
    return b(*v);
  };
  auto u0 = [sol, b](const Vec2& x) { return b(sol.initial(x)); };
  return TransportSolution(eval, u0, sol.provenance(), sol.break_hint());
}

}  // namespace hamflow
