#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hamflow::quad {

using Fn1 = std::function<double(double)>;

/// Composite midpoint rule with `n` equal cells on [a, b].
template <class F>
double midpoint(F&& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += f(a + (static_cast<double>(i) + 0.5) * h);
  return sum * h;
}

struct RichardsonOptions {
  double abs_tol{1e-13};
  double rel_tol{1e-12};
  std::size_t start_nodes{2};
  std::size_t max_nodes{1u << 16};
};

struct QuadResult {
  double value{0.0};
  double error{0.0};  // |difference of the last two extrapolants|
  bool converged{false};
};

/// Midpoint rule on doubling grids; each pair is combined as (4 M_2n - M_n) / 3
/// and the sequence of extrapolants is run until two successive ones agree.
template <class F>
QuadResult integrate(F&& f, double a, double b, const RichardsonOptions& opt = {}) {
  std::size_t n = std::max<std::size_t>(opt.start_nodes, 1);
  double coarse = midpoint(f, a, b, n);
  double prev_extrap = 0.0;
  bool have_prev = false;
  QuadResult res;
  while (2 * n <= opt.max_nodes) {
    const double fine = midpoint(f, a, b, 2 * n);
    const double extrap = (4.0 * fine - coarse) / 3.0;
    if (have_prev) {
      res.value = extrap;
      res.error = std::abs(extrap - prev_extrap);
      if (res.error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(extrap))) {
        res.converged = true;
        return res;
      }
    }
    prev_extrap = extrap;
    have_prev = true;
    coarse = fine;
    n *= 2;
  }
  res.value = prev_extrap;
  return res;
}

/// Bisection on a sign change of `g` over [lo, hi]. `g(lo)` and `g(hi)` must
/// have opposite signs (or one may be zero). Stops when the bracket is below `tol`.
template <class G>
double bisect(G&& g, double lo, double hi, double tol = 1e-15, int max_iter = 200) {
  double glo = g(lo);
  if (glo == 0.0) return lo;
  const double ghi = g(hi);
  if (ghi == 0.0) return hi;
  if ((glo < 0.0) == (ghi < 0.0)) throw std::invalid_argument("bisect: no sign change");
  for (int i = 0; i < max_iter && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Boundary of a predicate: `inside(lo) != inside(hi)`; returns the crossing point.
template <class P>
double bisect_predicate(P&& inside, double lo, double hi, double tol = 1e-15) {
  const bool at_lo = inside(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (inside(mid) == at_lo) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Strictly increasing piecewise cubic Hermite interpolant with known slopes.
/// Slopes are limited per segment (Fritsch-Carlson) so the curve stays monotone.
class MonotoneHermite {
 public:
  MonotoneHermite() = default;

  MonotoneHermite(std::vector<double> knots, std::vector<double> values, const std::vector<double>& slopes)
      : x_(std::move(knots)), y_(std::move(values)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n || slopes.size() != n)
      throw std::invalid_argument("MonotoneHermite: need matching arrays of size >= 2");
    left_.resize(n - 1);
    right_.resize(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double h = x_[k + 1] - x_[k];
      const double dy = y_[k + 1] - y_[k];
      if (!(h > 0.0) || !(dy > 0.0)) throw std::invalid_argument("MonotoneHermite: data not strictly increasing");
      const double secant = dy / h;
      double a = std::max(slopes[k], 0.0) / secant;
      double b = std::max(slopes[k + 1], 0.0) / secant;
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        a *= tau;
        b *= tau;
      }
      left_[k] = a * secant;
      right_[k] = b * secant;
    }
  }

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }
  double y_front() const { return y_.front(); }
  double y_back() const { return y_.back(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

  double operator()(double x) const {
    const std::size_t k = segment(x_, x);
    return eval(k, (x - x_[k]) / (x_[k + 1] - x_[k]));
  }

  /// Inverse by bisection inside the bracketing segment.
  double inverse(double y) const {
    const std::size_t k = segment(y_, y);
    double lo = 0.0, hi = 1.0;
    if (y <= y_[k]) return x_[k];
    if (y >= y_[k + 1]) return x_[k + 1];
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (eval(k, mid) < y) lo = mid; else hi = mid;
    }
    const double s = 0.5 * (lo + hi);
    return x_[k] + s * (x_[k + 1] - x_[k]);
  }

 private:
  static std::size_t segment(const std::vector<double>& grid, double v) {
    auto it = std::upper_bound(grid.begin(), grid.end(), v);
    std::size_t k = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
    return std::min(k, grid.size() - 2);
  }

  double eval(std::size_t k, double s) const {
    const double h = x_[k + 1] - x_[k];
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * y_[k] + h10 * h * left_[k] + h01 * y_[k + 1] + h11 * h * right_[k];
  }

  std::vector<double> x_, y_, left_, right_;
};

}  // namespace hamflow::quad
