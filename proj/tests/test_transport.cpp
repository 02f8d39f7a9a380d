#include <gtest/gtest.h>

#include <cmath>

#include "hamflow/hamflow.hpp"

using namespace hamflow;

namespace {

std::shared_ptr<const FiberCache> linear_cache() {
  const auto H = scenarios::field("linear");
  return std::make_shared<const FiberCache>(build_chart(H, {0, 0}, PxWitness{{-1, 0}, 1.0, 2.0}, 1.0));
}

std::shared_ptr<const FiberCache> shear_cache() {
  const auto H = scenarios::field("shear");
  return std::make_shared<const FiberCache>(build_chart(H, {0, 0}, PxWitness{{-1, 0}, 1.0, 1.0}, 0.5));
}

}  // namespace

TEST(Translate, IndicatorShifts) {
  auto ind = [](double z) { return (z > 0 && z < 1) ? 1.0 : 0.0; };
  const auto w = translate_1d(ind, 0.5);
  EXPECT_EQ(w(0.4), 0.0);
  EXPECT_EQ(w(0.6), 1.0);
  EXPECT_EQ(w(1.4), 1.0);
  EXPECT_EQ(w(1.6), 0.0);
}

TEST(Translate, SineByPiIsNegated) {
  const auto w = translate_1d([](double z) { return std::sin(z); }, pi);
  for (double z : {-1.0, 0.3, 2.0}) EXPECT_NEAR(w(z), -std::sin(z), 1e-15);
}

TEST(Translate, ZeroTimeIsIdentity) {
  auto f = [](double z) { return z * z - 3 * z; };
  const auto w = translate_1d(f, 0.0);
  for (double z : {-1.0, 0.3, 2.0}) EXPECT_EQ(w(z), f(z));
}

TEST(ChartPullback, ConstantFieldShiftsDatum) {
  // b = (-1, 0): X(t, x) = (x1 - t, x2), so u(t, x) = x1 + t.
  const auto u = chart_pullback_solution(linear_cache(), [](const Vec2& x) { return x.x; });
  for (const Vec2& x : sampling::box_points({-0.5, -0.8}, {0.5, 0.8}, 200))
    for (double t : {0.1, 0.3}) {
      const auto v = u(t, x);
      ASSERT_TRUE(v);
      EXPECT_NEAR(*v, x.x + t, 1e-11);
    }
  // Backward characteristic leaves U through x1 = 1.
  EXPECT_FALSE(u(0.5, {0.7, 0.0}));
  EXPECT_FALSE(u(0.1, {1.5, 0.0}));
}

TEST(ChartPullback, ConstantDatum) {
  const auto u = chart_pullback_solution(shear_cache(), [](const Vec2&) { return 1.0; });
  for (const Vec2& x : sampling::box_points({-0.2, -0.2}, {0.2, 0.2}, 100)) EXPECT_EQ(*u(0.1, x), 1.0);
}

TEST(ChartPullback, HamiltonianIsInvariant) {
  const auto H = scenarios::field("shear");
  const auto u = chart_pullback_solution(shear_cache(), [H](const Vec2& x) { return H(x); });
  for (const Vec2& x : sampling::box_points({-0.2, -0.2}, {0.2, 0.2}, 200))
    for (double t : {0.05, 0.15, -0.1}) {
      const auto v = u(t, x);
      ASSERT_TRUE(v);
      EXPECT_NEAR(*v, H(x), 1e-10);
    }
}

TEST(ChartPullback, ExactAtTimeZero) {
  auto u0 = [](const Vec2& x) { return std::sin(3 * x.x) + x.y * x.y; };
  const auto u = chart_pullback_solution(shear_cache(), u0);
  for (const Vec2& x : sampling::box_points({-0.45, -0.45}, {0.45, 0.45}, 200)) EXPECT_EQ(*u(0.0, x), u0(x));
}

TEST(ChartPullback, GroupLaw) {
  auto u0 = [](const Vec2& x) { return std::sin(3 * x.x) + x.y; };
  const auto cache = shear_cache();
  const auto u = chart_pullback_solution(cache, u0);
  const double s = 0.07, t = 0.05;
  const auto v = chart_pullback_solution(cache, [&](const Vec2& x) { return u(s, x).value_or(NAN); });
  std::size_t checked = 0;
  for (const Vec2& x : sampling::box_points({-0.2, -0.2}, {0.2, 0.2}, 200)) {
    const auto a = v(t, x), b = u(s + t, x);
    if (!a || !b || std::isnan(*a)) continue;
    EXPECT_NEAR(*a, *b, 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 150u);
}

TEST(ChartPullback, RangeIsPreserved) {
  auto u0 = [](const Vec2& x) { return std::tanh(4 * x.x - x.y); };
  const auto u = chart_pullback_solution(shear_cache(), u0);
  // On U = (-0.5, 0.5)^2 the argument 4 x1 - x2 stays in (-2.5, 2.5).
  for (const Vec2& x : sampling::box_points({-0.3, -0.3}, {0.3, 0.3}, 500)) {
    const auto v = u(0.15, x);
    if (!v) continue;
    EXPECT_GE(*v, std::tanh(-2.5));
    EXPECT_LE(*v, std::tanh(2.5));
  }
}

TEST(ClassicalSolution, HarmonicHalfTurn) {
  const auto V = scenarios::potential("harmonic", {1.0}, {-5, 5});
  const auto u = classical_solution(V, [](const Vec2& p) { return p.x; }, {-5, 5});
  for (const Vec2& p : sampling::box_points({-2, -2}, {2, 2}, 100)) EXPECT_NEAR(*u(pi, p), -p.x, 1e-6);
}

TEST(Renormalize, IdentityIsSameSolution) {
  const auto u = chart_pullback_solution(shear_cache(), [](const Vec2& x) { return x.x + 2 * x.y; });
  const auto v = renormalize(u, beta::identity());
  for (const Vec2& x : sampling::box_points({-0.2, -0.2}, {0.2, 0.2}, 50)) EXPECT_EQ(*v(0.1, x), *u(0.1, x));
}

TEST(Renormalize, SquareOfConstant) {
  const auto u = chart_pullback_solution(shear_cache(), [](const Vec2&) { return 2.0; });
  const auto v = renormalize(u, beta::square());
  EXPECT_EQ(*v(0.1, {0.0, 0.0}), 4.0);
  EXPECT_EQ(v.initial({0.1, 0.1}), 4.0);
}

TEST(Renormalize, CommutesWithEvaluation) {
  const auto u = chart_pullback_solution(shear_cache(), [](const Vec2& x) { return std::sin(5 * x.x) + x.y; });
  for (const Beta& b : {beta::square(), beta::arctan(), beta::clip(-0.2, 0.3)}) {
    const auto v = renormalize(u, b);
    for (const Vec2& x : sampling::box_points({-0.2, -0.2}, {0.2, 0.2}, 50)) EXPECT_EQ(*v(0.12, x), b(*u(0.12, x)));
  }
}

TEST(Beta, NamesAndBounds) {
  EXPECT_EQ(beta::by_name("id").name, "id");
  EXPECT_EQ(beta::by_name("clip", {0, 2})(3.0), 2.0);
  EXPECT_THROW(beta::by_name("cube"), ConfigError);
  EXPECT_THROW(beta::by_name("clip", {1.0}), ConfigError);
  EXPECT_THROW(beta::clip(1.0, 0.0), ConfigError);
  const RenormalizationFamily fam({beta::identity(), beta::square(), beta::arctan(), beta::clip(-1, 1)});
  const auto bounds = fam.derivative_bounds(-2.0, 2.0);
  EXPECT_DOUBLE_EQ(bounds[0], 1.0);
  EXPECT_DOUBLE_EQ(bounds[1], 4.0);
  EXPECT_DOUBLE_EQ(bounds[2], 1.0);
  EXPECT_DOUBLE_EQ(bounds[3], 1.0);
  // Derivatives match central differences.
  for (const Beta& b : {beta::square(), beta::arctan()})
    for (double s : {-1.3, 0.2, 0.9}) EXPECT_NEAR(b.df(s), (b(s + 1e-6) - b(s - 1e-6)) / 2e-6, 1e-8);
}

TEST(Provenance, Names) {
  EXPECT_STREQ(to_string(Provenance::ChartPullback), "chart-pullback");
  EXPECT_EQ(chart_pullback_solution(shear_cache(), [](const Vec2&) { return 0.0; }).provenance(),
            Provenance::ChartPullback);
}
