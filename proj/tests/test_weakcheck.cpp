#include <gtest/gtest.h>

#include <cmath>

#include "hamflow/hamflow.hpp"

using namespace hamflow;

namespace {

PlanarVectorField constant_field(Vec2 v) {
  return PlanarVectorField([v](const Vec2&) { return v; });
}

// Exact solution of d_t u + b . grad u = 0 for constant b.
TransportSolution advected(Vec2 v, TransportSolution::Datum u0) {
  return TransportSolution([v, u0](double t, const Vec2& x) -> std::optional<double> { return u0(x - t * v); }, u0,
                           Provenance::Classical);
}

WeakGrid grid(std::size_t n) {
  WeakGrid g;
  g.n_t = g.n_x = n;
  return g;
}

double smooth_datum(const Vec2& x) { return std::sin(2 * x.x) * std::cos(x.y) + 0.3 * x.y; }

std::shared_ptr<const FiberCache> shear_cache() {
  const auto H = scenarios::field("shear");
  return std::make_shared<const FiberCache>(build_chart(H, {0, 0}, PxWitness{{-1, 0}, 1.0, 0.8}, 0.4));
}

}  // namespace

TEST(Bump, DerivativeMatchesCentralDifference) {
  for (double s = -0.95; s < 0.95; s += 0.05) {
    const double h = 1e-6;
    const double fd = (bump::value(s + h) - bump::value(s - h)) / (2 * h);
    EXPECT_NEAR(bump::derivative(s), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  EXPECT_EQ(bump::value(1.0), 0.0);
  EXPECT_EQ(bump::value(-1.5), 0.0);
  EXPECT_EQ(bump::derivative(1.0), 0.0);
}

TEST(TestFunctionGradient, MatchesFiniteDifferences) {
  for (Profile p : {Profile::Tensor, Profile::Radial, Profile::Modulated}) {
    const TestFunction phi(0.3, {0.1, -0.2}, 0.2, 0.5, p);
    for (const Vec2& x : sampling::box_points({-0.3, -0.6}, {0.5, 0.2}, 60))
      for (double t : {0.2, 0.35}) {
        const double h = 1e-6;
        const Vec2 g = phi.grad(t, x);
        EXPECT_NEAR(g.x, (phi(t, x + Vec2{h, 0}) - phi(t, x - Vec2{h, 0})) / (2 * h), 1e-6) << to_string(p);
        EXPECT_NEAR(g.y, (phi(t, x + Vec2{0, h}) - phi(t, x - Vec2{0, h})) / (2 * h), 1e-6) << to_string(p);
        EXPECT_NEAR(phi.dt(t, x), (phi(t + h, x) - phi(t - h, x)) / (2 * h), 1e-5) << to_string(p);
      }
  }
}

TEST(WeakResidual, ConstantSolutionVanishes) {
  const auto b = constant_field({-1.0, 0.5});
  const auto u = advected({-1.0, 0.5}, [](const Vec2&) { return 2.0; });
  for (double t0 : {0.05, 0.4}) {
    const TestFunction phi(t0, {0.0, 0.0}, 0.2, 0.3);
    std::vector<double> r;
    for (std::size_t n : doubling_schedule(8)) r.push_back(weak_residual(u, b, phi, grid(n)));
    EXPECT_LT(r.back(), 1e-5);
    EXPECT_TRUE(ladder_passes(r, {}));
    if (r.front() > 1e-12) {
      EXPECT_GE(overall_order(r, 1e-14), 1.5);
    }
  }
}

TEST(WeakResidual, TranslationConvergesAtSecondOrder) {
  // b = (-1, 0): u(t, x) = u0(x1 + t, x2).
  const auto b = constant_field({-1.0, 0.0});
  const auto u = advected({-1.0, 0.0}, smooth_datum);
  const TestFunction phi(0.1, {0.1, 0.0}, 0.15, 0.3, Profile::Modulated);
  std::vector<double> r;
  for (std::size_t n : doubling_schedule(8, 4)) r.push_back(weak_residual(u, b, phi, grid(n)));
  EXPECT_GE(overall_order(r, 1e-14), 1.8);
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_LE(r[k], 0.6 * r[k - 1]);
}

TEST(WeakResidual, NonSolutionPlateaus) {
  const auto b = constant_field({-1.0, 0.0});
  const auto good = advected({-1.0, 0.0}, smooth_datum);
  const TransportSolution bad(
      [good](double t, const Vec2& x) -> std::optional<double> { return good(t, x).value() + t; }, good.datum(),
      Provenance::Classical);
  const TestFunction phi(0.2, {0.0, 0.0}, 0.15, 0.3);
  std::vector<double> r;
  for (std::size_t n : doubling_schedule(8)) r.push_back(weak_residual(bad, b, phi, grid(n)));
  // The residual converges to int phi dx dt, not to zero.
  EXPECT_GT(r.back(), 1e-3);
  EXPECT_NEAR(r.back() / r[r.size() - 2], 1.0, 1e-2);
  EXPECT_FALSE(ladder_passes(r, {}));
}

TEST(WeakResidual, IsLinearInTheSolution) {
  const auto b = constant_field({-1.0, 0.0});
  const auto u = advected({-1.0, 0.0}, smooth_datum);
  const TransportSolution bad([](double t, const Vec2& x) -> std::optional<double> { return t * x.x; },
                              [](const Vec2&) { return 0.0; }, Provenance::Classical);
  const TransportSolution sum([&](double t, const Vec2& x) -> std::optional<double> { return *u(t, x) + *bad(t, x); },
                              u.datum(), Provenance::Classical);
  // A solution adds nothing to a non-solution's residual in the limit.
  const TestFunction phi(0.2, {0.0, 0.0}, 0.15, 0.3);
  const WeakGrid g = grid(64);
  EXPECT_NEAR(weak_residual(sum, b, phi, g), weak_residual(bad, b, phi, g), 1e-5);
}

TEST(WeakResidual, RefusesExclusionBand) {
  const auto b = constant_field({-1.0, 0.0});
  const auto u = advected({-1.0, 0.0}, smooth_datum);
  WeakGrid g = grid(8);
  g.exclusion = 0.1;
  EXPECT_THROW(weak_residual(u, b, TestFunction(0.2, {0.0, 0.05}, 0.1, 0.2), g), EvaluationError);
  EXPECT_NO_THROW(weak_residual(u, b, TestFunction(0.2, {0.0, 0.5}, 0.1, 0.2), g));
}

TEST(WeakResidual, RefusesUndefinedSolution) {
  const auto b = constant_field({-1.0, 0.0});
  const TransportSolution u([](double, const Vec2& x) -> std::optional<double> {
    if (x.x > 0.1) return std::nullopt;
    return 1.0;
  }, [](const Vec2&) { return 1.0; }, Provenance::Classical);
  EXPECT_THROW(weak_residual(u, b, TestFunction(0.2, {0.0, 0.0}, 0.1, 0.2), grid(8)), EvaluationError);
}

TEST(WeakResidual, ThreadCountDoesNotChangeTheSum) {
  const auto b = constant_field({-1.0, 0.0});
  const auto u = advected({-1.0, 0.0}, smooth_datum);
  const TestFunction phi(0.1, {0.1, 0.0}, 0.15, 0.3, Profile::Radial);
  WeakGrid g = grid(32);
  const double r1 = weak_residual(u, b, phi, g);
  g.threads = 4;
  EXPECT_EQ(r1, weak_residual(u, b, phi, g));
}

TEST(CheckR, IdentityRowIsThePlainResidual) {
  const auto b = constant_field({-1.0, 0.0});
  const auto u = advected({-1.0, 0.0}, smooth_datum);
  const TestFunction phi(0.1, {0.1, 0.0}, 0.15, 0.3);
  const auto sched = doubling_schedule(8, 3);
  const auto rep = check_R(u, b, RenormalizationFamily({beta::identity()}), {phi}, sched);
  ASSERT_EQ(rep.rows.size(), 1u);
  for (std::size_t k = 0; k < sched.size(); ++k)
    EXPECT_EQ(rep.rows[0].residuals[k], weak_residual(u, b, phi, grid(sched[k])));
}

TEST(CheckR, ChartPullbackRenormalizes) {
  const auto H = scenarios::field("shear");
  const auto b = derive_field(H);
  const auto u = chart_pullback_solution(shear_cache(), scenarios::datum("sin", {3.0}));
  const auto phis = test_family(0.1, 0.1, {{-0.15, 0.0}}, {0.15}, {Profile::Tensor});
  const auto rep = check_R(u, b, RenormalizationFamily({beta::identity(), beta::square(), beta::arctan()}), phis,
                           {6, 12, 24, 48});
  ASSERT_EQ(rep.rows.size(), 3u);
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(row.pass) << row.beta << " order " << row.order;
    EXPECT_GE(row.order, 1.0);
  }
  EXPECT_TRUE(rep.pass());
}

TEST(CheckR, AveragedCounterexampleFailsForSquare) {
  using namespace counterexample;
  const auto u0 = scenarios::datum("x1_box");
  const auto u = solution_family(u0, averaged_datum(u0));
  WeakGrid base;
  base.polar_center = Vec2{0.0, 0.0};
  // Modulated, so the odd datum does not cancel by symmetry.
  const auto phis = test_family(0.2, 0.15, {{0.0, 0.0}}, {0.4}, {Profile::Modulated});
  const auto rep = check_R(u, vector_field(), RenormalizationFamily({beta::identity(), beta::square()}), phis,
                           doubling_schedule(8, 4), base);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_TRUE(rep.rows[0].pass) << "id order " << rep.rows[0].order;
  EXPECT_GT(rep.rows[0].residuals.front(), 1e-6);
  EXPECT_FALSE(rep.rows[1].pass) << "square order " << rep.rows[1].order;
  EXPECT_GT(rep.rows[1].residuals.back(), 1e-3);
  EXPECT_FALSE(rep.pass());
}

TEST(CheckR, ShrinkingExclusionBandIsStable) {
  // Supports that keep off |x2| < rho miss the origin, where the averaged
  // solution loses renormalization, so every beta converges for every rho.
  using namespace counterexample;
  const auto u0 = scenarios::datum("x1_box");
  const auto u = solution_family(u0, averaged_datum(u0));
  for (double rho : {0.2, 0.1, 0.05, 0.025}) {
    WeakGrid base;
    base.exclusion = rho;
    base.polar_center = Vec2{0.0, 0.0};
    const std::vector<TestFunction> phis{{0.1, Vec2{0.1, -(rho + 0.201)}, 0.08, 0.2, Profile::Modulated}};
    const auto rep = check_R(u, vector_field(), RenormalizationFamily({beta::identity(), beta::square()}), phis,
                             doubling_schedule(8, 4), base);
    for (const auto& row : rep.rows) {
      EXPECT_TRUE(row.pass) << "rho " << rho << " " << row.beta << " order " << row.order;
      EXPECT_LT(row.residuals.back(), 1e-6);
    }
  }
}

TEST(Ladder, OrdersAndVerdicts) {
  EXPECT_EQ(doubling_schedule(8, 4), (std::vector<std::size_t>{8, 16, 32, 64}));
  const std::vector<double> quad{1.0, 0.25, 0.0625};
  EXPECT_DOUBLE_EQ(overall_order(quad, 1e-12), 2.0);
  const auto o = observed_orders(quad, 1e-12);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_DOUBLE_EQ(o[0], 2.0);
  EXPECT_TRUE(ladder_passes(quad, {}));
  // Stalled in the middle but first order overall.
  EXPECT_TRUE(ladder_passes({1.0, 1.1, 0.2, 0.1}, {}));
  EXPECT_FALSE(ladder_passes({1.0, 0.9, 0.8}, {}));
  EXPECT_TRUE(ladder_passes({1e-3, 1e-3, 1e-11}, {}));
  EXPECT_FALSE(ladder_passes({}, {}));
  EXPECT_EQ(overall_order({0.5}, 1e-10), 0.0);
}

TEST(TestFamily, CartesianProduct) {
  const auto f = test_family(0.2, 0.1, {{0, 0}, {1, 1}}, {0.1, 0.2, 0.3});
  EXPECT_EQ(f.size(), 2u * 3u * 3u);
  EXPECT_THROW(TestFunction(0.0, {0, 0}, 0.0, 1.0), std::invalid_argument);
}
