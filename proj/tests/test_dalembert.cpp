#include "c1split/catalog.hpp"
#include "c1split/dalembert.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace c1split;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

// -l(x, o) in Minkowski space.
ScalarField minus_separation(const ChartWindow& w, const Vec& o) {
  return ScalarField::from_function(w, [o](const Vec& x) { return -oracle::minkowski_separation(x, o); });
}

bool interior(const ChartWindow& w, const Index& idx) {
  for (int k = 0; k < w.dim(); ++k)
    if (idx[k] < 1 || idx[k] > w.shape()[k] - 2) return false;
  return true;
}

}  // namespace

TEST(ComparisonFns, ClosedForms) {
  const ComparisonFns s = comparison_fns(1.0);
  EXPECT_NEAR(s.pi, M_PI, 1e-15);
  EXPECT_NEAR(s.sin(0.7), std::sin(0.7), 1e-15);
  EXPECT_NEAR(s.cot(0.7), 1.0 / std::tan(0.7), 1e-14);
  const ComparisonFns h = comparison_fns(-4.0);
  EXPECT_TRUE(std::isinf(h.pi));
  EXPECT_NEAR(h.sin(0.7), std::sinh(1.4) / 2.0, 1e-15);
  EXPECT_NEAR(h.cot(0.7), 2.0 / std::tanh(1.4), 1e-14);
  EXPECT_NEAR(comparison_fns(0.0).cot(0.25), 4.0, 1e-15);
  EXPECT_EQ(code_of([&] { s.cot(M_PI); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { h.cot(0.0); }), Errc::InvalidArgument);
}

// Property: sin_k' = cos_k and cot_k solves the Riccati equation c' = -k - c^2.
TEST(ComparisonFns, DerivativeIdentities) {
  const double d = 1e-6;
  for (double kappa : {-2.0, -0.3, 0.0, 0.5, 3.0}) {
    const ComparisonFns c = comparison_fns(kappa);
    for (double t : {0.1, 0.4, 0.8}) {
      EXPECT_NEAR((c.sin(t + d) - c.sin(t - d)) / (2 * d), c.cos(t), 1e-8);
      const double dcot = (c.cot(t + d) - c.cot(t - d)) / (2 * d);
      EXPECT_NEAR(dcot, -kappa - c.cot(t) * c.cot(t), 1e-5 * (1 + std::abs(dcot)));
    }
  }
}

TEST(ComparisonBound, DimensionOneAndFlat) {
  EXPECT_EQ(comparison_bound(1.0, -3.0, 0.5), 0.0);
  EXPECT_NEAR(comparison_bound(3.0, 0.0, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(comparison_bound(3.0, -2.0, 0.5), 2.0 / std::tanh(0.5), 1e-14);
}

TEST(PDalembert, RejectsBadExponentsAndBoundaryNodes) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 9);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 5));
  const ScalarField u = minus_separation(w, make_vec({2.0, 0.0}));
  const Index mid{4, 4, 0, 0};
  EXPECT_EQ(code_of([&] { p_dalembert(f, zero_weight(2), u, 1.0, mid); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { p_dalembert(f, zero_weight(2), u, 0.0, mid); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { p_dalembert(f, zero_weight(2), u, 0.5, Index{0, 4, 0, 0}); }), Errc::OutOfWindow);
  EXPECT_NO_THROW(p_dalembert(f, zero_weight(2), u, 0.999, mid));
}

// In Minkowski space box_p(-l) = (n - 1) / l for every p, since |d l| = 1.
TEST(PDalembert, MinkowskiSeparationSaturatesTheBound) {
  for (int n : {2, 3}) {
    const ChartWindow w = ChartWindow::cube(n, -0.5, 0.5, n == 2 ? 65 : 33);
    const MetricField f = minkowski(ChartWindow::cube(n, -1, 3, 5));
    const Vec o = 2.0 * unit(n, 0);
    const ScalarField u = minus_separation(w, o);
    const double h = w.max_spacing();
    for (double p : {-1.0, 0.5}) {
      double worst = 0.0;
      for (std::size_t i = 0; i < w.size(); i += 7) {
        const Index idx = w.unflatten(i);
        if (!interior(w, idx)) continue;
        const double l = oracle::minkowski_separation(w.node(i), o);
        worst = std::max(worst, std::abs(p_dalembert(f, zero_weight(n), u, p, idx) - (n - 1) / l) * l);
      }
      EXPECT_LT(worst, 4 * h * h) << "n = " << n << " p = " << p;
    }
  }
}

// Property: box_p is invariant under u + c and homogeneous of degree p - 1 under u -> lambda u.
TEST(PDalembert, ShiftInvariantAndHomogeneous) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 33);
  const MetricField f = flrw(ChartWindow::cube(2, -1, 1, 5), ScaleFactor::Exp);
  const WeightField V = quadratic_weight(4);
  auto u = [](const Vec& x) { return x(0) + 0.2 * x(1) * x(1) + 0.1 * x(0) * x(0); };
  const ScalarField a = ScalarField::from_function(w, u);
  const ScalarField shifted = ScalarField::from_function(w, [&](const Vec& x) { return u(x) + 5.0; });
  const double lambda = 2.5;
  const ScalarField scaled = ScalarField::from_function(w, [&](const Vec& x) { return lambda * u(x); });
  for (double p : {-1.0, 0.5}) {
    for (const Index& idx : {Index{16, 16, 0, 0}, Index{5, 27, 0, 0}, Index{30, 3, 0, 0}}) {
      const double base = p_dalembert(f, V, a, p, idx);
      EXPECT_NEAR(p_dalembert(f, V, shifted, p, idx), base, 1e-9 * (1 + std::abs(base)));
      EXPECT_NEAR(p_dalembert(f, V, scaled, p, idx), std::pow(lambda, p - 1) * base, 1e-9 * (1 + std::abs(base)));
    }
  }
}

TEST(PDalembert, LinearWeightAddsTheDriftTerm) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 65);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 3, 5));
  const Vec o = make_vec({2.0, 0.0});
  const ScalarField u = minus_separation(w, o);
  const WeightField V = linear_weight(4, 0, 0.7);
  for (const Vec& x : {make_vec({0.0, 0.0}), make_vec({0.25, 0.25}), make_vec({-0.25, -0.375})}) {
    const Index idx = w.unflatten(w.flatten(
        {static_cast<int>(std::lround((x(0) + 0.5) * 64)), static_cast<int>(std::lround((x(1) + 0.5) * 64)), 0, 0}));
    const double l = oracle::minkowski_separation(x, o);
    // |du|^{p-2} g*(dV, du) with |du| = 1 and d^0 u = (o^0 - t) / l
    const double expect = 1.0 / l + 0.7 * (o(0) - x(0)) / l;
    EXPECT_NEAR(p_dalembert(f, V, u, 0.5, idx), expect, 1e-3);
  }
}

TEST(CovariantHessian, TimeFunctionInFlrw) {
  const MetricField f = flrw(ChartWindow::cube(2, -1, 1, 5), ScaleFactor::Exp);
  const Vec x = make_vec({0.3, -0.2});
  const MetricSample s = f.eval(x);
  const Mat H = covariant_hessian(s.g, s.dg, unit(2, 0), Mat::Zero(2, 2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(H(i, j), -oracle::flrw_exp_gamma(0, i, j, x), 1e-13);
  EXPECT_NEAR(H(1, 1), -std::exp(0.6), 1e-13);
}

TEST(StrongComparison, MinkowskiIsSharp) {
  const MetricField f = minkowski(ChartWindow(make_vec({-1.2, -2.0}), make_vec({2.5, 2.0}), {9, 9}));
  const ChartWindow grid(make_vec({-1.0, -0.5}), make_vec({1.0, 0.5}), {33, 17});
  const StrongComparisonReport r = strong_comparison_check(f, zero_weight(2), 2.0, 0.0, make_vec({2.0, 0.0}), grid, 0.5);
  EXPECT_GT(r.checked, grid.size() / 2);
  EXPECT_EQ(r.masked_cut, 0u);
  EXPECT_LT(r.max_relative_gap, 1e-2);
  EXPECT_LT(r.max_relative_violation, 1e-2);
}

// In Minkowski space with N = n and no weight, the weak inequality is an equality.
TEST(WeakComparison, MinkowskiPointAndRaySourcesVanish) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 65);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 3, 5));
  const Bump phi{make_vec({0.05, -0.1}), 0.3, 1.0};
  const WeakFormResult pt =
      weak_comparison(f, zero_weight(2), 2.0, 0.5, SourceKind::Point, minus_separation(w, make_vec({2.0, 0.0})), phi);
  EXPECT_NEAR(pt.value, 0.0, 5 * pt.quadrature_error + 1e-5);
  EXPECT_EQ(pt.degenerate_nodes, 0u);
  const ScalarField t = ScalarField::from_function(w, [](const Vec& x) { return x(0); });
  const WeakFormResult ray = weak_comparison(f, zero_weight(2), 2.0, 0.5, SourceKind::Ray, t, phi);
  EXPECT_NEAR(ray.value, 0.0, 5 * ray.quadrature_error + 1e-10);
}

// Property: the weak form is linear in phi.
TEST(WeakComparison, LinearInTheTestFunction) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 33);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 3, 5));
  const ScalarField u = minus_separation(w, make_vec({2.0, 0.0}));
  const WeightField V = quadratic_weight(4);
  const Bump phi{make_vec({0.0, 0.1}), 0.25, 1.0};
  const double a = weak_comparison(f, V, 4.0, 0.5, SourceKind::Point, u, phi).value;
  const double b = weak_comparison(f, V, 4.0, 0.5, SourceKind::Point, u, phi.scaled(3.0)).value;
  EXPECT_NEAR(b, 3.0 * a, 1e-12 * (1 + std::abs(b)));
}

// Property: integration by parts moves the derivative from phi onto f.
TEST(WeakComparison, AgreesWithTheStrongFormPairing) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 65);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 3, 5));
  const ScalarField u = minus_separation(w, make_vec({2.0, 0.3}));
  const WeightField V = quadratic_weight(4);
  const Bump phi{make_vec({0.0, 0.1}), 0.3, 1.0};
  for (double p : {-1.0, 0.5}) {
    const WeakFormResult weak = weak_comparison(f, V, 4.0, p, SourceKind::Point, u, phi);
    const QuadratureResult strong = strong_form_pairing(f, V, 4.0, p, SourceKind::Point, u, phi);
    EXPECT_NEAR(weak.value, strong.value, 5 * (weak.quadrature_error + strong.error) + 1e-4) << "p = " << p;
  }
}

TEST(WeakComparison, DegenerateGradientIsRejected) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 33);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 5));
  const ScalarField spacelike = ScalarField::from_function(w, [](const Vec& x) { return x(1); });
  EXPECT_EQ(code_of([&] {
              weak_comparison(f, zero_weight(2), 2.0, 0.5, SourceKind::Ray, spacelike, Bump{zeros(2), 0.3, 1.0});
            }),
            Errc::DegenerateGradient);
}

TEST(Tangency, CoincidentGradientsGiveTheAnchorMatrix) {
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 5));
  const WeightField V = quadratic_weight(4);
  const Vec x = make_vec({0.1, 0.3});
  const double scale = std::exp(-0.09);
  for (double p : {-1.0, 0.5}) {
    const TangencyCoefficients T = tangency_coefficients(f, V, x, unit(2, 0), unit(2, 0), p);
    Mat expect = Mat::Zero(2, 2);
    expect(0, 0) = (1 - p) * scale;
    expect(1, 1) = scale;
    EXPECT_LT((T.a - expect).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(T.c(1), scale * 0.6, 1e-13);
    EXPECT_NEAR(T.min_eigenvalue, std::min(1 - p, 1.0) * scale, 1e-13);
  }
}

// Property: a is uniformly elliptic while the interpolated gradients stay timelike.
TEST(Tangency, EllipticForTimelikePairs) {
  const MetricField f = flrw(ChartWindow::cube(2, -1, 1, 5), ScaleFactor::Cosh);
  for (const Vec& r : oracle::random_points(make_vec({-0.5, -0.5, -0.5}), make_vec({0.5, 0.5, 0.5}), 20, 7)) {
    const Vec x = make_vec({0.0, r(0)});
    const Vec dp = make_vec({1.0, r(1)}), dm = make_vec({1.0, r(2)});
    const TangencyCoefficients T = tangency_coefficients(f, zero_weight(2), x, dp, dm, 0.5);
    EXPECT_GT(T.min_eigenvalue, 0.0);
    EXPECT_LE(T.min_eigenvalue, T.max_eigenvalue);
  }
  EXPECT_EQ(code_of([&] { tangency_coefficients(f, zero_weight(2), zeros(2), unit(2, 0), make_vec({1.0, 1.2}), 0.5); }),
            Errc::DegenerateGradient);
}

TEST(BochnerOhta, FlatIdentityHolds) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 65);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 5));
  const ScalarField u = ScalarField::from_function(w, [](const Vec& x) { return x(0) + 0.1 * x(1) * x(1); });
  const Bump phi{zeros(2), 0.3, 1.0};
  const double h = w.max_spacing();
  for (double p : {-1.0, 0.5}) {
    const BochnerOhtaResult r = bochner_ohta_residual(f, zero_weight(2), p, u, phi, flat_curvature());
    EXPECT_LE(r.residual, 10 * h * h * std::max({1.0, std::abs(r.lhs), std::abs(r.rhs)})) << "p = " << p;
  }
}

TEST(BochnerOhta, WeightCurvatureIsNeeded) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 65);
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 5));
  const WeightField V = quadratic_weight(std::numeric_limits<double>::infinity());
  const ScalarField u =
      ScalarField::from_function(w, [](const Vec& x) { return x(0) + 0.5 * x(1) + 0.1 * x(0) * x(0); });
  const Bump phi{make_vec({0.0, 0.1}), 0.3, 1.0};
  const double h = w.max_spacing();
  const BochnerOhtaResult r =
      bochner_ohta_residual(f, V, 0.5, u, phi, weight_hessian_curvature(make_weight_hessian("quadratic")));
  const double tol = 10 * h * h * std::max({1.0, std::abs(r.lhs), std::abs(r.rhs)});
  EXPECT_LE(r.residual, tol);
  EXPECT_GT(bochner_ohta_residual(f, V, 0.5, u, phi, flat_curvature()).residual, 3 * tol);
}
