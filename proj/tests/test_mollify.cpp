#include "c1split/catalog.hpp"
#include "c1split/mollify.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace c1split;

namespace {

// d_k d_l g_ij by central differences of the exact first derivatives.
Tensor4 second_derivatives(const MetricField& f, const Vec& x, double h = 1e-5) {
  const int n = f.dim();
  Tensor4 dd(n);
  for (int k = 0; k < n; ++k) {
    const Tensor3 p = f.dg(x + h * unit(n, k)), m = f.dg(x - h * unit(n, k));
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dd(k, l, i, j) = (p(l, i, j) - m(l, i, j)) / (2 * h);
  }
  return dd;
}

}  // namespace

TEST(Mollifier, UnitMassSymmetricCompactSupport) {
  for (int n : {1, 2, 3}) {
    const Mollifier k = make_mollifier(n, 0.2);
    EXPECT_NEAR(k.mass(), 1.0, 1e-14);
    Vec first = Vec::Zero(n), dsum = Vec::Zero(n);
    for (std::size_t q = 0; q < k.offsets.size(); ++q) {
      EXPECT_LT(k.offsets[q].norm(), 0.2);
      EXPECT_GT(k.weights[q], 0.0);
      first += k.weights[q] * k.offsets[q];
      dsum += k.dweights[q];
    }
    EXPECT_LT(first.norm(), 1e-15);
    EXPECT_LT(dsum.norm(), 1e-10);
  }
  EXPECT_THROW(make_mollifier(2, 0.0), Error);
}

TEST(ClassicalRicci, MatchesClosedForms) {
  const ChartWindow w = ChartWindow::cube(3, -0.5, 0.5, 5);
  const MetricField fe = flrw(w, ScaleFactor::Exp);
  const MetricField ph = product_hyperbolic(w);
  for (const Vec& x : oracle::random_points(w.shrunk(0.01).lo(), w.shrunk(0.01).hi(), 8, 13)) {
    const MetricSample a = fe.eval(x);
    EXPECT_LT((classical_ricci(a.g, a.dg, second_derivatives(fe, x)) - oracle::flrw_exp_ricci(x)).cwiseAbs().maxCoeff(),
              1e-7);
    const MetricSample b = ph.eval(x);
    EXPECT_LT(
        (classical_ricci(b.g, b.dg, second_derivatives(ph, x)) - oracle::product_hyperbolic_ricci(x)).cwiseAbs().maxCoeff(),
        1e-6);
  }
}

TEST(GoodApproximation, SmoothMetricIsReproduced) {
  const MetricField f = flrw(ChartWindow::cube(2, -1, 1, 9), ScaleFactor::Exp);
  const GoodApproximation A = good_approximation(f, zero_weight(2), 0.1);
  EXPECT_GT(A.min_margin, 0.0);
  EXPECT_GT(A.c, 0.0);
  EXPECT_EQ(A.smoothed.regularity(), Regularity::Smooth);
  EXPECT_NEAR(A.smoothed.window().lo(0), -0.9, 1e-6);
  // g_eps is Lorentzian with the same time orientation
  const Vec x = make_vec({0.2, 0.3});
  EXPECT_EQ(positive_eigenvalues(A.smoothed.g(x)), 1);
  EXPECT_EQ(causal_character(A.smoothed, x, unit(2, 0)), CausalCharacter::FutureTimelike);
}

// Property: every g_eps-null vector is g-timelike (narrower cones).
TEST(GoodApproximation, ConesAreNarrower) {
  const MetricField f = c1_perturbed(ChartWindow::cube(2, -1, 1, 9));
  const GoodApproximation A = good_approximation(f, zero_weight(2), 0.05);
  for (const Vec& x : oracle::random_points(make_vec({-0.8, -0.8}), make_vec({0.8, 0.8}), 20, 3)) {
    const Mat ge = A.smoothed.g(x), g = f.g(x);
    // both null directions of g_eps, v = (1, r) with ge(v, v) = 0
    for (double s : {-1.0, 1.0}) {
      const double a = ge(1, 1), b = 2 * ge(0, 1), c = ge(0, 0);
      const double root = (-b + s * std::sqrt(b * b - 4 * a * c)) / (2 * a);
      const Vec v = make_vec({1.0, root});
      EXPECT_NEAR(v.dot(ge * v), 0.0, 1e-10);
      EXPECT_GT(v.dot(g * v), 0.0);
    }
  }
}

TEST(GoodApproximation, C1ErrorShrinksWithEps) {
  const ChartWindow measure = ChartWindow::cube(2, -0.5, 0.5, 9);
  for (const MetricField& f : {flrw(ChartWindow::cube(2, -1, 1, 9), ScaleFactor::Exp),
                               c1_perturbed(ChartWindow::cube(2, -1, 1, 9))}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.1, 0.05, 0.025}) {
      GoodApproxOptions o;
      o.measure_window = measure;
      const GoodApproximation A = good_approximation(f, zero_weight(2), eps, o);
      EXPECT_GT(A.min_margin, 0.0) << f.name() << " eps " << eps;
      EXPECT_LE(A.c1_error, prev) << f.name() << " eps " << eps;
      prev = A.c1_error;
    }
  }
}

TEST(GoodApproximation, CollarTooThin) {
  const MetricField f = minkowski(ChartWindow::cube(2, -0.1, 0.1, 5));
  try {
    good_approximation(f, zero_weight(2), 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CollarTooThin);
  }
  GoodApproxOptions o;
  o.measure_window = ChartWindow::cube(2, -0.1, 0.1, 5);
  try {
    good_approximation(f, zero_weight(2), 0.05, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CollarTooThin);
  }
}

TEST(GoodApproximation, SmoothedWeightKeepsConstantsAndLinears) {
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 9));
  const GoodApproximation A = good_approximation(f, linear_weight(4, 1, 2.0), 0.1);
  const Vec x = make_vec({0.1, 0.3});
  EXPECT_NEAR(A.V_eps(x), 0.6, 1e-12);
  EXPECT_NEAR(A.V_eps.gradient(x)(1), 2.0, 1e-12);
  EXPECT_LT(A.ddV(x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CurvatureDegradation, MinkowskiHasNone) {
  const MetricField f = minkowski(ChartWindow::cube(2, -1, 1, 9));
  const GoodApproximation A = good_approximation(f, zero_weight(2), 0.1);
  const DegradationReport d = curvature_degradation(A, 2, 0.0, make_vec({-0.5, -0.5}), make_vec({0.5, 0.5}), 3);
  EXPECT_LT(d.delta, 1e-6);
}

TEST(CurvatureDegradation, FlrwApproachesTheSharpBound) {
  const MetricField f = flrw(ChartWindow::cube(2, -1, 1, 9), ScaleFactor::Exp);
  double prev = std::numeric_limits<double>::infinity();
  // second-order convergence: halving eps divides the loss by about 4
  for (double eps : {0.2, 0.1, 0.05}) {
    const GoodApproximation A = good_approximation(f, zero_weight(2), eps);
    const DegradationReport d = curvature_degradation(A, 2, -1.0, make_vec({-0.4, -0.4}), make_vec({0.4, 0.4}), 3);
    EXPECT_LE(d.delta, 0.5 * prev) << "eps " << eps;
    prev = d.delta;
  }
  EXPECT_LT(prev, 0.1);
  const GoodApproximation A = good_approximation(f, zero_weight(2), 0.1);
  const double be = mollified_curvature(A)(make_vec({0.0, 0.0}), unit(2, 0));
  EXPECT_NEAR(be, -1.0, 0.05);
}
