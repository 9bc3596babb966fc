#include "c1split/catalog.hpp"
#include "c1split/chart.hpp"
#include "c1split/grid_metric.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace c1split;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(ChartWindow, FlattenRoundTrip) {
  const ChartWindow w(make_vec({-1, 0, 2}), make_vec({1, 1, 3}), {5, 7, 3});
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w.flatten(w.unflatten(i)), i);
  const auto idx = w.unflatten(w.size() - 1);
  EXPECT_TRUE(w.node(idx).isApprox(w.hi()));
  EXPECT_NEAR(w.spacing(0), 0.5, 1e-15);
}

TEST(ChartWindow, CoarsenedKeepsEvenNodes) {
  const ChartWindow w = ChartWindow::cube(2, -1, 1, 9);
  const ChartWindow c = w.coarsened();
  EXPECT_EQ(c.shape()[0], 5);
  EXPECT_NEAR(c.spacing(1), 2 * w.spacing(1), 1e-15);
  EXPECT_EQ(code_of([] { ChartWindow::cube(2, -1, 1, 8).coarsened(); }), Errc::InvalidArgument);
}

TEST(ChartWindow, ShrunkAndContains) {
  const ChartWindow w = ChartWindow::cube(2, -1, 1, 5);
  const ChartWindow s = w.shrunk(0.25);
  EXPECT_TRUE(s.contains(make_vec({0.75, -0.75})));
  EXPECT_FALSE(s.contains(make_vec({0.8, 0.0})));
  EXPECT_FALSE(w.contains(make_vec({1.01, 0.0})));
}

TEST(MetricField, OutOfWindowIsAnError) {
  const MetricField m = minkowski(ChartWindow::cube(2, -1, 1, 5));
  EXPECT_EQ(code_of([&] { m.g(make_vec({2.0, 0.0})); }), Errc::OutOfWindow);
  EXPECT_EQ(code_of([&] { m.with_window(ChartWindow::cube(2, -1e6, 1e6, 5)); }), Errc::OutOfWindow);
}

TEST(MetricField, CatalogMatchesClosedForms) {
  const ChartWindow w = ChartWindow::cube(3, -0.5, 0.5, 5);
  const MetricField f = flrw(w, ScaleFactor::Exp);
  for (const Vec& x : oracle::random_points(w.lo(), w.hi(), 20, 1)) {
    EXPECT_LT((f.g(x) - oracle::flrw_exp_metric(x)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((minkowski(w).g(x) - oracle::minkowski_metric(3)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

// Property: dg is the derivative of g for every catalog metric.
TEST(MetricField, DerivativeMatchesFiniteDifferences) {
  const ChartWindow w(make_vec({-0.5, -0.4, -0.4}), make_vec({0.5, 0.4, 0.4}), {5, 5, 5});
  const std::vector<MetricField> fields = {minkowski(w), flrw(w, ScaleFactor::Exp), flrw(w, ScaleFactor::Cosh),
                                           product_hyperbolic(w), c1_perturbed(w, 0.5, -0.5, 0.05)};
  const double h = 1e-6;
  for (const MetricField& f : fields) {
    for (const Vec& x : oracle::random_points(w.shrunk(0.01).lo(), w.shrunk(0.01).hi(), 15, 7)) {
      const Tensor3 d = f.dg(x);
      for (int k = 0; k < 3; ++k) {
        const Mat fd = (f.g(x + h * unit(3, k)) - f.g(x - h * unit(3, k))) / (2 * h);
        EXPECT_LT((fd - d.slice(k)).cwiseAbs().maxCoeff(), 1e-6) << f.name() << " axis " << k;
      }
    }
  }
}

TEST(MetricField, LorentzianSignatureAcrossCatalog) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 5);
  for (const auto& e : catalog_entries()) {
    if (e.kind != "metric") continue;
    const MetricField f = make_metric(e.id, w);
    for (const Vec& x : oracle::random_points(w.lo(), w.hi(), 10, 3)) {
      EXPECT_EQ(positive_eigenvalues(f.g(x)), 1) << e.id;
      EXPECT_EQ(causal_character(f, x, f.orientation(x)), CausalCharacter::FutureTimelike) << e.id;
    }
  }
}

TEST(CausalCharacter, Classification) {
  const Mat g = oracle::minkowski_metric(2);
  const Vec F = unit(2, 0);
  EXPECT_EQ(causal_character(g, F, make_vec({1, 0.5})), CausalCharacter::FutureTimelike);
  EXPECT_EQ(causal_character(g, F, make_vec({-1, 0.5})), CausalCharacter::PastTimelike);
  EXPECT_EQ(causal_character(g, F, make_vec({1, 1})), CausalCharacter::FutureNull);
  EXPECT_EQ(causal_character(g, F, make_vec({-1, 1})), CausalCharacter::PastNull);
  EXPECT_EQ(causal_character(g, F, make_vec({0.5, 1})), CausalCharacter::Spacelike);
  EXPECT_EQ(causal_character(g, F, make_vec({0, 0})), CausalCharacter::Zero);
}

TEST(TimeReversal, FlipsOrientationAndKeepsSignature) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 5);
  const MetricField f = flrw(w, ScaleFactor::Exp);
  const MetricField r = time_reversed(f);
  const Vec x = make_vec({0.3, 0.1});
  const Vec rx = make_vec({-0.3, 0.1});
  EXPECT_LT((r.g(rx) - f.g(x)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(r.dg(rx)(0, 1, 1), -f.dg(x)(0, 1, 1), 1e-14);
  EXPECT_EQ(causal_character(r, rx, unit(2, 0)), CausalCharacter::FutureTimelike);
}

TEST(Weight, Conventions) {
  EXPECT_NO_THROW(validate_weight(zero_weight(2), 2));
  EXPECT_NO_THROW(validate_weight(quadratic_weight(4), 2));
  EXPECT_EQ(code_of([] { validate_weight(quadratic_weight(2), 2); }), Errc::ConventionViolation);
  EXPECT_EQ(code_of([] { validate_weight(zero_weight(1), 2); }), Errc::ConventionViolation);
  const WeightField V = quadratic_weight(4, 1, 3.0);
  EXPECT_DOUBLE_EQ(V(make_vec({0.0, 2.0})), 12.0);
  EXPECT_DOUBLE_EQ(V.gradient(make_vec({0.0, 2.0}))(1), 12.0);
}

TEST(Bump, ValueAndGradientAgreeWithOracle) {
  const Bump b{make_vec({0.1, -0.2}), 0.3, 1.7};
  const double h = 1e-6;
  for (const Vec& x : oracle::random_points(make_vec({-0.2, -0.5}), make_vec({0.4, 0.1}), 30, 11)) {
    EXPECT_NEAR(b(x), oracle::bump(x, b.center, b.radius, b.amplitude), 1e-15);
    for (int k = 0; k < 2; ++k) {
      const double fd = (b(x + h * unit(2, k)) - b(x - h * unit(2, k))) / (2 * h);
      EXPECT_NEAR(b.gradient(x)(k), fd, 1e-6);
    }
  }
}

TEST(Bump, SupportLeak) {
  const ChartWindow w = ChartWindow::cube(2, -1, 1, 33);
  EXPECT_NO_THROW((Bump{make_vec({0, 0}), 0.5, 1}.check_support(w)));
  EXPECT_EQ(code_of([&] { Bump{make_vec({0.8, 0}), 0.2, 1}.check_support(w); }), Errc::SupportLeak);
}

TEST(Catalog, UnknownIdsAreConfigErrors) {
  const ChartWindow w = ChartWindow::cube(2, -1, 1, 5);
  EXPECT_EQ(code_of([&] { make_metric("anti-de-sitter", w); }), Errc::ConfigParse);
  EXPECT_EQ(code_of([] { make_weight("cubic", 4); }), Errc::ConfigParse);
  EXPECT_EQ(code_of([] { make_line("spiral", 2); }), Errc::ConfigParse);
}

TEST(Catalog, LinesAreUnitSpeedGeodesicsOfMinkowski) {
  const Mat g = oracle::minkowski_metric(3);
  for (const TimelikeLine& L : {t_axis(3), boosted_line(3, 0.7)}) {
    for (double t : {-2.0, 0.0, 1.5}) {
      const Vec v = L.velocity(t);
      EXPECT_NEAR(v.dot(g * v), 1.0, 1e-14);
      EXPECT_LT((L(t) - t * L.velocity(0)).norm(), 1e-14);
    }
  }
}

TEST(GridMetric, RoundTripThroughCsv) {
  const ChartWindow w = ChartWindow::cube(2, -0.5, 0.5, 9);
  const MetricField f = flrw(w, ScaleFactor::Exp);
  const std::string path = (std::filesystem::temp_directory_path() / "c1split_grid_metric.csv").string();
  save_grid_metric(f, path);
  const MetricField g = load_grid_metric(path, 2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec x = w.node(i);
    EXPECT_LT((g.g(x) - f.g(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(causal_character(g, make_vec({0.1, 0.1}), unit(2, 0)), CausalCharacter::FutureTimelike);
  std::filesystem::remove(path);
}
