#include "c1split/busemann.hpp"
#include "c1split/catalog.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace c1split;

namespace {

MetricField flat() { return minkowski(ChartWindow(make_vec({-1.0, -0.5}), make_vec({1.0, 0.5}), {9, 9})); }

}  // namespace

TEST(Busemann, TruncationsMatchClosedForm) {
  const MetricField f = flat();
  const TimelikeRay ray = t_axis(2);
  for (const Vec& x : oracle::random_points(f.window().lo(), f.window().hi(), 10, 1)) {
    for (double T : {25.0, 200.0}) {
      const double bp = approx_busemann(f, ray, T, x, BusemannSign::Forward).value;
      EXPECT_NEAR(bp, T - oracle::minkowski_separation(x, ray(T)), 1e-9);
      const double bm = approx_busemann(f, ray, T, x, BusemannSign::Backward).value;
      EXPECT_NEAR(bm, oracle::minkowski_separation(ray(-T), x) - T, 1e-9);
    }
  }
}

TEST(Busemann, LimitIsTheTimeFunction) {
  const MetricField f = flat();
  const TimelikeRay ray = t_axis(2);
  for (const Vec& x : oracle::random_points(f.window().lo(), f.window().hi(), 8, 2)) {
    const BusemannValue bp = busemann_limit(f, ray, x, BusemannSign::Forward);
    const BusemannValue bm = busemann_limit(f, ray, x, BusemannSign::Backward);
    EXPECT_NEAR(bp.extrapolated, x(0), 1e-6);
    EXPECT_NEAR(bm.extrapolated, x(0), 1e-6);
    EXPECT_NEAR(bp.value, x(0), 1e-3);
    // Property: b+ >= b- and monotone truncations
    EXPECT_GE(bp.value, bm.value - 1e-9);
    for (std::size_t i = 1; i < bp.history.size(); ++i) {
      EXPECT_LE(bp.history[i], bp.history[i - 1] + 1e-12);
      EXPECT_GE(bm.history[i], bm.history[i - 1] - 1e-12);
    }
  }
}

TEST(Busemann, BoostedLineGivesBoostedTimeFunction) {
  const MetricField f = flat();
  const double a = 0.5;
  const TimelikeRay ray = boosted_line(2, a);
  for (const Vec& x : oracle::random_points(f.window().lo(), f.window().hi(), 6, 3)) {
    EXPECT_NEAR(busemann_limit(f, ray, x, BusemannSign::Forward).extrapolated, oracle::boosted_busemann(x, a), 1e-6);
    EXPECT_NEAR(busemann_limit(f, ray, x, BusemannSign::Backward).extrapolated, oracle::boosted_busemann(x, a), 1e-6);
  }
}

TEST(Busemann, ErrorsForUnrelatedPointsAndShortSchedules) {
  const MetricField f = flat();
  const TimelikeRay ray = t_axis(2);
  try {
    approx_busemann(f, ray, 0.3, make_vec({0.0, 0.5}), BusemannSign::Forward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotInChronologicalPast);
  }
  try {
    approx_busemann(f, ray, 0.3, make_vec({0.0, 0.5}), BusemannSign::Backward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotInChronologicalFuture);
  }
  BusemannOptions o;
  o.schedule = {2.0, 4.0};
  o.tol = 1e-6;
  try {
    busemann_limit(f, ray, make_vec({0.0, 0.5}), BusemannSign::Forward, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotConverged);
  }
  o.schedule = {4.0};
  EXPECT_THROW(busemann_limit(f, ray, zeros(2), BusemannSign::Forward, o), Error);
}

TEST(Neville, ExactOnPolynomials) {
  const std::vector<double> h = {1.0 / 25, 1.0 / 50, 1.0 / 100, 1.0 / 200};
  std::vector<double> f;
  for (double x : h) f.push_back(3.0 - 2.0 * x + 5.0 * x * x - 7.0 * x * x * x);
  EXPECT_NEAR(detail::neville_at_zero(h, f), 3.0, 1e-10);
  std::vector<Vec> fv;
  for (double x : h) fv.push_back(make_vec({1.0 + x, -2.0 + x * x}));
  EXPECT_LT((detail::neville_at_zero(h, fv) - make_vec({1.0, -2.0})).norm(), 1e-10);
}

// Property: b+_T is 1-steep for every T by the reverse triangle inequality.
TEST(Steepness, TruncationsAreOneSteep) {
  const MetricField f = flat();
  const TimelikeRay ray = t_axis(2);
  const auto pairs = sample_pairs(f.window().lo(), f.window().hi(), 100, 99);
  for (BusemannSign s : {BusemannSign::Forward, BusemannSign::Backward}) {
    const SteepnessReport r = steepness_check(f, ray, pairs, s, 200.0);
    EXPECT_GT(r.related, 10u);
    EXPECT_LE(r.max_defect, 1e-9);
  }
}

TEST(SamplePairs, ReproducibleAndOrdered) {
  const auto a = sample_pairs(make_vec({0, 0}), make_vec({1, 1}), 20, 5);
  const auto b = sample_pairs(make_vec({0, 0}), make_vec({1, 1}), 20, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_LE(a[i].first(0), a[i].second(0));
  }
}

TEST(Adapted, ParallelLineIsAdaptedBoostedIsNot) {
  const MetricField f = flat();
  const TimelikeRay line = t_axis(2);
  const CausalCurve offset = line_curve(f, t_axis(make_vec({0.5})), -0.5, 0.5);
  const AdaptednessCertificate ok = certify_adapted(f, line, offset);
  EXPECT_TRUE(ok.adapted);
  EXPECT_LT(ok.max_steepness_defect, 1e-3);

  const CausalCurve boosted = line_curve(f, boosted_line(2, 0.5), -0.5, 0.5);
  const AdaptednessCertificate bad = certify_adapted(f, line, boosted);
  EXPECT_FALSE(bad.adapted);
  EXPECT_GE(bad.max_steepness_defect, 0.1);
}

TEST(CoRay, TAxisCoRaysAreVertical) {
  const MetricField f = flat();
  for (const Vec& x : {make_vec({0.0, 0.5}), make_vec({0.3, -0.4})}) {
    const CoRay c = co_ray(f, t_axis(2), x);
    EXPECT_LE(angle_between(c.limit_direction, unit(2, 0)), 1e-3);
    EXPECT_EQ(c.character, CausalCharacter::FutureTimelike);
    EXPECT_LT(std::abs(c.curve.back()(1) - x(1)), 1e-3);
  }
}

TEST(CoRay, BoostedLineGivesBoostedDirection) {
  const MetricField f = flat();
  const double a = 0.4;
  const CoRay c = co_ray(f, boosted_line(2, a), make_vec({0.0, 0.3}));
  EXPECT_LE(angle_between(c.limit_direction, make_vec({std::cosh(a), std::sinh(a)})), 1e-3);
}

TEST(Superdifferential, TruncationsAndSeparation) {
  const MetricField f = flat();
  const ScalarFn b = busemann_truncation(f, t_axis(2), 50.0, BusemannSign::Forward);
  const SuperdifferentialProbe p = superdifferential_probe(b, make_vec({0.0, 0.25}), {0.04, 0.02, 0.01});
  EXPECT_NEAR(p.v(0), 1.0, 1e-2);
  for (std::size_t i = 1; i < p.ratios.size(); ++i) EXPECT_LT(p.ratios[i], p.ratios[i - 1]);
  EXPECT_LT(p.ratios.back(), 1e-2);

  const ScalarFn u = negative_separation(f, make_vec({0.8, 0.0}));
  const SuperdifferentialProbe q = superdifferential_probe(u, zeros(2), {0.04, 0.02, 0.01});
  // -l(x, o) = -sqrt((0.8 - t)^2 - y^2) has gradient (1, 0) at the origin
  EXPECT_LT((q.v - unit(2, 0)).norm(), 1e-6);
  EXPECT_LT(q.ratios.back(), 1e-2);

  std::vector<ScalarFn> family;
  for (double T : {25.0, 50.0, 100.0}) family.push_back(busemann_truncation(f, t_axis(2), T, BusemannSign::Forward));
  const SuperdifferentialEnvelope env = superdifferential_envelope(family, make_vec({0.0, 0.25}), {0.04, 0.02});
  EXPECT_EQ(env.members.size(), 3u);
  EXPECT_LT(env.envelope.back(), env.envelope.front());
}
