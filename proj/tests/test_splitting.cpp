#include "c1split/catalog.hpp"
#include "c1split/splitting.hpp"

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

const ChartWindow& grid() {
  static const ChartWindow w(make_vec({-1.0, -0.5}), make_vec({1.0, 0.5}), {17, 17});
  return w;
}

const MetricField& flat() {
  static const MetricField f = minkowski(grid());
  return f;
}

const BusemannField& flat_busemann() {
  static const BusemannField bf = busemann_field(flat(), t_axis(2), grid());
  return bf;
}

std::vector<double> flow_times(int steps, double dt) {
  std::vector<double> t;
  for (int j = -steps; j <= steps; ++j) t.push_back(j * dt);
  return t;
}

}  // namespace

TEST(BusemannField, MinkowskiIsTheTimeCoordinate) {
  const BusemannField& bf = flat_busemann();
  EXPECT_EQ(bf.failed, 0u);
  for (std::size_t i = 0; i < grid().size(); ++i) {
    const Vec x = grid().node(i);
    EXPECT_NEAR(bf.bplus.value(i), x(0), 1e-6);
    EXPECT_NEAR(bf.bminus.value(i), x(0), 1e-6);
  }
  EXPECT_LT(std::abs(bf.min_gap), 1e-6);
}

TEST(Structure, HoldsForMinkowskiAndFailsForACorruptFunction) {
  const StructureReport ok =
      local_structure_check(flat_busemann(), flat(), zero_weight(2), make_vec({-0.8, -0.4}), make_vec({0.8, 0.4}));
  EXPECT_TRUE(ok.passed());
  EXPECT_GT(ok.nodes, 0u);
  EXPECT_LT(ok.max_gradient_defect, 1e-6);

  const BusemannField bad =
      busemann_field_from(flat(), grid(), [](const Vec& x) { return x(0) + 0.5 * x(1) * x(1); });
  const StructureReport r =
      local_structure_check(bad, flat(), zero_weight(2), make_vec({-0.8, -0.4}), make_vec({0.8, 0.4}));
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.hessian_ok);
  EXPECT_NEAR(r.max_hessian, 1.0, 1e-6);
}

TEST(Structure, WeightMustBeConstantAlongTheFlow) {
  const MetricField f = minkowski(grid(), "weighted-product");
  const Vec lo = make_vec({-0.8, -0.4}), hi = make_vec({0.8, 0.4});
  EXPECT_TRUE(local_structure_check(flat_busemann(), f, quadratic_weight(4), lo, hi).passed());
  const StructureReport r = local_structure_check(flat_busemann(), f, quadratic_weight(4, 0), lo, hi);
  EXPECT_FALSE(r.weight_ok);
  // dV(grad b) = 2t, largest at the last grid line t = 0.75 inside the box
  EXPECT_NEAR(r.max_weight_derivative, 1.5, 1e-6);
}

TEST(Flow, MinkowskiFlowTranslatesInTime) {
  const std::vector<Vec> starts = {make_vec({0.0, 0.0}), make_vec({-0.2, 0.3}), make_vec({0.1, -0.4})};
  const FlowMap fm = flow_map(flat(), flat_busemann(), starts, flow_times(4, 0.125), 1.0 / 32);
  for (std::size_t i = 0; i < starts.size(); ++i)
    for (std::size_t j = 0; j < fm.times.size(); ++j)
      EXPECT_LT((fm.points[i][j] - (starts[i] + fm.times[j] * unit(2, 0))).norm(), 1e-8);
  EXPECT_LT(fm.group_defect, 1e-9);
  EXPECT_LT(fm.level_defect, 1e-6);
  EXPECT_LT(fm.speed_defect, 1e-6);
}

TEST(Flow, ErrorsForBadTimesAndLeavingTheGrid) {
  const std::vector<Vec> starts = {make_vec({0.8, 0.0})};
  EXPECT_EQ(code_of([&] { flow_map(flat(), flat_busemann(), starts, {0.1, 0.2}, 0.05); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { flow_map(flat(), flat_busemann(), starts, {0.0, 0.5}, 0.05); }), Errc::FlowLeavesWindow);
  EXPECT_EQ(code_of([&] { detail::flow_velocity(flat(), flat_busemann().bplus, make_vec({1.5, 0.0})); }),
            Errc::FlowLeavesWindow);
}

TEST(CrossSection, ColumnRootsOfALinearFunction) {
  const detail::Column c = detail::column(flat_busemann().bplus, 0, make_vec({0.2}));
  EXPECT_NEAR(detail::column_root(c, 0.3), 0.3, 1e-8);
  EXPECT_NEAR(detail::column_root(c, -0.71), -0.71, 1e-8);
  EXPECT_EQ(code_of([&] { detail::column_root(c, 1.5); }), Errc::LevelSetNotGraph);
}

TEST(CrossSection, MinkowskiLevelSetIsFlat) {
  CrossSectionOptions o;
  o.margin = 0.125;
  const CrossSection S = extract_cross_section(flat(), flat_busemann(), 0.25, zero_weight(2), o);
  EXPECT_EQ(S.axis, 0);
  ASSERT_EQ(S.points.size(), S.lattice.size());
  for (std::size_t i = 0; i < S.points.size(); ++i) {
    EXPECT_NEAR(S.points[i](0), 0.25, 1e-6);
    EXPECT_NEAR(S.h[i](0, 0), 1.0, 1e-6);
  }
  EXPECT_NEAR(S.lattice.lo(0), -0.375, 1e-12);
  EXPECT_NEAR(S.min_eigenvalue, 1.0, 1e-6);
}

TEST(Splitting, MinkowskiIsAProduct) {
  CrossSectionOptions o;
  o.margin = 0.125;
  const CrossSection S = extract_cross_section(flat(), flat_busemann(), 0.0, zero_weight(2), o);
  const FlowMap fm = flow_map(flat(), flat_busemann(), S.points, flow_times(4, 0.125), 1.0 / 32);
  const SplitReport r = verify_product(flat(), fm, S, zero_weight(2), 2.0);
  EXPECT_GT(r.nodes, 0u);
  EXPECT_LT(r.pullback_error, 1e-6);
  EXPECT_LT(r.dt_row_error, 1e-6);
  EXPECT_LT(r.measure_error, 1e-6);
  EXPECT_TRUE(r.probe_ran);
  EXPECT_TRUE(r.cross_section_probe.holds);
}

TEST(Splitting, ProductHyperbolicRecoversTheFibreMetric) {
  const double s = 0.5;
  const MetricField f = product_hyperbolic(grid(), s);
  const BusemannField bf = busemann_field(f, t_axis(2), grid());
  EXPECT_EQ(bf.failed, 0u);
  CrossSectionOptions o;
  o.margin = 0.125;
  const CrossSection S = extract_cross_section(f, bf, 0.0, zero_weight(2), o);
  for (std::size_t i = 0; i < S.points.size(); ++i) {
    const double y = S.lattice.node(i)(0);
    const double expect = 4 * s * s / ((1 - y * y) * (1 - y * y));
    EXPECT_NEAR(S.h[i](0, 0), expect, 1e-3 * expect);
  }
  const FlowMap fm = flow_map(f, bf, S.points, flow_times(4, 0.125), 1.0 / 32);
  const SplitReport r = verify_product(f, fm, S, zero_weight(2), 2.0);
  EXPECT_LT(r.pullback_error, 1e-3);
  EXPECT_LT(r.measure_error, 1e-3);
}

TEST(Splitting, WeightIsInvariantAndRestricts) {
  const MetricField f = minkowski(grid(), "weighted-product");
  const WeightField V = quadratic_weight(4);
  CrossSectionOptions o;
  o.margin = 0.125;
  const CrossSection S = extract_cross_section(f, flat_busemann(), 0.0, V, o);
  EXPECT_EQ(S.weight.synthetic_dim, 3.0);
  for (double y : {-0.3, 0.0, 0.2}) {
    EXPECT_NEAR(S.weight(make_vec({y})), y * y, 1e-10);
    EXPECT_NEAR(S.weight.gradient(make_vec({y}))(0), 2 * y, 1e-8);
  }
  const FlowMap fm = flow_map(f, flat_busemann(), S.points, flow_times(4, 0.125), 1.0 / 32);
  const SplitReport r = verify_product(f, fm, S, V, 4.0);
  EXPECT_LT(r.weight_invariance, 1e-8);
  // Hess V - dV^2 / (N - n) = 2 - 2 y^2 on the fibre
  EXPECT_TRUE(r.cross_section_probe.holds);
}

TEST(Splitting, CorruptFunctionIsNotAProduct) {
  const ChartWindow w = ChartWindow::cube(2, -1, 1, 17);
  const MetricField f = minkowski(w);
  const BusemannField bad = busemann_field_from(f, w, [](const Vec& x) { return x(0) + 0.5 * x(1) * x(1); });
  CrossSectionOptions o;
  o.margin = 0.5;
  const CrossSection S = extract_cross_section(f, bad, 0.0, zero_weight(2), o);
  FlowOptions fo;
  fo.check_structure = false;
  const FlowMap fm = flow_map(f, bad, S.points, flow_times(2, 0.0625), 1.0 / 64, fo);
  VerifyOptions vo;
  vo.run_probe = false;
  const SplitReport r = verify_product(f, fm, S, zero_weight(2), 2.0, vo);
  EXPECT_GE(r.pullback_error, 0.05);
  EXPECT_FALSE(r.probe_ran);
  EXPECT_EQ(code_of([&] { flow_map(f, bad, S.points, flow_times(2, 0.0625), 1.0 / 64); }), Errc::StructureViolated);
}
