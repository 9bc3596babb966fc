#pragma once
//
// Scenario runner. A scenario names a metric, a weight and a chart window and
// lists operations; each operation produces results and pass/fail checks. The
// run writes summary.json (keys sorted, no timestamps) and per-op CSV dumps.
//

#include "c1split/busemann.hpp"
#include "c1split/catalog.hpp"
#include "c1split/config.hpp"
#include "c1split/connection.hpp"
#include "c1split/dalembert.hpp"
#include "c1split/geodesic.hpp"
#include "c1split/grid_metric.hpp"
#include "c1split/mollify.hpp"
#include "c1split/parallel.hpp"
#include "c1split/splitting.hpp"
#include "c1split/timesep.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace c1split::cli {

namespace fs = std::filesystem;

enum class Relation { AtMost, AtLeast, Above, Is };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::AtMost: return "<=";
    case Relation::AtLeast: return ">=";
    case Relation::Above: return ">";
    case Relation::Is: return "==";
  }
  return "?";
}

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::AtMost;
  bool pass = false;
  bool xfail = false;

  std::string status() const {
    if (xfail) return pass ? "xpass" : "xfail";
    return pass ? "pass" : "fail";
  }
  /// A check is acceptable when it passes, or fails while expected to.
  bool ok() const { return pass != xfail; }
};

inline json to_json(const Check& c) {
  return json{{"name", c.name},         {"value", c.value}, {"tolerance", c.tolerance},
              {"relation", to_string(c.relation)}, {"pass", c.pass}, {"xfail", c.xfail},
              {"status", c.status()}};
}

inline json to_json(const Vec& v) {
  json a = json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline json to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

struct Context {
  MetricField field;
  WeightField V;
  std::function<Mat(const Vec&)> weight_hessian;
  ChartWindow window;
  int n = 0;
  std::uint64_t seed = 0;
  fs::path out;
  fs::path base_dir;
};

/// Results, checks and files of one operation.
class OpRun {
 public:
  OpRun(std::string label, std::string prefix, std::vector<std::string> expect_fail)
      : label_(std::move(label)), prefix_(std::move(prefix)), expect_fail_(std::move(expect_fail)) {}

  json results = json::object();
  std::vector<Check> checks;
  std::vector<std::string> files;

  void at_most(const std::string& name, double value, double tol) { add(name, value, tol, Relation::AtMost, value <= tol); }
  void at_least(const std::string& name, double value, double bound) {
    add(name, value, bound, Relation::AtLeast, value >= bound);
  }
  void above(const std::string& name, double value, double bound) { add(name, value, bound, Relation::Above, value > bound); }
  void is(const std::string& name, bool value, bool expected) {
    add(name, value ? 1.0 : 0.0, expected ? 1.0 : 0.0, Relation::Is, value == expected);
  }

  /// Opens <out>/<prefix>_<suffix>.csv with full precision.
  std::ofstream csv(const Context& ctx, const std::string& suffix) {
    const std::string name = prefix_ + "_" + suffix + ".csv";
    files.push_back(name);
    std::ofstream f(ctx.out / name);
    f << std::setprecision(17);
    return f;
  }
  std::string csv_path(const Context& ctx, const std::string& suffix) {
    const std::string name = prefix_ + "_" + suffix + ".csv";
    files.push_back(name);
    return (ctx.out / name).string();
  }

  /// Names in expect_fail that matched no check.
  std::vector<std::string> unmatched() const {
    std::vector<std::string> out;
    for (const auto& e : expect_fail_) {
      if (e == "*") continue;
      bool hit = false;
      for (const auto& c : checks) hit = hit || c.name == label_ + "." + e;
      if (!hit) out.push_back(e);
    }
    return out;
  }

 private:
  void add(const std::string& name, double value, double tol, Relation rel, bool pass) {
    Check c;
    c.name = label_ + "." + name;
    c.value = value;
    c.tolerance = tol;
    c.relation = rel;
    c.pass = pass;
    for (const auto& e : expect_fail_) c.xfail = c.xfail || e == name || e == "*";
    checks.push_back(c);
  }

  std::string label_;
  std::string prefix_;
  std::vector<std::string> expect_fail_;
};

// ---------------------------------------------------------------------------
// Catalog lookup with per-id parameter defaults
// ---------------------------------------------------------------------------

namespace detail {

using Defaults = std::map<std::string, std::map<std::string, double>>;

inline const Defaults& metric_defaults() {
  static const Defaults d = {{"minkowski", {}},
                             {"flrw-exp", {}},
                             {"flrw-cosh", {}},
                             {"product-flat", {}},
                             {"product-hyperbolic", {{"s", 0.5}}},
                             {"weighted-product", {}},
                             {"c1-perturbed", {{"alpha", 0.5}, {"beta", -0.5}, {"c", 0.0}}}};
  return d;
}
inline const Defaults& weight_defaults() {
  static const Defaults d = {{"zero", {}}, {"quadratic", {{"axis", 1}, {"c", 1}}}, {"linear", {{"axis", 1}, {"c", 1}}}};
  return d;
}
inline const Defaults& line_defaults() {
  static const Defaults d = {{"t-axis", {{"y0", 0.0}}}, {"boosted", {{"rapidity", 0.5}}}};
  return d;
}

inline c1split::Params catalog_params(Params& p, const Defaults& table, const std::string& kind, const std::string& id) {
  auto it = table.find(id);
  if (it == table.end()) throw Error(Errc::ConfigParse, "unknown catalog " + kind + " '" + id + "'");
  c1split::Params out;
  for (const auto& [k, v] : it->second) out[k] = p.num(k, v);
  return out;
}

inline TimelikeLine read_line(Params& op, const std::string& key, int n) {
  Params lp = op.table(key);
  const std::string id = lp.str("id", "t-axis");
  const auto params = catalog_params(lp, line_defaults(), "line", id);
  lp.finish();
  op.store(key, lp);
  return make_line(id, n, params);
}

inline ChartWindow read_grid(Params& op, const Context& ctx, const std::string& key = "grid") {
  Params gp = op.table(key);
  ChartWindow w = read_window(gp, &ctx.window, ctx.n);
  gp.finish();
  op.store(key, gp);
  return w;
}

inline Vec lower_corner(const ChartWindow& w, double frac) {
  return 0.5 * (w.lo() + w.hi()) - frac * 0.5 * (w.hi() - w.lo());
}
inline Vec upper_corner(const ChartWindow& w, double frac) {
  return 0.5 * (w.lo() + w.hi()) + frac * 0.5 * (w.hi() - w.lo());
}

inline void write_curve(std::ofstream& out, const CausalCurve& c) {
  const int n = c.points.empty() ? 0 : static_cast<int>(c.points[0].size());
  out << "t";
  for (int k = 0; k < n; ++k) out << ",x" << k;
  for (int k = 0; k < n; ++k) out << ",v" << k;
  out << "\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    out << c.params[i];
    for (int k = 0; k < n; ++k) out << "," << c.points[i](k);
    for (int k = 0; k < n; ++k) out << "," << c.velocities[i](k);
    out << "\n";
  }
}

inline void write_coords_header(std::ofstream& out, int n) {
  for (int k = 0; k < n; ++k) out << (k ? "," : "") << "x" << k;
}
inline void write_coords(std::ofstream& out, const Vec& x) {
  for (int k = 0; k < x.size(); ++k) out << (k ? "," : "") << x(k);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline void op_distance(Context& ctx, Params& p, OpRun& r) {
  const Vec x = p.vec("from", ctx.n), y = p.vec("to", ctx.n);
  DistanceOptions o;
  o.use_ascent = p.flag("use_ascent", true);
  o.check_diamond = p.flag("check_diamond", true);
  o.shoot.tol = p.positive("shoot_tol", o.shoot.tol);
  o.ascent.segments = p.integer("ascent_segments", o.ascent.segments);
  const SeparationValue s = lorentz_distance(ctx.field, x, y, o);
  r.results["related"] = s.related;
  r.results["value"] = s.value;
  r.results["shoot_value"] = s.shoot_value;
  r.results["ascent_value"] = s.ascent_value;
  r.results["disagreement"] = s.disagreement;
  if (p.has("expect_related")) r.is("related", s.related, p.flag("expect_related", true));
  if (p.has("expected")) {
    const double e = p.num("expected");
    r.at_most("shoot_error", std::abs(s.shoot_value - e), p.positive("tol_shoot", 1e-6));
    if (o.use_ascent) r.at_most("ascent_error", std::abs(s.ascent_value - e), p.positive("tol_ascent", 1e-3));
  }
  if (s.witness) {
    auto f = r.csv(ctx, "witness");
    write_curve(f, *s.witness);
  }
}

inline void op_geodesic(Context& ctx, Params& p, OpRun& r) {
  const Vec x = p.vec("from", ctx.n), v = p.vec("velocity", ctx.n);
  const double span = p.positive("span", 1.0), step = p.positive("step", 1e-3);
  const CausalCurve c = integrate_geodesic(ctx.field, x, v, span, step);
  r.results["character"] = std::string(to_string(c.character));
  r.results["norm_drift"] = c.norm_drift;
  r.results["proper_time"] = c.proper_time;
  r.results["exited"] = c.exited;
  r.results["endpoint"] = to_json(c.back());
  r.at_most("norm_drift", c.norm_drift, p.positive("drift_tol", 1e-8));
  r.at_most("character_flips", character_flips(ctx.field, c), 0);
  if (p.has("expect_endpoint")) {
    const Vec e = p.vec("expect_endpoint", ctx.n);
    r.at_most("endpoint_error", (c.back() - e).norm(), p.positive("endpoint_tol", 1e-8));
  }
  auto f = r.csv(ctx, "curve");
  write_curve(f, c);
}

inline void op_maximizer(Context& ctx, Params& p, OpRun& r) {
  const std::vector<Vec> vertices = p.points("vertices", ctx.n);
  const int samples = p.integer("samples", 8);
  const double tol = p.positive("tol", 1e-6);
  const CausalCurve c = polyline(ctx.field, vertices);
  const MaximizerCheck m = is_maximizer(ctx.field, c, samples, tol);
  r.results["maximizer"] = m.maximizer;
  r.results["max_defect"] = m.max_defect;
  r.results["violations"] = m.violations.size();
  r.is("maximizer", m.maximizer, p.flag("expect_maximizer", true));
}

inline void op_pairing(Context& ctx, Params& p, OpRun& r) {
  const std::string kind = p.str("kind", "ricci");
  const Vec X = p.vec("X", ctx.n);
  Bump mu{p.vec("center", ctx.n), p.positive("radius", 0.25), 1.0};
  const TestData d{TestVectorField::constant(X), mu};
  DistributionPairing dp;
  if (kind == "ricci")
    dp = ricci_pair(ctx.field, d);
  else if (kind == "hessian")
    dp = hessian_pair(ctx.field, ctx.V, d);
  else if (kind == "bakry-emery")
    dp = bakry_emery_pair(ctx.field, ctx.V, d);
  else
    p.fail("kind", "expected ricci, hessian or bakry-emery");
  const QuadratureResult mass = bump_mass(ctx.field, mu);
  r.results["value"] = dp.value;
  r.results["quadrature_error"] = dp.quadrature_error;
  r.results["mass"] = mass.value;
  if (p.has("expect_per_mass")) {
    const double e = p.num("expect_per_mass") * mass.value;
    const double tol = p.positive("tol_factor", 5.0) * dp.quadrature_error + p.positive("abs_tol", 1e-8);
    r.at_most("error", std::abs(dp.value - e), tol);
  }
}

inline void op_energy_probe(Context& ctx, Params& p, OpRun& r) {
  EnergyProbeOptions o;
  const Vec lo = p.vec("lo", ctx.n), hi = p.vec("hi", ctx.n);
  const double K = p.num("K", 0.0);
  o.bump_radius = p.positive("bump_radius", o.bump_radius);
  o.centers_per_axis = p.integer("centers_per_axis", o.centers_per_axis);
  o.rapidities = p.list("rapidities", o.rapidities);
  o.tolerance_factor = p.positive("tol_factor", o.tolerance_factor);
  o.abs_tol = p.positive("abs_tol", o.abs_tol);
  const EnergyProbeReport rep = energy_condition_probe(ctx.field, ctx.V, lo, hi, K, o);
  r.results["region"] = json{{"lo", to_json(lo)}, {"hi", to_json(hi)}};
  r.results["K"] = rep.K;
  r.results["N"] = rep.N;
  r.results["min_pairing"] = rep.min_pairing;
  r.results["min_error"] = rep.min_error;
  r.results["argmin"] = json{{"center", to_json(rep.argmin.center)}, {"X", to_json(rep.argmin.X)}};
  r.results["holds"] = rep.holds;
  r.at_least("min_pairing", rep.min_pairing, -(o.tolerance_factor * rep.min_error + o.abs_tol));
  auto f = r.csv(ctx, "samples");
  write_coords_header(f, ctx.n);
  for (int k = 0; k < ctx.n; ++k) f << ",X" << k;
  f << ",value,error\n";
  for (const auto& s : rep.samples) {
    write_coords(f, s.center);
    for (int k = 0; k < ctx.n; ++k) f << "," << s.X(k);
    f << "," << s.value << "," << s.error << "\n";
  }
}

inline void op_mollify(Context& ctx, Params& p, OpRun& r) {
  const std::vector<double> eps = p.list("eps", {0.1, 0.05, 0.025});
  GoodApproxOptions o;
  o.per_radius = p.integer("per_radius", 0);
  o.samples_per_axis = p.integer("samples_per_axis", o.samples_per_axis);
  o.fan_directions = p.integer("fan_directions", o.fan_directions);
  if (p.has("measure")) {
    Params mp = p.table("measure");
    o.measure_window = read_window(mp, nullptr, ctx.n);
    mp.finish();
    p.store("measure", mp);
  }
  const bool degrade = p.flag("degradation", false);
  double K = 0.0;
  Vec lo, hi;
  if (degrade) {
    K = p.num("K", 0.0);
    lo = p.vec("lo", ctx.n);
    hi = p.vec("hi", ctx.n);
  }
  auto f = r.csv(ctx, "eps");
  f << "eps,c,retries,c0_error,c1_part,c1_error,min_margin,d2_norm,delta\n";
  std::vector<double> c1;
  double min_margin = std::numeric_limits<double>::infinity();
  json rows = json::array();
  for (double e : eps) {
    const GoodApproximation A = good_approximation(ctx.field, ctx.V, e, o);
    double delta = std::numeric_limits<double>::quiet_NaN();
    if (degrade) delta = curvature_degradation(A, ctx.V.synthetic_dim, K, lo, hi).delta;
    c1.push_back(A.c1_error);
    min_margin = std::min(min_margin, A.min_margin);
    json row{{"eps", e},           {"c", A.c},           {"c1_error", A.c1_error}, {"c0_error", A.c0_error},
             {"c1_part", A.c1_part}, {"min_margin", A.min_margin}, {"d2_norm", A.d2_norm}, {"retries", A.retries}};
    if (degrade) row["delta"] = delta;
    rows.push_back(row);
    f << e << "," << A.c << "," << A.retries << "," << A.c0_error << "," << A.c1_part << "," << A.c1_error << ","
      << A.min_margin << "," << A.d2_norm << "," << delta << "\n";
  }
  r.results["sequence"] = rows;
  double worst = 0.0;
  for (std::size_t i = 1; i < c1.size(); ++i) worst = std::max(worst, c1[i] / c1[i - 1]);
  if (c1.size() > 1) r.at_most("c1_ratio", worst, p.positive("ratio_tol", 1.0));
  r.above("min_margin", min_margin, 0.0);
}

inline void op_busemann(Context& ctx, Params& p, OpRun& r) {
  const TimelikeLine line = read_line(p, "line", ctx.n);
  BusemannOptions o;
  o.schedule = p.list("schedule", o.schedule);
  o.tol = p.positive("tol", o.tol);
  std::vector<Vec> pts;
  if (p.has("points"))
    pts = p.points("points", ctx.n);
  else {
    const ChartWindow g = read_grid(p, ctx);
    for (std::size_t i = 0; i < g.size(); ++i) pts.push_back(g.node(i));
  }
  const double T = *std::max_element(o.schedule.begin(), o.schedule.end());
  const MetricField ext = busemann_field_window(ctx.field, line, T);
  struct Row {
    std::optional<BusemannValue> plus, minus;
  };
  const auto rows = parallel_map<Row>(pts.size(), [&](std::size_t i) {
    Row row;
    try {
      row.plus = busemann_limit_on(ext, line, pts[i], BusemannSign::Forward, o);
      row.minus = busemann_limit_on(ext, line, pts[i], BusemannSign::Backward, o);
    } catch (const Error& e) {
      if (e.code() != Errc::NotConverged && e.code() != Errc::NotInChronologicalPast &&
          e.code() != Errc::NotInChronologicalFuture)
        throw;
    }
    return row;
  });
  const bool vs_time = p.flag("expect_time", false);
  double rg = 0.0, order = std::numeric_limits<double>::infinity(), sup = 0.0, mono = 0.0;
  std::size_t failed = 0;
  auto f = r.csv(ctx, "values");
  write_coords_header(f, ctx.n);
  f << ",bplus,bminus,richardson_plus,richardson_minus,gap_plus,gap_minus\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Row& row = rows[i];
    if (!row.plus || !row.minus) {
      ++failed;
      continue;
    }
    rg = std::max({rg, row.plus->richardson_gap, row.minus->richardson_gap});
    order = std::min(order, row.plus->extrapolated - row.minus->extrapolated);
    if (vs_time)
      sup = std::max({sup, std::abs(row.plus->extrapolated - pts[i](0)), std::abs(row.minus->extrapolated - pts[i](0))});
    for (std::size_t k = 1; k < row.plus->history.size(); ++k) {
      mono = std::max(mono, row.plus->history[k] - row.plus->history[k - 1]);
      mono = std::max(mono, row.minus->history[k - 1] - row.minus->history[k]);
    }
    write_coords(f, pts[i]);
    f << "," << row.plus->extrapolated << "," << row.minus->extrapolated << "," << row.plus->richardson_gap << ","
      << row.minus->richardson_gap << "," << row.plus->convergence_gap << "," << row.minus->convergence_gap << "\n";
  }
  r.results["points"] = pts.size();
  r.results["failed"] = failed;
  r.results["max_richardson_gap"] = rg;
  r.results["min_order_gap"] = order;
  r.results["max_monotonicity_violation"] = mono;
  r.at_most("failed_points", static_cast<double>(failed), 0);
  r.at_most("richardson_gap", rg, o.tol);
  r.at_least("order", order, -p.positive("order_tol", 1e-6));
  r.at_most("monotonicity", mono, p.positive("monotonicity_tol", 1e-9));
  if (vs_time) {
    r.results["sup_error_vs_time"] = sup;
    r.at_most("sup_error_vs_time", sup, p.positive("time_tol", 1e-3));
  }
  const int npairs = p.integer("steepness_pairs", 0);
  if (npairs > 0) {
    const ChartWindow g = read_grid(p, ctx, "steepness_region");
    const auto pairs = sample_pairs(g.lo(), g.hi(), static_cast<std::size_t>(npairs),
                                    static_cast<std::uint64_t>(p.integer("seed", static_cast<int>(ctx.seed))));
    const double Ts = p.positive("steepness_T", T);
    const SteepnessReport sp = steepness_check(ctx.field, line, pairs, BusemannSign::Forward, Ts, o);
    const SteepnessReport sm = steepness_check(ctx.field, line, pairs, BusemannSign::Backward, Ts, o);
    r.results["steepness"] = json{{"pairs", sp.pairs},
                                  {"related", sp.related},
                                  {"max_defect_plus", sp.max_defect},
                                  {"max_defect_minus", sm.max_defect}};
    r.at_most("steepness_defect", std::max(sp.max_defect, sm.max_defect), p.positive("steepness_tol", 1e-3));
  }
}

inline void op_adapted(Context& ctx, Params& p, OpRun& r) {
  const TimelikeLine line = read_line(p, "line", ctx.n);
  const TimelikeLine curve = read_line(p, "curve", ctx.n);
  const double t0 = p.num("t0", 0.0), t1 = p.num("t1", 1.0);
  AdaptedOptions o;
  o.nodes = p.integer("nodes", o.nodes);
  o.tol = p.positive("tol", o.tol);
  const AdaptednessCertificate c = certify_adapted(ctx.field, line, line_curve(ctx.field, curve, t0, t1), o);
  r.results["adapted"] = c.adapted;
  r.results["max_steepness_defect"] = c.max_steepness_defect;
  r.results["max_length_defect"] = c.max_length_defect;
  r.results["max_gap"] = c.max_gap;
  r.at_most("steepness_defect", c.max_steepness_defect, o.tol);
  r.at_most("length_defect", c.max_length_defect, o.tol);
  r.at_most("gap", c.max_gap, o.tol);
  if (p.has("defect_at_least"))
    r.at_least("defect_size", std::max({c.max_steepness_defect, c.max_length_defect, c.max_gap}),
               p.num("defect_at_least"));
}

inline void op_co_ray(Context& ctx, Params& p, OpRun& r) {
  const TimelikeLine line = read_line(p, "line", ctx.n);
  const std::vector<Vec> pts = p.points("points", ctx.n);
  CoRayOptions o;
  o.schedule = p.list("schedule", o.schedule);
  o.tol = p.positive("tol", o.tol);
  const bool expect = p.has("expect_direction");
  const Vec dir = expect ? p.vec("expect_direction", ctx.n) : Vec();
  double worst_angle = 0.0, worst_gap = 0.0;
  auto f = r.csv(ctx, "directions");
  write_coords_header(f, ctx.n);
  f << ",t";
  for (int k = 0; k < ctx.n; ++k) f << ",d" << k;
  f << "\n";
  json rows = json::array();
  for (const Vec& x : pts) {
    const CoRay c = co_ray_family(ctx.field, line, x, o);
    worst_gap = std::max(worst_gap, c.cauchy_gap);
    json row{{"x", to_json(x)},
             {"limit_direction", to_json(c.limit_direction)},
             {"cauchy_gap", c.cauchy_gap},
             {"character", std::string(to_string(c.character))}};
    if (expect) {
      const double a = angle_between(c.limit_direction, dir);
      row["angle"] = a;
      worst_angle = std::max(worst_angle, a);
    }
    rows.push_back(row);
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      write_coords(f, x);
      f << "," << c.times[i];
      for (int k = 0; k < ctx.n; ++k) f << "," << c.directions[i](k);
      f << "\n";
    }
  }
  r.results["co_rays"] = rows;
  r.at_most("cauchy_gap", worst_gap, o.tol);
  if (expect) r.at_most("angle", worst_angle, p.positive("angle_tol", 1e-3));
}

inline void op_superdifferential(Context& ctx, Params& p, OpRun& r) {
  const Vec x = p.vec("at", ctx.n);
  const std::vector<double> radii = p.list("radii", {0.1, 0.05, 0.025});
  const std::string source = p.str("source", "separation");
  std::vector<ScalarFn> family;
  if (source == "separation") {
    family.push_back(negative_separation(ctx.field, p.vec("origin", ctx.n)));
  } else if (source == "busemann") {
    const TimelikeLine line = read_line(p, "line", ctx.n);
    for (double t : p.list("t", {10, 20, 40})) family.push_back(busemann_truncation(ctx.field, line, t, BusemannSign::Forward));
  } else {
    p.fail("source", "expected separation or busemann");
  }
  const SuperdifferentialEnvelope env = superdifferential_envelope(family, x, radii);
  r.results["envelope"] = env.envelope;
  r.results["v"] = to_json(env.members.front().v);
  r.at_most("final_ratio", env.envelope.back(), p.positive("tol", 0.01));
}

inline void op_strong_comparison(Context& ctx, Params& p, OpRun& r) {
  const Vec o = p.vec("origin", ctx.n);
  const double N = p.num("N", ctx.V.synthetic_dim), K = p.num("K", 0.0), pw = p.num("p", -1.0);
  const ChartWindow grid = read_grid(p, ctx);
  StrongComparisonOptions so;
  so.min_separation = p.positive("min_separation", so.min_separation);
  so.cut_threshold = p.positive("cut_threshold", so.cut_threshold);
  const StrongComparisonReport rep = strong_comparison_check(ctx.field, ctx.V, N, K, o, grid, pw, so);
  r.results["checked"] = rep.checked;
  r.results["masked_cut"] = rep.masked_cut;
  r.results["masked_other"] = rep.masked_other;
  r.results["max_violation"] = rep.max_violation;
  r.results["max_relative_violation"] = rep.max_relative_violation;
  r.results["max_relative_gap"] = rep.max_relative_gap;
  r.above("checked_nodes", static_cast<double>(rep.checked), 0);
  r.at_most("relative_violation", rep.max_relative_violation, p.positive("tol", 1e-3));
  if (p.has("gap_tol")) r.at_most("relative_gap", rep.max_relative_gap, p.positive("gap_tol", 1e-3));
  auto f = r.csv(ctx, "field");
  write_coords_header(f, ctx.n);
  f << ",l,box_p,valid\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    write_coords(f, grid.node(i));
    f << "," << rep.separation.value(i) << "," << rep.dalembertian.value(i) << "," << rep.dalembertian.valid(i) << "\n";
  }
}

inline void op_weak_comparison(Context& ctx, Params& p, OpRun& r) {
  const std::string src = p.str("source", "point");
  const double N = p.num("N", ctx.V.synthetic_dim), pw = p.num("p", -1.0);
  const ChartWindow grid = read_grid(p, ctx);
  ScalarField f(grid);
  SourceKind kind;
  if (src == "point") {
    kind = SourceKind::Point;
    const SeparationField sf =
        separation_field(ctx.field, p.vec("origin", ctx.n), SeparationDirection::ToOrigin, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) f.set(i, -sf.values.value(i), sf.values.valid(i));
  } else if (src == "ray") {
    kind = SourceKind::Ray;
    const TimelikeLine line = read_line(p, "line", ctx.n);
    f = busemann_field(ctx.field, line, grid).bplus;
  } else {
    p.fail("source", "expected point or ray");
  }
  const int count = p.integer("bumps", 20);
  const Vec lo = p.vec("lo", ctx.n), hi = p.vec("hi", ctx.n);
  const double rmin = p.positive("radius_min", 0.15), rmax = p.positive("radius_max", 0.3);
  const double factor = p.positive("tol_factor", 2.0);
  std::mt19937_64 rng(static_cast<std::uint64_t>(p.integer("seed", static_cast<int>(ctx.seed))));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Bump> bumps;
  for (int b = 0; b < count; ++b) {
    Bump phi;
    phi.center = Vec(ctx.n);
    for (int k = 0; k < ctx.n; ++k) phi.center(k) = lo(k) + (hi(k) - lo(k)) * U(rng);
    phi.radius = rmin + (rmax - rmin) * U(rng);
    phi.amplitude = 0.5 + U(rng);
    bumps.push_back(phi);
  }
  auto out = r.csv(ctx, "bumps");
  write_coords_header(out, ctx.n);
  out << ",radius,amplitude,value,quadrature_error\n";
  double excess = -std::numeric_limits<double>::infinity();
  double linearity = 0.0;
  for (const Bump& phi : bumps) {
    const WeakFormResult w = weak_comparison(ctx.field, ctx.V, N, pw, kind, f, phi);
    excess = std::max(excess, w.value - factor * w.quadrature_error);
    const WeakFormResult w3 = weak_comparison(ctx.field, ctx.V, N, pw, kind, f, phi.scaled(3.0));
    linearity = std::max(linearity, std::abs(w3.value - 3.0 * w.value) / std::max(1.0, std::abs(w.value)));
    write_coords(out, phi.center);
    out << "," << phi.radius << "," << phi.amplitude << "," << w.value << "," << w.quadrature_error << "\n";
  }
  r.results["bumps"] = count;
  r.results["max_excess"] = excess;
  r.results["linearity_defect"] = linearity;
  r.at_most("excess", excess, 0.0);
  r.at_most("linearity", linearity, p.positive("linearity_tol", 1e-12));
}

inline void op_tangency(Context& ctx, Params& p, OpRun& r) {
  const TimelikeLine line = read_line(p, "line", ctx.n);
  const double pw = p.num("p", -1.0);
  const ChartWindow grid = read_grid(p, ctx);
  const BusemannField bf = busemann_field(ctx.field, line, grid);
  const double radius = p.positive("tube_radius", 0.2);
  const Vec axis = p.vec("tube_axis", Vec::Zero(ctx.n - 1));
  const double bound = 0.9 * std::min(1.0 - pw, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t nodes = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Index idx = grid.unflatten(i);
    if (grid.is_boundary(idx)) continue;
    const Vec x = grid.node(idx);
    if ((x.tail(ctx.n - 1) - axis).norm() > radius) continue;
    const TangencyCoefficients tc = tangency_coefficients(ctx.field, ctx.V, bf.bplus, bf.bminus, pw, idx);
    const double scale = std::exp(-ctx.V(x)) * std::sqrt(std::abs(ctx.field.g(x).determinant()));
    worst = std::min(worst, tc.min_eigenvalue / scale);
    ++nodes;
  }
  r.results["tube_nodes"] = nodes;
  r.results["min_scaled_eigenvalue"] = worst;
  r.above("tube_nodes", static_cast<double>(nodes), 0);
  r.at_least("tube_min_eigenvalue", worst, bound);
  if (p.has("anchors")) {
    double err = 0.0;
    json rows = json::array();
    for (const Vec& x : p.points("anchors", ctx.n)) {
      Index idx{};
      for (int k = 0; k < ctx.n; ++k)
        idx[k] = static_cast<int>(std::lround((x(k) - grid.lo(k)) / grid.spacing(k)));
      const Vec xn = grid.node(idx);
      const TangencyCoefficients tc = tangency_coefficients(ctx.field, ctx.V, bf.bplus, bf.bminus, pw, idx);
      Mat expect = Mat::Identity(ctx.n, ctx.n);
      expect(0, 0) = 1.0 - pw;
      expect *= std::exp(-ctx.V(xn)) * std::sqrt(std::abs(ctx.field.g(xn).determinant()));
      err = std::max(err, (tc.a - expect).cwiseAbs().maxCoeff());
      rows.push_back(json{{"x", to_json(xn)}, {"a", to_json(tc.a)}, {"c", to_json(tc.c)}});
    }
    r.results["anchors"] = rows;
    r.at_most("anchor_error", err, p.positive("anchor_tol", 1e-6));
  }
}

inline void op_bochner(Context& ctx, Params& p, OpRun& r) {
  const double pw = p.num("p", -1.0);
  const ChartWindow grid = read_grid(p, ctx);
  const Vec lin = p.vec("u_linear", unit(ctx.n, 0));
  const std::vector<double> q = p.list("u_quadratic", std::vector<double>(ctx.n * ctx.n, 0.0));
  if (static_cast<int>(q.size()) != ctx.n * ctx.n) p.fail("u_quadratic", "expected n*n entries (row major)");
  Mat Q(ctx.n, ctx.n);
  for (int i = 0; i < ctx.n; ++i)
    for (int j = 0; j < ctx.n; ++j) Q(i, j) = 0.5 * (q[i * ctx.n + j] + q[j * ctx.n + i]);
  const ScalarField u =
      ScalarField::from_function(grid, [&](const Vec& x) { return lin.dot(x) + 0.5 * x.dot(Q * x); });
  const Bump phi{p.vec("center", Vec(0.5 * (grid.lo() + grid.hi()))), p.positive("radius", 0.3), 1.0};
  const std::string curv = p.str("curvature", "weight");
  CurvatureProvider cp;
  if (curv == "flat")
    cp = flat_curvature();
  else if (curv == "weight")
    cp = weight_hessian_curvature(ctx.weight_hessian);
  else
    p.fail("curvature", "expected flat or weight");
  const BochnerOhtaResult bo = bochner_ohta_residual(ctx.field, ctx.V, pw, u, phi, cp);
  const double h = grid.max_spacing();
  const double tol = p.positive("tol_factor", 10.0) * h * h * std::max({1.0, std::abs(bo.lhs), std::abs(bo.rhs)});
  r.results["lhs"] = bo.lhs;
  r.results["rhs"] = bo.rhs;
  r.results["residual"] = bo.residual;
  r.results["quadrature_error"] = bo.quadrature_error;
  r.at_most("residual", bo.residual, tol);
}

inline void op_split(Context& ctx, Params& p, OpRun& r) {
  const TimelikeLine line = read_line(p, "line", ctx.n);
  const ChartWindow grid = read_grid(p, ctx);
  const double corrupt = p.num("corrupt", 0.0);
  const double level = p.num("level", 0.0);
  const WeightField& V = ctx.V;
  const double N = p.num("N", V.synthetic_dim);

  const BusemannField bf = corrupt != 0.0 ? busemann_field_from(ctx.field, grid,
                                                                [corrupt](const Vec& x) {
                                                                  return x(0) + corrupt * x(1) * x(1);
                                                                })
                                          : busemann_field(ctx.field, line, grid);
  write_busemann_csv(bf, r.csv_path(ctx, "busemann"));
  r.results["busemann"] = json{{"failed_nodes", bf.failed},
                               {"max_richardson_gap", bf.max_richardson_gap},
                               {"min_gap", bf.min_gap}};
  r.at_most("failed_nodes", static_cast<double>(bf.failed), 0);

  StructureOptions so;
  so.hessian_factor = p.positive("hessian_factor", so.hessian_factor);
  so.gradient_tol = p.positive("gradient_tol", so.gradient_tol);
  so.weight_tol = p.positive("weight_tol", so.weight_tol);
  const Vec slo = p.vec("structure_lo", lower_corner(grid, 0.8));
  const Vec shi = p.vec("structure_hi", upper_corner(grid, 0.8));
  const StructureReport st = local_structure_check(bf, ctx.field, V, slo, shi, so);
  r.results["structure"] = json{{"max_hessian", st.max_hessian},
                                {"hessian_tol", st.hessian_tol},
                                {"max_gradient_defect", st.max_gradient_defect},
                                {"max_weight_derivative", st.max_weight_derivative},
                                {"nodes", st.nodes}};
  r.at_most("hessian", st.max_hessian, st.hessian_tol);
  r.at_most("gradient_defect", st.max_gradient_defect, so.gradient_tol);
  r.at_most("weight_derivative", st.max_weight_derivative, so.weight_tol);

  CrossSectionOptions co;
  co.stride = p.integer("stride", 2);
  co.margin = p.num("margin", 0.125);
  const CrossSection S = extract_cross_section(ctx.field, bf, level, V, co);

  const double dt = p.positive("dt", 0.0625);
  const int steps = p.integer("time_steps", 8);
  std::vector<double> times;
  for (int j = -steps; j <= steps; ++j) times.push_back(j * dt);
  FlowOptions fo;
  fo.check_structure = p.flag("check_structure", corrupt == 0.0);
  fo.structure_tol = so.gradient_tol;
  const FlowMap fm = flow_map(ctx.field, bf, S.points, times, p.positive("step", dt / 4), fo);

  VerifyOptions vo;
  const SplitReport rep = verify_product(ctx.field, fm, S, V, N, vo);
  r.results["flow"] = json{{"group_defect", fm.group_defect},
                           {"level_defect", fm.level_defect},
                           {"speed_defect", fm.speed_defect},
                           {"lines", fm.starts.size()}};
  r.results["product"] = json{{"pullback_error", rep.pullback_error},
                              {"dt_row_error", rep.dt_row_error},
                              {"measure_error", rep.measure_error},
                              {"weight_invariance", rep.weight_invariance},
                              {"h_min_eigenvalue", rep.h_min_eigenvalue},
                              {"nodes", rep.nodes},
                              {"cross_section_probe", rep.cross_section_probe.min_pairing}};
  r.at_most("pullback_error", rep.pullback_error, p.positive("pullback_tol", 1e-3));
  r.at_most("group_defect", fm.group_defect, p.positive("group_tol", 1e-6));
  r.at_most("level_defect", fm.level_defect, p.positive("level_tol", 1e-3));
  r.at_most("measure_error", rep.measure_error, p.positive("measure_tol", 1e-3));
  r.at_most("weight_invariance", rep.weight_invariance, p.positive("invariance_tol", 1e-6));
  r.above("h_min_eigenvalue", rep.h_min_eigenvalue, 0.0);
  r.at_least("cross_section_probe", rep.cross_section_probe.min_pairing, -p.positive("probe_tol", 1e-6));

  const int certify = p.integer("certify_lines", corrupt == 0.0 ? 1 : 0);
  if (certify > 0) {
    double worst = 0.0;
    bool all = true;
    for (int c = 0; c < certify; ++c) {
      const std::size_t i = fm.starts.size() * (2 * c + 1) / (2 * certify);
      CausalCurve sigma;
      for (std::size_t j = 0; j < fm.times.size(); ++j) {
        sigma.params.push_back(fm.times[j]);
        sigma.points.push_back(fm.points[i][j]);
        sigma.velocities.push_back(c1split::detail::flow_velocity(ctx.field, bf.bplus, fm.points[i][j]));
      }
      const std::size_t mid = fm.times.size() / 2;
      sigma.character = causal_character(ctx.field, sigma.points[mid], sigma.velocities[mid]);
      sigma.proper_time = fm.times.back() - fm.times.front();
      const AdaptednessCertificate cert = certify_adapted(ctx.field, line, sigma);
      worst = std::max({worst, cert.max_steepness_defect, cert.max_length_defect, cert.max_gap});
      all = all && cert.adapted;
    }
    r.results["flow_lines_adapted"] = all;
    r.results["flow_line_defect"] = worst;
    r.is("flow_lines_adapted", all, true);
  }

  auto f = r.csv(ctx, "flow");
  f << "line,t";
  for (int k = 0; k < ctx.n; ++k) f << ",x" << k;
  f << "\n";
  for (std::size_t i = 0; i < fm.starts.size(); ++i)
    for (std::size_t j = 0; j < fm.times.size(); ++j) {
      f << i << "," << fm.times[j];
      for (int k = 0; k < ctx.n; ++k) f << "," << fm.points[i][j](k);
      f << "\n";
    }
}

using OpFn = void (*)(Context&, Params&, OpRun&);

inline const std::map<std::string, OpFn>& operations() {
  static const std::map<std::string, OpFn> ops = {
      {"adapted", op_adapted},
      {"bochner", op_bochner},
      {"busemann", op_busemann},
      {"co_ray", op_co_ray},
      {"distance", op_distance},
      {"energy_probe", op_energy_probe},
      {"geodesic", op_geodesic},
      {"maximizer", op_maximizer},
      {"mollify", op_mollify},
      {"pairing", op_pairing},
      {"split", op_split},
      {"strong_comparison", op_strong_comparison},
      {"superdifferential", op_superdifferential},
      {"tangency", op_tangency},
      {"weak_comparison", op_weak_comparison},
  };
  return ops;
}

}  // namespace detail

/// Operation kinds selected by each single-op subcommand.
inline std::set<std::string> subcommand_ops(const std::string& sub) {
  if (sub == "distance") return {"distance", "maximizer"};
  if (sub == "geodesic") return {"geodesic"};
  if (sub == "busemann") return {"busemann", "adapted", "co_ray", "superdifferential"};
  if (sub == "compare") return {"strong_comparison", "weak_comparison", "tangency", "bochner"};
  if (sub == "mollify") return {"mollify"};
  if (sub == "split") return {"split"};
  return {};
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

enum ExitCode { kPass = 0, kCheckFailure = 1, kConfigError = 2, kNumericError = 3 };

struct RunOptions {
  std::string config;
  std::string out = "out";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  std::set<std::string> only;  // empty: all operations
};

struct RunOutcome {
  int exit_code = kPass;
  json summary;
};

namespace detail {

inline Context build_context(const json& cfg, const fs::path& base, json& resolved) {
  Context ctx;
  Params mp(cfg.value("metric", json::object()), "metric");
  if (mp.has("file")) {
    const std::string file = mp.str("file");
    const int n = mp.integer("dim");
    const fs::path path = fs::path(file).is_absolute() ? fs::path(file) : base / file;
    ctx.field = load_grid_metric(path.string(), n);
    ctx.window = ctx.field.window();
  } else {
    const std::string id = mp.str("id");
    Params wp(cfg.value("window", json::object()), "window");
    const int n = wp.has("lo") ? static_cast<int>(cfg["window"]["lo"].size()) : mp.integer("dim", 2);
    ctx.window = read_window(wp, nullptr, n);
    wp.finish();
    resolved["window"] = wp.resolved();
    Params pp = mp.table("params");
    const auto params = catalog_params(pp, metric_defaults(), "metric", id);
    pp.finish();
    mp.store("params", pp);
    if (mp.has("dim") && mp.integer("dim") != n) mp.fail("dim", "does not match the window");
    ctx.field = make_metric(id, ctx.window, params);
  }
  mp.finish();
  resolved["metric"] = mp.resolved();
  ctx.n = ctx.field.dim();

  Params vp(cfg.value("weight", json::object()), "weight");
  const std::string wid = vp.str("id", "zero");
  const double N = vp.num("N", ctx.n);
  Params wpp = vp.table("params");
  const auto wparams = catalog_params(wpp, weight_defaults(), "weight", wid);
  wpp.finish();
  vp.store("params", wpp);
  vp.finish();
  resolved["weight"] = vp.resolved();
  ctx.V = make_weight(wid, N, wparams);
  ctx.weight_hessian = make_weight_hessian(wid, wparams);
  try {
    validate_weight(ctx.V, ctx.n);
  } catch (const Error& e) {
    throw Error(Errc::ConfigParse, std::string("weight: ") + e.what());
  }
  return ctx;
}

}  // namespace detail

/// Runs every operation of the scenario in order. Configuration problems
/// give exit code 2, library errors 3, failed checks 1.
inline RunOutcome run_scenario(const RunOptions& ro, std::ostream& log = std::cout) {
  RunOutcome out;
  json& s = out.summary;
  s = json::object();
  fs::path outdir(ro.out);
  auto finish = [&](int code) {
    out.exit_code = code;
    s["exit_code"] = code;
    s["status"] = code == kPass ? "pass" : code == kCheckFailure ? "fail" : "error";
    std::error_code ec;
    fs::create_directories(outdir, ec);
    std::ofstream f(outdir / "summary.json");
    f << s.dump(2) << "\n";
    return out;
  };

  json cfg;
  Context ctx;
  std::vector<json> op_cfgs;
  try {
    cfg = load_config(ro.config);
    if (!cfg.is_object()) throw Error(Errc::ConfigParse, "top level must be a table");
    static const std::set<std::string> top = {"name", "seed", "threads", "metric", "weight", "window", "ops"};
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
      if (!top.count(it.key())) throw Error(Errc::ConfigParse, "unknown top-level key '" + it.key() + "'");
    json resolved = json::object();
    const std::string name = cfg.value("name", fs::path(ro.config).stem().string());
    if (cfg.contains("seed") && !cfg["seed"].is_number_integer())
      throw Error(Errc::ConfigParse, "seed must be an integer");
    const std::uint64_t seed = ro.seed ? *ro.seed : cfg.value("seed", std::uint64_t{0});
    if (cfg.contains("threads") && !cfg["threads"].is_number_integer())
      throw Error(Errc::ConfigParse, "threads must be an integer");
    const int threads = ro.threads ? *ro.threads : cfg.value("threads", 0);
    set_thread_count(threads);
    s["scenario"] = name;
    s["seed"] = seed;
    ctx = detail::build_context(cfg, fs::path(ro.config).parent_path(), resolved);
    ctx.seed = seed;
    ctx.out = outdir;
    s["config"] = resolved;
    if (!cfg.contains("ops") || !cfg["ops"].is_array())
      throw Error(Errc::ConfigParse, "scenario needs an [[ops]] array");
    for (const auto& o : cfg["ops"]) {
      if (!o.is_object() || !o.contains("op") || !o["op"].is_string())
        throw Error(Errc::ConfigParse, "every [[ops]] entry needs an op name");
      if (!detail::operations().count(o["op"].get<std::string>()))
        throw Error(Errc::ConfigParse, "unknown op '" + o["op"].get<std::string>() + "'");
      if (ro.only.empty() || ro.only.count(o["op"].get<std::string>())) op_cfgs.push_back(o);
    }
    if (op_cfgs.empty()) throw Error(Errc::ConfigParse, "no operations selected");
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    s["error"] = e.what();
    return finish(kConfigError);
  }

  std::error_code ec;
  fs::create_directories(outdir, ec);
  s["operations"] = json::array();
  std::size_t total = 0, bad = 0;
  for (std::size_t i = 0; i < op_cfgs.size(); ++i) {
    json entry = op_cfgs[i];
    const std::string op = entry["op"];
    entry.erase("op");
    std::string label = op;
    if (entry.contains("label") && entry["label"].is_string()) label = entry["label"].get<std::string>();
    entry.erase("label");
    std::vector<std::string> expect_fail;
    if (entry.contains("expect_fail")) {
      if (!entry["expect_fail"].is_array()) {
        log << "config error: ops[" << i << "].expect_fail must be an array\n";
        s["error"] = "expect_fail must be an array";
        return finish(kConfigError);
      }
      for (const auto& e : entry["expect_fail"]) expect_fail.push_back(e.get<std::string>());
      entry.erase("expect_fail");
    }
    const std::string prefix = (i < 10 ? "op0" : "op") + std::to_string(i) + "_" + label;
    Params p(entry, "ops[" + std::to_string(i) + "]:" + op);
    OpRun r(label, prefix, expect_fail);
    if (ro.verbose) log << "[" << i << "] " << op << " (" << label << ")\n";
    try {
      detail::operations().at(op)(ctx, p, r);
      p.finish();
      const auto missing = r.unmatched();
      if (!missing.empty()) p.fail("expect_fail", "no check named '" + missing.front() + "'");
    } catch (const Error& e) {
      const bool config = e.code() == Errc::ConfigParse;
      log << (config ? "config error" : "numeric error") << " in op " << i << " (" << op << "): " << e.what() << "\n";
      s["error"] = "op " + std::to_string(i) + " (" + op + "): " + e.what();
      s["operations"].push_back(json{{"index", i}, {"op", op}, {"label", label}, {"params", p.resolved()}});
      return finish(config ? kConfigError : kNumericError);
    }
    json rec{{"index", i},          {"op", op},           {"label", label},   {"params", p.resolved()},
             {"results", r.results}, {"files", r.files}, {"expect_fail", expect_fail}};
    rec["checks"] = json::array();
    for (const Check& c : r.checks) {
      rec["checks"].push_back(to_json(c));
      ++total;
      if (!c.ok()) ++bad;
      if (ro.verbose || !c.ok())
        log << "  " << std::left << std::setw(6) << c.status() << c.name << " = " << c.value << " "
            << to_string(c.relation) << " " << c.tolerance << "\n";
    }
    s["operations"].push_back(rec);
  }
  s["checks_total"] = total;
  s["checks_failed"] = bad;
  log << s["scenario"].get<std::string>() << ": " << total - bad << "/" << total << " checks ok\n";
  return finish(bad == 0 ? kPass : kCheckFailure);
}

/// Text table of the catalog.
inline void print_catalog(std::ostream& os) {
  os << std::left << std::setw(20) << "id" << std::setw(8) << "kind" << std::setw(36) << "parameters"
     << "description\n";
  for (const auto& e : catalog_entries())
    os << std::left << std::setw(20) << e.id << std::setw(8) << e.kind << std::setw(36) << e.params << e.description
       << "\n";
}

}  // namespace c1split::cli
