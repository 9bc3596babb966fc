#pragma once
//
// The splitting pipeline: Busemann field on a grid, local structure checks,
// gradient flow of b, the level-set cross-section (S, h) and verification of
// Fl^* g = dt^2 - h with the weight constant along the flow.
//

#include "c1split/busemann.hpp"
#include "c1split/dalembert.hpp"
#include "c1split/grid_metric.hpp"

namespace c1split {

// ---------------------------------------------------------------------------
// Busemann field
// ---------------------------------------------------------------------------

struct BusemannField {
  ScalarField bplus, bminus;
  ScalarField gap;       // b+ - b-
  ScalarField hessian;   // |Hess b+| (operator norm of the covariant Hessian)
  ScalarField grad_norm; // |db+|_g
  double max_richardson_gap = 0.0;
  double min_gap = 0.0;
  std::size_t failed = 0;  // nodes masked for NotConverged / not chronologically related

  const ChartWindow& window() const { return bplus.window(); }
};

namespace detail {

inline void fill_derived(const MetricField& field, BusemannField& bf) {
  const ChartWindow& w = bf.window();
  bf.gap = ScalarField(w);
  bf.hessian = ScalarField(w);
  bf.grad_norm = ScalarField(w);
  bf.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (bf.bplus.valid(i) && bf.bminus.valid(i)) {
      bf.gap.set(i, bf.bplus.value(i) - bf.bminus.value(i));
      bf.min_gap = std::min(bf.min_gap, bf.gap.value(i));
    }
    auto J = jet(field, bf.bplus, w.unflatten(i), 1, true);
    if (!J) continue;
    bf.hessian.set(i, sym_op_norm(covariant_hessian(J->g, J->dg, J->du, J->ddu)));
    bf.grad_norm.set(i, std::sqrt(std::abs(J->du.dot(J->gi * J->du))));
  }
}

}  // namespace detail

/// Extrapolated b+ and b- at every node of `grid`; nodes where a limit fails are masked.
inline BusemannField busemann_field(const MetricField& field, const TimelikeRay& line, const ChartWindow& grid,
                                    const BusemannOptions& o = {}) {
  const double T = *std::max_element(o.schedule.begin(), o.schedule.end());
  const MetricField ext = busemann_field_window(field, line, T);
  BusemannField bf;
  bf.bplus = ScalarField(grid);
  bf.bminus = ScalarField(grid);
  struct Row {
    bool ok;
    double plus, minus, gap;
  };
  const auto rows = parallel_map<Row>(grid.size(), [&](std::size_t i) {
    const Vec x = grid.node(i);
    try {
      const BusemannValue p = busemann_limit_on(ext, line, x, BusemannSign::Forward, o);
      const BusemannValue m = busemann_limit_on(ext, line, x, BusemannSign::Backward, o);
      return Row{true, p.extrapolated, m.extrapolated, std::max(p.richardson_gap, m.richardson_gap)};
    } catch (const Error& e) {
      if (e.code() == Errc::NotConverged || e.code() == Errc::NotInChronologicalPast ||
          e.code() == Errc::NotInChronologicalFuture || e.code() == Errc::NoConnection)
        return Row{false, 0, 0, 0};
      throw;
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) {
      ++bf.failed;
      continue;
    }
    bf.bplus.set(i, rows[i].plus);
    bf.bminus.set(i, rows[i].minus);
    bf.max_richardson_gap = std::max(bf.max_richardson_gap, rows[i].gap);
  }
  detail::fill_derived(field, bf);
  return bf;
}

/// A Busemann field replaced by a given function (b+ = b-), for controls.
inline BusemannField busemann_field_from(const MetricField& field, const ChartWindow& grid, const ScalarFn& b) {
  BusemannField bf;
  bf.bplus = ScalarField::from_function(grid, b);
  bf.bminus = bf.bplus;
  detail::fill_derived(field, bf);
  return bf;
}

inline void write_busemann_csv(const BusemannField& bf, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  const ChartWindow& w = bf.window();
  for (int k = 0; k < w.dim(); ++k) out << "x" << k << ",";
  out << "bplus,bminus,gap,hessian,grad_norm,valid\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec x = w.node(i);
    for (int k = 0; k < w.dim(); ++k) out << x(k) << ",";
    out << bf.bplus.value(i) << "," << bf.bminus.value(i) << "," << bf.gap.value(i) << "," << bf.hessian.value(i)
        << "," << bf.grad_norm.value(i) << "," << (bf.bplus.valid(i) && bf.bminus.valid(i) ? 1 : 0) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Local structure
// ---------------------------------------------------------------------------

struct StructureOptions {
  double hessian_factor = 1e-2;  // |Hess b| <= hessian_factor * h
  double gradient_tol = 1e-3;
  double weight_tol = 1e-3;
};

struct StructureReport {
  double max_hessian = 0.0;
  double max_gradient_defect = 0.0;  // max ||db|_g - 1|
  double max_weight_derivative = 0.0;  // max |dV(grad b)|
  double hessian_tol = 0.0;
  std::size_t nodes = 0;
  bool hessian_ok = false, gradient_ok = false, weight_ok = false;
  bool passed() const { return hessian_ok && gradient_ok && weight_ok; }
};

/// Zero Hessian, |db| = 1 and dV(grad b) = 0 for b = b+ and b = b- on the
/// nodes of the Busemann grid inside [lo, hi].
inline StructureReport local_structure_check(const BusemannField& bf, const MetricField& field, const WeightField& V,
                                             const Vec& lo, const Vec& hi, const StructureOptions& o = {}) {
  const ChartWindow& w = bf.window();
  StructureReport r;
  r.hessian_tol = o.hessian_factor * w.max_spacing();
  for (const ScalarField* b : {&bf.bplus, &bf.bminus})
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Vec x = w.node(i);
      bool in = true;
      for (int k = 0; k < w.dim(); ++k) in = in && x(k) >= lo(k) - 1e-12 && x(k) <= hi(k) + 1e-12;
      if (!in) continue;
      auto J = detail::jet(field, *b, w.unflatten(i), 1, true);
      if (!J) continue;
      ++r.nodes;
      r.max_hessian = std::max(r.max_hessian, sym_op_norm(covariant_hessian(J->g, J->dg, J->du, J->ddu)));
      r.max_gradient_defect =
          std::max(r.max_gradient_defect, std::abs(std::sqrt(std::abs(J->du.dot(J->gi * J->du))) - 1.0));
      r.max_weight_derivative = std::max(r.max_weight_derivative, std::abs(V.gradient(x).dot(J->gi * J->du)));
    }
  r.hessian_ok = r.nodes > 0 && r.max_hessian <= r.hessian_tol;
  r.gradient_ok = r.nodes > 0 && r.max_gradient_defect <= o.gradient_tol;
  r.weight_ok = r.nodes > 0 && r.max_weight_derivative <= o.weight_tol;
  return r;
}

// ---------------------------------------------------------------------------
// Flow map
// ---------------------------------------------------------------------------

struct FlowOptions {
  bool check_structure = true;
  double structure_tol = 1e-3;  // ||grad b|_g - 1| along the flow
};

struct FlowMap {
  std::vector<Vec> starts;
  std::vector<double> times;  // sorted, containing 0
  std::vector<std::vector<Vec>> points;  // points[i][j] = Fl_{times[j]}(starts[i])
  double step = 0.0;
  double group_defect = 0.0;  // |Fl_t(Fl_s(y)) - Fl_{t+s}(y)|
  double level_defect = 0.0;  // |b(Fl_t(y)) - b(y) - t|
  double speed_defect = 0.0;  // ||d/dt Fl_t|_g - 1|
};

namespace detail {

inline Vec flow_velocity(const MetricField& field, const ScalarField& b, const Vec& x) {
  if (!b.window().contains(x)) throw Error(Errc::FlowLeavesWindow, "flow line left the Busemann grid");
  const Vec db = b.gradient_at(x);
  return field.g(x).inverse() * db;
}

/// RK4 from x over signed time `span` in steps of at most `step`.
inline Vec flow(const MetricField& field, const ScalarField& b, Vec x, double span, double step,
                const FlowOptions& o, double* speed_defect = nullptr) {
  if (span == 0.0) return x;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(span) / step - 1e-9)));
  const double h = span / n;
  for (int i = 0; i < n; ++i) {
    const Vec k1 = flow_velocity(field, b, x);
    const Vec k2 = flow_velocity(field, b, x + 0.5 * h * k1);
    const Vec k3 = flow_velocity(field, b, x + 0.5 * h * k2);
    const Vec k4 = flow_velocity(field, b, x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double s = std::abs(std::sqrt(std::abs(k1.dot(field.g(x) * k1))) - 1.0);
    if (speed_defect) *speed_defect = std::max(*speed_defect, s);
    if (o.check_structure && s > o.structure_tol)
      throw Error(Errc::StructureViolated, "|grad b| drifts from 1 along the flow");
  }
  if (!b.window().contains(x)) throw Error(Errc::FlowLeavesWindow, "flow line left the Busemann grid");
  return x;
}

}  // namespace detail

/// Gradient flow of b+ through each start, sampled at `times`.
inline FlowMap flow_map(const MetricField& field, const BusemannField& bf, const std::vector<Vec>& starts,
                        std::vector<double> times, double step, const FlowOptions& o = {}) {
  std::sort(times.begin(), times.end());
  if (times.empty() || times.front() > 0 || times.back() < 0)
    throw Error(Errc::InvalidArgument, "flow times must bracket 0");
  FlowMap fm;
  fm.starts = starts;
  fm.times = times;
  fm.step = step;
  const ScalarField& b = bf.bplus;
  struct Line {
    std::vector<Vec> pts;
    double speed = 0.0, level = 0.0, group = 0.0;
  };
  const double tmax = std::max(std::abs(times.front()), std::abs(times.back()));
  const auto lines = parallel_map<Line>(starts.size(), [&](std::size_t i) {
    Line L;
    L.pts.assign(times.size(), starts[i]);
    const double b0 = b.value_at(starts[i]);
    // forward and backward sweeps from t = 0
    Vec x = starts[i];
    double t = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (times[j] < 0) continue;
      x = detail::flow(field, b, x, times[j] - t, step, o, &L.speed);
      t = times[j];
      L.pts[j] = x;
    }
    x = starts[i];
    t = 0.0;
    for (std::size_t j = times.size(); j-- > 0;) {
      if (times[j] >= 0) continue;
      x = detail::flow(field, b, x, times[j] - t, step, o, &L.speed);
      t = times[j];
      L.pts[j] = x;
    }
    for (std::size_t j = 0; j < times.size(); ++j)
      L.level = std::max(L.level, std::abs(b.value_at(L.pts[j]) - b0 - times[j]));
    // group property on (0.3, 0.4) T and its mirror; the direct path uses half steps
    for (double sgn : {1.0, -1.0}) {
      const double s1 = sgn * 0.3 * tmax, s2 = sgn * 0.4 * tmax;
      const Vec composed = detail::flow(field, b, detail::flow(field, b, starts[i], s1, step, o), s2, step, o);
      const Vec direct = detail::flow(field, b, starts[i], s1 + s2, 0.5 * step, o);
      L.group = std::max(L.group, (composed - direct).norm());
    }
    return L;
  });
  for (const auto& L : lines) {
    fm.points.push_back(L.pts);
    fm.speed_defect = std::max(fm.speed_defect, L.speed);
    fm.level_defect = std::max(fm.level_defect, L.level);
    fm.group_defect = std::max(fm.group_defect, L.group);
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Cross-section
// ---------------------------------------------------------------------------

struct CrossSection {
  double level = 0.0;
  int axis = 0;               // coordinate solved for on each column
  ChartWindow lattice;        // transverse coordinates y (all axes but `axis`)
  std::vector<Vec> points;    // x_S(y) per lattice node
  std::vector<Mat> h;         // h(y) = -g(tau_k, tau_l)
  std::vector<double> V;      // V(x_S(y))
  double min_eigenvalue = 0.0;
  MetricField metric;         // Riemannian grid metric h on the lattice
  WeightField weight;         // V restricted to S, synthetic dimension N - 1
};

namespace detail {

/// Values of b and d_axis b along the axis column through transverse y.
struct Column {
  std::vector<double> s, b, db;
};

inline Column column(const ScalarField& b, int axis, const Vec& y) {
  const ChartWindow& w = b.window();
  const int n = w.dim();
  Column c;
  for (int i = 0; i < w.shape()[axis]; ++i) {
    Vec x(n);
    for (int k = 0, m = 0; k < n; ++k) x(k) = k == axis ? w.lo(k) + i * w.spacing(k) : y(m++);
    c.s.push_back(x(axis));
    c.b.push_back(b.value_at(x));
    c.db.push_back(b.gradient_at(x)(axis));
  }
  return c;
}

/// Root of b = level on a column by bisection of the cubic Hermite interpolant.
inline double column_root(const Column& c, double level) {
  const std::size_t m = c.s.size();
  const double sign = c.b.back() > c.b.front() ? 1.0 : -1.0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (sign * (c.b[i + 1] - c.b[i]) <= 0.0) throw Error(Errc::LevelSetNotGraph, "b is not monotone along a column");
  if (sign * (level - c.b.front()) < 0 || sign * (level - c.b.back()) > 0)
    throw Error(Errc::LevelSetNotGraph, "level not attained on a column");
  std::size_t i = 0;
  while (i + 2 < m && sign * (c.b[i + 1] - level) < 0) ++i;
  const double h = c.s[i + 1] - c.s[i];
  auto herm = [&](double s) {
    const double u = (s - c.s[i]) / h;
    return (2 * u * u * u - 3 * u * u + 1) * c.b[i] + (u * u * u - 2 * u * u + u) * h * c.db[i] +
           (-2 * u * u * u + 3 * u * u) * c.b[i + 1] + (u * u * u - u * u) * h * c.db[i + 1];
  };
  double a = c.s[i], z = c.s[i + 1];
  while (z - a > 1e-10) {
    const double mid = 0.5 * (a + z);
    if (sign * (herm(mid) - level) < 0) a = mid;
    else z = mid;
  }
  return 0.5 * (a + z);
}

inline Vec embed(const Vec& y, int axis, double s) {
  const int n = static_cast<int>(y.size()) + 1;
  Vec x(n);
  for (int k = 0, m = 0; k < n; ++k) x(k) = k == axis ? s : y(m++);
  return x;
}

}  // namespace detail

struct CrossSectionOptions {
  int stride = 1;  // lattice = every stride-th transverse grid line
  double margin = 0.0;  // transverse coordinates kept inside the grid by this much
};

/// S = {b+ = level}: one root per transverse lattice node along the axis most
/// aligned with grad b at the grid centre; h = -g restricted to S in the
/// transverse coordinates; V|_S with synthetic dimension N - 1.
inline CrossSection extract_cross_section(const MetricField& field, const BusemannField& bf, double level,
                                          const WeightField& V, const CrossSectionOptions& o = {}) {
  const ScalarField& b = bf.bplus;
  const ChartWindow& w = b.window();
  const int n = w.dim();
  if (n < 2) throw Error(Errc::InvalidArgument, "cross-section needs dimension >= 2");
  CrossSection cs;
  cs.level = level;
  const Vec centre = 0.5 * (w.lo() + w.hi());
  const Vec grad = field.g(centre).inverse() * b.gradient_at(centre);
  grad.cwiseAbs().maxCoeff(&cs.axis);
  const int a = cs.axis;

  Vec lo(n - 1), hi(n - 1);
  std::vector<int> shape;
  for (int k = 0, m = 0; k < n; ++k) {
    if (k == a) continue;
    const int cells = (w.shape()[k] - 1) / o.stride;
    const double span = cells * o.stride * w.spacing(k);
    lo(m) = w.lo(k) + o.margin;
    hi(m) = w.lo(k) + span - o.margin;
    shape.push_back(std::max(3, static_cast<int>(std::lround((hi(m) - lo(m)) / (o.stride * w.spacing(k)))) + 1));
    ++m;
  }
  cs.lattice = ChartWindow(lo, hi, shape);
  const std::size_t m = cs.lattice.size();
  cs.points.resize(m);
  cs.h.resize(m);
  cs.V.resize(m);
  std::vector<std::vector<Vec>> taus(m);
  parallel_for(m, [&](std::size_t i) {
    const Vec y = cs.lattice.node(i);
    const double s = detail::column_root(detail::column(b, a, y), level);
    const Vec x = detail::embed(y, a, s);
    cs.points[i] = x;
    const Vec db = b.gradient_at(x);
    const Mat g = field.g(x);
    std::vector<Vec> tau;
    for (int k = 0; k < n; ++k) {
      if (k == a) continue;
      Vec t = unit(n, k);
      t(a) -= db(k) / db(a);
      tau.push_back(t);
    }
    Mat h(n - 1, n - 1);
    for (int k = 0; k < n - 1; ++k)
      for (int l = 0; l < n - 1; ++l) h(k, l) = -tau[k].dot(g * tau[l]);
    cs.h[i] = h;
    cs.V[i] = V.value(x);
    taus[i] = tau;
  });
  cs.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const Mat& h : cs.h) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    cs.min_eigenvalue = std::min(cs.min_eigenvalue, es.eigenvalues().minCoeff());
  }
  if (!(cs.min_eigenvalue > 0.0)) throw Error(Errc::StructureViolated, "induced metric on the level set is not positive");

  // d h by central differences on the lattice, one-sided at its edges
  const ChartWindow& L = cs.lattice;
  std::vector<Tensor3> dh(m, Tensor3(n - 1));
  for (std::size_t i = 0; i < m; ++i) {
    const Index idx = L.unflatten(i);
    for (int k = 0; k < n - 1; ++k) {
      Index p = idx, q = idx;
      p[k] = std::min(idx[k] + 1, L.shape()[k] - 1);
      q[k] = std::max(idx[k] - 1, 0);
      const double dy = (p[k] - q[k]) * L.spacing(k);
      dh[i].set_slice(k, (cs.h[L.flatten(p)] - cs.h[L.flatten(q)]) / dy);
    }
  }
  cs.metric = grid_metric("cross-section", L, cs.h, dh, Signature::Riemannian);

  auto Vp = std::make_shared<WeightField>(V);
  auto bp = std::make_shared<ScalarField>(b);
  auto lift = [bp, a, level](const Vec& y) {
    return detail::embed(y, a, detail::column_root(detail::column(*bp, a, y), level));
  };
  cs.weight.name = V.name + "|S";
  cs.weight.synthetic_dim = V.synthetic_dim - 1.0;
  cs.weight.identically_zero = V.identically_zero;
  cs.weight.value = [Vp, lift](const Vec& y) { return Vp->value(lift(y)); };
  cs.weight.gradient = [Vp, bp, lift, a, n](const Vec& y) -> Vec {
    const Vec x = lift(y);
    const Vec dV = Vp->gradient(x);
    const Vec db = bp->gradient_at(x);
    Vec out(n - 1);
    for (int k = 0, m2 = 0; k < n; ++k) {
      if (k == a) continue;
      out(m2++) = dV(k) - db(k) / db(a) * dV(a);
    }
    return out;
  };
  return cs;
}

// ---------------------------------------------------------------------------
// Product verification
// ---------------------------------------------------------------------------

struct SplitReport {
  double pullback_error = 0.0;     // max |Fl^* g - (dt^2 - h)| entrywise
  double dt_row_error = 0.0;       // max |(Fl^* g)_{0k} - delta_0k|
  double measure_error = 0.0;      // max |sqrt|Fl^* g| - sqrt|h||
  double weight_invariance = 0.0;  // max |V(Fl_t(y)) - V(y)|
  double h_min_eigenvalue = 0.0;
  std::size_t nodes = 0;
  EnergyProbeReport cross_section_probe;
  bool probe_ran = false;
};

struct VerifyOptions {
  EnergyProbeOptions probe;
  bool run_probe = true;
};

/// Pulls g back through (t, y) -> Fl_t(x_S(y)) with centred differences over
/// the flow times and the cross-section lattice and compares with dt^2 - h.
/// The flow must start at the cross-section points.
inline SplitReport verify_product(const MetricField& field, const FlowMap& flow, const CrossSection& S,
                                  const WeightField& V, double N, const VerifyOptions& o = {}) {
  const int n = field.dim();
  const ChartWindow& L = S.lattice;
  if (flow.starts.size() != L.size()) throw Error(Errc::InvalidArgument, "flow starts do not match the cross-section");
  SplitReport r;
  r.h_min_eigenvalue = S.min_eigenvalue;
  const std::size_t nt = flow.times.size();
  for (std::size_t i = 0; i < L.size(); ++i)
    for (std::size_t j = 0; j < nt; ++j)
      r.weight_invariance = std::max(r.weight_invariance, std::abs(V.value(flow.points[i][j]) - S.V[i]));
  for (std::size_t i = 0; i < L.size(); ++i) {
    const Index idx = L.unflatten(i);
    bool interior = true;
    for (int k = 0; k < n - 1; ++k) interior = interior && idx[k] > 0 && idx[k] < L.shape()[k] - 1;
    if (!interior) continue;
    for (std::size_t j = 1; j + 1 < nt; ++j) {
      const Vec x = flow.points[i][j];
      Mat J(n, n);
      J.col(0) = (flow.points[i][j + 1] - flow.points[i][j - 1]) / (flow.times[j + 1] - flow.times[j - 1]);
      for (int k = 0; k < n - 1; ++k) {
        Index p = idx, q = idx;
        p[k] += 1;
        q[k] -= 1;
        J.col(k + 1) = (flow.points[L.flatten(p)][j] - flow.points[L.flatten(q)][j]) / (2 * L.spacing(k));
      }
      const Mat pull = J.transpose() * field.g(x) * J;
      Mat model = Mat::Zero(n, n);
      model(0, 0) = 1.0;
      model.bottomRightCorner(n - 1, n - 1) = -S.h[i];
      const Mat diff = pull - model;
      r.pullback_error = std::max(r.pullback_error, diff.cwiseAbs().maxCoeff());
      r.dt_row_error = std::max(r.dt_row_error, diff.row(0).cwiseAbs().maxCoeff());
      r.measure_error =
          std::max(r.measure_error, std::abs(std::sqrt(std::abs(pull.determinant())) - std::sqrt(S.h[i].determinant())));
      ++r.nodes;
    }
  }
  if (o.run_probe) {
    WeightField W = S.weight;
    W.synthetic_dim = N - 1.0;
    const ChartWindow& cw = S.metric.window();
    Vec lo(n - 1), hi(n - 1);
    for (int k = 0; k < n - 1; ++k) {
      const double pad = o.probe.bump_radius + 2 * cw.spacing(k);
      lo(k) = cw.lo(k) + pad;
      hi(k) = cw.hi(k) - pad;
      if (lo(k) > hi(k)) lo(k) = hi(k) = 0.5 * (cw.lo(k) + cw.hi(k));
    }
    r.cross_section_probe = energy_condition_probe(S.metric, W, lo, hi, 0.0, o.probe);
    r.probe_ran = true;
  }
  return r;
}

}  // namespace c1split
