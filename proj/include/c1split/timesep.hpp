#pragma once
//
// Causal relations and the time separation l(x, y) on a chart window, the
// maximizer criterion, and l-fields on grids.
//

#include "c1split/geodesic.hpp"
#include "c1split/scalar_field.hpp"

#include <optional>
#include <tuple>
#include <vector>

namespace c1split {

struct SeparationValue {
  bool related = false;  // false encodes l = -infinity
  double value = 0.0;
  std::optional<CausalCurve> witness;
  double shoot_value = std::numeric_limits<double>::quiet_NaN();
  double ascent_value = std::numeric_limits<double>::quiet_NaN();
  bool disagreement = false;  // shoot and ascent differ by more than agreement_tol
};

struct DistanceOptions {
  ShootOptions shoot;
  AscentOptions ascent;
  bool use_ascent = true;
  bool check_diamond = true;
  double agreement_tol = 1e-3;
  double cone_speed = 0.0;  // 0: estimate from the window
};

/// Largest coordinate speed of null vectors along the coordinate axes,
/// sampled on a coarse copy of the window grid.
inline double cone_speed(const MetricField& field) {
  const ChartWindow& w = field.window();
  std::vector<int> shape(w.dim(), 9);
  const ChartWindow coarse(w.lo(), w.hi(), shape);
  double c = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const Mat g = field.g(coarse.node(i));
    for (int k = 1; k < w.dim(); ++k) {
      const double a = g(k, k), b = g(0, k), d = b * b - g(0, 0) * a;
      if (a >= 0 || d < 0) return std::numeric_limits<double>::infinity();
      c = std::max({c, std::abs((-b + std::sqrt(d)) / a), std::abs((-b - std::sqrt(d)) / a)});
    }
  }
  return c;
}

/// Cone-hull box of J+(x) and J-(y) for cone speed c; DiamondLeavesWindow if
/// it is not inside the window.
inline void check_diamond(const MetricField& field, const Vec& x, const Vec& y, double c) {
  const double dt = y(0) - x(0);
  if (dt <= 0) return;
  const ChartWindow& w = field.window();
  if (!w.contains(x) || !w.contains(y)) throw Error(Errc::DiamondLeavesWindow, "endpoint outside window");
  for (int k = 1; k < w.dim(); ++k) {
    const double mid = 0.5 * (x(k) + y(k)), half = 0.5 * c * dt;
    if (mid - half < w.lo(k) - 1e-12 || mid + half > w.hi(k) + 1e-12)
      throw Error(Errc::DiamondLeavesWindow, "causal diamond leaves the window along axis " + std::to_string(k));
  }
}

/// Null if l^2 <= kNullTolerance |y - x|^2.
inline bool is_null_separation(double l, const Vec& x, const Vec& y) {
  return l * l <= kNullTolerance * (y - x).squaredNorm();
}

/// l(x, y) as the larger of a shooting geodesic and a curve-ascent lower bound.
inline SeparationValue lorentz_distance(const MetricField& field, const Vec& x, const Vec& y,
                                        const DistanceOptions& o = {}) {
  SeparationValue out;
  if ((y - x).squaredNorm() == 0.0) {
    out.related = true;
    return out;
  }
  if (o.check_diamond) check_diamond(field, x, y, o.cone_speed > 0 ? o.cone_speed : cone_speed(field));
  try {
    ShootCandidate c = shoot_geodesic(field, x, y, o.shoot);
    out.related = true;
    out.shoot_value = c.curve.proper_time;
    out.value = c.curve.proper_time;
    out.witness = std::move(c.curve);
  } catch (const Error& e) {
    if (e.code() != Errc::NoConnection) throw;
  }
  if (o.use_ascent || !out.related) {
    const AscentResult a = curve_ascent(field, x, y, o.ascent);
    if (a.causal) {
      out.ascent_value = a.length;
      if (out.related && std::abs(a.length - out.shoot_value) > o.agreement_tol) out.disagreement = true;
      if (!out.related || a.length > out.value) {
        out.value = a.length;
        out.witness = polyline(field, a.vertices);
      }
      out.related = true;
    }
  }
  if (!out.related) out.value = 0.0;
  return out;
}

enum class CausalRelation { Chronological, CausalOnly, Unrelated };

inline constexpr std::string_view to_string(CausalRelation r) {
  switch (r) {
    case CausalRelation::Chronological: return "chronological";
    case CausalRelation::CausalOnly: return "causal-only";
    case CausalRelation::Unrelated: return "unrelated";
  }
  return "?";
}

inline CausalRelation causally_related(const MetricField& field, const Vec& x, const Vec& y,
                                       const DistanceOptions& o = {}) {
  const SeparationValue s = lorentz_distance(field, x, y, o);
  if (!s.related) return CausalRelation::Unrelated;
  return is_null_separation(s.value, x, y) ? CausalRelation::CausalOnly : CausalRelation::Chronological;
}

/// Shooting with the causal screen: NotCausallyRelated if y is not in J+(x),
/// NoConnection if related but no geodesic was found.
inline CausalCurve shoot(const MetricField& field, const Vec& x, const Vec& y, double tol = 1e-10) {
  ShootOptions o;
  o.tol = tol;
  try {
    return shoot_geodesic(field, x, y, o).curve;
  } catch (const Error& e) {
    if (e.code() != Errc::NoConnection) throw;
  }
  const AscentResult a = curve_ascent(field, x, y);
  if (!a.causal) throw Error(Errc::NotCausallyRelated, "endpoint is not in the causal future");
  throw Error(Errc::NoConnection, "points are causally related but shooting failed");
}

// ---------------------------------------------------------------------------
// Maximizer criterion
// ---------------------------------------------------------------------------

struct MaximizerCheck {
  bool maximizer = true;
  double max_defect = 0.0;
  std::vector<std::tuple<double, double, double, double>> violations;  // (s, r, t, defect)
};

/// l(gamma_s, gamma_t) = l(gamma_s, gamma_r) + l(gamma_r, gamma_t) on all
/// triples of `samples` parameters spread along the curve, including its vertices
/// for polylines.
inline MaximizerCheck is_maximizer(const MetricField& field, const CausalCurve& curve, int samples, double tol,
                                   DistanceOptions o = {}) {
  if (!is_future_causal(curve.character))
    throw Error(Errc::WrongCausalType, "maximizer check needs a future-directed causal curve");
  std::vector<double> ts;
  if (curve.size() <= static_cast<std::size_t>(samples)) {
    ts = curve.params;
  } else {
    for (int i = 0; i < samples; ++i)
      ts.push_back(curve.params.front() + (curve.params.back() - curve.params.front()) * i / (samples - 1));
  }
  std::vector<Vec> pts;
  for (double t : ts) pts.push_back(curve.at(t));
  const std::size_t m = pts.size();
  std::vector<std::vector<double>> L(m, std::vector<double>(m, 0.0));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  const auto vals = parallel_map<double>(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const SeparationValue s = lorentz_distance(field, pts[i], pts[j], o);
    return s.related ? s.value : -1.0;
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) L[pairs[k].first][pairs[k].second] = vals[k];
  MaximizerCheck out;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = i + 1; r < m; ++r)
      for (std::size_t j = r + 1; j < m; ++j) {
        const double d = L[i][j] - L[i][r] - L[r][j];
        out.max_defect = std::max(out.max_defect, d);
        if (d > tol) out.violations.emplace_back(ts[i], ts[r], ts[j], d);
      }
  out.maximizer = out.violations.empty();
  return out;
}

// ---------------------------------------------------------------------------
// Separation fields
// ---------------------------------------------------------------------------

enum class SeparationDirection { ToOrigin, FromOrigin };

struct SeparationField {
  Vec origin;
  SeparationDirection direction = SeparationDirection::ToOrigin;
  ScalarField values;
  ScalarField grad_norm;  // |dl|_g where the central gradient exists
  double quality = 0.0;   // fraction of gradient nodes with ||dl|_g - 1| > 0.05
  std::size_t diamond_masked = 0;
};

/// l(x, o) (ToOrigin) or l(o, x) (FromOrigin) on every grid node; nodes that
/// are unrelated, null related, or whose diamond leaves the field window are masked.
inline SeparationField separation_field(const MetricField& field, const Vec& o, SeparationDirection dir,
                                        const ChartWindow& grid, DistanceOptions opts = {}) {
  SeparationField sf;
  sf.origin = o;
  sf.direction = dir;
  sf.values = ScalarField(grid);
  sf.grad_norm = ScalarField(grid);
  opts.use_ascent = false;
  if (opts.check_diamond && opts.cone_speed <= 0) opts.cone_speed = cone_speed(field);
  std::vector<std::uint8_t> diamond(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t i) {
    const Vec x = grid.node(i);
    const Vec a = dir == SeparationDirection::ToOrigin ? x : o;
    const Vec b = dir == SeparationDirection::ToOrigin ? o : x;
    if (b(0) <= a(0)) return;
    try {
      const SeparationValue s = lorentz_distance(field, a, b, opts);
      if (s.related && !is_null_separation(s.value, a, b)) sf.values.set(i, s.value);
    } catch (const Error& e) {
      if (e.code() == Errc::DiamondLeavesWindow) diamond[i] = 1;
      else if (e.code() != Errc::NoConnection) throw;
    }
  });
  for (auto d : diamond) sf.diamond_masked += d;
  std::size_t counted = 0, flagged = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto g = sf.values.gradient(grid.unflatten(i));
    if (!g) continue;
    const Mat ginv = field.g(grid.node(i)).inverse();
    const double q = g->dot(ginv * *g);
    const double nrm = std::sqrt(std::abs(q));
    sf.grad_norm.set(i, nrm);
    ++counted;
    if (std::abs(nrm - 1.0) > 0.05) ++flagged;
  }
  sf.quality = counted ? static_cast<double>(flagged) / counted : 0.0;
  return sf;
}

}  // namespace c1split
