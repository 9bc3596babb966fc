#pragma once
//
// Closed-form metric, line and weight catalog.
//

#include "c1split/chart.hpp"

#include <map>
#include <string>
#include <vector>

namespace c1split {

using Params = std::map<std::string, double>;

inline double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

namespace detail {

inline ChartWindow big_domain(int n, double tmin, double tmax, double slo, double shi) {
  Vec lo = Vec::Constant(n, slo), hi = Vec::Constant(n, shi);
  lo(0) = tmin;
  hi(0) = tmax;
  return ChartWindow(lo, hi, std::vector<int>(n, 3));
}

inline Vec time_direction(const Vec& x) { return unit(static_cast<int>(x.size()), 0); }

/// Diagonal metric diag(g00(x), -s_1(x), ..., -s_{n-1}(x)) built from callbacks.
inline MetricField diagonal_metric(std::string name, const ChartWindow& w, const ChartWindow& domain,
                                   std::function<Vec(const Vec&)> diag,
                                   std::function<Mat(const Vec&)> ddiag,  // ddiag(k, i) = d_k diag_i
                                   Regularity reg) {
  const int n = w.dim();
  MetricField m(
      std::move(name), w,
      [diag](const Vec& x) -> Mat { return diag(x).asDiagonal(); },
      [ddiag, n](const Vec& x) -> Tensor3 {
        const Mat d = ddiag(x);
        Tensor3 t(n);
        for (int k = 0; k < n; ++k)
          for (int i = 0; i < n; ++i) t(k, i, i) = d(k, i);
        return t;
      },
      time_direction, reg);
  m.set_natural_domain(domain);
  if (!domain.contains(w.lo()) || !domain.contains(w.hi()))
    throw Error(Errc::OutOfWindow, "window " + w.describe() + " exceeds natural domain of " + m.name());
  return m;
}

}  // namespace detail

/// dt^2 - |dx|^2.
inline MetricField minkowski(const ChartWindow& w, std::string name = "minkowski") {
  const int n = w.dim();
  return detail::diagonal_metric(
      std::move(name), w, detail::big_domain(n, -1e4, 1e4, -1e4, 1e4),
      [n](const Vec&) -> Vec {
        Vec d = Vec::Constant(n, -1.0);
        d(0) = 1.0;
        return d;
      },
      [n](const Vec&) -> Mat { return Mat::Zero(n, n); }, Regularity::Smooth);
}

enum class ScaleFactor { Exp, Cosh };

/// dt^2 - a(t)^2 |dx|^2 with a = e^t or cosh t.
inline MetricField flrw(const ChartWindow& w, ScaleFactor a) {
  const int n = w.dim();
  auto aval = [a](double t) { return a == ScaleFactor::Exp ? std::exp(t) : std::cosh(t); };
  auto adot = [a](double t) { return a == ScaleFactor::Exp ? std::exp(t) : std::sinh(t); };
  return detail::diagonal_metric(
      a == ScaleFactor::Exp ? "flrw-exp" : "flrw-cosh", w, detail::big_domain(n, -20, 20, -1e4, 1e4),
      [n, aval](const Vec& x) -> Vec {
        const double A = aval(x(0));
        Vec d = Vec::Constant(n, -A * A);
        d(0) = 1.0;
        return d;
      },
      [n, aval, adot](const Vec& x) -> Mat {
        Mat d = Mat::Zero(n, n);
        for (int i = 1; i < n; ++i) d(0, i) = -2.0 * aval(x(0)) * adot(x(0));
        return d;
      },
      Regularity::Smooth);
}

/// dt^2 - h with h = s^2 * 4|dy|^2 / (1 - |y|^2)^2, a scaled Poincare ball patch.
inline MetricField product_hyperbolic(const ChartWindow& w, double s = 0.5) {
  const int n = w.dim();
  const double r = 0.9 / std::sqrt(static_cast<double>(std::max(1, n - 1)));
  return detail::diagonal_metric(
      "product-hyperbolic", w, detail::big_domain(n, -1e4, 1e4, -r, r),
      [n, s](const Vec& x) -> Vec {
        const double q = 1.0 - x.tail(n - 1).squaredNorm();
        Vec d = Vec::Constant(n, -4.0 * s * s / (q * q));
        d(0) = 1.0;
        return d;
      },
      [n, s](const Vec& x) -> Mat {
        const double q = 1.0 - x.tail(n - 1).squaredNorm();
        Mat d = Mat::Zero(n, n);
        for (int k = 1; k < n; ++k)
          for (int i = 1; i < n; ++i) d(k, i) = -16.0 * s * s * x(k) / (q * q * q);
        return d;
      },
      Regularity::Smooth);
}

/// Distance of the cross-section of product_hyperbolic.
inline double hyperbolic_distance(const Vec& y, const Vec& z, double s = 0.5) {
  const double arg = 1.0 + 2.0 * (y - z).squaredNorm() / ((1.0 - y.squaredNorm()) * (1.0 - z.squaredNorm()));
  return s * std::acosh(arg);
}

/// (1 + beta |x^1 - c|^{1+alpha}) dt^2 - |dx|^2: C^1 but not C^2 across x^1 = c.
inline MetricField c1_perturbed(const ChartWindow& w, double alpha = 0.5, double beta = -0.5, double c = 0.0) {
  const int n = w.dim();
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, "c1-perturbed needs alpha in (0,1)");
  const double reach = std::pow(0.5 / std::max(std::abs(beta), 1e-12), 1.0 / (1.0 + alpha));
  ChartWindow dom = detail::big_domain(n, -1e4, 1e4, -1e4, 1e4);
  Vec lo = dom.lo(), hi = dom.hi();
  lo(1) = c - reach;
  hi(1) = c + reach;
  return detail::diagonal_metric(
      "c1-perturbed", w, ChartWindow(lo, hi, dom.shape()),
      [n, alpha, beta, c](const Vec& x) -> Vec {
        Vec d = Vec::Constant(n, -1.0);
        d(0) = 1.0 + beta * std::pow(std::abs(x(1) - c), 1.0 + alpha);
        return d;
      },
      [n, alpha, beta, c](const Vec& x) -> Mat {
        Mat d = Mat::Zero(n, n);
        const double z = x(1) - c;
        d(1, 0) = beta * (1.0 + alpha) * std::pow(std::abs(z), alpha) * (z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0));
        return d;
      },
      Regularity::C1);
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

inline WeightField zero_weight(double N = std::numeric_limits<double>::infinity()) {
  WeightField V;
  V.synthetic_dim = N;
  return V;
}

/// V = c * (x^axis)^2.
inline WeightField quadratic_weight(double N, int axis = 1, double c = 1.0) {
  WeightField V;
  V.name = "quadratic";
  V.value = [axis, c](const Vec& x) { return c * x(axis) * x(axis); };
  V.gradient = [axis, c](const Vec& x) -> Vec {
    Vec g = Vec::Zero(x.size());
    g(axis) = 2.0 * c * x(axis);
    return g;
  };
  V.synthetic_dim = N;
  V.identically_zero = c == 0.0;
  return V;
}

/// V = c * x^axis.
inline WeightField linear_weight(double N, int axis, double c = 1.0) {
  WeightField V;
  V.name = "linear";
  V.value = [axis, c](const Vec& x) { return c * x(axis); };
  V.gradient = [axis, c](const Vec& x) -> Vec {
    Vec g = Vec::Zero(x.size());
    g(axis) = c;
    return g;
  };
  V.synthetic_dim = N;
  V.identically_zero = c == 0.0;
  return V;
}

// ---------------------------------------------------------------------------
// Lines
// ---------------------------------------------------------------------------

enum class LineKind { Ray, Line };

/// Proper-time parametrized timelike geodesic given in closed form.
struct TimelikeLine {
  std::string name;
  std::function<Vec(double)> position;
  std::function<Vec(double)> velocity;
  LineKind kind = LineKind::Line;

  Vec operator()(double t) const { return position(t); }
};

/// t -> (t, y0).
inline TimelikeLine t_axis(const Vec& y0) {
  const int n = static_cast<int>(y0.size()) + 1;
  TimelikeLine L;
  L.name = "t-axis";
  L.position = [y0, n](double t) -> Vec {
    Vec x(n);
    x(0) = t;
    x.tail(n - 1) = y0;
    return x;
  };
  L.velocity = [n](double) -> Vec { return unit(n, 0); };
  return L;
}

inline TimelikeLine t_axis(int n) { return t_axis(Vec::Zero(n - 1)); }

/// t -> (t cosh a, t sinh a, 0, ...), a Minkowski geodesic.
inline TimelikeLine boosted_line(int n, double rapidity) {
  TimelikeLine L;
  L.name = "boosted";
  const double c = std::cosh(rapidity), s = std::sinh(rapidity);
  L.position = [n, c, s](double t) -> Vec {
    Vec x = Vec::Zero(n);
    x(0) = t * c;
    x(1) = t * s;
    return x;
  };
  L.velocity = [n, c, s](double) -> Vec {
    Vec v = Vec::Zero(n);
    v(0) = c;
    v(1) = s;
    return v;
  };
  return L;
}

// ---------------------------------------------------------------------------
// Lookup by name
// ---------------------------------------------------------------------------

struct CatalogEntry {
  std::string id;
  std::string kind;
  std::string description;
  std::string params;
};

inline std::vector<CatalogEntry> catalog_entries() {
  return {
      {"minkowski", "metric", "dt^2 - |dx|^2", "dim"},
      {"flrw-exp", "metric", "dt^2 - e^{2t}|dx|^2", "dim"},
      {"flrw-cosh", "metric", "dt^2 - cosh^2(t)|dx|^2", "dim"},
      {"product-flat", "metric", "dt^2 - |dy|^2 (split product)", "dim"},
      {"product-hyperbolic", "metric", "dt^2 - s^2 4|dy|^2/(1-|y|^2)^2", "dim, s=0.5"},
      {"weighted-product", "metric", "dt^2 - |dy|^2 carrying a weight V(y)", "dim"},
      {"c1-perturbed", "metric", "(1 + beta|x1-c|^{1+alpha})dt^2 - |dx|^2", "dim, alpha=0.5, beta=-0.5, c=0"},
      {"t-axis", "line", "t -> (t, y0)", "y0=0"},
      {"boosted", "line", "t -> (t cosh a, t sinh a)", "rapidity=0.5"},
      {"zero", "weight", "V = 0", "N"},
      {"quadratic", "weight", "V = c (x^axis)^2", "N, axis=1, c=1"},
      {"linear", "weight", "V = c x^axis", "N, axis=1, c=1"},
  };
}

inline MetricField make_metric(const std::string& id, const ChartWindow& w, const Params& p = {}) {
  if (id == "minkowski") return minkowski(w);
  if (id == "product-flat") return minkowski(w, "product-flat");
  if (id == "weighted-product") return minkowski(w, "weighted-product");
  if (id == "flrw-exp") return flrw(w, ScaleFactor::Exp);
  if (id == "flrw-cosh") return flrw(w, ScaleFactor::Cosh);
  if (id == "product-hyperbolic") return product_hyperbolic(w, param(p, "s", 0.5));
  if (id == "c1-perturbed")
    return c1_perturbed(w, param(p, "alpha", 0.5), param(p, "beta", -0.5), param(p, "c", 0.0));
  throw Error(Errc::ConfigParse, "unknown catalog metric '" + id + "'");
}

inline WeightField make_weight(const std::string& id, double N, const Params& p = {}) {
  const int axis = static_cast<int>(param(p, "axis", 1));
  if (id == "zero") return zero_weight(N);
  if (id == "quadratic") return quadratic_weight(N, axis, param(p, "c", 1.0));
  if (id == "linear") return linear_weight(N, axis, param(p, "c", 1.0));
  throw Error(Errc::ConfigParse, "unknown catalog weight '" + id + "'");
}

/// Coordinate Hessian of a catalog weight.
inline std::function<Mat(const Vec&)> make_weight_hessian(const std::string& id, const Params& p = {}) {
  const int axis = static_cast<int>(param(p, "axis", 1));
  const double c = param(p, "c", 1.0);
  if (id == "quadratic")
    return [axis, c](const Vec& x) -> Mat {
      Mat H = Mat::Zero(x.size(), x.size());
      H(axis, axis) = 2.0 * c;
      return H;
    };
  if (id == "zero" || id == "linear") return [](const Vec& x) -> Mat { return Mat::Zero(x.size(), x.size()); };
  throw Error(Errc::ConfigParse, "unknown catalog weight '" + id + "'");
}

inline TimelikeLine make_line(const std::string& id, int n, const Params& p = {}) {
  if (id == "t-axis") return t_axis(Vec::Constant(n - 1, param(p, "y0", 0.0)));
  if (id == "boosted") return boosted_line(n, param(p, "rapidity", 0.5));
  throw Error(Errc::ConfigParse, "unknown catalog line '" + id + "'");
}

}  // namespace c1split
