#pragma once
//
// Comparison functions sin_k, cot_k, the weighted p-d'Alembertian in strong
// and weak form, the comparison checks, tangency-operator coefficients and
// the weighted Bochner-Ohta identity on grids.
//

#include "c1split/connection.hpp"
#include "c1split/quadrature.hpp"
#include "c1split/scalar_field.hpp"
#include "c1split/timesep.hpp"

namespace c1split {

// ---------------------------------------------------------------------------
// sin_k, cot_k, pi_k
// ---------------------------------------------------------------------------

struct ComparisonFns {
  double kappa = 0.0;
  double pi = std::numeric_limits<double>::infinity();  // first positive root of sin_k

  double sin(double t) const {
    if (kappa > 0) return std::sin(std::sqrt(kappa) * t) / std::sqrt(kappa);
    if (kappa < 0) return std::sinh(std::sqrt(-kappa) * t) / std::sqrt(-kappa);
    return t;
  }
  /// sin_k'
  double cos(double t) const {
    if (kappa > 0) return std::cos(std::sqrt(kappa) * t);
    if (kappa < 0) return std::cosh(std::sqrt(-kappa) * t);
    return 1.0;
  }
  double cot(double t) const {
    if (!(t > 0) || t >= pi) throw Error(Errc::InvalidArgument, "cot_kappa evaluated outside (0, pi_kappa)");
    if (kappa > 0) return std::sqrt(kappa) / std::tan(std::sqrt(kappa) * t);
    if (kappa < 0) return std::sqrt(-kappa) / std::tanh(std::sqrt(-kappa) * t);
    return 1.0 / t;
  }
};

inline ComparisonFns comparison_fns(double kappa) {
  ComparisonFns c;
  c.kappa = kappa;
  if (kappa > 0) c.pi = M_PI / std::sqrt(kappa);
  return c;
}

/// (N - 1) cot_{K/(N-1)}(l); for N = 1 the bound is 0.
inline double comparison_bound(double N, double K, double l) {
  if (N <= 1.0) return 0.0;
  return (N - 1.0) * comparison_fns(K / (N - 1.0)).cot(l);
}

// ---------------------------------------------------------------------------
// Pointwise p-d'Alembertian
// ---------------------------------------------------------------------------

namespace detail {

inline void check_exponent(double p) {
  if (!(p < 1.0) || p == 0.0) throw Error(Errc::InvalidArgument, "exponent p must satisfy 0 != p < 1");
}

/// Metric data and finite-difference derivatives of u at a grid node.
struct Jet {
  Vec x;
  Mat g, gi;
  Tensor3 dg;
  double sqrtg = 1.0;
  Vec du;
  Mat ddu;
};

inline std::optional<Jet> jet(const MetricField& field, const ScalarField& u, const Index& idx, int stride,
                              bool second) {
  Jet J;
  auto du = u.gradient(idx, stride);
  if (!du) return std::nullopt;
  J.du = *du;
  if (second) {
    auto H = u.hessian(idx, stride);
    if (!H) return std::nullopt;
    J.ddu = *H;
  }
  J.x = u.window().node(idx);
  const MetricSample s = field.eval(J.x);
  J.g = s.g;
  J.dg = s.dg;
  J.gi = s.g.inverse();
  J.sqrtg = std::sqrt(std::abs(s.g.determinant()));
  return J;
}

/// Raises DegenerateGradient / WrongCausalType for unusable du.
inline double gradient_norm(const MetricField& field, const Jet& J, bool expect_future) {
  const double q = J.du.dot(J.gi * J.du);
  if (q < 0.0) throw Error(Errc::WrongCausalType, "gradient is spacelike");
  if (q < 0.01) throw Error(Errc::DegenerateGradient, "|du| below 0.1");
  const Vec grad = J.gi * J.du;
  const bool future = grad.dot(J.g * field.orientation(J.x)) > 0.0;
  if (future != expect_future) throw Error(Errc::WrongCausalType, "gradient has the wrong time orientation");
  return std::sqrt(q);
}

/// box_p^{(g,V)} u from the jet: -div(|du|^{p-2} grad u) + |du|^{p-2} g*(dV, du).
inline double p_dalembert_jet(const Jet& J, const Vec& dV, double p) {
  const int n = static_cast<int>(J.du.size());
  const Tensor3 G = christoffel_symbols(J.g, J.dg);
  const Vec trace = trace_gamma(G);
  const double q = J.du.dot(J.gi * J.du);
  const Vec grad = J.gi * J.du;
  double div_grad = 0.0, grad_q_dot = 0.0;  // d_i(g^ij u_j) and grad^i d_i q
  for (int i = 0; i < n; ++i) {
    const Mat dgi = -J.gi * J.dg.slice(i) * J.gi;
    div_grad += (dgi.row(i) * J.du)(0) + (J.gi.row(i) * J.ddu.col(i))(0);
    const double dq = J.du.dot(dgi * J.du) + 2.0 * J.du.dot(J.gi * J.ddu.col(i));
    grad_q_dot += grad(i) * dq;
  }
  const double w = std::pow(q, 0.5 * (p - 2.0));
  const double dw_dot = 0.5 * (p - 2.0) * std::pow(q, 0.5 * (p - 4.0)) * grad_q_dot;
  const double div = dw_dot + w * div_grad + w * grad.dot(trace);
  return -div + w * dV.dot(grad);
}

}  // namespace detail

/// box_p^{(g,V)} u at a grid node of u from central differences.
inline double p_dalembert(const MetricField& field, const WeightField& V, const ScalarField& u, double p,
                          const Index& idx, bool expect_future = true) {
  detail::check_exponent(p);
  auto J = detail::jet(field, u, idx, 1, true);
  if (!J) throw Error(Errc::OutOfWindow, "p_dalembert needs a full stencil of valid neighbours");
  detail::gradient_norm(field, *J, expect_future);
  return detail::p_dalembert_jet(*J, V.gradient(J->x), p);
}

/// Covariant Hessian d_i d_j u - Gamma^k_ij d_k u.
inline Mat covariant_hessian(const Mat& g, const Tensor3& dg, const Vec& du, const Mat& ddu) {
  const Tensor3 G = christoffel_symbols(g, dg);
  const int n = static_cast<int>(du.size());
  Mat H = ddu;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) H(i, j) -= G(k, i, j) * du(k);
  return H;
}

// ---------------------------------------------------------------------------
// Strong comparison
// ---------------------------------------------------------------------------

struct StrongComparisonOptions {
  double min_separation = 0.2;
  double cut_threshold = 50.0;  // mask nodes whose second differences exceed threshold / h
  DistanceOptions distance = [] {
    DistanceOptions d;
    d.shoot.full_fan = false;
    return d;
  }();
};

struct StrongComparisonReport {
  double max_violation = 0.0;           // max [box_p(-l) - bound]_+
  double max_relative_violation = 0.0;  // the same divided by |bound|
  double max_relative_gap = 0.0;        // max |box_p(-l) - bound| / |bound|
  std::size_t checked = 0;
  std::size_t masked_cut = 0;
  std::size_t masked_other = 0;
  ScalarField separation;
  ScalarField dalembertian;
};

/// Max over grid nodes in I^-(o) of [box_p(-l(., o)) - (N-1) cot_{K/(N-1)}(l)]_+.
inline StrongComparisonReport strong_comparison_check(const MetricField& field, const WeightField& V, double N,
                                                      double K, const Vec& o, const ChartWindow& grid, double p,
                                                      const StrongComparisonOptions& opts = {}) {
  detail::check_exponent(p);
  validate_weight(V, field.dim());
  const SeparationField sep = separation_field(field, o, SeparationDirection::ToOrigin, grid, opts.distance);
  ScalarField u(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) u.set(i, -sep.values.value(i), sep.values.valid(i));
  StrongComparisonReport r;
  r.separation = sep.values;
  r.dalembertian = ScalarField(grid);
  enum Status : int { Skip, Cut, Other, Ok };
  struct Row {
    int status;
    double box, bound;
  };
  const double h = grid.max_spacing();
  const auto rows = parallel_map<Row>(grid.size(), [&](std::size_t i) {
    const Index idx = grid.unflatten(i);
    if (!u.valid(idx)) return Row{Skip, 0, 0};
    const double l = sep.values.value(i);
    if (l < opts.min_separation) return Row{Skip, 0, 0};
    auto J = detail::jet(field, u, idx, 1, true);
    if (!J) return Row{Other, 0, 0};
    if (J->ddu.cwiseAbs().maxCoeff() > opts.cut_threshold / h) return Row{Cut, 0, 0};
    try {
      detail::gradient_norm(field, *J, true);
    } catch (const Error&) {
      return Row{Other, 0, 0};
    }
    return Row{Ok, detail::p_dalembert_jet(*J, V.gradient(J->x), p), comparison_bound(N, K, l)};
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    if (row.status == Cut) ++r.masked_cut;
    if (row.status == Other) ++r.masked_other;
    if (row.status != Ok) continue;
    ++r.checked;
    r.dalembertian.set(i, row.box);
    const double viol = std::max(0.0, row.box - row.bound);
    const double scale = std::max(std::abs(row.bound), 1e-12);
    r.max_violation = std::max(r.max_violation, viol);
    r.max_relative_violation = std::max(r.max_relative_violation, viol / scale);
    r.max_relative_gap = std::max(r.max_relative_gap, std::abs(row.box - row.bound) / scale);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Weak comparison
// ---------------------------------------------------------------------------

enum class SourceKind { Point, Ray };

struct WeakFormResult {
  double value = 0.0;
  double quadrature_error = 0.0;
  Bump phi;
  SourceKind source = SourceKind::Point;
  std::size_t support_nodes = 0;
  std::size_t degenerate_nodes = 0;
};

namespace detail {

struct WeakSetup {
  std::size_t support = 0, degenerate = 0;
};

/// Counts support nodes of phi where df is missing or degenerate.
inline WeakSetup weak_setup(const MetricField& field, const ScalarField& f, const Bump& phi) {
  const ChartWindow& w = f.window();
  phi.check_support(w);
  WeakSetup s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec x = w.node(i);
    if (phi(x) == 0.0) continue;
    ++s.support;
    auto J = jet(field, f, w.unflatten(i), 1, false);
    bool ok = static_cast<bool>(J) && f.valid(i);
    if (ok) {
      try {
        gradient_norm(field, *J, true);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) ++s.degenerate;
  }
  if (s.degenerate * 100 > s.support)
    throw Error(Errc::DegenerateGradient, "df unusable on more than 1% of the support of phi");
  return s;
}

}  // namespace detail

/// Integral of [(N-1) phi / f + g*(dphi + phi dV, df) |df|^{p-2}] e^{-V} sqrt|g|
/// over the grid of f; the first term is dropped for a ray source. Unusable
/// nodes (at most 1% of the support) contribute 0.
inline WeakFormResult weak_comparison(const MetricField& field, const WeightField& V, double N, double p,
                                      SourceKind source, const ScalarField& f, const Bump& phi) {
  detail::check_exponent(p);
  validate_weight(V, field.dim());
  const detail::WeakSetup setup = detail::weak_setup(field, f, phi);
  const ChartWindow& w = f.window();
  auto integrand = [&](const Index& idx, int stride) -> double {
    const Vec x = w.node(idx);
    const double ph = phi(x);
    const Vec dph = phi.gradient(x);
    if (ph == 0.0 && dph.squaredNorm() == 0.0) return 0.0;
    auto J = detail::jet(field, f, idx, stride, false);
    if (!J || !f.valid(idx)) return 0.0;
    const double q = J->du.dot(J->gi * J->du);
    if (q < 0.01) return 0.0;
    const Vec dV = V.gradient(x);
    double val = std::pow(q, 0.5 * (p - 2.0)) * (dph + ph * dV).dot(J->gi * J->du);
    if (source == SourceKind::Point) val += (N - 1.0) * ph / f.value(idx);
    return val * std::exp(-V.value(x)) * J->sqrtg;
  };
  const QuadratureResult qr = trapezoid(w, integrand);
  WeakFormResult r;
  r.value = qr.value;
  r.quadrature_error = qr.error;
  r.phi = phi;
  r.source = source;
  r.support_nodes = setup.support;
  r.degenerate_nodes = setup.degenerate;
  return r;
}

/// The integration-by-parts image of weak_comparison:
/// integral of phi [(N-1)/f + box_p f + |df|^{p-2} g*(dV, df)] e^{-V} sqrt|g|.
inline QuadratureResult strong_form_pairing(const MetricField& field, const WeightField& V, double N, double p,
                                            SourceKind source, const ScalarField& f, const Bump& phi) {
  detail::check_exponent(p);
  detail::weak_setup(field, f, phi);
  const ChartWindow& w = f.window();
  auto integrand = [&](const Index& idx, int stride) -> double {
    const Vec x = w.node(idx);
    const double ph = phi(x);
    if (ph == 0.0) return 0.0;
    auto J = detail::jet(field, f, idx, stride, true);
    if (!J || !f.valid(idx)) return 0.0;
    const double q = J->du.dot(J->gi * J->du);
    if (q < 0.01) return 0.0;
    const Vec dV = V.gradient(x);
    double val = detail::p_dalembert_jet(*J, dV, p) + std::pow(q, 0.5 * (p - 2.0)) * dV.dot(J->gi * J->du);
    if (source == SourceKind::Point) val += (N - 1.0) / f.value(idx);
    return ph * val * std::exp(-V.value(x)) * J->sqrtg;
  };
  return trapezoid(w, integrand);
}

// ---------------------------------------------------------------------------
// Tangency coefficients
// ---------------------------------------------------------------------------

struct TangencyCoefficients {
  Vec x;
  Mat a;
  Vec c;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double p = 0.0;
};

/// a^{ij} = e^{-V} sqrt|g| int_0^1 |db(t)|^{p-2} [(2-p) d^i b d^j b / |db|^2 - g^ij] dt with
/// db(t) = db- + t (db+ - db-), 16-point Gauss-Legendre in t; c^j = a^ij d_i V.
inline TangencyCoefficients tangency_coefficients(const MetricField& field, const WeightField& V, const Vec& x,
                                                  const Vec& dbplus, const Vec& dbminus, double p) {
  detail::check_exponent(p);
  const Mat g = field.g(x);
  const Mat gi = g.inverse();
  const int n = field.dim();
  const GaussRule rule = gauss_legendre(16);
  Mat bracket = Mat::Zero(n, n);
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const Vec db = dbminus + rule.nodes[k] * (dbplus - dbminus);
    const double q = db.dot(gi * db);
    if (q < 0.01) throw Error(Errc::DegenerateGradient, "interpolated db is not uniformly timelike");
    const Vec up = gi * db;
    bracket += rule.weights[k] * std::pow(q, 0.5 * (p - 2.0)) * ((2.0 - p) * up * up.transpose() / q - gi);
  }
  TangencyCoefficients T;
  T.x = x;
  T.p = p;
  T.a = std::exp(-V.value(x)) * std::sqrt(std::abs(g.determinant())) * bracket;
  T.a = 0.5 * (T.a + T.a.transpose());
  T.c = T.a.transpose() * V.gradient(x);
  Eigen::SelfAdjointEigenSolver<Mat> es(T.a);
  T.min_eigenvalue = es.eigenvalues().minCoeff();
  T.max_eigenvalue = es.eigenvalues().maxCoeff();
  return T;
}

/// The same at a grid node, db+- by central differences of the grids.
inline TangencyCoefficients tangency_coefficients(const MetricField& field, const WeightField& V,
                                                  const ScalarField& bplus, const ScalarField& bminus, double p,
                                                  const Index& idx) {
  auto dp = bplus.gradient(idx);
  auto dm = bminus.gradient(idx);
  if (!dp || !dm) throw Error(Errc::OutOfWindow, "tangency coefficients need valid neighbours");
  return tangency_coefficients(field, V, bplus.window().node(idx), *dp, *dm, p);
}

// ---------------------------------------------------------------------------
// Weighted Bochner-Ohta identity
// ---------------------------------------------------------------------------

/// (Ric + Hess V)(X, X) at x; supplied by a symbolic oracle or a mollified field.
using CurvatureProvider = std::function<double(const Vec& x, const Vec& X)>;

inline CurvatureProvider flat_curvature() {
  return [](const Vec&, const Vec&) { return 0.0; };
}

/// Flat space with a weight: Ric = 0, Hess V from the coordinate Hessian.
inline CurvatureProvider weight_hessian_curvature(std::function<Mat(const Vec&)> hessV) {
  return [hessV](const Vec& x, const Vec& X) { return X.dot(hessV(x) * X); };
}

struct BochnerOhtaResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double quadrature_error = 0.0;
};

/// LHS = int phi [Tr(A B A B) + (Ric + Hess V)(grad u, grad u) |du|^{2p-4}] e^{-V} sqrt|g|,
/// RHS = int [box_p u (dphi(DH) + phi box_p u) - A(dphi, dH)] e^{-V} sqrt|g|, with
/// A = D^2 H = |du|^{p-2} [(2-p) grad u grad u / |du|^2 - g^{-1}], B = Hess u,
/// DH = -|du|^{p-2} grad u and dH = B(DH, .).
inline BochnerOhtaResult bochner_ohta_residual(const MetricField& field, const WeightField& V, double p,
                                               const ScalarField& u, const Bump& phi,
                                               const CurvatureProvider& curvature) {
  detail::check_exponent(p);
  const ChartWindow& w = u.window();
  phi.check_support(w);
  auto sides = [&](const Index& idx, int stride, bool left) -> double {
    const Vec x = w.node(idx);
    const double ph = phi(x);
    const Vec dph = phi.gradient(x);
    if (ph == 0.0 && dph.squaredNorm() == 0.0) return 0.0;
    auto J = detail::jet(field, u, idx, stride, true);
    if (!J) throw Error(Errc::OutOfWindow, "Bochner-Ohta identity needs valid neighbours on supp phi");
    detail::gradient_norm(field, *J, true);
    const double q = J->du.dot(J->gi * J->du);
    const double s = std::pow(q, 0.5 * (p - 2.0));
    const Vec grad = J->gi * J->du;
    const Mat A = s * ((2.0 - p) * grad * grad.transpose() / q - J->gi);
    const Mat B = covariant_hessian(J->g, J->dg, J->du, J->ddu);
    const double density = std::exp(-V.value(x)) * J->sqrtg;
    if (left) {
      const Mat AB = A * B;
      const double tr = (AB * AB).trace();
      return ph * (tr + curvature(x, grad) * std::pow(q, p - 2.0)) * density;
    }
    const double box = detail::p_dalembert_jet(*J, V.gradient(x), p);
    const Vec DH = -s * grad;
    const Vec dH = B * DH;
    return (box * (dph.dot(DH) + ph * box) - dph.dot(A * dH)) * density;
  };
  const QuadratureResult L = trapezoid(w, [&](const Index& i, int s) { return sides(i, s, true); });
  const QuadratureResult R = trapezoid(w, [&](const Index& i, int s) { return sides(i, s, false); });
  BochnerOhtaResult r;
  r.lhs = L.value;
  r.rhs = R.value;
  r.residual = std::abs(L.value - R.value);
  r.quadrature_error = L.error + R.error;
  return r;
}

}  // namespace c1split
