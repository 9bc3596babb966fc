#pragma once
//
// Christoffel symbols from first-derivative data and the weak (integrated by
// parts) pairings of Ricci, Hess V and the Bakry-Emery tensor with X (x) X mu.
//

#include "c1split/chart.hpp"
#include "c1split/parallel.hpp"
#include "c1split/quadrature.hpp"

#include <optional>
#include <vector>

namespace c1split {

struct ChristoffelValue {
  Vec x;
  Tensor3 gamma;  // gamma(i,j,k) = Gamma^i_jk

  double operator()(int i, int j, int k) const { return gamma(i, j, k); }
};

/// Gamma^i_jk = 1/2 g^im (d_j g_mk + d_k g_jm - d_m g_jk).
inline Tensor3 christoffel_symbols(const Mat& g, const Tensor3& dg) {
  const int n = static_cast<int>(g.rows());
  const Mat ginv = g.inverse();
  Tensor3 lower(n);  // Gamma_mjk
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) lower(m, j, k) = lower(m, k, j) = 0.5 * (dg(j, m, k) + dg(k, j, m) - dg(m, j, k));
  Tensor3 G(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += ginv(i, m) * lower(m, j, k);
        G(i, j, k) = G(i, k, j) = s;
      }
  return G;
}

inline ChristoffelValue christoffel(const MetricField& field, const Vec& x) {
  const MetricSample s = field.eval(x);
  return {x, christoffel_symbols(s.g, s.dg)};
}

/// Gamma(v, w)^i = Gamma^i_jk v^j w^k.
inline Vec contract(const Tensor3& G, const Vec& v, const Vec& w) {
  const int n = G.dim();
  Vec out = Vec::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out(i) += G(i, j, k) * v(j) * w(k);
  return out;
}

/// Gamma^k_ki.
inline Vec trace_gamma(const Tensor3& G) {
  const int n = G.dim();
  Vec t = Vec::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) t(i) += G(k, k, i);
  return t;
}

struct DistributionPairing {
  double value = 0.0;
  double quadrature_error = 0.0;
  std::vector<double> integrand_samples;  // filled on request
};

struct PairingOptions {
  bool dump_samples = false;
};

namespace detail {

/// Which terms of the Bakry-Emery density to include.
struct PairingTerms {
  bool ricci = true;
  bool hessian = true;
  double dv_coefficient = 0.0;  // (N - n)^{-1}, 0 when dropped
};

/// Weak density at x after moving one derivative onto psi^ij = X^i X^j mu sqrt|g|.
inline double weak_density(const MetricField& field, const WeightField* V, const TestData& data,
                           const PairingTerms& terms, const Vec& x) {
  const double mu = data.mu(x);
  if (mu == 0.0) {
    const Vec dmu = data.mu.gradient(x);
    if (dmu.isZero(0.0)) return 0.0;
  }
  const int n = field.dim();
  const MetricSample s = field.eval(x);
  const Tensor3 G = christoffel_symbols(s.g, s.dg);
  const Vec tr = trace_gamma(G);
  const double vol = std::sqrt(std::abs(s.g.determinant()));
  const Vec X = data.X.value(x);
  const Mat J = data.X.jacobian(x);  // J(i,m) = d_m X^i
  const Vec dmu = data.mu.gradient(x);

  // rho = mu sqrt|g|, d_m rho = (d_m mu + mu Gamma^k_km) sqrt|g|
  const double rho = mu * vol;
  Vec drho(n);
  for (int m = 0; m < n; ++m) drho(m) = (dmu(m) + mu * tr(m)) * vol;

  // dpsi(m, i, j) = d_m psi^ij
  auto dpsi = [&](int m, int i, int j) { return (J(i, m) * X(j) + X(i) * J(j, m)) * rho + X(i) * X(j) * drho(m); };

  double total = 0.0;
  if (terms.ricci) {
    double r = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double psi = X(i) * X(j) * rho;
        double quad = 0.0;
        for (int m = 0; m < n; ++m) {
          r -= G(m, i, j) * dpsi(m, i, j);
          r += G(m, i, m) * dpsi(j, i, j);
          quad += G(m, i, j) * tr(m);
          for (int k = 0; k < n; ++k) quad -= G(m, i, k) * G(k, j, m);
        }
        r += quad * psi;
      }
    total += r;
  }
  if (V != nullptr && (terms.hessian || terms.dv_coefficient != 0.0)) {
    const Vec dV = V->gradient(x);
    if (terms.hessian) {
      double h = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          h -= dV(j) * dpsi(i, i, j);
          double gk = 0.0;
          for (int k = 0; k < n; ++k) gk += G(k, i, j) * dV(k);
          h -= gk * X(i) * X(j) * rho;
        }
      total += h;
    }
    if (terms.dv_coefficient != 0.0) {
      const double dvx = dV.dot(X);
      total -= terms.dv_coefficient * dvx * dvx * rho;
    }
  }
  return total;
}

inline DistributionPairing pair(const MetricField& field, const WeightField* V, const TestData& data,
                                const PairingTerms& terms, const PairingOptions& opts) {
  data.mu.check_support(field.window());
  const ChartWindow& w = field.window();
  auto f = [&](const Vec& x) { return weak_density(field, V, data, terms, x); };
  DistributionPairing out;
  if (opts.dump_samples) {
    out.integrand_samples = parallel_map<double>(w.size(), [&](std::size_t i) { return f(w.node(i)); });
  }
  const QuadratureResult q = trapezoid_pointwise(w, f);
  out.value = q.value;
  out.quadrature_error = q.error;
  return out;
}

inline PairingTerms bakry_emery_terms(const WeightField& V, int n) {
  validate_weight(V, n);
  PairingTerms t;
  if (V.synthetic_dim == n) {
    t.hessian = false;
    return t;
  }
  t.dv_coefficient = std::isinf(V.synthetic_dim) ? 0.0 : 1.0 / (V.synthetic_dim - n);
  return t;
}

}  // namespace detail

/// <Ric(X,X), mu> with both d Gamma terms integrated by parts.
inline DistributionPairing ricci_pair(const MetricField& field, const TestData& data, const PairingOptions& opts = {}) {
  return detail::pair(field, nullptr, data, {true, false, 0.0}, opts);
}

/// <Hess V(X,X), mu> with the second derivative of V integrated by parts.
inline DistributionPairing hessian_pair(const MetricField& field, const WeightField& V, const TestData& data,
                                        const PairingOptions& opts = {}) {
  return detail::pair(field, &V, data, {false, true, 0.0}, opts);
}

/// <Ric + Hess V - (N-n)^{-1} dV (x) dV, X (x) X mu>.
inline DistributionPairing bakry_emery_pair(const MetricField& field, const WeightField& V, const TestData& data,
                                            const PairingOptions& opts = {}) {
  return detail::pair(field, &V, data, detail::bakry_emery_terms(V, field.dim()), opts);
}

/// Integral of f(x) mu sqrt|g| over the window.
template <class F>
QuadratureResult weighted_integral(const MetricField& field, const Bump& mu, F&& f) {
  return trapezoid_pointwise(field.window(), [&](const Vec& x) {
    const double m = mu(x);
    if (m == 0.0) return 0.0;
    return f(x) * m * std::sqrt(std::abs(field.g(x).determinant()));
  });
}

/// Integral of mu sqrt|g|.
inline QuadratureResult bump_mass(const MetricField& field, const Bump& mu) {
  return weighted_integral(field, mu, [](const Vec&) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Energy-condition probe
// ---------------------------------------------------------------------------

struct EnergyProbeOptions {
  double bump_radius = 0.25;
  int centers_per_axis = 5;
  std::vector<double> rapidities = {0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5};
  int riemannian_directions = 8;  // per plane, Riemannian variant
  double tolerance_factor = 5.0;  // holds iff min >= -(factor * quadrature error + abs_tol)
  double abs_tol = 1e-8;
};

struct EnergyProbeSample {
  Vec center;
  Vec X;
  double value = 0.0;
  double error = 0.0;
};

struct EnergyProbeReport {
  double K = 0.0;
  double N = 0.0;
  Vec region_lo, region_hi;
  double min_pairing = 0.0;
  double min_error = 0.0;
  EnergyProbeSample argmin;
  std::vector<EnergyProbeSample> samples;
  bool holds = true;
};

/// g-orthonormal frame at x: e_0 along F, the rest by Gram-Schmidt on the
/// coordinate axes. For Riemannian fields, Gram-Schmidt on all axes.
inline std::vector<Vec> orthonormal_frame(const MetricField& field, const Vec& x) {
  const int n = field.dim();
  const Mat g = field.g(x);
  std::vector<Vec> frame;
  std::vector<double> signs;
  auto add = [&](Vec v) {
    for (std::size_t l = 0; l < frame.size(); ++l) v -= signs[l] * frame[l].dot(g * v) * frame[l];
    const double q = v.dot(g * v);
    if (std::abs(q) < 1e-12) return;
    frame.push_back(v / std::sqrt(std::abs(q)));
    signs.push_back(q > 0 ? 1.0 : -1.0);
  };
  if (field.signature() == Signature::Lorentzian) add(field.orientation(x));
  for (int k = 0; k < n && static_cast<int>(frame.size()) < n; ++k) add(unit(n, k));
  return frame;
}

/// Minimum of <Ric^(g,N,V)(X,X) - K g(X,X), mu> over boosts X of F and bump
/// placements in [lo, hi]. Since X is constant per bump, the pairing is a
/// quadratic form in X, recovered from n(n+1)/2 polarized pairings.
inline EnergyProbeReport energy_condition_probe(const MetricField& field, const WeightField& V, const Vec& lo,
                                                const Vec& hi, double K, const EnergyProbeOptions& opts = {}) {
  const int n = field.dim();
  const detail::PairingTerms terms = detail::bakry_emery_terms(V, n);
  EnergyProbeReport rep;
  rep.K = K;
  rep.N = V.synthetic_dim;
  rep.region_lo = lo;
  rep.region_hi = hi;

  std::vector<Vec> centers;
  const int m = std::max(1, opts.centers_per_axis);
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= m;
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t r = c;
    Vec x(n);
    for (int k = n - 1; k >= 0; --k) {
      const int i = static_cast<int>(r % m);
      r /= m;
      x(k) = m == 1 ? 0.5 * (lo(k) + hi(k)) : lo(k) + (hi(k) - lo(k)) * i / (m - 1);
    }
    centers.push_back(x);
  }

  struct Quadratic {
    Mat A, E;  // values and errors of the polarized pairings
  };
  auto forms = parallel_map<Quadratic>(centers.size(), [&](std::size_t c) {
    Bump mu{centers[c], opts.bump_radius, 1.0};
    mu.check_support(field.window());
    Mat P(n, n), E(n, n);
    auto run = [&](const Vec& X) {
      TestData d{TestVectorField::constant(X), mu};
      auto f = [&](const Vec& x) {
        double v = detail::weak_density(field, &V, d, terms, x);
        if (K != 0.0 && mu(x) != 0.0) {
          const Mat g = field.g(x);
          v -= K * X.dot(g * X) * mu(x) * std::sqrt(std::abs(g.determinant()));
        }
        return v;
      };
      return trapezoid_pointwise(field.window(), f);
    };
    std::vector<QuadratureResult> diag(n);
    for (int i = 0; i < n; ++i) {
      diag[i] = run(unit(n, i));
      P(i, i) = diag[i].value;
      E(i, i) = diag[i].error;
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const QuadratureResult s = run(unit(n, i) + unit(n, j));
        P(i, j) = P(j, i) = 0.5 * (s.value - diag[i].value - diag[j].value);
        E(i, j) = E(j, i) = 0.5 * (s.error + diag[i].error + diag[j].error);
      }
    return Quadratic{P, E};
  });

  bool first = true;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const auto frame = orthonormal_frame(field, centers[c]);
    std::vector<Vec> Xs;
    if (field.signature() == Signature::Lorentzian) {
      for (int k = 1; k < static_cast<int>(frame.size()); ++k)
        for (double a : opts.rapidities) {
          if (a == 0.0 && k > 1) continue;
          Xs.push_back(std::cosh(a) * frame[0] + std::sinh(a) * frame[k]);
        }
      if (frame.size() == 1) Xs.push_back(frame[0]);
    } else {
      Xs.push_back(frame[0]);
      for (std::size_t k = 1; k < frame.size(); ++k)
        for (std::size_t l = 0; l < k; ++l)
          for (int q = 1; q < opts.riemannian_directions; ++q) {
            const double th = M_PI * q / opts.riemannian_directions;
            Xs.push_back(std::cos(th) * frame[l] + std::sin(th) * frame[k]);
          }
    }
    for (const Vec& X : Xs) {
      EnergyProbeSample s{centers[c], X, X.dot(forms[c].A * X), X.cwiseAbs().dot(forms[c].E * X.cwiseAbs())};
      if (first || s.value < rep.min_pairing) {
        rep.min_pairing = s.value;
        rep.min_error = s.error;
        rep.argmin = s;
        first = false;
      }
      rep.samples.push_back(std::move(s));
    }
  }
  rep.holds = rep.min_pairing >= -(opts.tolerance_factor * rep.min_error + opts.abs_tol);
  return rep;
}

}  // namespace c1split
