#pragma once
//
// Good approximations g_eps of a C^1 metric: convolution with a polynomial
// bump on a fine lattice, followed by a cone-narrowing correction
// g_eps = g * rho - c theta (x) theta, and the classical Bakry-Emery curvature
// of the smooth result.
//

#include "c1split/connection.hpp"

#include <memory>
#include <vector>

namespace c1split {

/// Discrete kernel rho_eps(z) proportional to (1 - |z/eps|^2)^4 on a lattice
/// of spacing eps / per_radius, normalized to unit discrete mass.
struct Mollifier {
  double eps = 0.0;
  double spacing = 0.0;
  std::vector<Vec> offsets;
  std::vector<double> weights;
  std::vector<Vec> dweights;  // d rho(z) times the lattice cell volume

  double mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

inline Mollifier make_mollifier(int n, double eps, int per_radius = 0) {
  if (!(eps > 0)) throw Error(Errc::InvalidArgument, "mollifier radius must be positive");
  if (per_radius <= 0) per_radius = n <= 2 ? 8 : (n == 3 ? 5 : 3);
  Mollifier m;
  m.eps = eps;
  m.spacing = eps / per_radius;
  const int R = per_radius;
  std::array<int, kMaxDim> idx{};
  for (int k = 0; k < n; ++k) idx[k] = -R;
  std::vector<double> raw;
  std::vector<Vec> draw;
  for (;;) {
    Vec z(n);
    for (int k = 0; k < n; ++k) z(k) = idx[k] * m.spacing;
    const double s = z.squaredNorm() / (eps * eps);
    if (s < 1.0 - 1e-12) {
      m.offsets.push_back(z);
      raw.push_back(std::pow(1.0 - s, 4));
      draw.push_back(-8.0 * std::pow(1.0 - s, 3) / (eps * eps) * z);
    }
    int k = n - 1;
    while (k >= 0 && ++idx[k] > R) idx[k--] = -R;
    if (k < 0) break;
  }
  double total = 0.0;
  for (double r : raw) total += r;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    m.weights.push_back(raw[i] / total);
    m.dweights.push_back(draw[i] / total);
  }
  return m;
}

/// Classical Ricci tensor from g, dg and ddg(k,l,i,j) = d_k d_l g_ij.
inline Mat classical_ricci(const Mat& g, const Tensor3& dg, const Tensor4& ddg) {
  const int n = static_cast<int>(g.rows());
  const Mat gi = g.inverse();
  const Tensor3 G = christoffel_symbols(g, dg);
  // dGamma(l)(i,j,k) = d_l Gamma^i_jk
  std::vector<Tensor3> dG(n, Tensor3(n));
  for (int l = 0; l < n; ++l) {
    const Mat dgl = dg.slice(l);
    const Mat dgi = -gi * dgl * gi;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) {
            const double L = 0.5 * (dg(j, m, k) + dg(k, j, m) - dg(m, j, k));
            const double dL = 0.5 * (ddg(l, j, m, k) + ddg(l, k, j, m) - ddg(l, m, j, k));
            s += dgi(i, m) * L + gi(i, m) * dL;
          }
          dG[l](i, j, k) = s;
        }
  }
  Mat R = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        s += dG[i](i, j, k) - dG[k](i, j, i);
        for (int p = 0; p < n; ++p) s += G(i, i, p) * G(p, j, k) - G(i, k, p) * G(p, j, i);
      }
      R(j, k) = s;
    }
  return 0.5 * (R + R.transpose());
}

struct GoodApproxOptions {
  int per_radius = 0;  // lattice points per kernel radius, 0 = by dimension
  int samples_per_axis = 9;
  int fan_directions = 16;
  std::optional<ChartWindow> measure_window;  // default: the inner window
};

struct GoodApproximation {
  MetricField base;
  double eps = 0.0;
  Mollifier kernel;
  MetricField smoothed;
  WeightField V_eps;
  double c = 0.0;
  double c0_convolution_error = 0.0;  // sup |g * rho - g|
  double cone_margin_constant = 0.0;
  int retries = 0;
  double min_margin = 0.0;  // min g(v, v) / |v|^2 over sampled g_eps-null v
  std::vector<double> margins;
  double c0_error = 0.0;  // sup |g_eps - g|
  double c1_part = 0.0;   // sup max_k |d_k g_eps - d_k g|
  double c1_error = 0.0;  // sum of the two
  double d2_norm = 0.0;   // sup |dd g_eps|

  /// Second derivatives of the smooth metric.
  std::function<Tensor4(const Vec&)> ddg;
  /// Hessian of V_eps (coordinate second derivatives).
  std::function<Mat(const Vec&)> ddV;
};

namespace detail {

struct Convolved {
  Mat G;
  Tensor3 dG;
  Tensor4 ddG;
};

inline Convolved convolve(const MetricField& base, const Mollifier& k, const Vec& x, bool second) {
  const int n = base.dim();
  Convolved out{Mat::Zero(n, n), Tensor3(n), Tensor4(n)};
  for (std::size_t q = 0; q < k.offsets.size(); ++q) {
    const MetricSample s = base.eval(x - k.offsets[q]);
    const double w = k.weights[q];
    out.G += w * s.g;
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          out.dG(a, i, j) += w * s.dg(a, i, j);
          if (second)
            for (int l = 0; l < n; ++l) out.ddG(l, a, i, j) += k.dweights[q](l) * s.dg(a, i, j);
        }
  }
  if (second)
    for (int a = 0; a < n; ++a)
      for (int l = a + 1; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double avg = 0.5 * (out.ddG(a, l, i, j) + out.ddG(l, a, i, j));
            out.ddG(a, l, i, j) = out.ddG(l, a, i, j) = avg;
          }
  return out;
}

/// theta = G-dual of F / sqrt(G(F, F)).
inline Vec narrowing_covector(const Mat& G, const Vec& F) { return G * F / std::sqrt(F.dot(G * F)); }

/// Spatial unit directions used to sample cones.
inline std::vector<Vec> sphere_fan(int dim, int count) {
  std::vector<Vec> out;
  if (dim == 1) return {make_vec({1.0}), make_vec({-1.0})};
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2 * M_PI * i / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return out;
  }
  const int rings = std::max(2, count / 4);
  for (int r = 0; r <= rings; ++r) {
    const double th = M_PI * r / rings;
    const int m = (r == 0 || r == rings) ? 1 : count;
    for (int i = 0; i < m; ++i) {
      const double ph = 2 * M_PI * i / m;
      out.push_back(make_vec({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)}));
    }
  }
  return out;
}

/// Null vectors e_0 + u of a Lorentzian matrix g in a g-orthonormal frame
/// adapted to F.
inline std::vector<Vec> null_fan(const Mat& g, const Vec& F, int count) {
  const int n = static_cast<int>(g.rows());
  std::vector<Vec> frame;
  Vec e0 = F / std::sqrt(F.dot(g * F));
  frame.push_back(e0);
  for (int k = 0; k < n && static_cast<int>(frame.size()) < n; ++k) {
    Vec v = unit(n, k);
    v -= frame[0].dot(g * v) * frame[0];
    for (std::size_t l = 1; l < frame.size(); ++l) v += frame[l].dot(g * v) * frame[l];
    const double q = v.dot(g * v);
    if (q > -1e-12) continue;
    frame.push_back(v / std::sqrt(-q));
  }
  std::vector<Vec> out;
  for (const Vec& u : sphere_fan(n - 1, count)) {
    Vec v = frame[0];
    for (int k = 1; k < n; ++k) v += u(k - 1) * frame[k];
    out.push_back(v);
  }
  return out;
}

inline ChartWindow sample_grid(const ChartWindow& w, int per_axis) {
  return ChartWindow(w.lo(), w.hi(), std::vector<int>(w.dim(), std::max(3, per_axis)));
}

}  // namespace detail

/// Builds g_eps on the window shrunk by eps and certifies g_eps < g (every
/// sampled g_eps-causal vector is g-timelike). c is doubled up to four times
/// before ConeNarrowingFailed.
inline GoodApproximation good_approximation(const MetricField& field, const WeightField& V, double eps,
                                            const GoodApproxOptions& o = {}) {
  const int n = field.dim();
  const ChartWindow& w = field.window();
  for (int k = 0; k < n; ++k)
    if (2.0 * eps >= w.hi(k) - w.lo(k)) throw Error(Errc::CollarTooThin, "window thinner than twice eps");
  ChartWindow inner = [&] {
    try {
      return w.shrunk(eps * (1.0 + 1e-9));
    } catch (const Error&) {
      throw Error(Errc::CollarTooThin, "no inner window left after removing the collar");
    }
  }();
  const ChartWindow measure = o.measure_window ? *o.measure_window : inner;
  for (int k = 0; k < n; ++k)
    if (measure.lo(k) < inner.lo(k) - 1e-12 || measure.hi(k) > inner.hi(k) + 1e-12)
      throw Error(Errc::CollarTooThin, "measurement window reaches into the collar");

  GoodApproximation A;
  A.base = field;
  A.eps = eps;
  A.kernel = make_mollifier(n, eps, o.per_radius);
  auto kernel = std::make_shared<Mollifier>(A.kernel);
  auto base = std::make_shared<MetricField>(field);

  const ChartWindow S = detail::sample_grid(measure, o.samples_per_axis);
  struct NodeData {
    Mat G, g;
    Tensor3 dG, dg;
    Vec F;
  };
  auto nodes = parallel_map<NodeData>(S.size(), [&](std::size_t i) {
    const Vec x = S.node(i);
    const detail::Convolved cv = detail::convolve(field, *kernel, x, false);
    const MetricSample s = field.eval(x);
    return NodeData{cv.G, s.g, cv.dG, s.dg, field.orientation(x)};
  });

  double E = 0.0, Lambda = 0.0;
  for (const auto& nd : nodes) {
    E = std::max(E, sym_op_norm(nd.G - nd.g));
    const Vec theta = detail::narrowing_covector(nd.G, nd.F);
    for (const Vec& v : detail::null_fan(nd.G, nd.F, o.fan_directions)) {
      const double th = theta.dot(v);
      Lambda = std::max(Lambda, v.squaredNorm() / (th * th));
    }
  }
  Lambda *= 1.1;
  A.c0_convolution_error = E;
  A.cone_margin_constant = Lambda;
  double c = std::max(2.0 * E * Lambda, 1e-9);

  auto theta_at = [base, kernel](const Vec& x) {
    const detail::Convolved cv = detail::convolve(*base, *kernel, x, false);
    return detail::narrowing_covector(cv.G, base->orientation(x));
  };

  for (A.retries = 0;; ++A.retries) {
    A.margins.clear();
    A.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& nd : nodes) {
      const Vec theta = detail::narrowing_covector(nd.G, nd.F);
      const Mat ge = nd.G - c * theta * theta.transpose();
      double local = std::numeric_limits<double>::infinity();
      for (const Vec& v : detail::null_fan(ge, nd.F, o.fan_directions))
        local = std::min(local, v.dot(nd.g * v) / v.squaredNorm());
      A.margins.push_back(local);
      A.min_margin = std::min(A.min_margin, local);
    }
    if (A.min_margin > 0.0) break;
    if (A.retries == 4) throw Error(Errc::ConeNarrowingFailed, "g_eps-null vectors are not g-timelike");
    c *= 2.0;
  }
  A.c = c;

  // Finite differences of the narrowing term; its size is c, so the
  // truncation error is negligible against the convolution error.
  const double hc = 1e-3 * eps;
  auto tt = [theta_at](const Vec& x) -> Mat {
    const Vec t = theta_at(x);
    return t * t.transpose();
  };
  auto d_tt = [tt, hc, n](const Vec& x) {
    Tensor3 d(n);
    for (int k = 0; k < n; ++k) {
      const Vec e = hc * unit(n, k);
      d.set_slice(k, (tt(x + e) - tt(x - e)) / (2 * hc));
    }
    return d;
  };
  A.smoothed = MetricField(
      field.name() + "-smoothed", inner,
      [base, kernel, c, theta_at](const Vec& x) -> Mat {
        const detail::Convolved cv = detail::convolve(*base, *kernel, x, false);
        const Vec t = detail::narrowing_covector(cv.G, base->orientation(x));
        return cv.G - c * t * t.transpose();
      },
      [base, kernel, c, d_tt](const Vec& x) -> Tensor3 {
        const detail::Convolved cv = detail::convolve(*base, *kernel, x, false);
        return cv.dG - c * d_tt(x);
      },
      [base](const Vec& x) -> Vec { return base->orientation(x); }, Regularity::Smooth, field.signature());
  A.ddg = [base, kernel, c, tt, hc, n](const Vec& x) -> Tensor4 {
    detail::Convolved cv = detail::convolve(*base, *kernel, x, true);
    const Mat t0 = tt(x);
    for (int k = 0; k < n; ++k)
      for (int l = k; l < n; ++l) {
        Mat d2;
        const Vec ek = hc * unit(n, k), el = hc * unit(n, l);
        if (k == l) d2 = (tt(x + ek) - 2 * t0 + tt(x - ek)) / (hc * hc);
        else d2 = (tt(x + ek + el) - tt(x + ek - el) - tt(x - ek + el) + tt(x - ek - el)) / (4 * hc * hc);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            cv.ddG(k, l, i, j) -= c * d2(i, j);
            cv.ddG(l, k, i, j) = cv.ddG(k, l, i, j);
          }
      }
    return cv.ddG;
  };

  auto Vp = std::make_shared<WeightField>(V);
  A.V_eps = V;
  A.V_eps.name = V.name + "-smoothed";
  A.V_eps.value = [Vp, kernel](const Vec& x) {
    double s = 0.0;
    for (std::size_t q = 0; q < kernel->offsets.size(); ++q) s += kernel->weights[q] * Vp->value(x - kernel->offsets[q]);
    return s;
  };
  A.V_eps.gradient = [Vp, kernel](const Vec& x) -> Vec {
    Vec s = Vec::Zero(x.size());
    for (std::size_t q = 0; q < kernel->offsets.size(); ++q)
      s += kernel->weights[q] * Vp->gradient(x - kernel->offsets[q]);
    return s;
  };
  A.ddV = [Vp, kernel](const Vec& x) -> Mat {
    const int m = static_cast<int>(x.size());
    Mat H = Mat::Zero(m, m);
    for (std::size_t q = 0; q < kernel->offsets.size(); ++q)
      H += kernel->dweights[q] * Vp->gradient(x - kernel->offsets[q]).transpose();
    return 0.5 * (H + H.transpose());
  };

  struct Err {
    double c0, c1, d2;
  };
  auto errs = parallel_map<Err>(S.size(), [&](std::size_t i) {
    const Vec x = S.node(i);
    const MetricSample se = A.smoothed.eval(x);
    double c1 = 0.0;
    for (int k = 0; k < n; ++k) c1 = std::max(c1, sym_op_norm(se.dg.slice(k) - nodes[i].dg.slice(k)));
    const Tensor4 dd = A.ddg(x);
    double d2 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int i2 = 0; i2 < n; ++i2)
          for (int j = 0; j < n; ++j) d2 = std::max(d2, std::abs(dd(a, b, i2, j)));
    return Err{sym_op_norm(se.g - nodes[i].g), c1, d2};
  });
  for (const auto& e : errs) {
    A.c0_error = std::max(A.c0_error, e.c0);
    A.c1_part = std::max(A.c1_part, e.c1);
    A.d2_norm = std::max(A.d2_norm, e.d2);
  }
  A.c1_error = A.c0_error + A.c1_part;
  return A;
}

/// Ric^(g_eps, N, V_eps)(v, v) at x, classically.
inline double classical_bakry_emery(const GoodApproximation& A, double N, const Vec& x, const Vec& v) {
  const int n = A.smoothed.dim();
  const MetricSample s = A.smoothed.eval(x);
  const Mat R = classical_ricci(s.g, s.dg, A.ddg(x));
  double value = v.dot(R * v);
  if (!A.V_eps.identically_zero && N > n) {
    const Tensor3 G = christoffel_symbols(s.g, s.dg);
    const Vec dV = A.V_eps.gradient(x);
    Mat H = A.ddV(x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) H(i, j) -= G(k, i, j) * dV(k);
    value += v.dot(H * v);
    if (!std::isinf(N)) value -= std::pow(dV.dot(v), 2) / (N - n);
  }
  return value;
}

struct DegradationSample {
  Vec x, v;
  double bakry_emery = 0.0;
  double deficit = 0.0;
};

struct DegradationReport {
  double eps = 0.0;
  double delta = 0.0;
  DegradationSample worst;
  std::vector<DegradationSample> samples;
};

/// delta(eps) = max over sampled unit timelike v of [K g_eps(v, v) - Ric^(g_eps,N,V_eps)(v, v)]_+.
inline DegradationReport curvature_degradation(const GoodApproximation& A, double N, double K, const Vec& lo,
                                               const Vec& hi, int per_axis = 7,
                                               const std::vector<double>& rapidities = {0.0, 0.5, -0.5, 1.0, -1.0}) {
  validate_weight(A.V_eps, A.smoothed.dim());
  const ChartWindow region(lo, hi, std::vector<int>(lo.size(), per_axis));
  DegradationReport rep;
  rep.eps = A.eps;
  auto per_node = parallel_map<std::vector<DegradationSample>>(region.size(), [&](std::size_t i) {
    const Vec x = region.node(i);
    const auto frame = orthonormal_frame(A.smoothed, x);
    std::vector<DegradationSample> out;
    for (std::size_t k = 1; k < frame.size(); ++k)
      for (double a : rapidities) {
        if (a == 0.0 && k > 1) continue;
        const Vec v = std::cosh(a) * frame[0] + std::sinh(a) * frame[k];
        const double be = classical_bakry_emery(A, N, x, v);
        const double q = v.dot(A.smoothed.g(x) * v);
        out.push_back({x, v, be, std::max(0.0, (K * q - be) / q)});
      }
    return out;
  });
  bool first = true;
  for (auto& list : per_node)
    for (auto& s : list) {
      if (first || s.deficit > rep.delta) {
        rep.delta = s.deficit;
        rep.worst = s;
        first = false;
      }
      rep.samples.push_back(std::move(s));
    }
  return rep;
}

/// (Ric + Hess V_eps)(X, X) of the smooth approximation, for identities that
/// need classical curvature.
inline std::function<double(const Vec&, const Vec&)> mollified_curvature(const GoodApproximation& A) {
  auto Ap = std::make_shared<GoodApproximation>(A);
  return [Ap](const Vec& x, const Vec& X) {
    return classical_bakry_emery(*Ap, std::numeric_limits<double>::infinity(), x, X);
  };
}

}  // namespace c1split
