#pragma once
//
// Geodesics of a C^1 metric: RK4 integration of the geodesic equation with a
// merely continuous right-hand side, multi-start Newton shooting for the
// two-point problem, Lorentzian-length ascent over piecewise-linear curves,
// and the compactness / non-uniqueness experiments.
//

#include "c1split/connection.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace c1split {

// ---------------------------------------------------------------------------
// CausalCurve
// ---------------------------------------------------------------------------

struct CausalCurve {
  std::vector<double> params;
  std::vector<Vec> points;
  std::vector<Vec> velocities;
  CausalCharacter character = CausalCharacter::Zero;
  double norm_drift = 0.0;
  double proper_time = 0.0;
  bool exited = false;
  double exit_param = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return params.size(); }
  bool empty() const { return params.empty(); }
  const Vec& front() const { return points.front(); }
  const Vec& back() const { return points.back(); }

  /// Cubic Hermite interpolation in the parameter.
  Vec at(double t) const { return hermite(t, false); }
  Vec velocity_at(double t) const { return hermite(t, true); }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    out.precision(17);
    const int n = points.empty() ? 0 : static_cast<int>(points[0].size());
    out << "t";
    for (int k = 0; k < n; ++k) out << ",x" << k;
    for (int k = 0; k < n; ++k) out << ",v" << k;
    out << "\n";
    for (std::size_t i = 0; i < size(); ++i) {
      out << params[i];
      for (int k = 0; k < n; ++k) out << "," << points[i](k);
      for (int k = 0; k < n; ++k) out << "," << velocities[i](k);
      out << "\n";
    }
  }

 private:
  Vec hermite(double t, bool derivative) const {
    if (params.size() < 2) return derivative ? velocities.front() : points.front();
    if (t < params.front() - 1e-12 || t > params.back() + 1e-12)
      throw Error(Errc::OutOfWindow, "curve parameter outside its span");
    auto it = std::upper_bound(params.begin(), params.end(), t);
    std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - params.begin()), 1, params.size() - 1) - 1;
    const double h = params[i + 1] - params[i];
    const double s = std::clamp((t - params[i]) / h, 0.0, 1.0);
    const Vec &p0 = points[i], &p1 = points[i + 1], &m0 = velocities[i], &m1 = velocities[i + 1];
    if (!derivative) {
      const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
      const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
      return h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
    }
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    return (d00 * p0 + d01 * p1) / h + d10 * m0 + d11 * m1;
  }
};

/// Lorentzian length of the straight segment a -> b, 3-point Gauss-Legendre.
inline double segment_length(const MetricField& field, const Vec& a, const Vec& b) {
  static const GaussRule gl = gauss_legendre(3);
  const Vec d = b - a;
  double L = 0.0;
  for (int q = 0; q < 3; ++q) L += gl.weights[q] * std::sqrt(std::max(0.0, d.dot(field.g(a + gl.nodes[q] * d) * d)));
  return L;
}

/// Piecewise-linear causal curve through the vertices, parametrized by vertex index.
inline CausalCurve polyline(const MetricField& field, const std::vector<Vec>& vertices) {
  if (vertices.size() < 2) throw Error(Errc::InvalidArgument, "polyline needs two vertices");
  CausalCurve c;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    c.params.push_back(static_cast<double>(i));
    c.points.push_back(vertices[i]);
    const std::size_t j = std::min(i, vertices.size() - 2);
    c.velocities.push_back(vertices[j + 1] - vertices[j]);
  }
  c.character = causal_character(field, vertices[0], c.velocities[0]);
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    const CausalCharacter ch = causal_character(field, vertices[i], vertices[i + 1] - vertices[i]);
    if (!is_future_causal(ch)) c.character = ch;
    c.proper_time += segment_length(field, vertices[i], vertices[i + 1]);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Acceleration -Gamma(x)(v, v).
inline Vec geodesic_acceleration(const MetricField& field, const Vec& x, const Vec& v) {
  const MetricSample s = field.eval(x);
  return -contract(christoffel_symbols(s.g, s.dg), v, v);
}

struct IntegrateOptions {
  bool check_drift = true;
};

/// RK4 for gamma'' = -Gamma(gamma', gamma') on [0, lambda]. On leaving the
/// window the partial curve is returned with exited = true; the drift check
/// raises StepTooLarge.
inline CausalCurve integrate_geodesic(const MetricField& field, const Vec& x, const Vec& v, double lambda, double step,
                                      const IntegrateOptions& opts = {}) {
  if (v.squaredNorm() == 0.0) throw Error(Errc::InvalidArgument, "zero initial velocity");
  if (!(lambda > 0.0) || !(step > 0.0)) throw Error(Errc::InvalidArgument, "span and step must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(lambda / step - 1e-9)));
  const double h = lambda / steps;
  CausalCurve c;
  c.params.reserve(steps + 1);
  c.points.reserve(steps + 1);
  c.velocities.reserve(steps + 1);
  Vec p = x, u = v;
  const double q0 = v.dot(field.g(x) * v);
  c.character = causal_character(field, x, v);
  c.params.push_back(0.0);
  c.points.push_back(p);
  c.velocities.push_back(u);
  std::vector<double> speed{std::sqrt(std::max(0.0, q0))};
  for (int i = 0; i < steps; ++i) {
    try {
      const Vec k1x = u, k1v = geodesic_acceleration(field, p, u);
      const Vec k2x = u + 0.5 * h * k1v, k2v = geodesic_acceleration(field, p + 0.5 * h * k1x, k2x);
      const Vec k3x = u + 0.5 * h * k2v, k3v = geodesic_acceleration(field, p + 0.5 * h * k2x, k3x);
      const Vec k4x = u + h * k3v, k4v = geodesic_acceleration(field, p + h * k3x, k4x);
      const Vec pn = p + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
      const Vec un = u + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
      if (!field.contains(pn)) throw Error(Errc::OutOfWindow, "step leaves window");
      p = pn;
      u = un;
    } catch (const Error& e) {
      if (e.code() != Errc::OutOfWindow) throw;
      c.exited = true;
      c.exit_param = (i + 1) * h;
      break;
    }
    c.params.push_back((i + 1) * h);
    c.points.push_back(p);
    c.velocities.push_back(u);
    const double q = u.dot(field.g(p) * u);
    c.norm_drift = std::max(c.norm_drift, std::abs(q - q0));
    speed.push_back(std::sqrt(std::max(0.0, q)));
  }
  // composite trapezoid with Simpson where the sample count allows
  const std::size_t m = speed.size();
  double L = 0.0;
  if (m >= 3 && (m - 1) % 2 == 0) {
    for (std::size_t i = 0; i + 2 < m; i += 2) L += h / 3.0 * (speed[i] + 4 * speed[i + 1] + speed[i + 2]);
  } else {
    for (std::size_t i = 0; i + 1 < m; ++i) L += 0.5 * h * (speed[i] + speed[i + 1]);
  }
  c.proper_time = L;
  const double allowed = 1e-3 * std::max(std::abs(q0), 1e-6 * v.squaredNorm());
  if (opts.check_drift && c.norm_drift > allowed)
    throw Error(Errc::StepTooLarge, "norm drift " + std::to_string(c.norm_drift) + " exceeds " +
                                        std::to_string(allowed));
  return c;
}

/// Number of samples whose causal character differs from the initial one,
/// ignoring samples inside the drift band around the null cone.
inline int character_flips(const MetricField& field, const CausalCurve& c) {
  int flips = 0;
  const double band = std::max(c.norm_drift, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec& v = c.velocities[i];
    const double q = v.dot(field.g(c.points[i]) * v);
    if (std::abs(q) <= band + kNullTolerance * v.squaredNorm()) continue;
    if (causal_character(field, c.points[i], v) != c.character) ++flips;
  }
  return flips;
}

// ---------------------------------------------------------------------------
// Two-point problem
// ---------------------------------------------------------------------------

struct ShootOptions {
  int steps = 64;  // RK4 steps over the affine interval [0, 1]
  double tol = 1e-10;  // endpoint error relative to max(1, |y - x|)
  int max_iter = 30;
  bool full_fan = true;  // run every start even when the chord start converges
  std::vector<double> fan_rapidities = {-0.5, 0.5};
};

struct ShootCandidate {
  Vec v;
  CausalCurve curve;
  double residual = 0.0;
};

namespace detail {

inline std::optional<Vec> endpoint(const MetricField& field, const Vec& x, const Vec& v, int steps) {
  try {
    CausalCurve c = integrate_geodesic(field, x, v, 1.0, 1.0 / steps, {false});
    if (c.exited) return std::nullopt;
    return c.back();
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::optional<ShootCandidate> newton_shoot(const MetricField& field, const Vec& x, const Vec& y, Vec v,
                                                  const ShootOptions& o) {
  const int n = field.dim();
  const double scale = std::max(1.0, (y - x).norm());
  auto end = endpoint(field, x, v, o.steps);
  if (!end) return std::nullopt;
  Vec r = *end - y;
  for (int it = 0; it < o.max_iter && r.norm() > o.tol * scale; ++it) {
    Mat J(n, n);
    for (int j = 0; j < n; ++j) {
      const double hj = 1e-7 * std::max(1.0, std::abs(v(j)) + 1e-3 * v.norm());
      Vec vp = v;
      vp(j) += hj;
      auto e = endpoint(field, x, vp, o.steps);
      if (!e) {
        vp(j) = v(j) - hj;
        e = endpoint(field, x, vp, o.steps);
        if (!e) return std::nullopt;
        J.col(j) = (*end - *e) / hj;
      } else {
        J.col(j) = (*e - *end) / hj;
      }
    }
    const Vec dv = -J.colPivHouseholderQr().solve(r);
    if (!dv.allFinite()) return std::nullopt;
    double a = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 12; ++ls, a *= 0.5) {
      const Vec vn = v + a * dv;
      auto en = endpoint(field, x, vn, o.steps);
      if (en && (*en - y).norm() < r.norm()) {
        v = vn;
        end = en;
        r = *en - y;
        improved = true;
        break;
      }
    }
    if (!improved) return std::nullopt;
  }
  if (r.norm() > o.tol * scale) return std::nullopt;
  ShootCandidate cand;
  cand.v = v;
  cand.curve = integrate_geodesic(field, x, v, 1.0, 1.0 / o.steps, {false});
  cand.residual = r.norm();
  return cand;
}

}  // namespace detail

/// Multi-start Newton shooting for a future-directed causal geodesic from x to
/// y on the affine interval [0, 1]. Among converged candidates the largest
/// proper time wins, then the lexicographically smallest initial velocity.
/// Throws NoConnection when no start converges; the causal screen lives in
/// timesep (shoot).
inline ShootCandidate shoot_geodesic(const MetricField& field, const Vec& x, const Vec& y, const ShootOptions& o = {}) {
  const Vec chord = y - x;
  std::vector<Vec> starts{chord};
  if (chord.squaredNorm() == 0.0) throw Error(Errc::InvalidArgument, "shooting between coincident points");
  std::vector<ShootCandidate> found;
  auto consider = [&](const Vec& v0) {
    auto c = detail::newton_shoot(field, x, y, v0, o);
    if (!c) return;
    if (!is_future_causal(c->curve.character)) return;
    for (const auto& f : found)
      if ((f.v - c->v).norm() < 1e-6 * (1.0 + c->v.norm())) return;
    found.push_back(std::move(*c));
  };
  consider(chord);
  if (found.empty() || o.full_fan) {
    const auto frame = orthonormal_frame(field, x);
    const Mat g = field.g(x);
    const double tau = std::sqrt(std::max(chord.dot(g * chord), 0.01 * chord.squaredNorm()));
    for (std::size_t k = 1; k < frame.size(); ++k)
      for (double a : o.fan_rapidities) consider(tau * (std::cosh(a) * frame[0] + std::sinh(a) * frame[k]));
  }
  if (found.empty()) throw Error(Errc::NoConnection, "no causal geodesic found by shooting");
  std::sort(found.begin(), found.end(), [](const ShootCandidate& a, const ShootCandidate& b) {
    if (std::abs(a.curve.proper_time - b.curve.proper_time) > 1e-9 * (1.0 + a.curve.proper_time))
      return a.curve.proper_time > b.curve.proper_time;
    return std::lexicographical_compare(a.v.data(), a.v.data() + a.v.size(), b.v.data(), b.v.data() + b.v.size());
  });
  return found.front();
}

// ---------------------------------------------------------------------------
// Curve ascent
// ---------------------------------------------------------------------------

struct AscentOptions {
  int segments = 16;
  int max_iter = 400;
  double rel_tol = 1e-12;
};

struct AscentResult {
  bool causal = false;  // a future-causal start curve was available
  double length = 0.0;
  std::vector<Vec> vertices;
  int iterations = 0;
};

namespace detail {

inline bool future_timelike_segment(const MetricField& field, const Vec& a, const Vec& b) {
  static const GaussRule gl = gauss_legendre(3);
  const Vec d = b - a;
  for (int q = 0; q < 3; ++q) {
    const Vec p = a + gl.nodes[q] * d;
    if (!field.contains(p)) return false;
    const Mat g = field.g(p);
    if (d.dot(g * d) <= 0.0 || d.dot(g * field.orientation(p)) <= 0.0) return false;
  }
  return true;
}

}  // namespace detail

/// Gradient ascent of the Lorentzian length over piecewise-linear curves from
/// x to y with fixed endpoints, keeping every segment future timelike. The
/// returned length is that of an admissible curve, hence a lower bound for l.
inline AscentResult curve_ascent(const MetricField& field, const Vec& x, const Vec& y, const AscentOptions& o = {}) {
  static const GaussRule gl = gauss_legendre(3);
  const int n = field.dim();
  const int M = std::max(1, o.segments);
  AscentResult res;
  std::vector<Vec> z(M + 1);
  for (int i = 0; i <= M; ++i) z[i] = x + (y - x) * (static_cast<double>(i) / M);
  const CausalCharacter chord = causal_character(field, x, y - x);
  bool timelike = true;
  for (int i = 0; i < M; ++i) timelike = timelike && detail::future_timelike_segment(field, z[i], z[i + 1]);
  if (!timelike) {
    res.causal = is_future_causal(chord);
    res.vertices = z;
    return res;
  }
  res.causal = true;
  auto length = [&](const std::vector<Vec>& v) {
    double L = 0.0;
    for (int i = 0; i < M; ++i) L += segment_length(field, v[i], v[i + 1]);
    return L;
  };
  auto admissible = [&](const std::vector<Vec>& v) {
    for (int i = 0; i < M; ++i)
      if (!detail::future_timelike_segment(field, v[i], v[i + 1])) return false;
    return true;
  };
  double L = length(z);
  double alpha = 0.1 * (y - x).norm() / M;
  for (int it = 0; it < o.max_iter && M > 1; ++it) {
    std::vector<Vec> grad(M + 1, Vec::Zero(n));
    for (int i = 0; i < M; ++i) {
      const Vec d = z[i + 1] - z[i];
      for (int q = 0; q < 3; ++q) {
        const double s = gl.nodes[q];
        const Vec p = z[i] + s * d;
        const MetricSample ms = field.eval(p);
        const Vec gd = ms.g * d;
        const double root = std::sqrt(std::max(d.dot(gd), 1e-300));
        Vec dq(n);
        for (int k = 0; k < n; ++k) dq(k) = d.dot(ms.dg.slice(k) * d);
        grad[i] += gl.weights[q] * (-gd + 0.5 * (1.0 - s) * dq) / root;
        grad[i + 1] += gl.weights[q] * (gd + 0.5 * s * dq) / root;
      }
    }
    double gnorm = 0.0;
    for (int i = 1; i < M; ++i) gnorm = std::max(gnorm, grad[i].norm());
    if (gnorm == 0.0) break;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      std::vector<Vec> zn = z;
      for (int i = 1; i < M; ++i) zn[i] += alpha / gnorm * grad[i];
      if (admissible(zn)) {
        const double Ln = length(zn);
        if (Ln > L) {
          const double gain = Ln - L;
          z = std::move(zn);
          L = Ln;
          accepted = true;
          alpha *= 2.0;
          if (gain <= o.rel_tol * L) it = o.max_iter;
          break;
        }
      }
      alpha *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) break;
  }
  res.length = L;
  res.vertices = std::move(z);
  return res;
}

// ---------------------------------------------------------------------------
// Compactness and non-uniqueness experiments
// ---------------------------------------------------------------------------

struct CompactnessReport {
  std::vector<CausalCurve> curves;
  double max_speed = 0.0;  // Euclidean |gamma'|
  double max_acceleration = 0.0;
  std::vector<std::vector<double>> c1_distance;
  double max_velocity_gap = 0.0;
  std::vector<std::vector<int>> clusters;
  int exited = 0;
};

/// sup |a - b| + sup |a' - b'| over common sample indices.
inline double c1_distance(const CausalCurve& a, const CausalCurve& b) {
  const std::size_t m = std::min(a.size(), b.size());
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    d0 = std::max(d0, (a.points[i] - b.points[i]).norm());
    d1 = std::max(d1, (a.velocities[i] - b.velocities[i]).norm());
  }
  return d0 + d1;
}

inline CompactnessReport analyse_family(const MetricField& field, std::vector<CausalCurve> curves,
                                        double cluster_tol) {
  CompactnessReport rep;
  const std::size_t m = curves.size();
  for (const auto& c : curves) {
    rep.exited += c.exited ? 1 : 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      rep.max_speed = std::max(rep.max_speed, c.velocities[i].norm());
      rep.max_acceleration =
          std::max(rep.max_acceleration, geodesic_acceleration(field, c.points[i], c.velocities[i]).norm());
    }
  }
  rep.c1_distance.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      rep.c1_distance[i][j] = rep.c1_distance[j][i] = c1_distance(curves[i], curves[j]);
      const std::size_t s = std::min(curves[i].size(), curves[j].size());
      for (std::size_t k = 0; k < s; ++k)
        rep.max_velocity_gap =
            std::max(rep.max_velocity_gap, (curves[i].velocities[k] - curves[j].velocities[k]).norm());
    }
  // single-linkage clusters at cluster_tol
  std::vector<int> label(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    if (label[i] >= 0) continue;
    const int id = static_cast<int>(rep.clusters.size());
    rep.clusters.emplace_back();
    std::vector<std::size_t> stack{i};
    label[i] = id;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      rep.clusters[id].push_back(static_cast<int>(a));
      for (std::size_t b = 0; b < m; ++b)
        if (label[b] < 0 && rep.c1_distance[a][b] <= cluster_tol) {
          label[b] = id;
          stack.push_back(b);
        }
    }
    std::sort(rep.clusters[id].begin(), rep.clusters[id].end());
  }
  rep.curves = std::move(curves);
  return rep;
}

/// Integrates geodesics from every seed state (x, v) over [0, lambda].
inline CompactnessReport compactness_experiment(const MetricField& field,
                                                const std::vector<std::pair<Vec, Vec>>& seeds, double lambda,
                                                double step, double cluster_tol = 1e-6) {
  auto curves = parallel_map<CausalCurve>(seeds.size(), [&](std::size_t i) {
    return integrate_geodesic(field, seeds[i].first, seeds[i].second, lambda, step, {false});
  });
  return analyse_family(field, std::move(curves), cluster_tol);
}

/// Maximizing geodesics between endpoint pairs, all on the affine interval [0, 1].
inline CompactnessReport maximizer_family(const MetricField& field, const std::vector<std::pair<Vec, Vec>>& ends,
                                          const ShootOptions& o = {}, double cluster_tol = 1e-6) {
  auto curves = parallel_map<CausalCurve>(
      ends.size(), [&](std::size_t i) { return shoot_geodesic(field, ends[i].first, ends[i].second, o).curve; });
  return analyse_family(field, std::move(curves), cluster_tol);
}

struct PeanoProbe {
  std::vector<double> offsets;
  std::vector<double> spread;  // endpoint distance to the unperturbed geodesic
  double limit_spread = 0.0;  // spread at the smallest offset
  bool nonunique = false;
};

/// Perturbs the seed position by offsets along `axis`. If the endpoint spread
/// does not shrink with the offset, solutions through the seed state are not
/// determined by it.
inline PeanoProbe peano_probe(const MetricField& field, const Vec& x, const Vec& v, int axis,
                              const std::vector<double>& offsets, double lambda, double step,
                              double threshold = 1e-3) {
  PeanoProbe p;
  p.offsets = offsets;
  const CausalCurve base = integrate_geodesic(field, x, v, lambda, step, {false});
  double smallest = std::numeric_limits<double>::infinity();
  for (double d : offsets) {
    Vec xs = x;
    xs(axis) += d;
    const CausalCurve c = integrate_geodesic(field, xs, v, lambda, step, {false});
    const std::size_t m = std::min(c.size(), base.size()) - 1;
    const double s = (c.points[m] - base.points[m]).norm();
    p.spread.push_back(s);
    if (std::abs(d) < smallest) {
      smallest = std::abs(d);
      p.limit_spread = s;
    }
  }
  p.nonunique = p.limit_spread > threshold;
  return p;
}

}  // namespace c1split
