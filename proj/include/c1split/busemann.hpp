#pragma once
//
// Busemann functions of a closed-form timelike ray or line: truncations
// b+_t(x) = t - l(x, gamma_t), b-_t(x) = l(gamma_-t, x) - t, their limits,
// 1-steepness, gamma-adaptedness, co-rays and superdifferential probes.
//

#include "c1split/catalog.hpp"
#include "c1split/timesep.hpp"

#include <random>

namespace c1split {

using TimelikeRay = TimelikeLine;

enum class BusemannSign { Forward, Backward };

inline constexpr std::string_view to_string(BusemannSign s) { return s == BusemannSign::Forward ? "b+" : "b-"; }

struct BusemannValue {
  BusemannSign sign = BusemannSign::Forward;
  double T = 0.0;
  double value = 0.0;            // truncation at the largest T
  double convergence_gap = 0.0;  // |b_T - b_{T/2}| at the two largest T
  double extrapolated = 0.0;     // polynomial extrapolation in 1/T to T = infinity
  double richardson_gap = 0.0;   // change of the extrapolant when the last T is added
  std::vector<double> schedule;
  std::vector<double> history;
};

struct BusemannOptions {
  std::vector<double> schedule = {25, 50, 100, 200};
  double tol = 1e-3;
  DistanceOptions distance = [] {
    DistanceOptions d;
    d.use_ascent = false;
    d.check_diamond = false;
    d.shoot.full_fan = false;
    return d;
  }();
};

/// Window on which l(x, gamma_t) is computed for |t| <= T: the hull of the
/// field window and the line over [-T-1, T+1], padded and clipped to the
/// metric's natural domain.
inline ChartWindow busemann_window(const MetricField& field, const TimelikeRay& ray, double T) {
  const ChartWindow& w = field.window();
  const ChartWindow& nat = field.natural_domain();
  const int n = w.dim();
  Vec lo = w.lo(), hi = w.hi();
  for (int i = 0; i <= 40; ++i) {
    const double t = -(T + 1) + 2 * (T + 1) * i / 40.0;
    const Vec p = ray(t);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (int k = 0; k < n; ++k) {
    lo(k) = std::max(lo(k) - 1.0, nat.lo(k));
    hi(k) = std::min(hi(k) + 1.0, nat.hi(k));
  }
  return ChartWindow(lo, hi, w.shape());
}

/// The field on its Busemann window.
inline MetricField busemann_field_window(const MetricField& field, const TimelikeRay& ray, double T) {
  const ChartWindow w = busemann_window(field, ray, T);
  return field.with_window(w);
}

namespace detail {

/// Neville extrapolation to h = 0 of values f_i at nodes h_i.
inline double neville_at_zero(const std::vector<double>& h, std::vector<double> f) {
  const std::size_t m = f.size();
  for (std::size_t k = 1; k < m; ++k)
    for (std::size_t i = m - 1; i >= k; --i) {
      f[i] = (h[i - k] * f[i] - h[i] * f[i - 1]) / (h[i - k] - h[i]);
      if (i == k) break;
    }
  return f[m - 1];
}

inline Vec neville_at_zero(const std::vector<double>& h, const std::vector<Vec>& f) {
  const int n = static_cast<int>(f.front().size());
  Vec out(n);
  for (int k = 0; k < n; ++k) {
    std::vector<double> c;
    for (const Vec& v : f) c.push_back(v(k));
    out(k) = neville_at_zero(h, c);
  }
  return out;
}

}  // namespace detail

/// b+_t(x) = t - l(x, gamma_t) or b-_t(x) = l(gamma_-t, x) - t. `ext` must
/// contain the line up to |t| (see busemann_field_window).
inline double approx_busemann_on(const MetricField& ext, const TimelikeRay& ray, double t, const Vec& x,
                                 BusemannSign sign, const DistanceOptions& o) {
  if (sign == BusemannSign::Forward) {
    const Vec y = ray(t);
    const SeparationValue s = lorentz_distance(ext, x, y, o);
    if (!s.related || is_null_separation(s.value, x, y))
      throw Error(Errc::NotInChronologicalPast, "point is not in the chronological past of gamma_t");
    return t - s.value;
  }
  const Vec y = ray(-t);
  const SeparationValue s = lorentz_distance(ext, y, x, o);
  if (!s.related || is_null_separation(s.value, y, x))
    throw Error(Errc::NotInChronologicalFuture, "point is not in the chronological future of gamma_-t");
  return s.value - t;
}

inline BusemannValue approx_busemann(const MetricField& field, const TimelikeRay& ray, double t, const Vec& x,
                                     BusemannSign sign, const BusemannOptions& o = {}) {
  const MetricField ext = busemann_field_window(field, ray, t);
  BusemannValue b;
  b.sign = sign;
  b.T = t;
  b.value = b.extrapolated = approx_busemann_on(ext, ray, t, x, sign, o.distance);
  b.schedule = {t};
  b.history = {b.value};
  return b;
}

/// Truncations along the schedule without the convergence verdict.
inline BusemannValue busemann_sequence_on(const MetricField& ext, const TimelikeRay& ray, const Vec& x,
                                          BusemannSign sign, const BusemannOptions& o) {
  if (o.schedule.size() < 2) throw Error(Errc::InvalidArgument, "Busemann schedule needs two truncations");
  BusemannValue b;
  b.sign = sign;
  b.schedule = o.schedule;
  std::sort(b.schedule.begin(), b.schedule.end());
  std::vector<double> h;
  for (double T : b.schedule) {
    b.history.push_back(approx_busemann_on(ext, ray, T, x, sign, o.distance));
    h.push_back(1.0 / T);
  }
  const std::size_t m = b.history.size();
  b.T = b.schedule.back();
  b.value = b.history.back();
  b.convergence_gap = std::abs(b.history[m - 1] - b.history[m - 2]);
  b.extrapolated = detail::neville_at_zero(h, b.history);
  const double previous = detail::neville_at_zero(std::vector<double>(h.begin(), h.end() - 1),
                                                  std::vector<double>(b.history.begin(), b.history.end() - 1));
  b.richardson_gap = std::abs(b.extrapolated - previous);
  return b;
}

/// Busemann limit; NotConverged if the Richardson gap exceeds tol.
inline BusemannValue busemann_limit_on(const MetricField& ext, const TimelikeRay& ray, const Vec& x,
                                       BusemannSign sign, const BusemannOptions& o) {
  BusemannValue b = busemann_sequence_on(ext, ray, x, sign, o);
  if (b.richardson_gap > o.tol) {
    std::ostringstream os;
    os.precision(6);
    os << to_string(sign) << " at (" << x.transpose() << "): Richardson gap " << b.richardson_gap << " > " << o.tol
       << ", truncations";
    for (double v : b.history) os << " " << v;
    throw Error(Errc::NotConverged, os.str());
  }
  return b;
}

inline BusemannValue busemann_limit(const MetricField& field, const TimelikeRay& ray, const Vec& x,
                                    BusemannSign sign, const BusemannOptions& o = {}) {
  const double T = *std::max_element(o.schedule.begin(), o.schedule.end());
  return busemann_limit_on(busemann_field_window(field, ray, T), ray, x, sign, o);
}

// ---------------------------------------------------------------------------
// Steepness
// ---------------------------------------------------------------------------

struct SteepnessReport {
  std::size_t pairs = 0;    // pairs examined
  std::size_t related = 0;  // pairs with x << y
  double max_defect = 0.0;  // max [l(x, y) - (b(y) - b(x))]_+
  double max_scaled_defect = 0.0;  // max defect / (1 + l)
  std::pair<Vec, Vec> worst;
};

/// Seeded uniform pairs in [lo, hi], ordered by time coordinate.
inline std::vector<std::pair<Vec, Vec>> sample_pairs(const Vec& lo, const Vec& hi, std::size_t count,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::pair<Vec, Vec>> out;
  const int n = static_cast<int>(lo.size());
  for (std::size_t i = 0; i < count; ++i) {
    Vec a(n), b(n);
    for (int k = 0; k < n; ++k) a(k) = lo(k) + (hi(k) - lo(k)) * U(rng);
    for (int k = 0; k < n; ++k) b(k) = lo(k) + (hi(k) - lo(k)) * U(rng);
    if (b(0) < a(0)) std::swap(a, b);
    out.emplace_back(a, b);
  }
  return out;
}

/// 1-steepness of the truncation b_T on the given pairs; l(x, y) is computed
/// on the field window, unrelated pairs count as satisfied.
inline SteepnessReport steepness_check(const MetricField& field, const TimelikeRay& ray,
                                       const std::vector<std::pair<Vec, Vec>>& pairs, BusemannSign sign,
                                       double T = 200.0, const BusemannOptions& o = {}) {
  const MetricField ext = busemann_field_window(field, ray, T);
  DistanceOptions dopt = o.distance;
  struct Row {
    bool related;
    double defect, l;
  };
  const auto rows = parallel_map<Row>(pairs.size(), [&](std::size_t i) {
    const auto& [x, y] = pairs[i];
    const SeparationValue s = lorentz_distance(ext, x, y, dopt);
    if (!s.related || is_null_separation(s.value, x, y)) return Row{false, 0.0, 0.0};
    const double bx = approx_busemann_on(ext, ray, T, x, sign, o.distance);
    const double by = approx_busemann_on(ext, ray, T, y, sign, o.distance);
    return Row{true, std::max(0.0, s.value - (by - bx)), s.value};
  });
  SteepnessReport r;
  r.pairs = pairs.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].related) continue;
    ++r.related;
    if (rows[i].defect >= r.max_defect) {
      r.max_defect = rows[i].defect;
      r.worst = pairs[i];
    }
    r.max_scaled_defect = std::max(r.max_scaled_defect, rows[i].defect / (1.0 + rows[i].l));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Adaptedness
// ---------------------------------------------------------------------------

/// Closed-form curve sampled on [t0, t1].
inline CausalCurve line_curve(const MetricField& field, const TimelikeRay& ray, double t0, double t1,
                              int samples = 65) {
  CausalCurve c;
  for (int i = 0; i < samples; ++i) {
    const double t = t0 + (t1 - t0) * i / (samples - 1);
    c.params.push_back(t);
    c.points.push_back(ray(t));
    c.velocities.push_back(ray.velocity(t));
  }
  c.proper_time = t1 - t0;
  c.character = causal_character(field.with_window(busemann_window(field, ray, std::max(std::abs(t0), std::abs(t1)))),
                                 ray(0.5 * (t0 + t1)), ray.velocity(0.5 * (t0 + t1)));
  return c;
}

struct AdaptednessCertificate {
  CausalCurve sigma;
  std::vector<double> nodes;
  double max_steepness_defect = 0.0;  // max |b(sigma_t) - b(sigma_s) - (t - s)| over pairs, both signs
  double max_length_defect = 0.0;     // max |l(sigma_s, sigma_t) - (t - s)|
  double max_gap = 0.0;               // max |b+ - b-| along sigma
  bool adapted = false;
};

struct AdaptedOptions {
  int nodes = 10;  // Chebyshev nodes on the parameter span; nodes*(nodes-1)/2 pairs
  double tol = 1e-3;
  BusemannOptions busemann;
};

/// b(sigma_t) - b(sigma_s) = l(sigma_s, sigma_t) = t - s on Chebyshev pairs and
/// b+ = b- along sigma, using the extrapolated limits.
inline AdaptednessCertificate certify_adapted(const MetricField& field, const TimelikeRay& line,
                                              const CausalCurve& sigma, const AdaptedOptions& o = {}) {
  AdaptednessCertificate cert;
  cert.sigma = sigma;
  const double a = sigma.params.front(), b = sigma.params.back();
  for (int k = o.nodes - 1; k >= 0; --k)
    cert.nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * std::cos(M_PI * (2 * k + 1) / (2.0 * o.nodes)));
  const double T = *std::max_element(o.busemann.schedule.begin(), o.busemann.schedule.end());
  const MetricField ext = busemann_field_window(field, line, T);
  const std::size_t m = cert.nodes.size();
  std::vector<Vec> pts;
  for (double t : cert.nodes) pts.push_back(sigma.at(t));
  struct BB {
    double plus, minus;
  };
  const auto bvals = parallel_map<BB>(m, [&](std::size_t i) {
    return BB{busemann_limit_on(ext, line, pts[i], BusemannSign::Forward, o.busemann).extrapolated,
              busemann_limit_on(ext, line, pts[i], BusemannSign::Backward, o.busemann).extrapolated};
  });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  const auto lens = parallel_map<double>(pairs.size(), [&](std::size_t k) {
    const SeparationValue s = lorentz_distance(ext, pts[pairs[k].first], pts[pairs[k].second], o.busemann.distance);
    return s.related ? s.value : -std::numeric_limits<double>::infinity();
  });
  for (std::size_t i = 0; i < m; ++i) cert.max_gap = std::max(cert.max_gap, std::abs(bvals[i].plus - bvals[i].minus));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const double dt = cert.nodes[j] - cert.nodes[i];
    cert.max_steepness_defect = std::max({cert.max_steepness_defect, std::abs(bvals[j].plus - bvals[i].plus - dt),
                                          std::abs(bvals[j].minus - bvals[i].minus - dt)});
    cert.max_length_defect = std::max(cert.max_length_defect, std::abs(lens[k] - dt));
  }
  cert.adapted = cert.max_steepness_defect < o.tol && cert.max_length_defect < o.tol && cert.max_gap < o.tol;
  return cert;
}

// ---------------------------------------------------------------------------
// Co-rays
// ---------------------------------------------------------------------------

struct CoRay {
  Vec x;
  std::vector<double> times;
  std::vector<Vec> directions;  // Euclidean-normalized initial velocities of the maximizers
  std::vector<CausalCurve> maximizers;
  Vec limit_direction;
  double cauchy_gap = 0.0;  // change of the extrapolated direction when the last t is added
  CausalCharacter character = CausalCharacter::Zero;
  CausalCurve curve;  // integrated from the limit direction, unit speed if timelike
};

struct CoRayOptions {
  std::vector<double> schedule = {25, 50, 100, 200};
  double tol = 1e-3;
  double span = 1.0;  // affine length of the integrated co-ray
  double step = 1e-2;
  DistanceOptions distance = BusemannOptions{}.distance;
};

/// Maximizers from x to gamma_{t_n} and the extrapolated limit of their
/// initial directions; does not throw on a failed Cauchy test.
inline CoRay co_ray_family(const MetricField& field, const TimelikeRay& ray, const Vec& x, const CoRayOptions& o = {}) {
  CoRay c;
  c.x = x;
  c.times = o.schedule;
  std::sort(c.times.begin(), c.times.end());
  const MetricField ext = busemann_field_window(field, ray, c.times.back());
  std::vector<double> h;
  for (double t : c.times) {
    const Vec y = ray(t);
    const SeparationValue s = lorentz_distance(ext, x, y, o.distance);
    if (!s.related || is_null_separation(s.value, x, y))
      throw Error(Errc::NotInChronologicalPast, "co-ray base point is not in the past of the ray");
    c.maximizers.push_back(*s.witness);
    const Vec v = s.witness->velocities.front();
    c.directions.push_back(v / v.norm());
    h.push_back(1.0 / t);
  }
  Vec lim = detail::neville_at_zero(h, c.directions);
  const Vec prev = detail::neville_at_zero(std::vector<double>(h.begin(), h.end() - 1),
                                           std::vector<Vec>(c.directions.begin(), c.directions.end() - 1));
  c.limit_direction = lim / lim.norm();
  c.cauchy_gap = (c.limit_direction - prev / prev.norm()).norm();
  const Mat g = field.g(x);
  c.character = causal_character(g, field.orientation(x), c.limit_direction);
  Vec v0 = c.limit_direction;
  const double q = v0.dot(g * v0);
  if (is_timelike(c.character)) v0 /= std::sqrt(q);
  c.curve = integrate_geodesic(field, x, v0, o.span, o.step, {false});
  return c;
}

/// co_ray_family with VelocitiesNotCauchy if the directions do not settle.
inline CoRay co_ray(const MetricField& field, const TimelikeRay& ray, const Vec& x, const CoRayOptions& o = {}) {
  CoRay c = co_ray_family(field, ray, x, o);
  if (c.cauchy_gap > o.tol) {
    std::ostringstream os;
    os << "co-ray directions at (" << x.transpose() << ") change by " << c.cauchy_gap << " > " << o.tol;
    throw Error(Errc::VelocitiesNotCauchy, os.str());
  }
  return c;
}

/// Euclidean angle between two vectors.
inline double angle_between(const Vec& a, const Vec& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c);
}

// ---------------------------------------------------------------------------
// Superdifferentials
// ---------------------------------------------------------------------------

using ScalarFn = std::function<double(const Vec&)>;

struct SuperdifferentialProbe {
  Vec x;
  Vec v;
  std::vector<double> radii;
  std::vector<double> errors;  // e(r)
  std::vector<double> ratios;  // e(r) / r
};

/// Unit directions: a circle of `count` points in 2D, else the axes and the
/// pairwise diagonals.
inline std::vector<Vec> direction_fan(int n, int count = 32) {
  std::vector<Vec> out;
  if (n == 1) return {make_vec({1.0}), make_vec({-1.0})};
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2 * M_PI * i / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return out;
  }
  for (int i = 0; i < n; ++i) {
    out.push_back(unit(n, i));
    out.push_back(-unit(n, i));
    for (int j = i + 1; j < n; ++j)
      for (int si : {-1, 1})
        for (int sj : {-1, 1}) out.push_back((si * unit(n, i) + sj * unit(n, j)) / std::sqrt(2.0));
  }
  return out;
}

/// Candidate v by central differences with spacing h; e(r) is the max of
/// u(x + w) - u(x) - v(w) over Euclidean |w| = r, the exponential map of the
/// coordinate metric being x + w.
inline SuperdifferentialProbe superdifferential_probe(const ScalarFn& u, const Vec& x, const std::vector<double>& radii,
                                                      double h = 1e-4, int fan = 32) {
  const int n = static_cast<int>(x.size());
  SuperdifferentialProbe p;
  p.x = x;
  p.v = Vec(n);
  for (int k = 0; k < n; ++k) p.v(k) = (u(x + h * unit(n, k)) - u(x - h * unit(n, k))) / (2 * h);
  const double u0 = u(x);
  const auto dirs = direction_fan(n, fan);
  p.radii = radii;
  for (double r : radii) {
    const auto vals = parallel_map<double>(dirs.size(), [&](std::size_t i) {
      const Vec w = r * dirs[i];
      return u(x + w) - u0 - p.v.dot(w);
    });
    const double e = *std::max_element(vals.begin(), vals.end());
    p.errors.push_back(e);
    p.ratios.push_back(e / r);
  }
  return p;
}

struct SuperdifferentialEnvelope {
  std::vector<SuperdifferentialProbe> members;
  std::vector<double> envelope;  // max over members of e(r) / r
};

/// Equi-superdifferentiability: probes of a family sharing one envelope.
inline SuperdifferentialEnvelope superdifferential_envelope(const std::vector<ScalarFn>& family, const Vec& x,
                                                            const std::vector<double>& radii, double h = 1e-4) {
  SuperdifferentialEnvelope env;
  env.envelope.assign(radii.size(), -std::numeric_limits<double>::infinity());
  for (const auto& u : family) {
    env.members.push_back(superdifferential_probe(u, x, radii, h));
    for (std::size_t i = 0; i < radii.size(); ++i)
      env.envelope[i] = std::max(env.envelope[i], env.members.back().ratios[i]);
  }
  return env;
}

/// x -> -l(x, o) on the field window; l = 0 where unrelated.
inline ScalarFn negative_separation(const MetricField& field, const Vec& o, DistanceOptions d = {}) {
  d.use_ascent = false;
  return [field, o, d](const Vec& x) {
    const SeparationValue s = lorentz_distance(field, x, o, d);
    return s.related ? -s.value : 0.0;
  };
}

/// x -> b_t(x).
inline ScalarFn busemann_truncation(const MetricField& field, const TimelikeRay& ray, double t, BusemannSign sign,
                                    const BusemannOptions& o = {}) {
  const MetricField ext = busemann_field_window(field, ray, t);
  return [ext, ray, t, sign, o](const Vec& x) { return approx_busemann_on(ext, ray, t, x, sign, o.distance); };
}

}  // namespace c1split
