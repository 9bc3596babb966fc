#pragma once
//
// Coordinate chart windows and the C^1 data living on them: Lorentzian metric
// fields exposing g and dg only, weights, the auxiliary Riemannian metric and
// the test data (vector fields, bump densities) used by distributional pairings.
//

#include "c1split/core.hpp"

#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace c1split {

// ---------------------------------------------------------------------------
// ChartWindow
// ---------------------------------------------------------------------------

/// Axis-aligned coordinate box with a tensor grid of nodes.
class ChartWindow {
 public:
  ChartWindow() = default;
  ChartWindow(Vec lo, Vec hi, std::vector<int> shape) : lo_(std::move(lo)), hi_(std::move(hi)), shape_(std::move(shape)) {
    validate();
  }

  /// Same bounds on every axis.
  static ChartWindow cube(int dim, double lo, double hi, int points) {
    return ChartWindow(Vec::Constant(dim, lo), Vec::Constant(dim, hi), std::vector<int>(dim, points));
  }

  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const std::vector<int>& shape() const { return shape_; }
  double lo(int k) const { return lo_(k); }
  double hi(int k) const { return hi_(k); }
  double spacing(int k) const { return (hi_(k) - lo_(k)) / (shape_[k] - 1); }
  double max_spacing() const {
    double h = 0;
    for (int k = 0; k < dim(); ++k) h = std::max(h, spacing(k));
    return h;
  }
  double cell_volume() const {
    double v = 1;
    for (int k = 0; k < dim(); ++k) v *= spacing(k);
    return v;
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int e : shape_) s *= static_cast<std::size_t>(e);
    return s;
  }

  bool contains(const Vec& x, double slack = 1e-12) const {
    if (x.size() != lo_.size()) return false;
    for (int k = 0; k < dim(); ++k) {
      const double tol = slack * (1.0 + std::abs(hi_(k) - lo_(k)));
      if (!(x(k) >= lo_(k) - tol && x(k) <= hi_(k) + tol)) return false;
    }
    return true;
  }

  /// Multi-index of a linear node number; axis 0 varies slowest.
  std::array<int, kMaxDim> unflatten(std::size_t lin) const {
    std::array<int, kMaxDim> idx{};
    for (int k = dim() - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(lin % shape_[k]);
      lin /= shape_[k];
    }
    return idx;
  }
  std::size_t flatten(const std::array<int, kMaxDim>& idx) const {
    std::size_t lin = 0;
    for (int k = 0; k < dim(); ++k) lin = lin * shape_[k] + static_cast<std::size_t>(idx[k]);
    return lin;
  }
  Vec node(const std::array<int, kMaxDim>& idx) const {
    Vec x(dim());
    for (int k = 0; k < dim(); ++k) x(k) = lo_(k) + idx[k] * spacing(k);
    return x;
  }
  Vec node(std::size_t lin) const { return node(unflatten(lin)); }

  bool is_boundary(const std::array<int, kMaxDim>& idx, int width = 1) const {
    for (int k = 0; k < dim(); ++k)
      if (idx[k] < width || idx[k] > shape_[k] - 1 - width) return true;
    return false;
  }

  /// Window with the same bounds and every-other node (requires odd shapes).
  ChartWindow coarsened() const {
    std::vector<int> s(shape_.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      if ((shape_[k] - 1) % 2 != 0)
        throw Error(Errc::InvalidArgument, "coarsening needs an odd number of points per axis");
      s[k] = (shape_[k] - 1) / 2 + 1;
    }
    return ChartWindow(lo_, hi_, s);
  }

  /// Window shrunk by `margin` on every side, keeping the grid spacing roughly.
  ChartWindow shrunk(double margin) const {
    Vec lo = lo_.array() + margin;
    Vec hi = hi_.array() - margin;
    std::vector<int> s(shape_.size());
    for (int k = 0; k < dim(); ++k) {
      if (!(hi(k) > lo(k))) throw Error(Errc::CollarTooThin, "window collapses when shrunk");
      s[k] = std::max(3, static_cast<int>(std::lround((hi(k) - lo(k)) / spacing(k))) + 1);
    }
    return ChartWindow(lo, hi, s);
  }

  std::string describe() const {
    std::ostringstream os;
    os << "[";
    for (int k = 0; k < dim(); ++k) os << (k ? " x " : "") << lo_(k) << ".." << hi_(k) << "#" << shape_[k];
    os << "]";
    return os.str();
  }

 private:
  void validate() const {
    if (lo_.size() < 1 || lo_.size() > kMaxDim || hi_.size() != lo_.size() ||
        static_cast<int>(shape_.size()) != lo_.size())
      throw Error(Errc::InvalidArgument, "chart window dimension mismatch");
    for (int k = 0; k < dim(); ++k) {
      if (!(hi_(k) > lo_(k))) throw Error(Errc::InvalidArgument, "degenerate window bounds");
      if (shape_[k] < 3) throw Error(Errc::InvalidArgument, "grid needs at least 3 points per axis");
    }
  }

  Vec lo_, hi_;
  std::vector<int> shape_;
};

// ---------------------------------------------------------------------------
// MetricField
// ---------------------------------------------------------------------------

enum class Regularity { Smooth, C1 };
enum class Signature { Lorentzian, Riemannian };

struct MetricSample {
  Mat g;
  Tensor3 dg;  // dg(k,i,j) = d_k g_ij
};

/// A metric on a chart window exposing the value and first derivatives only.
/// Evaluation outside the window is an OutOfWindow error, never extrapolated.
class MetricField {
 public:
  using MatFn = std::function<Mat(const Vec&)>;
  using DerivFn = std::function<Tensor3(const Vec&)>;
  using VecFn = std::function<Vec(const Vec&)>;

  MetricField() = default;
  MetricField(std::string name, ChartWindow window, MatFn g, DerivFn dg, VecFn orientation, Regularity reg,
              Signature sig = Signature::Lorentzian)
      : name_(std::move(name)),
        window_(std::move(window)),
        domain_(window_),
        g_(std::move(g)),
        dg_(std::move(dg)),
        orientation_(std::move(orientation)),
        regularity_(reg),
        signature_(sig) {}

  const std::string& name() const { return name_; }
  int dim() const { return window_.dim(); }
  const ChartWindow& window() const { return window_; }
  Regularity regularity() const { return regularity_; }
  Signature signature() const { return signature_; }

  /// Largest window on which the closed form is valid; equals window() for
  /// gridded or derived fields.
  const ChartWindow& natural_domain() const { return domain_; }
  MetricField& set_natural_domain(ChartWindow d) {
    domain_ = std::move(d);
    return *this;
  }

  /// Copy restricted or extended to another window inside the natural domain.
  MetricField with_window(const ChartWindow& w) const {
    for (int k = 0; k < w.dim(); ++k)
      if (w.lo(k) < domain_.lo(k) - 1e-12 || w.hi(k) > domain_.hi(k) + 1e-12)
        throw Error(Errc::OutOfWindow, "window " + w.describe() + " exceeds natural domain of " + name_);
    MetricField m = *this;
    m.window_ = w;
    return m;
  }

  Mat g(const Vec& x) const {
    check(x);
    return g_(x);
  }
  Tensor3 dg(const Vec& x) const {
    check(x);
    return dg_(x);
  }
  MetricSample eval(const Vec& x) const {
    check(x);
    return {g_(x), dg_(x)};
  }
  Vec orientation(const Vec& x) const {
    check(x);
    return orientation_(x);
  }
  bool contains(const Vec& x) const { return window_.contains(x); }

  double inner(const Vec& x, const Vec& u, const Vec& v) const { return u.dot(g(x) * v); }

 private:
  void check(const Vec& x) const {
    if (!window_.contains(x)) {
      std::ostringstream os;
      os << name_ << ": point (" << x.transpose() << ") outside " << window_.describe();
      throw Error(Errc::OutOfWindow, os.str());
    }
  }

  std::string name_;
  ChartWindow window_;
  ChartWindow domain_;
  MatFn g_;
  DerivFn dg_;
  VecFn orientation_;
  Regularity regularity_ = Regularity::C1;
  Signature signature_ = Signature::Lorentzian;
};

/// g_ij(x) and d_k g_ij(x).
inline MetricSample eval_metric(const MetricField& field, const Vec& x) { return field.eval(x); }

/// Number of positive eigenvalues of a symmetric matrix.
inline int positive_eigenvalues(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  int count = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) count += es.eigenvalues()(i) > 0;
  return count;
}

// ---------------------------------------------------------------------------
// Causal character
// ---------------------------------------------------------------------------

enum class CausalCharacter { FutureTimelike, PastTimelike, FutureNull, PastNull, Spacelike, Zero };

inline constexpr std::string_view to_string(CausalCharacter c) {
  switch (c) {
    case CausalCharacter::FutureTimelike: return "future-timelike";
    case CausalCharacter::PastTimelike: return "past-timelike";
    case CausalCharacter::FutureNull: return "future-null";
    case CausalCharacter::PastNull: return "past-null";
    case CausalCharacter::Spacelike: return "spacelike";
    case CausalCharacter::Zero: return "zero";
  }
  return "?";
}

inline bool is_future_causal(CausalCharacter c) {
  return c == CausalCharacter::FutureTimelike || c == CausalCharacter::FutureNull;
}
inline bool is_timelike(CausalCharacter c) {
  return c == CausalCharacter::FutureTimelike || c == CausalCharacter::PastTimelike;
}

/// Classification of v at x from the signs of g(v,v) and g(v,F). The null
/// band is measured against the Euclidean auxiliary norm of v.
inline CausalCharacter causal_character(const Mat& g, const Vec& F, const Vec& v) {
  const double aux = v.squaredNorm();
  if (aux == 0.0) return CausalCharacter::Zero;
  const double q = v.dot(g * v);
  const double orient = v.dot(g * F);
  if (std::abs(q) < kNullTolerance * aux)
    return orient >= 0 ? CausalCharacter::FutureNull : CausalCharacter::PastNull;
  if (q < 0) return CausalCharacter::Spacelike;
  return orient > 0 ? CausalCharacter::FutureTimelike : CausalCharacter::PastTimelike;
}

inline CausalCharacter causal_character(const MetricField& field, const Vec& x, const Vec& v) {
  return causal_character(field.g(x), field.orientation(x), v);
}

// ---------------------------------------------------------------------------
// Weights, auxiliary metric, test data
// ---------------------------------------------------------------------------

/// Weight V with its differential and synthetic dimension N >= n. N may be
/// +infinity; N == n forces V == 0.
struct WeightField {
  std::string name = "zero";
  std::function<double(const Vec&)> value = [](const Vec&) { return 0.0; };
  std::function<Vec(const Vec&)> gradient = [](const Vec& x) { return Vec::Zero(x.size()); };
  double synthetic_dim = std::numeric_limits<double>::infinity();
  bool identically_zero = true;

  double operator()(const Vec& x) const { return value(x); }
};

/// The conventions V = 0 if N = n; N >= n.
inline void validate_weight(const WeightField& V, int n) {
  if (V.synthetic_dim < n) throw Error(Errc::ConventionViolation, "synthetic dimension N below n");
  if (V.synthetic_dim == n && !V.identically_zero)
    throw Error(Errc::ConventionViolation, "N = n requires V = 0");
}

/// Background Riemannian metric; Euclidean coordinates unless overridden.
struct AuxRiemannianField {
  std::function<Mat(const Vec&)> eval = [](const Vec& x) -> Mat { return Mat::Identity(x.size(), x.size()); };
  double norm2(const Vec& x, const Vec& v) const { return v.dot(eval(x) * v); }
};

/// Vector field with its coordinate Jacobian J(i,m) = d_m X^i.
struct TestVectorField {
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;

  static TestVectorField constant(const Vec& v) {
    const int n = static_cast<int>(v.size());
    return {[v](const Vec&) { return v; }, [n](const Vec&) -> Mat { return Mat::Zero(n, n); }};
  }
  TestVectorField scaled(double lambda) const {
    auto val = value;
    auto jac = jacobian;
    return {[val, lambda](const Vec& x) -> Vec { return lambda * val(x); },
            [jac, lambda](const Vec& x) -> Mat { return lambda * jac(x); }};
  }
};

/// Smooth compactly supported bump A * exp(1 - 1/(1 - s^2)), s = |x - c| / r.
struct Bump {
  Vec center;
  double radius = 0.1;
  double amplitude = 1.0;

  double operator()(const Vec& x) const {
    const double s2 = (x - center).squaredNorm() / (radius * radius);
    if (s2 >= 1.0) return 0.0;
    return amplitude * std::exp(1.0 - 1.0 / (1.0 - s2));
  }
  Vec gradient(const Vec& x) const {
    const Vec d = x - center;
    const double s2 = d.squaredNorm() / (radius * radius);
    if (s2 >= 1.0) return Vec::Zero(x.size());
    const double e = amplitude * std::exp(1.0 - 1.0 / (1.0 - s2));
    // d/d(s2) exp(1 - 1/(1-s2)) = -exp(..)/(1-s2)^2 ; d(s2)/dx = 2 d / r^2
    return -e / ((1.0 - s2) * (1.0 - s2)) * (2.0 / (radius * radius)) * d;
  }
  Bump scaled(double lambda) const { return {center, radius, amplitude * lambda}; }

  /// SupportLeak unless the support stays one grid cell away from the boundary.
  void check_support(const ChartWindow& w) const {
    for (int k = 0; k < w.dim(); ++k) {
      const double h = w.spacing(k);
      if (center(k) - radius < w.lo(k) + h || center(k) + radius > w.hi(k) - h) {
        std::ostringstream os;
        os << "bump at (" << center.transpose() << ") radius " << radius << " reaches the boundary of "
           << w.describe();
        throw Error(Errc::SupportLeak, os.str());
      }
    }
  }
};

/// A test vector field paired with a density.
struct TestData {
  TestVectorField X;
  Bump mu;
};

// ---------------------------------------------------------------------------
// Derived fields
// ---------------------------------------------------------------------------

/// Pullback of `field` under t -> -t. For a catalog metric, l_g(x,y) equals
/// l_reversed(Ry, Rx) with R the reflection of the first coordinate.
inline MetricField time_reversed(const MetricField& field) {
  const int n = field.dim();
  Mat P = Mat::Identity(n, n);
  P(0, 0) = -1.0;
  const Vec lo = field.window().lo();
  const Vec hi = field.window().hi();
  Vec rlo = lo, rhi = hi;
  rlo(0) = -hi(0);
  rhi(0) = -lo(0);
  ChartWindow rw(rlo, rhi, field.window().shape());
  auto src = std::make_shared<MetricField>(field);
  auto refl = [P](const Vec& x) -> Vec { return P * x; };
  MetricField out(
      field.name() + "-reversed", rw, [src, P, refl](const Vec& x) -> Mat { return P * src->g(refl(x)) * P; },
      [src, P, refl, n](const Vec& x) -> Tensor3 {
        const Tensor3 d = src->dg(refl(x));
        Tensor3 r(n);
        for (int k = 0; k < n; ++k) r.set_slice(k, P(k, k) * (P * d.slice(k) * P));
        return r;
      },
      [src, P, refl](const Vec& x) -> Vec { return -(P * src->orientation(refl(x))); }, field.regularity(),
      field.signature());
  return out;
}

}  // namespace c1split
