#pragma once
//
// Gridded scalar fields (l(., o), b_t, b+-) with a validity mask and central
// finite-difference derivatives.
//

#include "c1split/chart.hpp"
#include "c1split/parallel.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace c1split {

using Index = std::array<int, kMaxDim>;

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(ChartWindow w) : window_(std::move(w)), values_(window_.size(), 0.0), mask_(window_.size(), 0) {}

  template <class F>
  static ScalarField from_function(const ChartWindow& w, F&& f) {
    ScalarField s(w);
    parallel_for(w.size(), [&](std::size_t i) {
      s.values_[i] = f(w.node(i));
      s.mask_[i] = 1;
    });
    return s;
  }

  const ChartWindow& window() const { return window_; }
  int dim() const { return window_.dim(); }
  std::size_t size() const { return values_.size(); }

  double value(std::size_t lin) const { return values_[lin]; }
  double value(const Index& idx) const { return values_[window_.flatten(idx)]; }
  bool valid(std::size_t lin) const { return mask_[lin] != 0; }
  bool valid(const Index& idx) const { return mask_[window_.flatten(idx)] != 0; }
  void set(std::size_t lin, double v, bool ok = true) {
    values_[lin] = v;
    mask_[lin] = ok ? 1 : 0;
  }
  void invalidate(std::size_t lin) { mask_[lin] = 0; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t valid_count() const {
    std::size_t c = 0;
    for (auto m : mask_) c += m;
    return c;
  }

  /// Central-difference gradient with spacing stride*h; empty if a needed
  /// neighbour is outside the grid or masked.
  std::optional<Vec> gradient(const Index& idx, int stride = 1) const {
    const int n = dim();
    Vec g(n);
    for (int k = 0; k < n; ++k) {
      Index a = idx, b = idx;
      a[k] += stride;
      b[k] -= stride;
      if (!inside(a) || !inside(b) || !valid(a) || !valid(b)) return std::nullopt;
      g(k) = (value(a) - value(b)) / (2.0 * stride * window_.spacing(k));
    }
    return g;
  }

  /// Second differences, mixed entries from the four diagonal neighbours.
  std::optional<Mat> hessian(const Index& idx, int stride = 1) const {
    const int n = dim();
    if (!valid(idx)) return std::nullopt;
    Mat H(n, n);
    const double u0 = value(idx);
    for (int k = 0; k < n; ++k) {
      const double hk = stride * window_.spacing(k);
      Index a = idx, b = idx;
      a[k] += stride;
      b[k] -= stride;
      if (!inside(a) || !inside(b) || !valid(a) || !valid(b)) return std::nullopt;
      H(k, k) = (value(a) - 2.0 * u0 + value(b)) / (hk * hk);
      for (int l = k + 1; l < n; ++l) {
        const double hl = stride * window_.spacing(l);
        double acc = 0.0;
        for (int sk : {-1, 1})
          for (int sl : {-1, 1}) {
            Index c = idx;
            c[k] += sk * stride;
            c[l] += sl * stride;
            if (!inside(c) || !valid(c)) return std::nullopt;
            acc += sk * sl * value(c);
          }
        H(k, l) = H(l, k) = acc / (4.0 * hk * hl);
      }
    }
    return H;
  }

  /// Multilinear interpolation of the nodal values.
  double value_at(const Vec& x) const {
    return interpolate(x, [&](std::size_t lin) { return values_[lin]; });
  }

  /// Multilinear interpolation of nodal central-difference gradients.
  Vec gradient_at(const Vec& x) const {
    const int n = dim();
    Vec out = Vec::Zero(n);
    for (int k = 0; k < n; ++k)
      out(k) = interpolate(x, [&](std::size_t lin) {
        const Index idx = window_.unflatten(lin);
        auto g = gradient(clamp_interior(idx));
        if (!g) throw Error(Errc::OutOfWindow, "gradient unavailable near masked node");
        return (*g)(k);
      });
    return out;
  }

  bool inside(const Index& idx) const {
    for (int k = 0; k < dim(); ++k)
      if (idx[k] < 0 || idx[k] >= window_.shape()[k]) return false;
    return true;
  }

 private:
  Index clamp_interior(Index idx) const {
    for (int k = 0; k < dim(); ++k) idx[k] = std::clamp(idx[k], 1, window_.shape()[k] - 2);
    return idx;
  }

  template <class Get>
  double interpolate(const Vec& x, Get&& get) const {
    if (!window_.contains(x)) throw Error(Errc::OutOfWindow, "interpolation point outside grid");
    const int n = dim();
    Index base{};
    std::array<double, kMaxDim> frac{};
    for (int k = 0; k < n; ++k) {
      const double s = (x(k) - window_.lo(k)) / window_.spacing(k);
      int i = static_cast<int>(std::floor(s));
      i = std::clamp(i, 0, window_.shape()[k] - 2);
      base[k] = i;
      frac[k] = std::clamp(s - i, 0.0, 1.0);
    }
    double acc = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
      Index c = base;
      double wt = 1.0;
      for (int k = 0; k < n; ++k) {
        const int bit = (corner >> k) & 1;
        c[k] += bit;
        wt *= bit ? frac[k] : 1.0 - frac[k];
      }
      if (wt == 0.0) continue;
      const std::size_t lin = window_.flatten(c);
      if (!mask_[lin]) throw Error(Errc::OutOfWindow, "interpolation touches a masked node");
      acc += wt * get(lin);
    }
    return acc;
  }

  ChartWindow window_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

}  // namespace c1split
