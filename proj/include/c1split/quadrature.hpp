#pragma once
//
// Tensor-grid trapezoid quadrature on a chart window with a Richardson error
// estimate against the half-resolution grid, plus Gauss-Legendre rules.
//

#include "c1split/chart.hpp"
#include "c1split/parallel.hpp"

#include <array>
#include <vector>

namespace c1split {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {
inline double trapezoid_weight(const ChartWindow& w, const std::array<int, kMaxDim>& idx, int stride) {
  double wt = 1.0;
  for (int k = 0; k < w.dim(); ++k) {
    const double h = w.spacing(k) * stride;
    const bool edge = idx[k] == 0 || idx[k] == w.shape()[k] - 1;
    wt *= edge ? 0.5 * h : h;
  }
  return wt;
}
}  // namespace detail

/// Integrates f over the window. f(idx, stride) is the integrand at node idx
/// when derivatives are taken with grid stride `stride` (1 on the fine grid,
/// 2 on the coarse grid). Summation order is fixed.
template <class F>
QuadratureResult trapezoid(const ChartWindow& w, F&& f, bool stride_dependent = true) {
  for (int s : w.shape())
    if ((s - 1) % 2 != 0) throw Error(Errc::InvalidArgument, "quadrature grid needs an odd point count per axis");
  const std::size_t N = w.size();
  std::vector<double> fine = parallel_map<double>(N, [&](std::size_t i) { return f(w.unflatten(i), 1); });

  std::vector<std::size_t> coarse_nodes;
  for (std::size_t i = 0; i < N; ++i) {
    const auto idx = w.unflatten(i);
    bool even = true;
    for (int k = 0; k < w.dim(); ++k) even = even && idx[k] % 2 == 0;
    if (even) coarse_nodes.push_back(i);
  }
  std::vector<double> coarse;
  if (stride_dependent) {
    coarse = parallel_map<double>(coarse_nodes.size(),
                                  [&](std::size_t j) { return f(w.unflatten(coarse_nodes[j]), 2); });
  } else {
    coarse.reserve(coarse_nodes.size());
    for (auto i : coarse_nodes) coarse.push_back(fine[i]);
  }

  double Ih = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double wt = detail::trapezoid_weight(w, w.unflatten(i), 1);
    Ih += wt * fine[i];
    abs_sum += wt * std::abs(fine[i]);
  }
  const ChartWindow cw = w.coarsened();
  double I2h = 0.0;
  for (std::size_t j = 0; j < coarse_nodes.size(); ++j) {
    auto idx = w.unflatten(coarse_nodes[j]);
    std::array<int, kMaxDim> cidx{};
    for (int k = 0; k < w.dim(); ++k) cidx[k] = idx[k] / 2;
    I2h += detail::trapezoid_weight(cw, cidx, 1) * coarse[j];
  }
  const double floor = 1e2 * std::numeric_limits<double>::epsilon() * abs_sum;
  return {Ih, std::abs(Ih - I2h) / 3.0 + floor};
}

/// Pointwise integrand f(x); evaluated once per node.
template <class F>
QuadratureResult trapezoid_pointwise(const ChartWindow& w, F&& f) {
  return trapezoid(
      w, [&](const std::array<int, kMaxDim>& idx, int) { return f(w.node(idx)); }, false);
}

/// Gauss-Legendre nodes and weights on [0,1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Newton iteration on the Legendre recurrence.
inline GaussRule gauss_legendre(int m) {
  GaussRule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.nodes[m - 1 - i] = 0.5 * (z + 1.0);
    r.weights[m - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

}  // namespace c1split
