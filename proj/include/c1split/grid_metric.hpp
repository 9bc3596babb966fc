#pragma once
//
// Metrics given as gridded coefficient files. One CSV record per node:
// x^0..x^{n-1}, the upper triangle of g_ij (row major), then for each k the
// upper triangle of d_k g_ij. Values between nodes are multilinear.
//

#include "c1split/chart.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

namespace c1split {

namespace detail {

struct GridMetricData {
  ChartWindow window;
  std::vector<Mat> g;
  std::vector<Tensor3> dg;

  template <class T, class Get>
  T interpolate(const Vec& x, Get&& get, T zero) const {
    const int n = window.dim();
    std::array<int, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    for (int k = 0; k < n; ++k) {
      const double s = (x(k) - window.lo(k)) / window.spacing(k);
      const int i = std::clamp(static_cast<int>(std::floor(s)), 0, window.shape()[k] - 2);
      base[k] = i;
      frac[k] = std::clamp(s - i, 0.0, 1.0);
    }
    T acc = zero;
    for (int corner = 0; corner < (1 << n); ++corner) {
      auto c = base;
      double wt = 1.0;
      for (int k = 0; k < n; ++k) {
        const int bit = (corner >> k) & 1;
        c[k] += bit;
        wt *= bit ? frac[k] : 1.0 - frac[k];
      }
      if (wt != 0.0) acc = acc + wt * get(window.flatten(c));
    }
    return acc;
  }
};

/// Eigenvector of the single positive eigenvalue, oriented with positive x^0 component.
inline Vec positive_eigenvector(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  const int n = static_cast<int>(g.rows());
  Vec v = es.eigenvectors().col(n - 1);
  if (v(0) < 0) v = -v;
  return v;
}

}  // namespace detail

/// Builds a C^1 metric field from per-node samples on a tensor grid.
inline MetricField grid_metric(std::string name, const ChartWindow& w, std::vector<Mat> g, std::vector<Tensor3> dg,
                               Signature sig = Signature::Lorentzian) {
  if (g.size() != w.size() || dg.size() != w.size())
    throw Error(Errc::InvalidArgument, "grid metric sample count does not match the grid");
  const int expected = sig == Signature::Lorentzian ? 1 : w.dim();
  for (const Mat& m : g)
    if (positive_eigenvalues(m) != expected)
      throw Error(Errc::InvalidArgument, "grid metric sample has the wrong signature");
  auto data = std::make_shared<detail::GridMetricData>(detail::GridMetricData{w, std::move(g), std::move(dg)});
  const int n = w.dim();
  return MetricField(
      std::move(name), w,
      [data, n](const Vec& x) -> Mat {
        return data->interpolate<Mat>(x, [&](std::size_t i) -> Mat { return data->g[i]; }, Mat::Zero(n, n));
      },
      [data, n](const Vec& x) -> Tensor3 {
        return data->interpolate<Tensor3>(x, [&](std::size_t i) { return data->dg[i]; }, Tensor3(n));
      },
      [data, n](const Vec& x) -> Vec {
        return detail::positive_eigenvector(
            data->interpolate<Mat>(x, [&](std::size_t i) -> Mat { return data->g[i]; }, Mat::Zero(n, n)));
      },
      Regularity::C1, sig);
}

/// Reads the CSV format described at the top of this header. Lines starting
/// with '#' or a letter are skipped.
inline MetricField load_grid_metric(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigParse, "cannot open grid metric file " + path);
  const int tri = n * (n + 1) / 2;
  const int cols = n + tri + n * tri;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    if (static_cast<int>(r.size()) != cols)
      throw Error(Errc::ConfigParse, "grid metric row has " + std::to_string(r.size()) + " columns, expected " +
                                         std::to_string(cols));
    rows.push_back(std::move(r));
  }
  std::vector<std::set<double>> axes(n);
  for (const auto& r : rows)
    for (int k = 0; k < n; ++k) axes[k].insert(r[k]);
  Vec lo(n), hi(n);
  std::vector<int> shape(n);
  for (int k = 0; k < n; ++k) {
    if (axes[k].size() < 3) throw Error(Errc::ConfigParse, "grid metric needs at least 3 nodes per axis");
    lo(k) = *axes[k].begin();
    hi(k) = *axes[k].rbegin();
    shape[k] = static_cast<int>(axes[k].size());
  }
  ChartWindow w(lo, hi, shape);
  if (rows.size() != w.size()) throw Error(Errc::ConfigParse, "grid metric file is not a full tensor grid");
  std::vector<Mat> g(w.size());
  std::vector<Tensor3> dg(w.size());
  for (const auto& r : rows) {
    std::array<int, kMaxDim> idx{};
    for (int k = 0; k < n; ++k) idx[k] = static_cast<int>(std::lround((r[k] - lo(k)) / w.spacing(k)));
    const std::size_t lin = w.flatten(idx);
    Mat m(n, n);
    Tensor3 d(n);
    int c = n;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m(i, j) = m(j, i) = r[c++];
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) d(k, i, j) = d(k, j, i) = r[c++];
    g[lin] = m;
    dg[lin] = d;
  }
  return grid_metric(path, w, std::move(g), std::move(dg));
}

/// Writes field samples on its window grid in the same CSV format.
inline void save_grid_metric(const MetricField& field, const std::string& path) {
  std::ofstream out(path);
  const ChartWindow& w = field.window();
  const int n = w.dim();
  out.precision(17);
  out << "# x, g upper triangle, d_k g upper triangle\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec x = w.node(i);
    const MetricSample s = field.eval(x);
    for (int k = 0; k < n; ++k) out << x(k) << ",";
    std::vector<double> vals;
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) vals.push_back(s.g(a, b));
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) vals.push_back(s.dg(k, a, b));
    for (std::size_t j = 0; j < vals.size(); ++j) out << vals[j] << (j + 1 < vals.size() ? "," : "\n");
  }
}

}  // namespace c1split
