#pragma once
//
// Basic numeric types, error reporting and small tensor containers shared by
// every module of the library.
//

#include <Eigen/Dense>

#include <array>
#include <initializer_list>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace c1split {

/// Largest chart dimension supported. Vectors and matrices are stack allocated.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Null-cone thickness: |g(v,v)| < kNullTolerance * |v|^2 (auxiliary norm) is null.
inline constexpr double kNullTolerance = 1e-6;

enum class Errc {
  OutOfWindow,
  InvalidArgument,
  SupportLeak,
  ConventionViolation,
  ExitWindow,
  StepTooLarge,
  NoConnection,
  NotCausallyRelated,
  DiamondLeavesWindow,
  CollarTooThin,
  ConeNarrowingFailed,
  NotInChronologicalPast,
  NotInChronologicalFuture,
  NotConverged,
  VelocitiesNotCauchy,
  DegenerateGradient,
  WrongCausalType,
  FlowLeavesWindow,
  StructureViolated,
  LevelSetNotGraph,
  ConfigParse,
};

inline constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::OutOfWindow: return "OutOfWindow";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SupportLeak: return "SupportLeak";
    case Errc::ConventionViolation: return "ConventionViolation";
    case Errc::ExitWindow: return "ExitWindow";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::NoConnection: return "NoConnection";
    case Errc::NotCausallyRelated: return "NotCausallyRelated";
    case Errc::DiamondLeavesWindow: return "DiamondLeavesWindow";
    case Errc::CollarTooThin: return "CollarTooThin";
    case Errc::ConeNarrowingFailed: return "ConeNarrowingFailed";
    case Errc::NotInChronologicalPast: return "NotInChronologicalPast";
    case Errc::NotInChronologicalFuture: return "NotInChronologicalFuture";
    case Errc::NotConverged: return "NotConverged";
    case Errc::VelocitiesNotCauchy: return "VelocitiesNotCauchy";
    case Errc::DegenerateGradient: return "DegenerateGradient";
    case Errc::WrongCausalType: return "WrongCausalType";
    case Errc::FlowLeavesWindow: return "FlowLeavesWindow";
    case Errc::StructureViolated: return "StructureViolated";
    case Errc::LevelSetNotGraph: return "LevelSetNotGraph";
    case Errc::ConfigParse: return "ConfigParse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Rank-3 array with runtime extent n <= kMaxDim, indexed (a,b,c).
/// Holds dg(k,i,j) = d_k g_ij and Gamma(i,j,k) = Gamma^i_jk.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n) { data_.fill(0.0); }

  int dim() const { return n_; }
  double& operator()(int a, int b, int c) { return data_[(a * kMaxDim + b) * kMaxDim + c]; }
  double operator()(int a, int b, int c) const { return data_[(a * kMaxDim + b) * kMaxDim + c]; }

  /// Matrix slice with the first index fixed.
  Mat slice(int a) const {
    Mat m(n_, n_);
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) m(b, c) = (*this)(a, b, c);
    return m;
  }
  void set_slice(int a, const Mat& m) {
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) (*this)(a, b, c) = m(b, c);
  }
  double max_abs() const {
    double r = 0.0;
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < n_; ++c) r = std::max(r, std::abs((*this)(a, b, c)));
    return r;
  }

 private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data_{};
};

/// Rank-4 array, used only for second derivatives of smooth (mollified) metrics:
/// ddg(k,l,i,j) = d_k d_l g_ij.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n) { data_.fill(0.0); }

  int dim() const { return n_; }
  double& operator()(int a, int b, int c, int d) {
    return data_[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + d];
  }
  double operator()(int a, int b, int c, int d) const {
    return data_[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + d];
  }

 private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> data_{};
};

inline Tensor3 operator*(double a, const Tensor3& t) {
  Tensor3 r(t.dim());
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j)
      for (int k = 0; k < t.dim(); ++k) r(i, j, k) = a * t(i, j, k);
  return r;
}

inline Tensor3 operator+(const Tensor3& a, const Tensor3& b) {
  Tensor3 r(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      for (int k = 0; k < a.dim(); ++k) r(i, j, k) = a(i, j, k) + b(i, j, k);
  return r;
}

inline Tensor3 operator-(const Tensor3& a, const Tensor3& b) { return a + (-1.0) * b; }

inline Vec zeros(int n) { return Vec::Zero(n); }

inline Vec unit(int n, int k) {
  Vec v = Vec::Zero(n);
  v(k) = 1.0;
  return v;
}

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Operator norm of a symmetric matrix (largest absolute eigenvalue).
inline double sym_op_norm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace c1split
