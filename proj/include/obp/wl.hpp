#pragma once

// Real-valued widely-linear (WL) algebra: complex quantities are stacked as
// [real parts; imaginary parts] and all downstream math stays in the reals.

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

namespace obp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Index = Eigen::Index;

// 2N-dimensional stacking of an N-dimensional complex vector.
struct WLVector {
  Vec data;

  WLVector() = default;
  explicit WLVector(Vec d) : data(std::move(d)) {
    if (data.size() % 2 != 0) throw std::invalid_argument("WLVector: odd length");
  }

  Index n_complex() const { return data.size() / 2; }
  auto re() const { return data.head(n_complex()); }
  auto im() const { return data.tail(n_complex()); }
};

// Real 2M x 2N matrix with accessors for the four M x N blocks.
struct WLMatrix {
  Mat data;

  WLMatrix() = default;
  explicit WLMatrix(Mat d) : data(std::move(d)) {
    if (data.rows() % 2 != 0 || data.cols() % 2 != 0)
      throw std::invalid_argument("WLMatrix: dimensions must be even");
  }

  Index m() const { return data.rows() / 2; }
  Index n() const { return data.cols() / 2; }
  auto tl() const { return data.topLeftCorner(m(), n()); }
  auto tr() const { return data.topRightCorner(m(), n()); }
  auto bl() const { return data.bottomLeftCorner(m(), n()); }
  auto br() const { return data.bottomRightCorner(m(), n()); }
};

// Symmetric PSD 2N x 2N covariance in WL coordinates.
struct WLCovariance {
  Mat data;

  WLCovariance() = default;
  explicit WLCovariance(Mat d) : data(std::move(d)) {
    if (data.rows() != data.cols() || data.rows() % 2 != 0)
      throw std::invalid_argument("WLCovariance: must be square with even size");
  }

  Index n_complex() const { return data.rows() / 2; }
  auto re_re() const { return data.topLeftCorner(n_complex(), n_complex()); }
  auto re_im() const { return data.topRightCorner(n_complex(), n_complex()); }
  auto im_re() const { return data.bottomLeftCorner(n_complex(), n_complex()); }
  auto im_im() const { return data.bottomRightCorner(n_complex(), n_complex()); }
};

inline WLVector to_wl_vector(const CVec& v) {
  Vec out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return WLVector(std::move(out));
}

inline CVec from_wl_vector(const WLVector& v) {
  const Index n = v.n_complex();
  CVec out(n);
  out.real() = v.re();
  out.imag() = v.im();
  return out;
}

// Strictly linear expansion [Re B, -Im B; Im B, Re B] of a complex matrix.
inline WLMatrix to_sl_matrix(const CMat& b) {
  const Index m = b.rows(), n = b.cols();
  Mat out(2 * m, 2 * n);
  out.topLeftCorner(m, n) = b.real();
  out.topRightCorner(m, n) = -b.imag();
  out.bottomLeftCorner(m, n) = b.imag();
  out.bottomRightCorner(m, n) = b.real();
  return WLMatrix(std::move(out));
}

inline CMat from_sl_matrix(const WLMatrix& b) {
  CMat out(b.m(), b.n());
  out.real() = b.tl();
  out.imag() = b.bl();
  return out;
}

inline bool is_strictly_linear(const WLMatrix& b, double tol) {
  if (tol < 0) throw std::invalid_argument("is_strictly_linear: tol < 0");
  const double d1 = (b.tl() - b.br()).cwiseAbs().maxCoeff();
  const double d2 = (b.tr() + b.bl()).cwiseAbs().maxCoeff();
  return d1 <= tol && d2 <= tol;
}

inline bool is_strictly_linear(const Mat& b, double tol) {
  return is_strictly_linear(WLMatrix(b), tol);
}

// Properness test per the equal-diagonal / antisymmetric-cross block conditions.
inline bool is_proper(const WLCovariance& r, double tol) {
  const double d1 = (r.re_re() - r.im_im()).cwiseAbs().maxCoeff();
  const double d2 = (r.re_im() + r.im_re()).cwiseAbs().maxCoeff();
  return d1 <= tol && d2 <= tol;
}

inline bool is_proper(const Mat& r, double tol) { return is_proper(WLCovariance(r), tol); }

// Frobenius-nearest proper covariance: average with the congruence J R J^T,
// J = [0 -I; I 0]. An average of two PSD congruences, so PSD is preserved.
inline Mat project_proper(const Mat& r) {
  const Index n = r.rows() / 2;
  Mat out(2 * n, 2 * n);
  const Mat a = 0.5 * (r.topLeftCorner(n, n) + r.bottomRightCorner(n, n));
  const Mat b = 0.5 * (r.topRightCorner(n, n) - r.bottomLeftCorner(n, n));
  out.topLeftCorner(n, n) = a;
  out.bottomRightCorner(n, n) = a;
  out.topRightCorner(n, n) = b;
  out.bottomLeftCorner(n, n) = -b;
  return out;
}

inline WLCovariance project_proper(const WLCovariance& r) {
  return WLCovariance(project_proper(r.data));
}

// PSD within the relative tolerance used across the library: smallest
// eigenvalue >= -1e-10 times the largest.
inline bool is_psd(const Mat& r, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Mat> es(r, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return es.eigenvalues().minCoeff() >= -rel_tol * std::max(lmax, 1.0);
}

}  // namespace obp
