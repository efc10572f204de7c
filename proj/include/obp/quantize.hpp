#pragma once

// Second-order statistics of the elementwise sign quantizer on Gaussian
// inputs: arcsine law, Price's-theorem cross covariance, and the Bussgang
// gain/error decomposition.

#include "obp/wl.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace obp {

inline constexpr double kTwoOverPi = 2.0 / std::numbers::pi;

struct BussgangDecomposition {
  Mat gain;           // A, 2Nt x 2Nt
  Mat error_cov;      // R_q
  Mat quantized_cov;  // R_t
  Mat cross_cov;      // R_tx
};

// sign(0) := +1; magnitude is irrelevant.
inline Vec quantize_sign(const Vec& x) {
  return x.unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
}

inline WLVector quantize_sign(const WLVector& x) { return WLVector(quantize_sign(x.data)); }

namespace detail {

// Diagonally normalized correlation matrix, clamped to [-1,1] when within
// 1e-9 of the boundary. Throws on nonpositive diagonal or entries beyond it.
inline Mat normalized_correlation(const Mat& r) {
  if ((r.diagonal().array() <= 0.0).any())
    throw std::domain_error("quantize-stats: covariance has nonpositive diagonal");
  const Vec dinv = r.diagonal().array().sqrt().inverse();
  Mat c = dinv.asDiagonal() * r * dinv.asDiagonal();
  for (Index j = 0; j < c.cols(); ++j)
    for (Index i = 0; i < c.rows(); ++i) {
      double& v = c(i, j);
      if (std::abs(v) > 1.0 + 1e-9)
        throw std::domain_error("quantize-stats: correlation outside [-1,1]");
      v = std::clamp(v, -1.0, 1.0);
    }
  return c;
}

}  // namespace detail

// Arcsine law: R_t = (2/pi) asin(D^-1/2 R_x D^-1/2). Diagonal is exactly 1.
inline Mat r_t(const Mat& r_x) {
  Mat c = detail::normalized_correlation(r_x);
  c = c.unaryExpr([](double v) { return kTwoOverPi * std::asin(v); });
  c.diagonal().setOnes();
  return c;
}

// Price's theorem: R_tx = sqrt(2/pi) D^-1/2 R_x.
inline Mat r_tx(const Mat& r_x) {
  if ((r_x.diagonal().array() <= 0.0).any())
    throw std::domain_error("quantize-stats: covariance has nonpositive diagonal");
  const Vec dinv = r_x.diagonal().array().sqrt().inverse();
  return std::sqrt(kTwoOverPi) * (dinv.asDiagonal() * r_x);
}

inline constexpr double kConditionCap = 1e12;

// A = R_tx R_x^-1, R_q = R_t - A R_tx^T.
inline BussgangDecomposition bussgang(const Mat& r_x) {
  BussgangDecomposition out;
  out.quantized_cov = r_t(r_x);
  out.cross_cov = r_tx(r_x);
  Eigen::LDLT<Mat> ldlt(r_x);
  const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
  const double dmin = ldlt.vectorD().minCoeff();
  const double rcond = dmax > 0 ? dmin / dmax : 0.0;
  if (ldlt.info() != Eigen::Success || !(rcond > 1.0 / kConditionCap))
    throw std::domain_error("bussgang: covariance is singular or ill-conditioned (rcond " +
                            std::to_string(rcond) + ")");
  out.gain = ldlt.solve(out.cross_cov.transpose()).transpose();
  out.error_cov = out.quantized_cov - out.gain * out.cross_cov.transpose();
  return out;
}

// Second-order Taylor expansion of elementwise arcsin for a unit-diagonal
// matrix: C + (1/6) C^o3 + (pi/2 - 7/6) I. Diagonal comes out exactly pi/2.
inline Mat arcsin_approx(const Mat& c) {
  Mat out = c + (1.0 / 6.0) * c.array().cube().matrix();
  out.diagonal().array() += std::numbers::pi / 2.0 - 7.0 / 6.0;
  return out;
}

}  // namespace obp
