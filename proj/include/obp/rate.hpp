#pragma once

// SQINR-based per-user rate lower bound and the rank/properness-constrained
// transmit-covariance optimization over Cholesky factors.

#include "obp/quantize.hpp"
#include "obp/rng.hpp"
#include "obp/wl.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace obp {

struct RateScenario {
  Mat channel;       // H-bar transposed, 2K x 2Nt, strictly linear
  double noise_var;  // sigma_eta^2 per complex dimension
  int num_users;
  int num_antennas;
  double tx_energy;  // E_Tx, fixed to 2 Nt in rate mode

  static RateScenario make(Mat ht, double sigma2) {
    RateScenario s;
    s.num_users = static_cast<int>(ht.rows()) / 2;
    s.num_antennas = static_cast<int>(ht.cols()) / 2;
    s.channel = std::move(ht);
    s.noise_var = sigma2;
    s.tx_energy = 2.0 * s.num_antennas;
    if (sigma2 <= 0) throw std::invalid_argument("RateScenario: noise_var must be positive");
    return s;
  }

  // WL rows of user k: real part row k, imaginary part row K + k.
  Mat user_rows(int k) const {
    Mat hk(2, channel.cols());
    hk.row(0) = channel.row(k);
    hk.row(1) = channel.row(num_users + k);
    return hk;
  }
};

enum class BaselineKind { MF, ZF, MMSE };

struct OptimizerTrace {
  int iterations = 0;
  double grad_norm = 0.0;
  int restarts_used = 0;
  bool converged = true;
};

struct CovarianceSolution {
  std::vector<Mat> per_user_cov;
  std::vector<int> ranks;
  bool proper_constrained = false;
  double sum_rate_lb = 0.0;
  OptimizerTrace trace;
};

namespace detail {

inline Eigen::LLT<Mat> factor_total_cov(const Mat& r_x) {
  Eigen::LLT<Mat> llt(r_x);
  if (llt.info() != Eigen::Success) {
    // Rank-deficient totals can occur when sum(R_k) < Nt; regularize.
    Mat reg = r_x;
    reg.diagonal().array() += 1e-9;
    llt.compute(reg);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("rate-bound: total covariance is not PSD");
  }
  return llt;
}

}  // namespace detail

// H_eff^T = H^T A with A the Bussgang gain of the total transmit covariance.
inline Mat effective_channel(const RateScenario& s, const Mat& r_x) {
  const auto llt = detail::factor_total_cov(r_x);
  const Mat rtx = r_tx(r_x);
  return (llt.solve(rtx.transpose()) * s.channel.transpose()).transpose();
}

// The 2x2 effective ratio (MUI + QE + AWGN)^-1 H_eff,k^T R_k H_eff,k.
inline Mat sqinr(const RateScenario& s, const std::vector<Mat>& covs, int k) {
  Mat r_x = covs[0];
  for (std::size_t l = 1; l < covs.size(); ++l) r_x += covs[l];
  const auto llt = detail::factor_total_cov(r_x);
  const Mat rt = r_t(r_x);
  const Mat rtx = r_tx(r_x);

  const Mat hk = s.user_rows(k).transpose();       // 2Nt x 2
  const Mat b = rtx.transpose() * hk;              // 2Nt x 2
  const Mat heff_k = llt.solve(b);                 // H_eff,k, 2Nt x 2
  const Mat qe = hk.transpose() * rt * hk - b.transpose() * heff_k;
  const Mat mui = heff_k.transpose() * (r_x - covs[k]) * heff_k;
  Mat denom = mui + qe;
  denom.diagonal().array() += s.noise_var / 2.0;
  const Mat signal = heff_k.transpose() * covs[k] * heff_k;
  return denom.inverse() * signal;
}

namespace detail {

inline double det2(const Mat& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

// Fast path used by the optimizer: one Bussgang factorization shared across
// users, log-det computed as det(D + S)/det(D) so the result cannot go
// negative from subtraction noise.
inline double sum_rate_objective(const RateScenario& s, const std::vector<Mat>& covs) {
  Mat r_x = covs[0];
  for (std::size_t l = 1; l < covs.size(); ++l) r_x += covs[l];
  const auto llt = factor_total_cov(r_x);
  const Mat rt = r_t(r_x);
  const Mat rtx = r_tx(r_x);

  double rate = 0.0;
  for (int k = 0; k < s.num_users; ++k) {
    const Mat hk = s.user_rows(k).transpose();
    const Mat b = rtx.transpose() * hk;
    const Mat heff_k = llt.solve(b);
    const Mat qe = hk.transpose() * rt * hk - b.transpose() * heff_k;
    const Mat mui = heff_k.transpose() * (r_x - covs[k]) * heff_k;
    Mat denom = mui + qe;
    denom.diagonal().array() += s.noise_var / 2.0;
    const Mat signal = heff_k.transpose() * covs[k] * heff_k;
    rate += 0.5 * std::log2(std::max(det2(denom + signal) / det2(denom), 1.0));
  }
  return rate;
}

}  // namespace detail

// (1/2) log2 det(I2 + SQINR_k), in bits per channel use.
inline double user_rate_lb(const RateScenario& s, const std::vector<Mat>& covs, int k) {
  const Mat q = sqinr(s, covs, k);
  return 0.5 * std::log2(std::max(detail::det2(Mat(Mat::Identity(2, 2) + q)), 1.0));
}

inline double sum_rate_lb(const RateScenario& s, const std::vector<Mat>& covs) {
  double out = 0.0;
  for (int k = 0; k < s.num_users; ++k) out += user_rate_lb(s, covs, k);
  return out;
}

// Complex-domain MF / ZF / MMSE precoder, expanded to WL per-user covariances
// and trace-normalized to the transmit energy.
inline CovarianceSolution baseline_covariance(const RateScenario& s, BaselineKind kind) {
  const int nt = s.num_antennas, nu = s.num_users;
  if (nu > nt) throw std::invalid_argument("baseline_covariance: K > Nt");
  const CMat h = from_sl_matrix(WLMatrix(s.channel));  // K x Nt complex
  CMat p;                                              // Nt x K
  switch (kind) {
    case BaselineKind::MF:
      p = h.adjoint();
      break;
    case BaselineKind::ZF: {
      const CMat gram = h * h.adjoint();
      Eigen::FullPivLU<CMat> lu(gram);
      if (!lu.isInvertible()) throw std::domain_error("baseline_covariance: rank-deficient channel for ZF");
      p = h.adjoint() * lu.inverse();
      break;
    }
    case BaselineKind::MMSE: {
      CMat gram = h * h.adjoint();
      gram.diagonal().array() += nu * s.noise_var / s.tx_energy;
      p = h.adjoint() * gram.inverse();
      break;
    }
  }
  const Mat pw = to_sl_matrix(p).data;  // 2Nt x 2K
  CovarianceSolution sol;
  sol.ranks.assign(nu, 1);
  double total = 0.0;
  for (int k = 0; k < nu; ++k) {
    Mat pk(2 * nt, 2);
    pk.col(0) = pw.col(k);
    pk.col(1) = pw.col(nu + k);
    sol.per_user_cov.push_back(pk * pk.transpose());
    total += sol.per_user_cov.back().trace();
  }
  for (auto& r : sol.per_user_cov) r *= s.tx_energy / total;
  sol.sum_rate_lb = sum_rate_lb(s, sol.per_user_cov);
  return sol;
}

struct OptimizerOptions {
  int max_iters = 2000;
  double rel_tol = 1e-6;
  int restarts = 5;
  double fd_step = 1e-6;
  double diag_floor = 1e-6;
  std::uint64_t seed = 0;
};

namespace detail {

// Lower-triangular 2Nt x 2R factors, stored column-major over the free
// entries (i >= j within the first 2R columns).
struct CholParam {
  int nt2;  // 2 Nt
  std::vector<int> cols;  // 2 R_k per user

  int params_per_user(std::size_t k) const {
    int n = 0;
    for (int j = 0; j < cols[k]; ++j) n += nt2 - j;
    return n;
  }
  int total_params() const {
    int n = 0;
    for (std::size_t k = 0; k < cols.size(); ++k) n += params_per_user(k);
    return n;
  }
  Vec pack(const std::vector<Mat>& ls) const {
    Vec x(total_params());
    int idx = 0;
    for (std::size_t k = 0; k < ls.size(); ++k)
      for (int j = 0; j < cols[k]; ++j)
        for (int i = j; i < nt2; ++i) x[idx++] = ls[k](i, j);
    return x;
  }
  std::vector<Mat> unpack(const Vec& x) const {
    std::vector<Mat> ls;
    int idx = 0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      Mat l = Mat::Zero(nt2, cols[k]);
      for (int j = 0; j < cols[k]; ++j)
        for (int i = j; i < nt2; ++i) l(i, j) = x[idx++];
      ls.push_back(std::move(l));
    }
    return ls;
  }
};

inline std::vector<Mat> covs_from_factors(const std::vector<Mat>& ls) {
  std::vector<Mat> covs;
  covs.reserve(ls.size());
  for (const auto& l : ls) covs.push_back(l * l.transpose());
  return covs;
}

// Rank-limited factor of a PSD matrix with the triangular sparsity pattern:
// top eigenpairs, then an LQ step to restore lower-triangular shape.
inline Mat refactor_lower(const Mat& r, int ncols) {
  Eigen::SelfAdjointEigenSolver<Mat> es(r);
  const int n = static_cast<int>(r.rows());
  Mat b = Mat::Zero(n, ncols);
  for (int c = 0; c < ncols; ++c) {
    const int src = n - 1 - c;  // eigenvalues ascend
    if (src < 0) break;
    const double lam = std::max(es.eigenvalues()[src], 0.0);
    b.col(c) = es.eigenvectors().col(src) * std::sqrt(lam);
  }
  // B = L Q with L = R^T from the QR factorization of B^T.
  Eigen::HouseholderQR<Mat> qr(b.transpose());
  Mat l = Mat(qr.matrixQR().topRows(ncols).triangularView<Eigen::Upper>()).transpose();
  for (int j = 0; j < ncols; ++j)
    if (l(j, j) < 0) l.col(j) = -l.col(j);
  return l;
}

inline void normalize_trace(std::vector<Mat>& ls, double target) {
  double total = 0.0;
  for (const auto& l : ls) total += l.squaredNorm();
  const double c = std::sqrt(target / total);
  for (auto& l : ls) l *= c;
}

inline void apply_floors(std::vector<Mat>& ls, double floor) {
  for (auto& l : ls)
    for (int j = 0; j < l.cols(); ++j)
      if (l(j, j) < floor) l(j, j) = floor;
}

inline void enforce_proper(std::vector<Mat>& ls) {
  for (auto& l : ls) l = refactor_lower(project_proper(Mat(l * l.transpose())), static_cast<int>(l.cols()));
}

}  // namespace detail

// Projected gradient ascent on the free Cholesky entries with
// central-difference gradients and a halving line search. `init`, when given,
// replaces the first restart.
inline CovarianceSolution optimize_covariances(const RateScenario& s, const std::vector<int>& ranks,
                                               bool proper, const OptimizerOptions& opts,
                                               const std::optional<std::vector<Mat>>& init = std::nullopt) {
  const int nt2 = 2 * s.num_antennas;
  detail::CholParam par;
  par.nt2 = nt2;
  for (int r : ranks) {
    if (r < 1 || r > s.num_antennas) throw std::invalid_argument("optimize_covariances: rank out of range");
    par.cols.push_back(2 * r);
  }

  const auto objective = [&](const Vec& x) {
    return detail::sum_rate_objective(s, detail::covs_from_factors(par.unpack(x)));
  };

  const auto project = [&](std::vector<Mat>& ls) {
    detail::apply_floors(ls, opts.diag_floor);
    if (proper) {
      detail::enforce_proper(ls);
      detail::apply_floors(ls, opts.diag_floor);
    }
    detail::normalize_trace(ls, s.tx_energy);
  };

  CovarianceSolution best;
  best.sum_rate_lb = -1.0;

  auto rng = make_rng(opts.seed, 0x7a7e);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<Mat> ls;
    if (restart == 0 && init) {
      ls = *init;
    } else if (restart == 0 && s.num_users <= s.num_antennas) {
      // MMSE-informed start; remaining columns get small noise so higher
      // ranks are not pinned to the rank-2 subspace.
      const auto mmse = baseline_covariance(s, BaselineKind::MMSE);
      for (std::size_t k = 0; k < ranks.size(); ++k) {
        Mat l = detail::refactor_lower(mmse.per_user_cov[k], par.cols[k]);
        for (int j = 2; j < l.cols(); ++j)
          for (int i = j; i < nt2; ++i) l(i, j) += 1e-2 * gauss(rng);
        ls.push_back(std::move(l));
      }
    } else {
      for (std::size_t k = 0; k < ranks.size(); ++k) {
        Mat l = Mat::Zero(nt2, par.cols[k]);
        for (int j = 0; j < par.cols[k]; ++j) {
          for (int i = j; i < nt2; ++i) l(i, j) = gauss(rng);
          l(j, j) = std::abs(l(j, j)) + 0.5;
        }
        ls.push_back(std::move(l));
      }
    }
    project(ls);
    Vec x = par.pack(ls);
    double f = objective(x);

    double gamma = 1.0;
    int iter = 0;
    bool converged = false;
    Vec grad(x.size());
    for (; iter < opts.max_iters; ++iter) {
      for (Index i = 0; i < x.size(); ++i) {
        const double h = opts.fd_step * std::max(1.0, std::abs(x[i]));
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = objective(x);
        x[i] = saved - h;
        const double fm = objective(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
      }

      bool accepted = false;
      double f_new = f;
      for (int halving = 0; halving < 40; ++halving) {
        std::vector<Mat> cand = par.unpack(Vec(x + gamma * grad));
        project(cand);
        const Vec xc = par.pack(cand);
        const double fc = objective(xc);
        if (fc > f) {
          x = xc;
          f_new = fc;
          accepted = true;
          gamma = std::min(gamma * 2.0, 1e3);
          break;
        }
        gamma *= 0.5;
      }
      if (!accepted) {
        converged = true;
        break;
      }
      if (std::abs(f_new - f) / std::max(std::abs(f), 1e-300) < opts.rel_tol) {
        f = f_new;
        converged = true;
        break;
      }
      f = f_new;
    }

    if (f > best.sum_rate_lb) {
      best.per_user_cov = detail::covs_from_factors(par.unpack(x));
      best.ranks = ranks;
      best.proper_constrained = proper;
      best.sum_rate_lb = f;
      best.trace.iterations = iter;
      best.trace.grad_norm = grad.norm();
      best.trace.restarts_used = restart + 1;
      best.trace.converged = converged;
    }
  }
  best.trace.restarts_used = opts.restarts;
  return best;
}

}  // namespace obp
