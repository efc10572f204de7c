#pragma once

// Higher-rank quantized transmit Wiener filter: superposition matrix,
// exact/approximate MSE with closed-form gradient, and the gradient
// projection solver, plus the linear baselines it is compared against.

#include "obp/quantize.hpp"
#include "obp/rate.hpp"
#include "obp/rng.hpp"
#include "obp/wl.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace obp {

// Pi = I_2K kron tau^T with tau = [2^(R-1), ..., 2, 1].
struct Superposition {
  Vec tau;
  Mat pi;  // 2K x 2KR
  int streams_per_user = 1;
  int users = 1;
};

inline Superposition make_superposition(int k_users, int streams) {
  if (streams < 1) throw std::invalid_argument("make_superposition: R must be >= 1");
  Superposition sp;
  sp.users = k_users;
  sp.streams_per_user = streams;
  sp.tau.resize(streams);
  for (int i = 0; i < streams; ++i) sp.tau[i] = std::pow(2.0, streams - 1 - i);
  sp.pi = Mat::Zero(2 * k_users, 2 * k_users * streams);
  for (int row = 0; row < 2 * k_users; ++row)
    sp.pi.block(row, row * streams, 1, streams) = sp.tau.transpose();
  return sp;
}

inline Vec superimpose(const Superposition& sp, const Vec& s) { return sp.pi * s; }

struct AlgoConfig {
  double gamma0 = 10.0;
  double delta = 1e-4;
  int max_iters = 5000;
  enum class Init { RandomWL, RandomSL, Provided } init = Init::RandomWL;
  Mat init_precoder;
  std::uint64_t seed = 0;
};

struct PrecoderSolution {
  Mat precoder;     // P-tilde, 2Nt x n_in
  Vec power_alloc;  // diagonal of D_opt
  double beta = 1.0;
  Mat pi;       // precoder input -> receiver target (2K x n_in)
  Mat premap;   // raw QPSK streams -> precoder input (n_in x 2KR)
  Mat rs;       // input covariance used for the design
  bool strictly_linear = false;
  bool quantized = true;
  std::vector<double> mse_trace;
  int iterations = 0;
  bool converged = true;

  Mat target_map() const { return pi * premap; }
};

struct MseComponents {
  double a = 0, b = 0, c = 0, d = 0, e = 0;
};

// Fixed per-channel data shared by every MSE/gradient evaluation.
struct PrecoderProblem {
  Mat hbar;  // 2Nt x 2K
  Mat w;     // hbar hbar^T
  Mat pi;    // 2K x n_in
  Mat rs;    // n_in x n_in input covariance
  Mat c0;    // hbar * pi * rs, the (constant) gradient of the cross trace
  double etx = 0;
  double d = 0;  // tr(R_eta-bar) = K sigma^2
  double e = 0;  // tr(pi rs pi^T)

  PrecoderProblem(const RateScenario& s, Mat pi_in, Mat rs_in)
      : hbar(s.channel.transpose()), w(hbar * hbar.transpose()), pi(std::move(pi_in)), rs(std::move(rs_in)) {
    etx = s.tx_energy;
    d = s.num_users * s.noise_var;
    e = (pi * rs * pi.transpose()).trace();
    c0 = hbar * pi * rs;  // gradient of tr(H^T P R_s Pi^T) w.r.t. P
  }
};

inline double power_trace(const Mat& p, const Mat& rs) {
  return (p * rs).cwiseProduct(p).sum();
}

// Scales onto the power sphere tr(P R_s P^T) = E_Tx.
inline Mat project_power(const Mat& p, const Mat& rs, double etx) {
  const double tr = power_trace(p, rs);
  if (tr <= 0) throw std::domain_error("project_power: zero precoder");
  return std::sqrt(etx / tr) * p;
}

namespace detail {

inline Vec floored_row_power(const Mat& g) {
  // Row powers enter as D_opt^-2 and D_opt^-4; floor them away from zero.
  return g.diagonal().cwiseMax(1e-12);
}

}  // namespace detail

inline MseComponents mse_components(const PrecoderProblem& pb, const Mat& p) {
  MseComponents mc;
  const Mat g = p * pb.rs * p.transpose();
  const Vec dv = detail::floored_row_power(g);
  const double kappa = std::numbers::pi / 2.0 - 7.0 / 6.0;
  mc.a = kTwoOverPi * (g.cwiseProduct(pb.w).sum() + kappa * dv.dot(pb.w.diagonal()));
  double b = 0.0;
  for (Index j = 0; j < g.cols(); ++j)
    for (Index i = 0; i < g.rows(); ++i) {
      const double gij = g(i, j);
      b += gij * gij * gij * pb.w(i, j) / (dv[i] * dv[j]);
    }
  mc.b = b / (3.0 * std::numbers::pi);
  mc.c = -std::sqrt(kTwoOverPi) * p.cwiseProduct(pb.c0).sum();
  mc.d = pb.d;
  mc.e = pb.e;
  return mc;
}

inline double mse_from_components(const MseComponents& mc, double beta) {
  return beta * beta * (mc.a + mc.b + mc.d) + 2.0 * beta * mc.c + mc.e;
}

// Taylor-approximated MSE used by the solver.
inline double mse_approx(const PrecoderProblem& pb, const Mat& p, double beta) {
  return mse_from_components(mse_components(pb, p), beta);
}

// Exact arcsine MSE (no Taylor expansion).
inline double mse_exact(const PrecoderProblem& pb, const Mat& p, double beta) {
  const Mat g = p * pb.rs * p.transpose();
  if ((g.diagonal().array() <= 0).any())
    throw std::domain_error("mse_exact: zero row power in precoder");
  const Mat asin_c = (std::numbers::pi / 2.0) * r_t(g);  // asin of normalized G
  const Vec dhalf = g.diagonal().array().sqrt();
  const double quad =
      kTwoOverPi * (dhalf.asDiagonal() * asin_c * dhalf.asDiagonal()).cwiseProduct(pb.w).sum();
  const double cross = -std::sqrt(kTwoOverPi) * p.cwiseProduct(pb.c0).sum();
  return beta * beta * (quad + pb.d) + 2.0 * beta * cross + pb.e;
}

// Stationary receiver scale g*(P) = -c / (a + b + d).
inline double optimal_beta(const PrecoderProblem& pb, const Mat& p) {
  const MseComponents mc = mse_components(pb, p);
  const double denom = mc.a + mc.b + mc.d;
  if (denom <= 0) throw std::domain_error("optimal_beta: a + b + d must be positive");
  return -mc.c / denom;
}

// Closed-form gradient of mse_approx w.r.t. P at fixed beta.
inline Mat mse_gradient(const PrecoderProblem& pb, const Mat& p, double beta) {
  const Mat g = p * pb.rs * p.transpose();
  const Vec dv = detail::floored_row_power(g);
  const double kappa = std::numbers::pi / 2.0 - 7.0 / 6.0;
  const Mat prs = p * pb.rs;

  Mat grad_a = (4.0 / std::numbers::pi) *
               (pb.w * prs + kappa * (pb.w.diagonal().asDiagonal() * prs));

  const Index n = g.rows();
  Mat m(n, n);
  Vec t = Vec::Zero(n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double gij = g(i, j);
      m(i, j) = 0.5 * pb.w(i, j) * gij * gij / (dv[i] * dv[j]);
      t[i] += gij * gij * gij * pb.w(i, j) / dv[j];
    }
  for (Index i = 0; i < n; ++i) m(i, i) -= t[i] / (3.0 * dv[i] * dv[i]);
  Mat grad_b = (4.0 / std::numbers::pi) * (m * prs);

  const Mat grad_c = -std::sqrt(kTwoOverPi) * pb.c0;
  return beta * beta * (grad_a + grad_b) + 2.0 * beta * grad_c;
}

namespace detail {

inline Mat random_init(const PrecoderProblem& pb, AlgoConfig::Init kind, std::mt19937_64& rng) {
  const Index rows = pb.hbar.rows();
  const Index cols = pb.pi.cols();
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (kind == AlgoConfig::Init::RandomSL) {
    CMat pc(rows / 2, cols / 2);
    for (Index j = 0; j < pc.cols(); ++j)
      for (Index i = 0; i < pc.rows(); ++i) pc(i, j) = std::complex<double>(gauss(rng), gauss(rng));
    return to_sl_matrix(pc).data;
  }
  Mat p(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) p(i, j) = gauss(rng);
  return p;
}

}  // namespace detail

// Gradient projection: candidate = project_power(P - gamma grad), accepted
// only when the approximate MSE decreases, gamma halved otherwise (and never
// reset). Iteration count includes rejected passes.
inline PrecoderSolution solve_txwfq_pi(const RateScenario& s, const Mat& pi, const Mat& rs,
                                       const AlgoConfig& cfg) {
  PrecoderProblem pb(s, pi, rs);
  auto rng = make_rng(cfg.seed, 0xbeef);
  Mat p = cfg.init == AlgoConfig::Init::Provided ? cfg.init_precoder
                                                 : detail::random_init(pb, cfg.init, rng);
  p = project_power(p, pb.rs, pb.etx);
  double beta = optimal_beta(pb, p);
  double eps = mse_approx(pb, p, beta);

  PrecoderSolution sol;
  sol.mse_trace.push_back(eps);
  double gamma = cfg.gamma0;
  int iters = 0;
  bool converged = false;
  while (iters < cfg.max_iters) {
    ++iters;
    const Mat grad = mse_gradient(pb, p, beta);
    const Mat cand = project_power(Mat(p - gamma * grad), pb.rs, pb.etx);
    const double eps_cand = mse_approx(pb, cand, beta);
    if (eps_cand <= eps) {
      p = cand;
      beta = optimal_beta(pb, p);
      const double eps_new = mse_approx(pb, p, beta);
      sol.mse_trace.push_back(eps_new);
      const bool stop = std::abs(eps_new - eps) / eps <= cfg.delta;
      eps = eps_new;
      if (stop) {
        converged = true;
        break;
      }
    } else {
      gamma *= 0.5;
      if (gamma < 1e-16) {
        converged = true;
        break;
      }
    }
  }

  sol.precoder = p;
  sol.power_alloc = (p * rs * p.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();
  sol.beta = beta;
  sol.pi = pi;
  sol.premap = Mat::Identity(pi.cols(), pi.cols());
  sol.rs = rs;
  sol.strictly_linear = is_strictly_linear(p, 1e-9);
  sol.iterations = iters;
  sol.converged = converged;
  return sol;
}

enum class PrecoderKind { MF, ZF, TxwfUnquantized, TxwfqChannelRank };

// Linear baselines. All deliver the same receive constellation as TxWFQ-Pi:
// MF/ZF/TxWF map raw streams to the superimposed target directly; the
// channel-rank TxWFQ feeds pre-superimposed symbols through Algorithm 1 with
// an identity target map.
inline PrecoderSolution baseline_precoder(const RateScenario& s, PrecoderKind kind, int streams,
                                          const AlgoConfig& cfg) {
  if (s.num_users > s.num_antennas) throw std::invalid_argument("baseline_precoder: K > Nt");
  const Superposition sp = make_superposition(s.num_users, streams);
  const Index n2k = 2 * s.num_users;
  const Mat hbar = s.channel.transpose();
  const Mat rs = Mat::Identity(sp.pi.cols(), sp.pi.cols());

  if (kind == PrecoderKind::TxwfqChannelRank) {
    // 16-QAM (or higher) symbols are formed before the precoder, so the
    // design input covariance is Pi Pi^T and the target map is identity.
    AlgoConfig c = cfg;
    c.init = AlgoConfig::Init::RandomSL;
    const Mat rs_eff = sp.pi * sp.pi.transpose();  // scaled identity
    PrecoderSolution sol = solve_txwfq_pi(s, Mat(Mat::Identity(n2k, n2k)), rs_eff, c);
    sol.premap = sp.pi;
    return sol;
  }

  PrecoderSolution sol;
  sol.pi = sp.pi;
  sol.premap = Mat::Identity(sp.pi.cols(), sp.pi.cols());
  sol.rs = rs;
  Mat p;
  switch (kind) {
    case PrecoderKind::MF:
      p = hbar * sp.pi;
      break;
    case PrecoderKind::ZF: {
      const Mat gram = s.channel * hbar;
      Eigen::FullPivLU<Mat> lu(gram);
      if (!lu.isInvertible()) throw std::domain_error("baseline_precoder: rank-deficient channel for ZF");
      p = hbar * lu.inverse() * sp.pi;
      break;
    }
    case PrecoderKind::TxwfUnquantized: {
      Mat gram = s.channel * hbar;
      gram.diagonal().array() += s.num_users * s.noise_var / s.tx_energy;
      p = hbar * gram.inverse() * sp.pi;
      break;
    }
    default:
      throw std::logic_error("unreachable");
  }
  p = project_power(p, rs, s.tx_energy);
  sol.precoder = p;
  sol.strictly_linear = is_strictly_linear(p, 1e-9);

  if (kind == PrecoderKind::TxwfUnquantized) {
    sol.quantized = false;
    sol.power_alloc = Vec::Ones(p.rows());
    const double a_u = (p * rs * p.transpose()).cwiseProduct(hbar * hbar.transpose()).sum();
    const double c_u = p.cwiseProduct(hbar * sp.pi * rs).sum();
    sol.beta = c_u / (a_u + s.num_users * s.noise_var);
  } else {
    PrecoderProblem pb(s, sp.pi, rs);
    sol.power_alloc = (p * rs * p.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();
    sol.beta = optimal_beta(pb, p);
  }
  return sol;
}

}  // namespace obp
