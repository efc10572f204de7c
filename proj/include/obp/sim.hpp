#pragma once

// Channel generation, CSI-error injection, end-to-end quantized link
// simulation, and ergodic Monte-Carlo sweeps.

#include "obp/precoder.hpp"
#include "obp/quantize.hpp"
#include "obp/rate.hpp"
#include "obp/rng.hpp"
#include "obp/threading.hpp"
#include "obp/wl.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace obp {

struct ChannelSet {
  Mat true_channel;  // H-bar transposed, 2K x 2Nt
  Mat est_channel;
  double xi = 0.0;
  std::uint64_t seed = 0;
};

// iid CN(0,1) entries, expanded to the strictly linear WL form.
inline Mat draw_channel(int nt, int k_users, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat h(k_users, nt);
  const double scale = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < h.cols(); ++j)
    for (Index i = 0; i < h.rows(); ++i)
      h(i, j) = std::complex<double>(scale * gauss(rng), scale * gauss(rng));
  return to_sl_matrix(h).data;
}

// H_est = sqrt(1 - xi) H + sqrt(xi) Gamma.
inline Mat apply_csi_error(const Mat& ht, double xi, std::mt19937_64& rng) {
  if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("apply_csi_error: xi must be in [0,1]");
  if (xi == 0.0) return ht;
  const Mat gamma = draw_channel(static_cast<int>(ht.cols()) / 2, static_cast<int>(ht.rows()) / 2, rng);
  return std::sqrt(1.0 - xi) * ht + std::sqrt(xi) * gamma;
}

struct LinkResult {
  double ber = 0.0;
  double mse = 0.0;
};

enum class LinkInput { Qpsk, GaussianRs };

namespace detail {

// Peel the superposition most-significant-stream-first: quadrant sign, then
// recurse on the remainder.
inline void demap_level(double level, int streams, double* bits_out) {
  for (int i = 0; i < streams; ++i) {
    const double weight = std::pow(2.0, streams - 1 - i);
    const double b = level >= 0 ? 1.0 : -1.0;
    bits_out[i] = b;
    level -= b * weight;
  }
}

inline double nearest_level(double v, int streams, std::mt19937_64& rng) {
  const int nlev = 1 << streams;
  double best = 0.0, best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nlev; ++i) {
    const double lev = 2.0 * i - (nlev - 1);
    const double dist = std::abs(v - lev);
    if (dist < best_dist - 1e-12) {
      best = lev;
      best_dist = dist;
    } else if (dist <= best_dist + 1e-12) {
      // Tie: prefer the smaller magnitude; equal magnitudes (only at the
      // origin) are broken randomly.
      if (std::abs(lev) < std::abs(best) - 1e-12 ||
          (std::abs(std::abs(lev) - std::abs(best)) <= 1e-12 && (rng() & 1u))) {
        best = lev;
        best_dist = std::min(best_dist, dist);
      }
    }
  }
  return best;
}

}  // namespace detail

// Transmits block_len symbol vectors through quantizer, power allocation,
// channel and AWGN; minimum-distance detection against the superimposed
// alphabet. MSE is measured against the target Pi s-bar.
inline LinkResult run_link(const PrecoderSolution& sol, const Mat& true_ht, double sigma2,
                           int block_len, std::mt19937_64& rng, LinkInput input = LinkInput::Qpsk) {
  const Index n_in = sol.precoder.cols();
  const Index n2k = true_ht.rows();
  const int k_users = static_cast<int>(n2k) / 2;
  if (true_ht.cols() != sol.precoder.rows()) throw std::invalid_argument("run_link: dimension mismatch");
  const Mat target_map = sol.target_map();
  const Index n_streams = target_map.cols();
  const int streams_per_axis = static_cast<int>(n_streams) / (2 * k_users);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  const double noise_std = std::sqrt(sigma2);

  Vec s(n_streams), u(n_in), x(sol.precoder.rows()), r(n2k);
  std::vector<double> bits(streams_per_axis);
  double bit_errors = 0.0, mse_sum = 0.0;
  long total_bits = 0;

  for (int blk = 0; blk < block_len; ++blk) {
    if (input == LinkInput::Qpsk) {
      for (Index i = 0; i < n_streams; ++i) s[i] = coin(rng) ? 1.0 : -1.0;
      u = sol.premap * s;
    } else {
      // Gaussian inputs with the design covariance, for analytic-MSE checks.
      for (Index i = 0; i < n_in; ++i) u[i] = gauss(rng);
      u = sol.rs.llt().matrixL() * u;
      s.setZero();
    }
    x = sol.precoder * u;
    if (sol.quantized) x = sol.power_alloc.asDiagonal() * quantize_sign(x);
    r = true_ht * x;
    for (Index i = 0; i < n2k; ++i) r[i] += noise_std * gauss(rng);
    r *= sol.beta;

    if (input == LinkInput::Qpsk) {
      mse_sum += (r - target_map * s).squaredNorm();
      for (Index axis = 0; axis < n2k; ++axis) {
        const double level = detail::nearest_level(r[axis], streams_per_axis, rng);
        detail::demap_level(level, streams_per_axis, bits.data());
        for (int i = 0; i < streams_per_axis; ++i) {
          if (bits[i] != s[axis * streams_per_axis + i]) bit_errors += 1.0;
          ++total_bits;
        }
      }
    } else {
      mse_sum += (r - sol.pi * u).squaredNorm();
      total_bits += 1;
    }
  }

  LinkResult out;
  out.mse = mse_sum / block_len;
  out.ber = input == LinkInput::Qpsk ? bit_errors / static_cast<double>(total_bits) : 0.0;
  return out;
}

enum class Method { TxwfqPiWl, TxwfqPiSl, Txwfq, TxwfUnq, Mf, Zf };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::TxwfqPiWl: return "txwfq_pi_wl";
    case Method::TxwfqPiSl: return "txwfq_pi_sl";
    case Method::Txwfq: return "txwfq";
    case Method::TxwfUnq: return "txwf_unq";
    case Method::Mf: return "mf";
    case Method::Zf: return "zf";
  }
  return "?";
}

inline bool parse_method(const std::string& s, Method& out) {
  for (Method m : {Method::TxwfqPiWl, Method::TxwfqPiSl, Method::Txwfq, Method::TxwfUnq, Method::Mf, Method::Zf})
    if (s == method_name(m)) {
      out = m;
      return true;
    }
  return false;
}

struct LinkConfig {
  int nt = 128;
  int k_users = 4;
  int streams = 2;
  std::vector<double> snr_db;  // E_Tx / sigma_eta^2 per point
  int block_len = 10000;
  int n_channels = 200;
  std::uint64_t seed = 1;
  std::vector<double> xi_grid = {0.0};
  double delta = 1e-4;
  double gamma0 = 10.0;
  int max_iters = 5000;
};

struct SweepPoint {
  double snr_db = 0.0;
  double xi = 0.0;
  std::string method;
  double ber = 0.0, ber_ci = 0.0;
  double mse = 0.0, mse_ci = 0.0;
  double sum_rate_lb = 0.0;
  double mean_iters = 0.0;
  int n_channels = 0;
  int block_len = 0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

namespace detail {

struct UnitStats {
  double ber = 0, mse = 0, iters = 0, rate = 0;
};

inline void mean_ci(const std::vector<double>& v, double& mean, double& ci) {
  const std::size_t n = v.size();
  mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
  ci = 1.96 * std::sqrt(var / static_cast<double>(n));
}

}  // namespace detail

// Precoder-mode ergodic sweep: noise fixed at sigma^2 = 1, E_Tx swept.
// Designs on the estimated channel, simulates on the true channel.
// Deterministic for a given (config, methods): every RNG stream is derived
// from (seed, snr index, xi index, channel index, method).
inline SweepResult ergodic_sweep(const LinkConfig& cfg, const std::vector<Method>& methods) {
  if (cfg.block_len < 1 || cfg.n_channels < 1) throw std::invalid_argument("ergodic_sweep: bad config");
  struct Unit {
    std::size_t snr_i, xi_i, chan_i, method_i;
  };
  std::vector<Unit> units;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si)
    for (std::size_t xi = 0; xi < cfg.xi_grid.size(); ++xi)
      for (std::size_t ci = 0; ci < static_cast<std::size_t>(cfg.n_channels); ++ci)
        for (std::size_t mi = 0; mi < methods.size(); ++mi) units.push_back({si, xi, ci, mi});

  std::vector<detail::UnitStats> stats(units.size());
  parallel_for(units.size(), [&](std::size_t ui) {
    const Unit& u = units[ui];
    const double etx = std::pow(10.0, cfg.snr_db[u.snr_i] / 10.0);
    const double sigma2 = 1.0;
    const double xi = cfg.xi_grid[u.xi_i];

    auto chan_rng = make_rng(cfg.seed, 0x10000 + u.chan_i);
    const Mat ht = draw_channel(cfg.nt, cfg.k_users, chan_rng);
    auto csi_rng = make_rng(cfg.seed, mix_seed(0x20000 + u.chan_i) ^ mix_seed(u.xi_i));
    const Mat ht_est = apply_csi_error(ht, xi, csi_rng);

    RateScenario scen = RateScenario::make(ht_est, sigma2);
    scen.tx_energy = etx;

    AlgoConfig acfg;
    acfg.delta = cfg.delta;
    acfg.gamma0 = cfg.gamma0;
    acfg.max_iters = cfg.max_iters;
    acfg.seed = mix_seed(cfg.seed) ^ mix_seed(0x30000 + u.chan_i);

    const Method m = methods[u.method_i];
    PrecoderSolution sol;
    switch (m) {
      case Method::TxwfqPiWl: {
        acfg.init = AlgoConfig::Init::RandomWL;
        const Superposition sp = make_superposition(cfg.k_users, cfg.streams);
        sol = solve_txwfq_pi(scen, sp.pi, Mat(Mat::Identity(sp.pi.cols(), sp.pi.cols())), acfg);
        break;
      }
      case Method::TxwfqPiSl: {
        acfg.init = AlgoConfig::Init::RandomSL;
        const Superposition sp = make_superposition(cfg.k_users, cfg.streams);
        sol = solve_txwfq_pi(scen, sp.pi, Mat(Mat::Identity(sp.pi.cols(), sp.pi.cols())), acfg);
        break;
      }
      case Method::Txwfq:
        sol = baseline_precoder(scen, PrecoderKind::TxwfqChannelRank, cfg.streams, acfg);
        break;
      case Method::TxwfUnq:
        sol = baseline_precoder(scen, PrecoderKind::TxwfUnquantized, cfg.streams, acfg);
        break;
      case Method::Mf:
        sol = baseline_precoder(scen, PrecoderKind::MF, cfg.streams, acfg);
        break;
      case Method::Zf:
        sol = baseline_precoder(scen, PrecoderKind::ZF, cfg.streams, acfg);
        break;
    }

    auto link_rng = make_rng(cfg.seed, mix_seed(0x40000 + u.chan_i) ^ mix_seed(u.snr_i * 131 + u.xi_i * 7919) ^
                                           mix_seed(0x50000 + u.method_i));
    const LinkResult lr = run_link(sol, ht, sigma2, cfg.block_len, link_rng);
    stats[ui] = {lr.ber, lr.mse, static_cast<double>(sol.iterations), 0.0};
  });

  SweepResult out;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si)
    for (std::size_t xi = 0; xi < cfg.xi_grid.size(); ++xi)
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        std::vector<double> bers, mses, iters;
        for (std::size_t ui = 0; ui < units.size(); ++ui) {
          const Unit& u = units[ui];
          if (u.snr_i == si && u.xi_i == xi && u.method_i == mi) {
            bers.push_back(stats[ui].ber);
            mses.push_back(stats[ui].mse);
            iters.push_back(stats[ui].iters);
          }
        }
        SweepPoint p;
        p.snr_db = cfg.snr_db[si];
        p.xi = cfg.xi_grid[xi];
        p.method = method_name(methods[mi]);
        detail::mean_ci(bers, p.ber, p.ber_ci);
        detail::mean_ci(mses, p.mse, p.mse_ci);
        double dummy;
        detail::mean_ci(iters, p.mean_iters, dummy);
        p.n_channels = cfg.n_channels;
        p.block_len = cfg.block_len;
        p.seed = cfg.seed;
        out.points.push_back(p);
      }
  return out;
}

// Rate-mode sweep: E_Tx = 2 Nt fixed, noise swept; per channel the
// covariance optimizer runs for every (rank, properness) variant next to the
// MF/ZF/MMSE baselines, and sum-rate lower bounds are averaged.
struct RateSweepConfig {
  int nt = 16;
  int k_users = 2;
  std::vector<int> ranks = {1, 2};
  std::vector<double> snr_db;
  int n_channels = 200;
  std::uint64_t seed = 1;
  OptimizerOptions opt;
};

inline SweepResult rate_sweep(const RateSweepConfig& cfg) {
  std::vector<std::string> methods;
  for (int r : cfg.ranks) {
    methods.push_back("improper_r" + std::to_string(r));
    methods.push_back("proper_r" + std::to_string(r));
  }
  methods.insert(methods.end(), {"mf_cov", "zf_cov", "mmse_cov"});

  struct Unit {
    std::size_t snr_i, chan_i;
  };
  std::vector<Unit> units;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si)
    for (std::size_t ci = 0; ci < static_cast<std::size_t>(cfg.n_channels); ++ci) units.push_back({si, ci});

  // One unit covers every method on one channel: the improper run of each
  // rank is seeded with that rank's proper solution, whose feasible set it
  // contains, so the improper curve dominates the proper one per channel
  // instead of relying on independent local optimizations.
  std::vector<std::vector<double>> rates(units.size(), std::vector<double>(methods.size()));
  parallel_for(units.size(), [&](std::size_t ui) {
    const Unit& u = units[ui];
    auto chan_rng = make_rng(cfg.seed, 0x10000 + u.chan_i);
    const Mat ht = draw_channel(cfg.nt, cfg.k_users, chan_rng);
    const double etx = 2.0 * cfg.nt;
    const double sigma2 = etx * std::pow(10.0, -cfg.snr_db[u.snr_i] / 10.0);
    const RateScenario scen = RateScenario::make(ht, sigma2);
    OptimizerOptions opt = cfg.opt;
    opt.seed = mix_seed(cfg.seed) ^ mix_seed(0x60000 + u.chan_i) ^ mix_seed(u.snr_i);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string& name = methods[mi];
      if (name == "mf_cov")
        rates[ui][mi] = baseline_covariance(scen, BaselineKind::MF).sum_rate_lb;
      else if (name == "zf_cov")
        rates[ui][mi] = baseline_covariance(scen, BaselineKind::ZF).sum_rate_lb;
      else if (name == "mmse_cov")
        rates[ui][mi] = baseline_covariance(scen, BaselineKind::MMSE).sum_rate_lb;
    }
    for (int r : cfg.ranks) {
      const std::vector<int> ranks(cfg.k_users, r);
      const auto proper = optimize_covariances(scen, ranks, true, opt);
      std::vector<Mat> seed_factors;
      for (const auto& c : proper.per_user_cov) seed_factors.push_back(detail::refactor_lower(c, 2 * r));
      const auto improper = optimize_covariances(scen, ranks, false, opt, seed_factors);
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        if (methods[mi] == "proper_r" + std::to_string(r)) rates[ui][mi] = proper.sum_rate_lb;
        if (methods[mi] == "improper_r" + std::to_string(r)) rates[ui][mi] = improper.sum_rate_lb;
      }
    }
  });

  SweepResult out;
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si)
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<double> vals;
      for (std::size_t ui = 0; ui < units.size(); ++ui)
        if (units[ui].snr_i == si) vals.push_back(rates[ui][mi]);
      SweepPoint p;
      p.snr_db = cfg.snr_db[si];
      p.method = methods[mi];
      double ci;
      detail::mean_ci(vals, p.sum_rate_lb, ci);
      p.ber = p.mse = std::nan("");
      p.n_channels = cfg.n_channels;
      p.block_len = 0;
      p.seed = cfg.seed;
      out.points.push_back(p);
    }
  return out;
}

}  // namespace obp
