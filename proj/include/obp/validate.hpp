#pragma once

// Self-contained oracle checks: Monte-Carlo quantizer statistics, finite
// difference gradient comparison, closed-form single-user rate, and the
// superposition alphabet enumeration. Each check reports measured vs
// expected with its tolerance so failures are diagnosable from the report.

#include "obp/precoder.hpp"
#include "obp/quantize.hpp"
#include "obp/rate.hpp"
#include "obp/rng.hpp"
#include "obp/wl.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace obp {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

namespace detail {

inline Mat random_psd(Index n, std::mt19937_64& rng, double diag_boost = 0.5) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat b(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) b(i, j) = gauss(rng);
  Mat r = b * b.transpose() / static_cast<double>(n);
  r.diagonal().array() += diag_boost;
  return r;
}

}  // namespace detail

// Empirical sign-quantizer statistics of correlated Gaussians vs the
// arcsine-law predictions, and the orthogonality of the Bussgang error to
// the input. 3-sigma bounds on every matrix entry.
inline std::vector<CheckResult> check_quantizer_statistics(int n_covs = 5, Index dim = 8,
                                                           int n_samples = 1000000,
                                                           std::uint64_t seed = 12345) {
  std::vector<CheckResult> out;
  for (int trial = 0; trial < n_covs; ++trial) {
    auto rng = make_rng(seed, 100 + trial);
    const Mat rx = detail::random_psd(dim, rng);
    const BussgangDecomposition bd = bussgang(rx);
    const Mat rt_pred = r_t(rx);
    const Mat rtx_pred = r_tx(rx);
    const Eigen::LLT<Mat> llt(rx);

    Mat rt_emp = Mat::Zero(dim, dim), rtx_emp = Mat::Zero(dim, dim), qx_emp = Mat::Zero(dim, dim);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec z(dim), x(dim), t(dim), q(dim);
    for (int s = 0; s < n_samples; ++s) {
      for (Index i = 0; i < dim; ++i) z[i] = gauss(rng);
      x = llt.matrixL() * z;
      t = quantize_sign(x);
      q = t - bd.gain * x;
      rt_emp += t * t.transpose();
      rtx_emp += t * x.transpose();
      qx_emp += q * x.transpose();
    }
    rt_emp /= n_samples;
    rtx_emp /= n_samples;
    qx_emp /= n_samples;

    // Per-entry MC std devs: var(t_i t_j) <= 1, var(t_i x_j) <= rx_jj,
    // var(q_i x_j) bounded by (1+|A|_i rx |A|_i) rx_jj; a uniform generous
    // bound per matrix keeps the check simple.
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_samples));
    double worst_sigma = 0.0;
    auto record = [&](const Mat& emp, const Mat& pred, double entry_std) {
      for (Index j = 0; j < dim; ++j)
        for (Index i = 0; i < dim; ++i) {
          if (i == j && &emp == &rt_emp) continue;  // diagonal of R_t is exactly 1
          const double sigmas = std::abs(emp(i, j) - pred(i, j)) / (entry_std * inv_sqrt_n);
          worst_sigma = std::max(worst_sigma, sigmas);
        }
    };
    record(rt_emp, rt_pred, 1.0);
    const double x_std = std::sqrt(rx.diagonal().maxCoeff());
    record(rtx_emp, rtx_pred, x_std);
    const double q_std = std::sqrt((Mat::Identity(dim, dim) + bd.gain * rx * bd.gain.transpose())
                                       .diagonal()
                                       .maxCoeff());
    record(qx_emp, Mat::Zero(dim, dim), q_std * x_std);

    CheckResult c;
    c.name = "quantizer_stats_trial_" + std::to_string(trial);
    c.measured = worst_sigma;
    c.expected = 0.0;
    c.tolerance = 3.0;
    c.pass = worst_sigma < 3.0;
    std::ostringstream os;
    os << "worst entry deviation " << worst_sigma << " sigma (limit 3)";
    c.detail = os.str();
    out.push_back(c);
  }
  return out;
}

// Closed-form MSE gradient vs central finite differences of the exact
// approximate-MSE expression.
inline std::vector<CheckResult> check_mse_gradient(int n_instances = 20, std::uint64_t seed = 777) {
  std::vector<CheckResult> out;
  for (int trial = 0; trial < n_instances; ++trial) {
    auto rng = make_rng(seed, 500 + trial);
    std::uniform_int_distribution<int> pick_nt(2, 8);
    std::uniform_int_distribution<int> pick_k(1, 2);
    std::uniform_int_distribution<int> pick_r(1, 2);
    const int nt = pick_nt(rng);
    const int k = std::min(pick_k(rng), nt);
    const int r = pick_r(rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat ht(2 * k, 2 * nt);
    for (Index j = 0; j < ht.cols(); ++j)
      for (Index i = 0; i < ht.rows(); ++i) ht(i, j) = gauss(rng);
    RateScenario scen = RateScenario::make(ht, 0.7);
    scen.tx_energy = 3.0;
    const Superposition sp = make_superposition(k, r);
    const Mat rs = Mat::Identity(sp.pi.cols(), sp.pi.cols());
    PrecoderProblem pb(scen, sp.pi, rs);

    Mat p(2 * nt, sp.pi.cols());
    for (Index j = 0; j < p.cols(); ++j)
      for (Index i = 0; i < p.rows(); ++i) p(i, j) = gauss(rng);
    p = project_power(p, rs, scen.tx_energy);
    const double beta = 0.8;

    const Mat grad = mse_gradient(pb, p, beta);
    Mat fd(p.rows(), p.cols());
    const double h = 1e-6;
    for (Index j = 0; j < p.cols(); ++j)
      for (Index i = 0; i < p.rows(); ++i) {
        Mat pp = p, pm = p;
        pp(i, j) += h;
        pm(i, j) -= h;
        fd(i, j) = (mse_approx(pb, pp, beta) - mse_approx(pb, pm, beta)) / (2.0 * h);
      }
    const double rel = (grad - fd).norm() / std::max(fd.norm(), 1e-12);

    CheckResult c;
    c.name = "mse_gradient_fd_trial_" + std::to_string(trial);
    c.measured = rel;
    c.expected = 0.0;
    c.tolerance = 1e-5;
    c.pass = rel < 1e-5;
    std::ostringstream os;
    os << "Nt=" << nt << " K=" << k << " R=" << r << " rel err " << rel;
    c.detail = os.str();
    out.push_back(c);
  }
  return out;
}

// Single-antenna single-user rate lower bound against the closed form
// (1/2) log2 det(I + s I) = log2(1 + s), s = (2/pi) / (1 - 2/pi + sigma2/2).
inline std::vector<CheckResult> check_single_user_rate() {
  std::vector<CheckResult> out;
  const std::vector<double> sigma2_grid = {1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 10.0};
  for (double sigma2 : sigma2_grid) {
    Mat ht = Mat::Identity(2, 2);  // h = 1, Nt = K = 1
    RateScenario scen = RateScenario::make(ht, sigma2);
    std::vector<Mat> covs = {Mat::Identity(2, 2)};  // E_Tx = 2 = 2 Nt
    const double measured = sum_rate_lb(scen, covs);
    const double s = kTwoOverPi / (1.0 - kTwoOverPi + sigma2 / 2.0);
    const double expected = std::log2(1.0 + s);
    CheckResult c;
    std::ostringstream nm;
    nm << "single_user_rate_sigma2_" << sigma2;
    c.name = nm.str();
    c.measured = measured;
    c.expected = expected;
    c.tolerance = 1e-9;
    c.pass = std::abs(measured - expected) < 1e-9;
    out.push_back(c);
  }
  // Low-noise limit log2(pi / (pi - 2)).
  CheckResult lim;
  lim.name = "single_user_rate_limit";
  lim.expected = std::log2(std::numbers::pi / (std::numbers::pi - 2.0));
  {
    RateScenario scen = RateScenario::make(Mat::Identity(2, 2), 1e-12);
    std::vector<Mat> covs = {Mat::Identity(2, 2)};
    lim.measured = sum_rate_lb(scen, covs);
  }
  lim.tolerance = 1e-6;
  lim.pass = std::abs(lim.measured - lim.expected) < 1e-6;
  out.push_back(lim);
  return out;
}

// Superimposed per-axis alphabet for R streams must be the odd integers
// up to 2^R - 1, each hit exactly once by the 2^R sign patterns.
inline std::vector<CheckResult> check_superposition_alphabet() {
  std::vector<CheckResult> out;
  for (int r = 1; r <= 3; ++r) {
    const Superposition sp = make_superposition(1, r);
    std::multiset<long> levels;
    const int n = 1 << r;
    for (int mask = 0; mask < n; ++mask) {
      double level = 0;
      for (int i = 0; i < r; ++i) level += ((mask >> i) & 1 ? 1.0 : -1.0) * sp.tau[i];
      levels.insert(std::lround(level));
    }
    bool ok = levels.size() == static_cast<std::size_t>(n);
    for (int lev = -(n - 1); lev <= n - 1; lev += 2) ok = ok && levels.count(lev) == 1;
    CheckResult c;
    c.name = "superposition_alphabet_r" + std::to_string(r);
    c.measured = static_cast<double>(levels.size());
    c.expected = static_cast<double>(n);
    c.tolerance = 0.0;
    c.pass = ok;
    out.push_back(c);
  }
  return out;
}

inline std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> all;
  for (auto&& batch : {check_quantizer_statistics(), check_mse_gradient(), check_single_user_rate(),
                       check_superposition_alphabet()})
    all.insert(all.end(), batch.begin(), batch.end());
  return all;
}

}  // namespace obp
