#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obp/rate.hpp"
#include "obp/rng.hpp"
#include "obp/sim.hpp"

#include <numbers>

using namespace obp;

namespace {

Mat random_channel(int nt, int k, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return draw_channel(nt, k, rng);
}

// Downhill simplex on a generic objective; independent oracle for the
// gradient-based optimizer at tiny scale.
double nelder_mead_max(const std::function<double(const Vec&)>& f, Vec x0, int iters) {
  const Index n = x0.size();
  std::vector<Vec> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (Index i = 0; i < n; ++i) pts[i + 1][i] += 0.5;
  for (Index i = 0; i <= n; ++i) vals[i] = -f(pts[i]);

  for (int it = 0; it < iters; ++it) {
    std::vector<int> order(n + 1);
    for (Index i = 0; i <= n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    std::vector<Vec> p2(n + 1);
    std::vector<double> v2(n + 1);
    for (Index i = 0; i <= n; ++i) {
      p2[i] = pts[order[i]];
      v2[i] = vals[order[i]];
    }
    pts = p2;
    vals = v2;

    Vec centroid = Vec::Zero(n);
    for (Index i = 0; i < n; ++i) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Vec refl = centroid + (centroid - pts[n]);
    const double frefl = -f(refl);
    if (frefl < vals[0]) {
      const Vec exp_pt = centroid + 2.0 * (centroid - pts[n]);
      const double fexp = -f(exp_pt);
      if (fexp < frefl) {
        pts[n] = exp_pt;
        vals[n] = fexp;
      } else {
        pts[n] = refl;
        vals[n] = frefl;
      }
    } else if (frefl < vals[n - 1]) {
      pts[n] = refl;
      vals[n] = frefl;
    } else {
      const Vec contr = centroid + 0.5 * (pts[n] - centroid);
      const double fcontr = -f(contr);
      if (fcontr < vals[n]) {
        pts[n] = contr;
        vals[n] = fcontr;
      } else {
        for (Index i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          vals[i] = -f(pts[i]);
        }
      }
    }
  }
  double best = vals[0];
  for (Index i = 0; i <= n; ++i) best = std::min(best, vals[i]);
  return -best;
}

}  // namespace

TEST_CASE("effective channel closed forms") {
  const Mat ht = random_channel(4, 2, 21);
  RateScenario s = RateScenario::make(ht, 1.0);
  const double root = std::sqrt(kTwoOverPi);

  const Mat heff = effective_channel(s, Mat(Mat::Identity(8, 8)));
  CHECK(heff.isApprox(Mat(root * ht)));

  // Recomposition oracle on a random covariance.
  auto rng = make_rng(22);
  Mat b(8, 8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index j = 0; j < 8; ++j)
    for (Index i = 0; i < 8; ++i) b(i, j) = gauss(rng);
  Mat rx = b * b.transpose();
  rx.diagonal().array() += 0.5;
  const Mat expect = ht * (r_tx(rx) * rx.inverse()).transpose();
  CHECK((effective_channel(s, rx) - expect).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sqinr single-user closed form") {
  RateScenario s = RateScenario::make(Mat(Mat::Identity(2, 2)), 2.0);
  const Mat q = sqinr(s, {Mat(Mat::Identity(2, 2))}, 0);
  const double expect = 1.0 / (std::numbers::pi - 1.0);
  CHECK((q - expect * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  // sigma^2 -> infinity: SQINR -> 0.
  RateScenario noisy = RateScenario::make(Mat(Mat::Identity(2, 2)), 1e12);
  CHECK(sqinr(noisy, {Mat(Mat::Identity(2, 2))}, 0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("orthogonal channels remove MUI") {
  // Users on disjoint antenna supports with block-diagonal covariances:
  // per-user rates equal the isolated single-user rates.
  Mat ht = Mat::Zero(4, 8);  // K=2, Nt=4; user 0 on antenna 0, user 1 on antenna 1
  ht(0, 0) = 1.0;
  ht(2, 4) = 1.0;  // user 0 real/imag rows
  ht(1, 1) = 1.0;
  ht(3, 5) = 1.0;  // user 1
  RateScenario s = RateScenario::make(ht, 0.8);

  std::vector<Mat> covs(2, Mat(Mat::Zero(8, 8)));
  covs[0](0, 0) = covs[0](4, 4) = 2.0;
  covs[1](1, 1) = covs[1](5, 5) = 2.0;
  // Fill unused antennas so the total covariance is invertible.
  for (Index i : {Index(2), Index(3), Index(6), Index(7)}) covs[0](i, i) = 1.0;

  Mat h1 = Mat::Zero(2, 2);
  h1(0, 0) = h1(1, 1) = 1.0;
  RateScenario iso = RateScenario::make(h1, 0.8);
  Mat iso_cov = 2.0 * Mat::Identity(2, 2);

  // The diagonal total keeps antennas independent under the arcsine law, so
  // the 2x2 sub-problem is exact.
  const double r0 = user_rate_lb(s, covs, 0);
  const double riso = user_rate_lb(iso, {iso_cov}, 0);
  CHECK(r0 == doctest::Approx(riso).epsilon(1e-10));
  CHECK(sum_rate_lb(s, covs) ==
        doctest::Approx(user_rate_lb(s, covs, 0) + user_rate_lb(s, covs, 1)).epsilon(1e-12));
}

TEST_CASE("rate identities") {
  // SQINR = s I2 -> log2(1+s); realized by the single-user closed form.
  RateScenario s = RateScenario::make(Mat(Mat::Identity(2, 2)), 2.0);
  const double q = 1.0 / (std::numbers::pi - 1.0);
  CHECK(user_rate_lb(s, {Mat(Mat::Identity(2, 2))}, 0) ==
        doctest::Approx(std::log2(1.0 + q)).epsilon(1e-12));
  CHECK(user_rate_lb(s, {Mat(Mat::Identity(2, 2))}, 0) >= 0.0);
}

TEST_CASE("common scaling invariance") {
  const Mat ht = random_channel(4, 2, 23);
  RateScenario s = RateScenario::make(ht, 0.5);
  auto rng = make_rng(24);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Mat> covs;
  for (int k = 0; k < 2; ++k) {
    Mat b(8, 2);
    for (Index j = 0; j < 2; ++j)
      for (Index i = 0; i < 8; ++i) b(i, j) = gauss(rng);
    Mat c = b * b.transpose();
    c.diagonal().array() += 0.3;
    covs.push_back(c);
  }
  std::vector<Mat> scaled;
  for (const auto& c : covs) scaled.push_back(Mat(7.3 * c));
  for (int k = 0; k < 2; ++k) {
    const Mat q1 = sqinr(s, covs, k);
    const Mat q2 = sqinr(s, scaled, k);
    CHECK((q1 - q2).cwiseAbs().maxCoeff() < 1e-10 * q1.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("two identical decoupled users double the rate") {
  Mat ht = Mat::Zero(4, 8);
  ht(0, 0) = 1.0;
  ht(2, 4) = 1.0;
  ht(1, 1) = 1.0;
  ht(3, 5) = 1.0;
  RateScenario s = RateScenario::make(ht, 0.8);
  // Total covariance is the identity; each user owns one antenna.
  std::vector<Mat> covs(2, Mat(Mat::Zero(8, 8)));
  for (Index i = 0; i < 8; ++i) covs[0](i, i) = 1.0;
  covs[0](1, 1) = covs[0](5, 5) = 0.0;
  covs[1](1, 1) = covs[1](5, 5) = 1.0;
  CHECK(sum_rate_lb(s, covs) == doctest::Approx(2.0 * user_rate_lb(s, covs, 0)).epsilon(1e-10));
}

TEST_CASE("baseline covariances") {
  const Mat ht = random_channel(6, 2, 25);
  RateScenario s = RateScenario::make(ht, 0.5);

  for (BaselineKind kind : {BaselineKind::MF, BaselineKind::ZF, BaselineKind::MMSE}) {
    const auto sol = baseline_covariance(s, kind);
    double tr = 0.0;
    for (const auto& c : sol.per_user_cov) {
      CHECK(is_psd(c, 1e-9));
      tr += c.trace();
    }
    CHECK(tr == doctest::Approx(s.tx_energy).epsilon(1e-10));
    CHECK(sol.sum_rate_lb >= 0.0);
  }

  // MF, K=1: rank 2 (one complex stream).
  RateScenario s1 = RateScenario::make(random_channel(6, 1, 26), 0.5);
  const auto mf = baseline_covariance(s1, BaselineKind::MF);
  Eigen::SelfAdjointEigenSolver<Mat> es(mf.per_user_cov[0]);
  int rank = 0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > 1e-9 * es.eigenvalues().maxCoeff()) ++rank;
  CHECK(rank == 2);

  // ZF property: user-k channel rows annihilate other users' covariances.
  const auto zf = baseline_covariance(s, BaselineKind::ZF);
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      if (k == l) continue;
      const Mat cross = s.user_rows(k) * zf.per_user_cov[l] * s.user_rows(k).transpose();
      CHECK(cross.cwiseAbs().maxCoeff() < 1e-10 * zf.per_user_cov[l].trace());
    }
}

TEST_CASE("optimizer vs Nelder-Mead oracle at tiny scale") {
  const Mat ht = random_channel(2, 1, 27);
  RateScenario s = RateScenario::make(ht, 2.0);

  OptimizerOptions opts;
  opts.seed = 5;
  const auto sol = optimize_covariances(s, {1}, false, opts);

  // Independent parameterization: free entries of the 4x2 lower factor.
  detail::CholParam par;
  par.nt2 = 4;
  par.cols = {2};
  const auto obj = [&](const Vec& x) {
    auto ls = par.unpack(x);
    detail::apply_floors(ls, 1e-6);
    detail::normalize_trace(ls, s.tx_energy);
    return detail::sum_rate_objective(s, detail::covs_from_factors(ls));
  };
  auto rng = make_rng(28);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double oracle = -1.0;
  for (int start = 0; start < 20; ++start) {
    Vec x0(par.total_params());
    for (Index i = 0; i < x0.size(); ++i) x0[i] = gauss(rng);
    oracle = std::max(oracle, nelder_mead_max(obj, x0, 400));
  }
  CHECK(sol.sum_rate_lb == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("optimizer structure guarantees") {
  const Mat ht = random_channel(3, 2, 29);
  RateScenario s = RateScenario::make(ht, 1.0);
  OptimizerOptions opts;
  opts.seed = 6;
  opts.max_iters = 300;

  const auto r1 = optimize_covariances(s, {1, 1}, false, opts);
  const auto r2 = optimize_covariances(s, {2, 2}, false, opts);
  const auto p2 = optimize_covariances(s, {2, 2}, true, opts);

  for (const auto* sol : {&r1, &r2, &p2}) {
    double tr = 0.0;
    for (const auto& c : sol->per_user_cov) {
      CHECK(is_psd(c, 1e-9));
      tr += c.trace();
    }
    CHECK(tr == doctest::Approx(s.tx_energy).epsilon(1e-8));
  }
  for (const auto& c : p2.per_user_cov) CHECK(is_proper(c, 1e-8));

  // Rank nesting: embedding the rank-1 solution as a rank-2 start can only
  // improve, so the rank-2 optimum dominates.
  std::vector<Mat> embed;
  for (const auto& c : r1.per_user_cov) embed.push_back(detail::refactor_lower(c, 4));
  const auto r2_seeded = optimize_covariances(s, {2, 2}, false, opts, embed);
  CHECK(r2_seeded.sum_rate_lb >= r1.sum_rate_lb - 1e-9);
  CHECK(r2.sum_rate_lb >= r1.sum_rate_lb - 1e-6);

  // Feasible-set inclusion: the proper optimum is a feasible unconstrained
  // start, so the unconstrained run seeded from it can only improve.
  std::vector<Mat> proper_start;
  for (const auto& c : p2.per_user_cov) proper_start.push_back(detail::refactor_lower(c, 4));
  const auto r2_from_proper = optimize_covariances(s, {2, 2}, false, opts, proper_start);
  CHECK(p2.sum_rate_lb <= r2_from_proper.sum_rate_lb + 1e-9);

  CHECK_THROWS_AS(optimize_covariances(s, {0, 1}, false, opts), std::invalid_argument);
}
