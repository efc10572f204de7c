#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obp/quantize.hpp"
#include "obp/rng.hpp"
#include "obp/validate.hpp"

#include <numbers>

using namespace obp;

TEST_CASE("quantize_sign") {
  Vec x(2);
  x << 0.3, -1.2;
  Vec t = quantize_sign(x);
  CHECK(t[0] == 1.0);
  CHECK(t[1] == -1.0);

  x << -0.0001, 5.0;
  t = quantize_sign(x);
  CHECK(t[0] == -1.0);
  CHECK(t[1] == 1.0);

  Vec zero(1);
  zero << 0.0;
  CHECK(quantize_sign(zero)[0] == 1.0);
}

TEST_CASE("r_t closed forms") {
  CHECK(r_t(Mat(Mat::Identity(4, 4))).isApprox(Mat::Identity(4, 4)));

  Mat r(2, 2);
  r << 1.0, 0.5, 0.5, 1.0;
  const Mat t = r_t(r);
  CHECK(t(0, 0) == 1.0);
  CHECK(t(1, 1) == 1.0);
  CHECK(t(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("r_t scale invariance and range") {
  auto rng = make_rng(11);
  const Mat rx = detail::random_psd(6, rng);
  const Mat a = r_t(rx);
  const Mat b = r_t(Mat(3.7 * rx));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
  CHECK((a.diagonal().array() == 1.0).all());
}

TEST_CASE("r_tx closed forms") {
  const double s = std::sqrt(kTwoOverPi);
  CHECK(r_tx(Mat(Mat::Identity(3, 3))).isApprox(Mat(s * Mat::Identity(3, 3))));
  CHECK(r_tx(Mat(4.0 * Mat::Identity(3, 3))).isApprox(Mat(2.0 * s * Mat::Identity(3, 3))));
}

TEST_CASE("input validation") {
  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(r_t(bad), std::domain_error);
  CHECK_THROWS_AS(r_tx(bad), std::domain_error);

  Mat notcov(2, 2);
  notcov << 1.0, 2.0, 2.0, 1.0;  // correlation 2, not a covariance
  CHECK_THROWS_AS(r_t(notcov), std::domain_error);

  // Singular covariance rejected by bussgang with a condition estimate.
  Mat sing(2, 2);
  sing << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(bussgang(sing), std::domain_error);
}

TEST_CASE("bussgang closed forms") {
  const double s = std::sqrt(kTwoOverPi);
  auto bd = bussgang(Mat(Mat::Identity(4, 4)));
  CHECK(bd.gain.isApprox(Mat(s * Mat::Identity(4, 4))));
  CHECK(bd.error_cov.isApprox(Mat((1.0 - kTwoOverPi) * Mat::Identity(4, 4))));

  bd = bussgang(Mat(4.0 * Mat::Identity(4, 4)));
  CHECK(bd.gain.isApprox(Mat(0.5 * s * Mat::Identity(4, 4))));

  // Diagonal covariance: gain is sqrt(2/pi) D^-1/2 exactly.
  Vec d(3);
  d << 0.5, 2.0, 9.0;
  bd = bussgang(Mat(d.asDiagonal()));
  CHECK(bd.gain.isApprox(Mat(s * d.cwiseSqrt().cwiseInverse().asDiagonal())));
}

TEST_CASE("bussgang error covariance PSD") {
  auto rng = make_rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat rx = detail::random_psd(8, rng);
    const auto bd = bussgang(rx);
    CHECK(is_psd(bd.error_cov, 1e-9));
    CHECK(bd.quantized_cov.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("arcsin_approx") {
  const double half_pi = std::numbers::pi / 2.0;
  CHECK(arcsin_approx(Mat(Mat::Identity(3, 3)))
            .isApprox(Mat(half_pi * Mat::Identity(3, 3))));

  Mat c = Mat::Identity(2, 2);
  c(0, 1) = c(1, 0) = 0.5;
  const Mat a = arcsin_approx(c);
  CHECK(a(0, 1) == doctest::Approx(0.5 + 0.125 / 6.0).epsilon(1e-12));
  CHECK(std::abs(a(0, 1) - std::asin(0.5)) < 3e-3);

  // Zero off-diagonal: approximation is exact.
  CHECK((arcsin_approx(Mat(Mat::Identity(5, 5))) -
         Mat(Mat::Identity(5, 5)).unaryExpr([](double v) { return std::asin(v); }))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("arcsin_approx remainder bound on |rho| <= 0.5") {
  for (double rho = -0.5; rho <= 0.5; rho += 0.01) {
    Mat c = Mat::Identity(2, 2);
    c(0, 1) = c(1, 0) = rho;
    const double approx = arcsin_approx(c)(0, 1);
    CHECK(std::abs(approx - std::asin(rho)) < 3e-3);
    CHECK(std::abs(approx) <= std::abs(std::asin(rho)) + 1e-15);  // truncated odd series
  }
}

TEST_CASE("statistics oracle detects a sign-corrupted arcsine law") {
  // Negative control: the same Monte-Carlo machinery must reject an analytic
  // prediction with flipped off-diagonal signs by a wide margin.
  auto rng = make_rng(101);
  const Index dim = 6;
  const int n = 200000;
  const Mat rx = detail::random_psd(dim, rng);
  const Mat chol = rx.llt().matrixL();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat emp = Mat::Zero(dim, dim);
  Vec z(dim);
  for (int i = 0; i < n; ++i) {
    for (Index j = 0; j < dim; ++j) z[j] = gauss(rng);
    const Vec t = quantize_sign(Vec(chol * z));
    emp += t * t.transpose();
  }
  emp /= static_cast<double>(n);

  const Mat rt = r_t(rx);
  Mat corrupted = -rt;
  corrupted.diagonal() = rt.diagonal();

  const double good = (emp - rt).cwiseAbs().maxCoeff();
  const double bad = (emp - corrupted).cwiseAbs().maxCoeff();
  CHECK(good < 0.02);   // well inside MC noise at n = 2e5
  CHECK(bad > 10.0 * good);
}

TEST_CASE("Monte-Carlo statistics oracle (reduced scale)") {
  // Full-scale version runs in the acceptance suite; 2 trials here.
  const auto checks = check_quantizer_statistics(2, 8, 200000, 99);
  for (const auto& c : checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }
}
