#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "cvkf/gaussian.hpp"
#include "support/test_support.hpp"

using cvkf::GaussianBelief;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GaussianBelief scalar_belief(double mu, double var) {
  return GaussianBelief(VectorXd::Constant(1, mu),
                        MatrixXd::Constant(1, 1, var));
}

}  // namespace

TEST_CASE("construction symmetrizes and floors") {
  MatrixXd asym(2, 2);
  asym << 1.0, 0.3 + 1e-14, 0.3, 1.0;
  const GaussianBelief q(VectorXd::Zero(2), asym);
  CHECK(q.cov()(0, 1) == q.cov()(1, 0));
  CHECK(!q.floored());

  MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  const GaussianBelief f(VectorXd::Zero(2), indef);
  CHECK(f.floored());
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(f.cov());
  CHECK(es.eigenvalues().minCoeff() >= 0.0);

  CHECK_THROWS_AS(GaussianBelief(VectorXd::Zero(2), MatrixXd::Zero(3, 3)),
                  std::invalid_argument);
  MatrixXd nan_cov = MatrixXd::Identity(1, 1);
  nan_cov(0, 0) = std::nan("");
  CHECK_THROWS_AS(GaussianBelief(VectorXd::Zero(1), nan_cov),
                  std::invalid_argument);
}

TEST_CASE("kl divergence closed form") {
  // unit-variance mean shift: 0.5 (mu_q - mu_r)^2
  CHECK(cvkf::kl_divergence(scalar_belief(0, 1), scalar_belief(1, 1)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // pure variance change 2 -> 1: 0.5 (2 - 1 - ln 2)
  const double expected = 0.5 * (1.0 - std::log(2.0));
  CHECK(cvkf::kl_divergence(scalar_belief(0, 2), scalar_belief(0, 1)) ==
        doctest::Approx(expected).epsilon(1e-12));

  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> v(0.3, 3.0);
    const double mq = u(rng), mr = u(rng), vq = v(rng), vr = v(rng);
    const double closed =
        cvkf::kl_divergence(scalar_belief(mq, vq), scalar_belief(mr, vr));
    const double grid = cvkf::test::grid_kl_scalar(mq, vq, mr, vr);
    CHECK(std::abs(closed - grid) <= 1e-8);
  }
}

TEST_CASE("kl divergence properties") {
  std::mt19937_64 rng(17);
  for (int d : {1, 2, 5}) {
    for (int trial = 0; trial < 10; ++trial) {
      const GaussianBelief q = cvkf::test::random_belief(d, rng);
      const GaussianBelief r = cvkf::test::random_belief(d, rng);
      const double qr = cvkf::kl_divergence(q, r);
      CHECK(qr >= 0.0);
      CHECK(cvkf::kl_divergence(q, q) <= 1e-12);
    }
  }
  // asymmetry in general
  const double a = cvkf::kl_divergence(scalar_belief(0, 2), scalar_belief(0, 1));
  const double b = cvkf::kl_divergence(scalar_belief(0, 1), scalar_belief(0, 2));
  CHECK(std::abs(a - b) > 1e-3);

  CHECK_THROWS_AS(
      cvkf::kl_divergence(scalar_belief(0, 1),
                          cvkf::test::random_belief(2, rng)),
      std::invalid_argument);
  // r singular: floored zero variance is not invertible
  CHECK_THROWS_AS(cvkf::kl_divergence(scalar_belief(0, 1), scalar_belief(0, 0)),
                  std::invalid_argument);
}

TEST_CASE("bures distance closed forms and properties") {
  // pure mean shift with shared covariance
  CHECK(cvkf::bures_wasserstein_distance_sq(scalar_belief(0, 1),
                                            scalar_belief(5, 1)) ==
        doctest::Approx(25.0).epsilon(1e-12));
  // commuting covariances: (sqrt(1) - sqrt(4))^2 = 1
  CHECK(cvkf::bures_wasserstein_distance_sq(scalar_belief(0, 1),
                                            scalar_belief(0, 4)) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // diagonal (commuting) case against the spectral formula
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd lq(3), lr(3), mq(3), mr(3);
    for (int i = 0; i < 3; ++i) {
      lq(i) = u(rng);
      lr(i) = u(rng);
      mq(i) = u(rng) - 1.5;
      mr(i) = u(rng) - 1.5;
    }
    const GaussianBelief q(mq, lq.asDiagonal().toDenseMatrix());
    const GaussianBelief r(mr, lr.asDiagonal().toDenseMatrix());
    double expected = (mq - mr).squaredNorm();
    for (int i = 0; i < 3; ++i) {
      const double diff = std::sqrt(lq(i)) - std::sqrt(lr(i));
      expected += diff * diff;
    }
    CHECK(cvkf::bures_wasserstein_distance_sq(q, r) ==
          doctest::Approx(expected).epsilon(1e-10));
  }

  for (int d : {1, 2, 5}) {
    for (int trial = 0; trial < 10; ++trial) {
      const GaussianBelief q = cvkf::test::random_belief(d, rng);
      const GaussianBelief r = cvkf::test::random_belief(d, rng);
      const GaussianBelief s = cvkf::test::random_belief(d, rng);
      const double qr = cvkf::bures_wasserstein_distance_sq(q, r);
      const double rq = cvkf::bures_wasserstein_distance_sq(r, q);
      CHECK(qr >= 0.0);
      CHECK(std::abs(qr - rq) <= 1e-9 * (1.0 + qr));
      CHECK(cvkf::bures_wasserstein_distance_sq(q, q) <= 1e-10);
      // triangle inequality for the distance itself
      const double dqr = std::sqrt(qr);
      const double dqs = std::sqrt(cvkf::bures_wasserstein_distance_sq(q, s));
      const double dsr = std::sqrt(cvkf::bures_wasserstein_distance_sq(s, r));
      CHECK(dqr <= dqs + dsr + 1e-8);
    }
  }
}

TEST_CASE("entropy") {
  const double unit = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  CHECK(cvkf::gaussian_entropy(scalar_belief(3, 1)) ==
        doctest::Approx(unit).epsilon(1e-12));
  // additive over independent coordinates
  VectorXd diag(3);
  diag << 0.5, 1.5, 2.5;
  const GaussianBelief q(VectorXd::Zero(3), diag.asDiagonal().toDenseMatrix());
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    sum += cvkf::gaussian_entropy(scalar_belief(0, diag(i)));
  }
  CHECK(cvkf::gaussian_entropy(q) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("parameter vector round trip and ordering") {
  VectorXd mu(2);
  mu << 7.0, 8.0;
  MatrixXd cov(2, 2);
  cov << 4.0, 1.0, 1.0, 3.0;
  const GaussianBelief q(mu, cov);
  const VectorXd theta = cvkf::to_param_vector(q);
  REQUIRE(theta.size() == 5);
  CHECK(theta(0) == 7.0);
  CHECK(theta(1) == 8.0);
  CHECK(theta(2) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(theta(3) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(theta(4) == doctest::Approx(3.0).epsilon(1e-14));

  std::mt19937_64 rng(5);
  for (int d : {1, 2, 3, 5}) {
    CHECK(cvkf::param_dim(d) == d + d * (d + 1) / 2);
    for (int trial = 0; trial < 5; ++trial) {
      const GaussianBelief b = cvkf::test::random_belief(d, rng);
      const GaussianBelief back =
          cvkf::from_param_vector(cvkf::to_param_vector(b), d);
      CHECK((back.mean() - b.mean()).cwiseAbs().maxCoeff() <= 1e-13);
      CHECK((back.cov() - b.cov()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  CHECK_THROWS_AS(cvkf::from_param_vector(VectorXd::Zero(4), 2),
                  std::invalid_argument);
}

TEST_CASE("fisher matrix closed forms") {
  // scalar: diag(1/var, 1/(2 var^2))
  const MatrixXd f1 = cvkf::fisher_matrix(scalar_belief(0.3, 1.0));
  CHECK(f1(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f1(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(f1(0, 1)) <= 1e-14);
  const MatrixXd f4 = cvkf::fisher_matrix(scalar_belief(-1.0, 4.0));
  CHECK(f4(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(f4(1, 1) == doctest::Approx(1.0 / 32.0).epsilon(1e-12));

  std::mt19937_64 rng(7);
  for (int d : {2, 3}) {
    const GaussianBelief q = cvkf::test::random_belief(d, rng);
    const MatrixXd f = cvkf::fisher_matrix(q);
    const int n = cvkf::param_dim(d);
    REQUIRE(f.rows() == n);
    CHECK((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    // mean-covariance cross block vanishes
    CHECK(f.block(0, d, d, n - d).cwiseAbs().maxCoeff() <= 1e-13);
    // mean block is the precision
    const MatrixXd lambda = q.cov().inverse();
    CHECK((f.topLeftCorner(d, d) - lambda).cwiseAbs().maxCoeff() <= 1e-10);
    // positive definite
    Eigen::LLT<MatrixXd> llt(f);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("fisher matrix against sampled score gram") {
  std::mt19937_64 rng(41);
  const GaussianBelief q = cvkf::test::random_belief(2, rng);
  const MatrixXd exact = cvkf::fisher_matrix(q);
  const MatrixXd sampled = cvkf::test::mc_fisher(q, 200000, rng);
  const double rel =
      (sampled - exact).norm() / exact.norm();
  CHECK(rel <= 0.02);
}

TEST_CASE("kl quadratic residual is third order") {
  const GaussianBelief q = scalar_belief(0.0, 1.0);

  // pure mean shift: KL is exactly quadratic, residual vanishes
  VectorXd delta_mean = VectorXd::Zero(2);
  delta_mean(0) = 0.01;
  CHECK(std::abs(cvkf::kl_quadratic_residual(q, delta_mean)) <= 1e-14);

  // pure variance shift h: residual = 0.5 (h - log(1+h)) - h^2 / 4
  const double h = 0.01;
  VectorXd delta_var = VectorXd::Zero(2);
  delta_var(1) = h;
  const double expected = 0.5 * (h - std::log1p(h)) - 0.25 * h * h;
  const double got = cvkf::kl_quadratic_residual(q, delta_var);
  CHECK(got == doctest::Approx(expected).epsilon(1e-9));
  CHECK(got < 0.0);
  CHECK(std::abs(got) == doctest::Approx(h * h * h / 6.0).epsilon(0.02));

  // scaling check: halving the perturbation divides the residual by ~8
  std::mt19937_64 rng(3);
  const GaussianBelief q2 = cvkf::test::random_belief(2, rng);
  VectorXd delta(cvkf::param_dim(2));
  delta << 0.01, -0.02, 0.015, 0.005, -0.01;
  const double r1 = cvkf::kl_quadratic_residual(q2, delta);
  const double r2 = cvkf::kl_quadratic_residual(q2, (0.5 * delta).eval());
  REQUIRE(std::abs(r1) > 1e-12);
  const double ratio = std::abs(r1) / std::abs(r2);
  CHECK(ratio > 5.0);
  CHECK(ratio < 12.0);

  // perturbation that breaks positive definiteness
  VectorXd bad = VectorXd::Zero(2);
  bad(1) = -2.0;
  CHECK_THROWS_AS(cvkf::kl_quadratic_residual(q, bad), std::invalid_argument);
}
