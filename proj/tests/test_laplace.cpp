#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bra/laplace.hpp"
#include "bra/math.hpp"
#include "support/test_util.hpp"

using namespace bra;

namespace {

// 2001-point grid quadrature of exp(latent_log_target) on [-8, 8]
struct GridPosterior {
  double log_evidence;
  double mean;
};

GridPosterior grid_quadrature(const Eigen::VectorXd& y, const Eigen::VectorXd& alpha,
                              const Eigen::MatrixXd& beta) {
  const int n = 2001;
  const double lo = -8.0, hi = 8.0, dz = (hi - lo) / (n - 1);
  std::vector<double> logf(n);
  Eigen::VectorXd z(1);
  for (int i = 0; i < n; ++i) {
    z[0] = lo + i * dz;
    logf[i] = latent_log_target(z, y, alpha, beta);
  }
  double log_z = logsumexp(logf) + std::log(dz);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += (lo + i * dz) * std::exp(logf[i] - log_z) * dz;
  return {log_z, mean};
}

double golden_section_mode(const Eigen::VectorXd& y, const Eigen::VectorXd& alpha,
                           const Eigen::MatrixXd& beta) {
  double a = -8.0, b = 8.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  Eigen::VectorXd z(1);
  auto f = [&](double x) {
    z[0] = x;
    return latent_log_target(z, y, alpha, beta);
  };
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  return 0.5 * (a + b);
}

double laplace_log_normaliser(const Eigen::VectorXd& y, const Eigen::VectorXd& alpha,
                              const Eigen::MatrixXd& beta, const LaplaceFit& fit) {
  // Gaussian integral of the target expanded at the mode
  const int k = static_cast<int>(fit.mode.size());
  return latent_log_target(fit.mode, y, alpha, beta) + 0.5 * (k * kLog2Pi - fit.log_det_info);
}

}  // namespace

TEST_CASE("latent target: trivial values and composition") {
  Eigen::VectorXd z(1);
  z << 0.7;
  Eigen::VectorXd empty_y(0), empty_a(0);
  Eigen::MatrixXd empty_b(0, 1);
  CHECK(latent_log_target(z, empty_y, empty_a, empty_b) == doctest::Approx(-0.5 * 0.49));

  Eigen::VectorXd y(4), alpha(4);
  y << 1, 0, 1, 0;
  alpha.setZero();
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(4, 1);
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1);
  CHECK(latent_log_target(z0, y, alpha, beta) == doctest::Approx(4.0 * std::log(0.5)));

  // composition: binary conditional + standard normal kernel
  RngStream rng(5, {55});
  Eigen::VectorXd a(3), yy(3);
  Eigen::MatrixXd b(3, 1);
  for (int j = 0; j < 3; ++j) {
    a[j] = rng.normal();
    b(j, 0) = rng.normal();
    yy[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  Eigen::VectorXd zz(1);
  zz << -0.4;
  Eigen::VectorXd eta = a + b * zz;
  double expect = -0.5 * zz.squaredNorm();
  for (int j = 0; j < 3; ++j)
    expect += (yy[j] > 0.5) ? log_sigmoid(eta[j]) : log1m_sigmoid(eta[j]);
  CHECK(latent_log_target(zz, yy, a, b) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score and information") {
  SUBCASE("zero loadings give identity information") {
    Eigen::VectorXd y(2), a(2);
    y << 1, 0;
    a << 0.5, -0.5;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 1);
    Eigen::VectorXd z(1), score(1);
    Eigen::MatrixXd info(1, 1);
    z << 0.3;
    latent_score_and_info(z, y, a, b, score, info);
    CHECK(info(0, 0) == doctest::Approx(1.0));
    CHECK(score[0] == doctest::Approx(-0.3));
  }
  SUBCASE("gradient matches finite differences of the target") {
    RngStream rng(7, {77});
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd y(4), a(4);
      Eigen::MatrixXd b(4, 1);
      for (int j = 0; j < 4; ++j) {
        a[j] = 2.0 * rng.normal();
        b(j, 0) = rng.normal();
        y[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
      Eigen::VectorXd z(1), score(1);
      Eigen::MatrixXd info(1, 1);
      z << rng.normal();
      latent_score_and_info(z, y, a, b, score, info);
      const double h = 1e-6;
      Eigen::VectorXd zp = z, zm = z;
      zp[0] += h;
      zm[0] -= h;
      double fd = (latent_log_target(zp, y, a, b) - latent_log_target(zm, y, a, b)) / (2 * h);
      CHECK(score[0] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  SUBCASE("information is at least the identity (multivariate)") {
    RngStream rng(9, {99});
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd y(5), a(5);
      Eigen::MatrixXd b(5, 2);
      for (int j = 0; j < 5; ++j) {
        a[j] = rng.normal();
        b(j, 0) = rng.normal();
        b(j, 1) = rng.normal();
        y[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
      Eigen::VectorXd z(2), score(2);
      Eigen::MatrixXd info(2, 2);
      z << rng.normal(), rng.normal();
      latent_score_and_info(z, y, a, b, score, info);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
      CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("laplace fit: trivial, oracle, and symmetry cases") {
  SUBCASE("all loadings zero recovers the prior") {
    Eigen::VectorXd y(3), a(3);
    y << 1, 1, 0;
    a << 0.2, -0.1, 0.4;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 1);
    auto fit = laplace_fit(y, a, b);
    CHECK(fit.converged);
    CHECK(fit.mode[0] == doctest::Approx(0.0));
    CHECK(fit.covariance(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("one item, alpha=0, beta=1, y=1: positive mode near the quadrature mean") {
    Eigen::VectorXd y(1), a(1);
    y << 1;
    a << 0;
    Eigen::MatrixXd b(1, 1);
    b << 1;
    auto fit = laplace_fit(y, a, b);
    CHECK(fit.mode[0] > 0.0);
    auto grid = grid_quadrature(y, a, b);
    CHECK(std::abs(grid.mean - fit.mode[0]) < 0.05);
  }
  SUBCASE("negating all responses flips the mode") {
    Eigen::VectorXd y(3), a = Eigen::VectorXd::Zero(3);
    y << 1, 0, 1;
    Eigen::MatrixXd b(3, 1);
    b << 0.7, 1.2, -0.4;
    auto fit = laplace_fit(y, a, b);
    Eigen::VectorXd flipped = Eigen::VectorXd::Ones(3) - y;
    auto fit2 = laplace_fit(flipped, a, b);
    CHECK(fit2.mode[0] == doctest::Approx(-fit.mode[0]).epsilon(1e-6));
  }
  SUBCASE("gradient norm at the fitted mode is below tolerance") {
    RngStream rng(13, {3});
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd y(4), a(4);
      Eigen::MatrixXd b(4, 1);
      for (int j = 0; j < 4; ++j) {
        a[j] = 3.0 * (2.0 * rng.uniform() - 1.0);
        b(j, 0) = 3.0 * (2.0 * rng.uniform() - 1.0);
        y[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
      auto fit = laplace_fit(y, a, b);
      REQUIRE(fit.converged);
      Eigen::VectorXd score(1);
      Eigen::MatrixXd info(1, 1);
      latent_score_and_info(fit.mode, y, a, b, score, info);
      CHECK(score.norm() < 1e-8);
    }
  }
}

TEST_CASE("laplace mode agrees with a derivative-free optimiser to 1e-4") {
  RngStream rng(21, {4});
  for (int rep = 0; rep < 40; ++rep) {
    Eigen::VectorXd y(4), a(4);
    Eigen::MatrixXd b(4, 1);
    for (int j = 0; j < 4; ++j) {
      a[j] = 3.0 * (2.0 * rng.uniform() - 1.0);
      b(j, 0) = 3.0 * (2.0 * rng.uniform() - 1.0);
      y[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    auto fit = laplace_fit(y, a, b);
    double dfo = golden_section_mode(y, a, b);
    CHECK(std::abs(fit.mode[0] - dfo) < 1e-4);
  }
}

TEST_CASE("laplace normaliser within 10% of grid quadrature") {
  RngStream rng(31, {5});
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd y(4), a(4);
    Eigen::MatrixXd b(4, 1);
    for (int j = 0; j < 4; ++j) {
      a[j] = 3.0 * (2.0 * rng.uniform() - 1.0);
      b(j, 0) = 3.0 * (2.0 * rng.uniform() - 1.0);
      y[j] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    auto fit = laplace_fit(y, a, b);
    auto grid = grid_quadrature(y, a, b);
    double log_lap = laplace_log_normaliser(y, a, b, fit);
    CHECK(std::abs(std::exp(log_lap - grid.log_evidence) - 1.0) < 0.10);
  }
}

TEST_CASE("laplace logpdf and sampling") {
  Eigen::VectorXd y(2), a(2);
  y << 1, 0;
  a << 0.4, -1.0;
  Eigen::MatrixXd b(2, 1);
  b << 1.3, 0.8;
  auto fit = laplace_fit(y, a, b);

  SUBCASE("logpdf at the mode is the Gaussian peak") {
    double expect = -0.5 * (1.0 * kLog2Pi + std::log(fit.covariance(0, 0)));
    CHECK(laplace_logpdf(fit.mode, fit) == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("sample mean approaches the mode") {
    const int n = 100000;
    RngStream rng(11, {6});
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += laplace_sample(fit, rng)[0];
    double sd = std::sqrt(fit.covariance(0, 0));
    CHECK(std::abs(sum / n - fit.mode[0]) < 4.0 * sd / std::sqrt(double(n)));
  }
  SUBCASE("fixed seed reproduces the draw") {
    RngStream r1(17, {7}), r2(17, {7});
    CHECK(laplace_sample(fit, r1)[0] == laplace_sample(fit, r2)[0]);
  }
}
