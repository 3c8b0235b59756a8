#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bra/hmc.hpp"
#include "bra/math.hpp"
#include "support/conjugate.hpp"
#include "support/test_util.hpp"

using namespace bra;

namespace {

Target std_normal_target(int d) {
  Target t;
  t.dim = d;
  t.logp = [](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = -x;
    return -0.5 * x.squaredNorm();
  };
  return t;
}

Target gaussian2d_target(double rho) {
  Target t;
  t.dim = 2;
  Eigen::Matrix2d prec;
  prec << 1.0, -rho, -rho, 1.0;
  prec /= (1.0 - rho * rho);
  t.logp = [prec](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    Eigen::VectorXd px = prec * x;
    if (grad) *grad = -px;
    return -0.5 * x.dot(px);
  };
  return t;
}

}  // namespace

TEST_CASE("leapfrog is time-reversible to 1e-10") {
  auto t = gaussian2d_target(0.7);
  RngStream rng(3, {1});
  Eigen::VectorXd x(2), p(2), grad(2);
  x << 0.3, -1.2;
  p << 0.8, 0.1;
  double logp = t(x, &grad);
  Eigen::VectorXd x0 = x, p0 = p;
  Eigen::VectorXd inv_mass;
  REQUIRE(leapfrog(x, p, logp, grad, t, 0.05, 40, inv_mass));
  p = -p;
  REQUIRE(leapfrog(x, p, logp, grad, t, 0.05, 40, inv_mass));
  p = -p;
  CHECK((x - x0).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((p - p0).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("standard normal target: moments over 1e4 steps") {
  auto t = std_normal_target(1);
  KernelConfig cfg;
  cfg.step_size = 0.9;
  cfg.n_leapfrog = 8;
  RngStream rng(42, {2});
  ChainState s = make_chain_state(t, Eigen::VectorXd::Zero(1));
  double sum = 0.0, sumsq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    hmc_step(s, t, cfg, rng);
    sum += s.x[0];
    sumsq += s.x[0] * s.x[0];
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("step size -> 0 leaves the state in place with acceptance 1") {
  auto t = std_normal_target(3);
  KernelConfig cfg;
  cfg.step_size = 1e-8;
  cfg.n_leapfrog = 3;
  RngStream rng(5, {3});
  Eigen::VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;
  ChainState s = make_chain_state(t, x0);
  for (int i = 0; i < 50; ++i) hmc_step(s, t, cfg, rng);
  CHECK(s.n_accept == 50);
  CHECK((s.x - x0).lpNorm<Eigen::Infinity>() < 1e-5);
  CHECK(s.last_accept_prob == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fixed seed reproduces the trajectory") {
  auto t = gaussian2d_target(0.4);
  KernelConfig cfg;
  cfg.step_size = 0.4;
  cfg.n_leapfrog = 6;
  RngStream r1(9, {4}), r2(9, {4});
  ChainState a = make_chain_state(t, Eigen::VectorXd::Zero(2));
  ChainState b = make_chain_state(t, Eigen::VectorXd::Zero(2));
  for (int i = 0; i < 200; ++i) {
    hmc_step(a, t, cfg, r1);
    hmc_step(b, t, cfg, r2);
  }
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.n_accept == b.n_accept);
}

TEST_CASE("run_chain: 2d correlated Gaussian recovers the correlation") {
  auto t = gaussian2d_target(0.6);
  KernelConfig cfg;
  cfg.n_leapfrog = 10;
  RngStream rng(11, {5});
  auto res = run_chain(t, Eigen::VectorXd::Zero(2), cfg, 500, 50000, rng);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& d : res.draws) {
    sx += d[0];
    sy += d[1];
    sxx += d[0] * d[0];
    syy += d[1] * d[1];
    sxy += d[0] * d[1];
  }
  const double n = res.draws.size();
  double corr = (sxy / n - sx / n * sy / n) /
                std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
  CHECK(std::abs(corr - 0.6) < 0.05);
  // acceptance lands near the adaptation target
  CHECK(res.accept_rate > cfg.target_accept - 0.15);
  CHECK(res.accept_rate < std::min(1.0, cfg.target_accept + 0.15));
}

TEST_CASE("run_chain on the conjugate model matches the analytic posterior") {
  auto model = test::ConjugateNormal::with_data(40, 77);
  auto t = model.posterior_target(40);
  KernelConfig cfg;
  cfg.n_leapfrog = 8;
  RngStream rng(13, {6});
  auto res = run_chain(t, Eigen::VectorXd::Zero(1), cfg, 500, 20000, rng);
  double mean_true, sd_true;
  model.posterior(40, mean_true, sd_true);
  double sum = 0, sumsq = 0;
  for (const auto& d : res.draws) {
    sum += d[0];
    sumsq += d[0] * d[0];
  }
  const double n = res.draws.size();
  double mean = sum / n, sd = std::sqrt(sumsq / n - mean * mean);
  // generous effective-sample allowance for autocorrelation
  CHECK(std::abs(mean - mean_true) < 6.0 * sd_true / std::sqrt(n / 10.0));
  CHECK(sd == doctest::Approx(sd_true).epsilon(0.06));
}

TEST_CASE("zero post-warmup samples returns an empty draw set") {
  auto t = std_normal_target(2);
  KernelConfig cfg;
  RngStream rng(1, {7});
  auto res = run_chain(t, Eigen::VectorXd::Zero(2), cfg, 100, 0, rng);
  CHECK(res.draws.empty());
}

TEST_CASE("run_chain errors when the target is not finite at the start") {
  Target t;
  t.dim = 1;
  t.logp = [](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) (*grad)[0] = 0.0;
    return x[0] > 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  RngStream rng(2, {8});
  Eigen::VectorXd bad(1);
  bad << -1.0;
  CHECK_THROWS(run_chain(t, bad, KernelConfig{}, 10, 10, rng));
}

TEST_CASE("kernel leaves a 1d target invariant (binned chi-square)") {
  auto t = std_normal_target(1);
  KernelConfig cfg;
  cfg.step_size = 0.8;
  cfg.n_leapfrog = 6;
  RngStream rng(21, {9});
  ChainState s = make_chain_state(t, Eigen::VectorXd::Zero(1));
  const int n = 50000, bins = 20;
  std::vector<int> counts(bins, 0);
  // equiprobable normal bins via inverse-CDF boundaries (Acklam-style probit
  // not needed: use crude bisection on the erf)
  auto norm_cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  std::vector<double> edges(bins - 1);
  for (int b = 1; b < bins; ++b) {
    double lo = -10, hi = 10, target_p = double(b) / bins;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (norm_cdf(mid) < target_p ? lo : hi) = mid;
    }
    edges[b - 1] = 0.5 * (lo + hi);
  }
  // thin by 10 so the binned counts are effectively independent
  int kept = 0;
  for (int i = 0; i < n * 10; ++i) {
    hmc_step(s, t, cfg, rng);
    if (i % 10 != 9) continue;
    int b = static_cast<int>(std::lower_bound(edges.begin(), edges.end(), s.x[0]) - edges.begin());
    ++counts[b];
    ++kept;
  }
  double chi2 = 0.0;
  double expect = double(kept) / bins;
  for (int b = 0; b < bins; ++b) chi2 += (counts[b] - expect) * (counts[b] - expect) / expect;
  CHECK(chi2 < 43.82);  // chi2(0.999, 19), i.e. p > 0.001
}

TEST_CASE("jitter with zero steps returns the particle unchanged") {
  auto t = gaussian2d_target(0.2);
  KernelConfig cfg;
  RngStream rng(31, {10});
  Eigen::VectorXd x0(2);
  x0 << 0.7, -0.7;
  auto s = jitter(t, x0, cfg, 0, rng);
  CHECK((s.x - x0).lpNorm<Eigen::Infinity>() == 0.0);
}
