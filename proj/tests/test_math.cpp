#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bra/math.hpp"
#include "bra/rng.hpp"

using namespace bra;

TEST_CASE("logistic helpers are stable") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
  CHECK(log1m_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(800.0) == doctest::Approx(0.0));
  CHECK(log1pexp(1000.0) == doctest::Approx(1000.0));
}

TEST_CASE("logsumexp handles large magnitudes") {
  VectorXd v(3);
  v << 700.0, 699.0, -700.0;
  double expected = 700.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-1400.0));
  CHECK(logsumexp(v) == doctest::Approx(expected));
}

TEST_CASE("normal log density") {
  CHECK(norm_logpdf(0.0, 0.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)));
  CHECK(norm_logpdf(0.0, 0.0, 10.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI) - std::log(10.0)));
}

TEST_CASE("weighted quantile and mean against a sorted oracle") {
  std::vector<double> v = {5.0, 1.0, 3.0};
  std::vector<double> w = {1.0, 1.0, 2.0};
  CHECK(weighted_quantile(v, w, 0.25) == doctest::Approx(1.0));
  CHECK(weighted_quantile(v, w, 0.5) == doctest::Approx(3.0));
  CHECK(weighted_quantile(v, w, 0.9) == doctest::Approx(5.0));
  CHECK(weighted_mean(v, w) == doctest::Approx((5.0 + 1.0 + 6.0) / 4.0));
}

TEST_CASE("Gauss-Hermite integrates normal moments") {
  GaussHermite gh(20);
  CHECK(gh.weights.sum() == doctest::Approx(1.0));
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) {
    m2 += gh.weights[i] * gh.nodes[i] * gh.nodes[i];
    m4 += gh.weights[i] * std::pow(gh.nodes[i], 4);
  }
  CHECK(m2 == doctest::Approx(1.0));
  CHECK(m4 == doctest::Approx(3.0));
}

TEST_CASE("rng streams are addressable and independent of draw order") {
  RngStream a(42, {1, 2});
  RngStream b(42, {1, 2});
  CHECK(a.normal() == b.normal());
  RngStream c(42, {2, 1});
  RngStream d(42, {1, 2});
  CHECK(c.normal() != d.normal());
}
