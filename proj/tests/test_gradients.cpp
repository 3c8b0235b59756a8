#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "bra/likelihood.hpp"
#include "bra/targets.hpp"
#include "support/test_util.hpp"

using namespace bra;

namespace {

// analytic gradient of the full unconstrained posterior (prior + Jacobian +
// likelihood) against central finite differences
void check_variant(Variant v, bool pooled) {
  auto spec = ModelSpec::make(v, pooled, 2, 3, 2);
  auto schema = test::make_schema(2, 3, 2);
  auto d = test::small_dataset(spec, schema, 4, 1000 + static_cast<int>(v));

  PriorConfig cfg;
  auto map = std::make_shared<ParamMap>(spec);
  auto prior = std::make_shared<PriorStack>(spec, cfg, pooled_within_covariance(d));
  auto post = make_posterior(d, -1, spec, map, prior);

  for (int rep = 0; rep < 20; ++rep) {
    RngStream rng(rep, {0x9Au, static_cast<std::uint64_t>(v), pooled ? 1u : 0u});
    Eigen::VectorXd x(post.target.dim);
    for (int i = 0; i < x.size(); ++i) x[i] = 0.4 * rng.normal();
    Eigen::VectorXd analytic(post.target.dim);
    double val = post.target(x, &analytic);
    REQUIRE(std::isfinite(val));
    Eigen::VectorXd fd = test::fd_gradient(post.target, x, 1e-5);
    CHECK(test::max_rel_err(analytic, fd) < 1e-4);
  }
}

}  // namespace

TEST_CASE("gradients match finite differences: SAT") { check_variant(Variant::SAT, true); check_variant(Variant::SAT, false); }
TEST_CASE("gradients match finite differences: IND") { check_variant(Variant::IND, true); check_variant(Variant::IND, false); }
TEST_CASE("gradients match finite differences: EZ1") { check_variant(Variant::EZ1, true); check_variant(Variant::EZ1, false); }
TEST_CASE("gradients match finite differences: EZ2") { check_variant(Variant::EZ2, true); check_variant(Variant::EZ2, false); }
TEST_CASE("gradients match finite differences: AZ1") { check_variant(Variant::AZ1, true); check_variant(Variant::AZ1, false); }
TEST_CASE("gradients match finite differences: AZ2") { check_variant(Variant::AZ2, true); check_variant(Variant::AZ2, false); }

TEST_CASE("continuous-only factor model marginalises fully (no latent block)") {
  auto spec = ModelSpec::make(Variant::EZ2, true, 2, 0, 2);
  auto schema = test::make_schema(2, 0, 2);
  auto d = test::small_dataset(spec, schema, 6, 77);
  auto map = std::make_shared<ParamMap>(spec);
  auto prior = std::make_shared<PriorStack>(spec, PriorConfig{}, pooled_within_covariance(d));
  auto post = make_posterior(d, -1, spec, map, prior);
  CHECK(post.kind == LatentKind::None);
  CHECK(post.target.dim == map->dim());
  RngStream rng(1, {2});
  Eigen::VectorXd x(post.target.dim);
  for (int i = 0; i < x.size(); ++i) x[i] = 0.3 * rng.normal();
  Eigen::VectorXd analytic(post.target.dim);
  post.target(x, &analytic);
  CHECK(test::max_rel_err(analytic, test::fd_gradient(post.target, x)) < 1e-4);
}

TEST_CASE("EZ1 sequential representation: one scalar latent per subject") {
  auto spec = ModelSpec::make(Variant::EZ1, true, 2, 3, 2);
  auto schema = test::make_schema(2, 3, 2);
  auto d = test::small_dataset(spec, schema, 4, 55);
  auto map = std::make_shared<ParamMap>(spec);
  auto prior = std::make_shared<PriorStack>(spec, PriorConfig{}, pooled_within_covariance(d));
  auto post = make_posterior(d, -1, spec, map, prior);
  CHECK(post.kind == LatentKind::SequentialZ);
  CHECK(post.z_dim == 1);
  CHECK(post.u_dim == 0);
  CHECK(post.target.dim == map->dim() + d.n());
}

TEST_CASE("EZ2 with zero factor correlation equals EZ1 at matching parameters") {
  auto ez1 = ModelSpec::make(Variant::EZ1, true, 2, 3, 1);
  auto ez2 = ModelSpec::make(Variant::EZ2, true, 2, 3, 1);
  auto schema = test::make_schema(2, 3, 1);
  auto d = test::small_dataset(ez1, schema, 10, 9);
  PriorConfig cfg;
  cfg.loading_sd_continuous = 1.0;
  PriorStack prior(ez1, cfg, Eigen::MatrixXd::Identity(2, 2));
  RngStream rng(2, {6});
  Theta th1 = prior.sample(rng);
  Theta th2 = th1;  // EZ2 theta with phi = I
  CHECK(loglik_continuous_marginal(d, th2, ez2) ==
        doctest::Approx(loglik_continuous_marginal(d, th1, ez1)).epsilon(1e-12));
}

TEST_CASE("prefix posterior matches manual prefix dataset") {
  auto spec = ModelSpec::make(Variant::SAT, true, 2, 2, 2);
  auto schema = test::make_schema(2, 2, 2);
  auto d = test::small_dataset(spec, schema, 6, 21);
  auto map = std::make_shared<ParamMap>(spec);
  auto prior = std::make_shared<PriorStack>(spec, PriorConfig{}, pooled_within_covariance(d));

  auto post5 = make_posterior(d, 5, spec, map, prior);
  std::vector<int> idx = {0, 1, 2, 3, 4};
  auto d5 = d.subset(idx);
  auto post_manual = make_posterior(d5, -1, spec, map, prior);
  RngStream rng(3, {8});
  Eigen::VectorXd x(post5.target.dim);
  for (int i = 0; i < x.size(); ++i) x[i] = 0.3 * rng.normal();
  CHECK(post5.target(x, nullptr) == doctest::Approx(post_manual.target(x, nullptr)).epsilon(1e-12));
}
