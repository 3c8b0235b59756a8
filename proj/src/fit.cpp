#include "bra/fit.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "bra/hmc.hpp"
#include "bra/likelihood.hpp"
#include "bra/prior.hpp"
#include "bra/targets.hpp"

namespace bra {

FitResult fit_model(const Dataset& d, const ModelSpec& spec, const PriorConfig& prior_cfg,
                    const FitConfig& cfg) {
  // EZ1 on mixed data runs in its single-factor form so batch and sequential
  // inference share one posterior representation
  ModelSpec run_spec = spec;
  if (spec.variant == Variant::EZ1 && spec.p_b > 0 && !spec.sequential_form)
    run_spec = reparameterize_single_factor(spec);

  auto map = std::make_shared<const ParamMap>(run_spec);
  Eigen::MatrixXd s_y =
      (run_spec.p_c > 0) ? pooled_within_covariance(d) : Eigen::MatrixXd(0, 0);
  auto prior = std::make_shared<const PriorStack>(run_spec, prior_cfg, s_y);
  auto post = make_posterior(d, -1, run_spec, map, prior);

  Eigen::VectorXd init = Eigen::VectorXd::Zero(post.target.dim);
  bool ok = false;
  for (int attempt = 0; attempt < cfg.init_retries; ++attempt) {
    RngStream rng(cfg.seed, {0xF17u, static_cast<std::uint64_t>(attempt)});
    Theta th = prior->sample(rng);
    init.head(map->dim()) = map->unconstrain(th);
    if (std::isfinite(post.target(init, nullptr))) {
      ok = true;
      break;
    }
  }
  if (!ok) throw std::runtime_error("fit_model: target not finite after init retries");

  RngStream rng(cfg.seed, {0xC4A17ULL});
  KernelConfig kcfg;
  kcfg.n_leapfrog = cfg.n_leapfrog;
  kcfg.target_accept = cfg.target_accept;
  auto res = run_chain(post.target, init, kcfg, cfg.warmup, cfg.samples, rng);

  FitResult out;
  out.accept_rate = res.accept_rate;
  out.divergences = res.n_divergent;
  out.draws.reserve(res.draws.size());
  for (const auto& x : res.draws) {
    Theta th = map->constrain(x.head(map->dim()));
    sign_postprocess(th, run_spec);
    out.draws.push_back(std::move(th));
  }
  return out;
}

}  // namespace bra
