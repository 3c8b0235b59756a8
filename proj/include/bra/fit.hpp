#ifndef BRA_FIT_HPP
#define BRA_FIT_HPP

#include <cstdint>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/model.hpp"

namespace bra {

struct FitConfig {
  int warmup = 600;
  int samples = 1200;
  int n_leapfrog = 16;
  double target_accept = 0.8;
  std::uint64_t seed = 0;
  int init_retries = 100;
};

struct FitResult {
  std::vector<Theta> draws;  // constrained scale, sign post-processed
  double accept_rate = 0.0;
  long long divergences = 0;
};

// Posterior draws for one model on one dataset: HMC with warmup adaptation,
// initialised from prior draws (latent coordinates start at zero).
FitResult fit_model(const Dataset& d, const ModelSpec& spec, const PriorConfig& prior_cfg,
                    const FitConfig& cfg);

}  // namespace bra

#endif
