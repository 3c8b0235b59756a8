#ifndef BRA_SIMULATE_HPP
#define BRA_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/model.hpp"

namespace bra {

// Draws a dataset from the generative model: z ~ N(0, Phi), u ~ N(0, Omega)
// for AZ variants, Gaussian continuous items, Bernoulli-logit binary items.
// counts[r] subjects for group r; deterministic in the seed.
Dataset simulate_dataset(const ModelSpec& spec, const Theta& theta, const OutcomeSchema& schema,
                         const std::vector<int>& counts, std::uint64_t seed);

}  // namespace bra

#endif
