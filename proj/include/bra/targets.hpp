#ifndef BRA_TARGETS_HPP
#define BRA_TARGETS_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "bra/dataset.hpp"
#include "bra/likelihood.hpp"
#include "bra/model.hpp"
#include "bra/param_map.hpp"
#include "bra/prior.hpp"

namespace bra {

// Log density with gradient on an unconstrained space.
struct Target {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> logp;
  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const { return logp(x, grad); }
};

// How per-subject latent variables enter the posterior state vector.
//   None        - latent variables integrated out analytically
//   SequentialZ - one scalar per subject: the binary factor (single-factor form)
//   Augmented   - full factor vector, plus binary residual effects for AZ
enum class LatentKind { None, SequentialZ, Augmented };

LatentKind latent_kind_for(const ModelSpec& spec);

struct PosteriorTarget {
  Target target;
  LatentKind kind = LatentKind::None;
  int theta_dim = 0;
  int n_subjects = 0;
  int z_dim = 0;  // per subject
  int u_dim = 0;  // per subject

  int latent_offset(int i) const { return theta_dim + i * (z_dim + u_dim); }
};

// Posterior over (theta[, latent history]) given the first n_prefix rows of d
// (n_prefix < 0 means all rows). Thread-safe to evaluate concurrently.
PosteriorTarget make_posterior(const Dataset& d, int n_prefix, const ModelSpec& spec,
                               std::shared_ptr<const ParamMap> map,
                               std::shared_ptr<const PriorStack> prior);

// log f(y | theta) for one subject when the model admits a closed-form
// marginal likelihood (benchmarks, or factor models with no binary items).
double loglik_point_marginal(const Theta& theta, const ModelSpec& spec, const Eigen::VectorXd& y,
                             int group);

}  // namespace bra

#endif
