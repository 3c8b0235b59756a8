#ifndef BRA_HMC_HPP
#define BRA_HMC_HPP

#include <Eigen/Dense>
#include <vector>

#include "bra/rng.hpp"
#include "bra/targets.hpp"

namespace bra {

struct KernelConfig {
  double step_size = 0.2;
  int n_leapfrog = 16;              // trajectory length drawn uniformly in
  int min_leapfrog = 1;             //   [min_leapfrog, n_leapfrog]
  Eigen::VectorXd inv_mass;         // diagonal inverse mass; empty = identity
  Eigen::MatrixXd dense_chol;       // lower Cholesky of a dense inverse mass;
                                    // when set it takes precedence over inv_mass
  double target_accept = 0.8;
  double divergence_threshold = 1000.0;  // energy error above which the move is rejected
};

struct ChainState {
  Eigen::VectorXd x;
  double logp = 0.0;
  Eigen::VectorXd grad;
  long long n_steps = 0;
  long long n_accept = 0;
  long long n_divergent = 0;
  bool last_accept = false;
  double last_accept_prob = 0.0;
};

ChainState make_chain_state(const Target& target, const Eigen::VectorXd& x0);

// Leapfrog integration of (x, p) for n_steps of size eps; logp/grad kept in
// sync with x. Returns false if the trajectory left the finite domain.
bool leapfrog(Eigen::VectorXd& x, Eigen::VectorXd& p, double& logp, Eigen::VectorXd& grad,
              const Target& target, double eps, int n_steps, const Eigen::VectorXd& inv_mass);

// One leapfrog-proposal Metropolis transition; the state is updated in place.
void hmc_step(ChainState& state, const Target& target, const KernelConfig& cfg, RngStream& rng);

struct ChainResult {
  std::vector<Eigen::VectorXd> draws;  // post-warmup, unconstrained scale
  double accept_rate = 0.0;            // post-warmup average acceptance probability
  long long n_divergent = 0;
  KernelConfig adapted;                // step size and mass after warmup
};

// Warmup with dual-averaging step-size adaptation toward target_accept and
// windowed diagonal-mass estimation, then n_samples sampling transitions.
ChainResult run_chain(const Target& target, const Eigen::VectorXd& init, KernelConfig cfg,
                      int n_warmup, int n_samples, RngStream& rng);

// A few kernel transitions from x0 with fixed settings (the rejuvenation move).
ChainState jitter(const Target& target, const Eigen::VectorXd& x0, const KernelConfig& cfg,
                  int n_steps, RngStream& rng);

}  // namespace bra

#endif
