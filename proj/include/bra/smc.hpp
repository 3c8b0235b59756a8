#ifndef BRA_SMC_HPP
#define BRA_SMC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/hmc.hpp"
#include "bra/laplace.hpp"
#include "bra/mcda.hpp"
#include "bra/model.hpp"
#include "bra/param_map.hpp"
#include "bra/prior.hpp"
#include "bra/targets.hpp"

namespace bra {

// Effective sample size (sum w)^2 / sum w^2.
double ess_weights(const Eigen::VectorXd& w);
// Same on log weights, stabilised by max subtraction.
double ess_log_weights(const Eigen::VectorXd& log_w);

enum class Resampler { Multinomial, Systematic };

struct SmcConfig {
  int n_particles = 1000;
  double ess_fraction = 0.5;  // rejuvenate when ESS < fraction * N
  int n_jitter = 10;          // kernel transitions per rejuvenation
  int n_leapfrog = 16;
  double target_accept = 0.8;
  // Early partial posteriors are diffuse and need far more jittering to keep
  // the cloud dispersed; the budget is multiplied by ~horizon/i (capped), so
  // per-rejuvenation cost stays roughly flat across the run.
  int jitter_early_boost = 16;
  int horizon = 0;  // expected total subjects; 0 disables the boost
  Resampler resampler = Resampler::Multinomial;
  int workers = 1;
  std::uint64_t seed = 0;
  LaplaceConfig laplace;
};

// Weighted theta particles plus, in the Laplace route, per-subject latent
// histories and stored linear predictors.
struct ParticleSystem {
  Eigen::MatrixXd theta;                // N x d, unconstrained, one row per particle
  Eigen::VectorXd log_w;                // N
  std::vector<std::vector<double>> z;   // per particle: z_1..z_i (Laplace route)
  std::vector<Eigen::MatrixXd> eta;     // per particle: n x p, rows [0, i) valid
  double log_evidence = 0.0;
  int absorbed = 0;
  int n_rejuvenations = 0;
  int n_laplace_fallbacks = 0;

  int n_particles() const { return static_cast<int>(theta.rows()); }
  double ess() const { return ess_log_weights(log_w); }
  Eigen::VectorXd normalised_weights() const;
};

std::vector<int> resample_indices(const Eigen::VectorXd& norm_weights, Resampler kind,
                                  RngStream& rng);

struct Summary {
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

// Self-normalised importance estimate of g over the particles.
Summary posterior_summary(const ParticleSystem& ps, const std::function<double(int)>& g);

struct StepResult {
  double log_incr = 0.0;   // log L_i
  double ess = 0.0;        // after the weight update, before any rejuvenation
  bool rejuvenated = false;
  double jitter_accept = 0.0;
};

// Model hooks for the marginal-likelihood route (Algorithm 1). Also
// implemented by test oracles; theta particles live on an unconstrained scale.
struct MarginalModel {
  int dim = 0;
  std::function<Eigen::VectorXd(RngStream&)> sample_prior;
  std::function<double(const Eigen::VectorXd&, int)> log_incr;  // log f(y_i | theta)
  std::function<Target(int)> make_target;                       // posterior given rows [0, n)
};

class IbisMarginal {
 public:
  IbisMarginal(MarginalModel model, SmcConfig cfg);

  void init();
  StepResult step(int row);  // absorb observation `row`
  ParticleSystem& system() { return ps_; }
  const ParticleSystem& system() const { return ps_; }

 private:
  MarginalModel model_;
  SmcConfig cfg_;
  ParticleSystem ps_;
  double step_scale_ = 1.0;
};

// Algorithm 2: per-subject Laplace proposal for the binary-block factor,
// augmented jitter target over (theta, z_{1:i}).
class IbisLaplace {
 public:
  IbisLaplace(const Dataset& ordered, const ModelSpec& sequential_spec, const PriorConfig& prior_cfg,
              SmcConfig cfg);

  void init();
  StepResult step(int row);
  ParticleSystem& system() { return ps_; }
  const ParticleSystem& system() const { return ps_; }
  const ModelSpec& spec() const { return spec_; }
  const ParamMap& map() const { return *map_; }

  Theta constrained_theta(int m) const;  // sign post-processed copy
  const Theta& cached_theta(int m) const { return thetas_[m]; }

 private:
  void refresh_caches();
  void rejuvenate(StepResult& result);

  Dataset data_;
  ModelSpec spec_;
  std::shared_ptr<const ParamMap> map_;
  std::shared_ptr<const PriorStack> prior_;
  SmcConfig cfg_;
  ParticleSystem ps_;
  double step_scale_ = 1.0;
  // per-particle caches, rebuilt after init/rejuvenation
  std::vector<Theta> thetas_;
  // continuous marginal factor per particle per covariance copy
  std::vector<std::vector<Eigen::LLT<Eigen::MatrixXd>>> sigma_llt_;
};

struct SequentialResult {
  ParticleSystem system;
  SequentialTrace trace;
  std::vector<Theta> final_draws;  // constrained, sign post-processed
};

// Reorders the dataset by the schedule and folds IBIS over it, recording the
// MCDA monitoring trace at every subject. Supports models with a closed-form
// marginal likelihood and EZ1 via the single-factor Laplace route.
SequentialResult run_sequential(const Dataset& d, const SequentialSchedule& schedule,
                                const ModelSpec& spec, const PriorConfig& prior_cfg,
                                const McdaConfig& mcda_cfg, const SmcConfig& cfg);

}  // namespace bra

#endif
