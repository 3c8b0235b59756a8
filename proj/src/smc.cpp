#include "bra/smc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bra/math.hpp"
#include "bra/threads.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ess_weights(const VectorXd& w) {
  double s = w.sum();
  double s2 = w.squaredNorm();
  return s * s / s2;
}

double ess_log_weights(const VectorXd& log_w) {
  double m = log_w.maxCoeff();
  VectorXd w = (log_w.array() - m).exp();
  return ess_weights(w);
}

VectorXd ParticleSystem::normalised_weights() const {
  double m = log_w.maxCoeff();
  VectorXd w = (log_w.array() - m).exp();
  return w / w.sum();
}

std::vector<int> resample_indices(const VectorXd& norm_weights, Resampler kind, RngStream& rng) {
  const int n = static_cast<int>(norm_weights.size());
  std::vector<double> cum(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += norm_weights[i];
    cum[i] = acc;
  }
  cum[n - 1] = 1.0;  // guard against rounding
  std::vector<int> out(n);
  if (kind == Resampler::Multinomial) {
    for (int m = 0; m < n; ++m) {
      double u = rng.uniform();
      out[m] = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    }
  } else {
    double u0 = rng.uniform();
    for (int m = 0; m < n; ++m) {
      double u = (m + u0) / n;
      out[m] = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    }
  }
  return out;
}

Summary posterior_summary(const ParticleSystem& ps, const std::function<double(int)>& g) {
  const int n = ps.n_particles();
  VectorXd w = ps.normalised_weights();
  std::vector<double> values(n), weights(n);
  for (int m = 0; m < n; ++m) {
    values[m] = g(m);
    weights[m] = w[m];
  }
  Summary s;
  s.mean = weighted_mean(values, weights);
  s.q025 = weighted_quantile(values, weights, 0.025);
  s.q975 = weighted_quantile(values, weights, 0.975);
  return s;
}

namespace {

constexpr std::uint64_t kInitTag = 0x1B150001ULL;
constexpr std::uint64_t kZTag = 0x1B150002ULL;
constexpr std::uint64_t kResampleTag = 0x1B150003ULL;
constexpr std::uint64_t kJitterTag = 0x1B150004ULL;

// Dense preconditioner from the weighted particle cloud: lower Cholesky of
// the covariance shrunk toward its diagonal. The jitter targets have strong
// cross-correlations (loadings vs latent scores) that a diagonal mass misses.
MatrixXd cloud_dense_chol(const MatrixXd& xs, const VectorXd& norm_w) {
  const int d = static_cast<int>(xs.cols());
  VectorXd mean = xs.transpose() * norm_w;
  MatrixXd cov = MatrixXd::Zero(d, d);
  for (int m = 0; m < xs.rows(); ++m) {
    VectorXd r = xs.row(m).transpose() - mean;
    cov += norm_w[m] * (r * r.transpose());
  }
  VectorXd diag = cov.diagonal();
  double floor = std::max(1e-8, 1e-6 * diag.maxCoeff());
  cov *= 0.75;
  cov.diagonal() += 0.25 * diag;
  cov.diagonal() = cov.diagonal().cwiseMax(floor);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // fall back to the diagonal when the sample covariance is not PD
  return diag.cwiseMax(floor).cwiseSqrt().asDiagonal();
}

double jitter_step_size(double scale, int dim) {
  return scale * 1.4 * std::pow(static_cast<double>(std::max(dim, 1)), -0.25);
}

int jitter_budget(const SmcConfig& cfg, int absorbed, double ess_fraction_seen) {
  int boost = 1;
  if (cfg.horizon > 0 && absorbed > 0) {
    boost = static_cast<int>(
        std::ceil(static_cast<double>(cfg.horizon) / absorbed));
    boost = std::clamp(boost, 1, std::max(1, cfg.jitter_early_boost));
  }
  // a severe weight collapse needs extra diversification
  if (ess_fraction_seen < 0.1) boost *= 2;
  return std::max(0, cfg.n_jitter) * boost;
}

struct JitterOutcome {
  double accept = 1.0;     // mean acceptance over the final round
  double eps_final = 0.0;  // step size after in-run adaptation
};

// Moves every row of `cloud` by MCMC transitions invariant for `target`,
// adapting the step size between three rounds. Per-particle streams keep the
// result independent of the worker count.
JitterOutcome jitter_cloud(MatrixXd& cloud, const Target& target, KernelConfig kcfg,
                           int n_transitions, const SmcConfig& cfg, std::uint64_t rejuv_id) {
  JitterOutcome out;
  out.eps_final = kcfg.step_size;
  if (n_transitions <= 0) return out;
  const int n = static_cast<int>(cloud.rows());
  kcfg.min_leapfrog = std::max(1, kcfg.n_leapfrog / 2);
  const int rounds = std::clamp(n_transitions, 1, 6);
  int done = 0;
  for (int round = 0; round < rounds; ++round) {
    const int todo = (n_transitions - done) / (rounds - round);
    done += todo;
    if (todo == 0) continue;
    VectorXd accept(n);
    parallel_for(n, cfg.workers, [&](std::size_t mi) {
      const int m = static_cast<int>(mi);
      RngStream rng(cfg.seed, {kJitterTag, rejuv_id, static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(m)});
      ChainState s = jitter(target, cloud.row(m), kcfg, todo, rng);
      cloud.row(m) = s.x;
      accept[m] = s.n_steps > 0 ? static_cast<double>(s.n_accept) / s.n_steps : 1.0;
    });
    out.accept = accept.mean();
    if (round + 1 < rounds) {
      kcfg.step_size *= std::exp(1.5 * (out.accept - kcfg.target_accept));
      kcfg.step_size = std::clamp(kcfg.step_size, 1e-6, 2.0);
    }
  }
  out.eps_final = kcfg.step_size;
  return out;
}

double accumulate_incremental(ParticleSystem& ps, const VectorXd& log_u) {
  double before = logsumexp(ps.log_w);
  VectorXd combined = ps.log_w + log_u;
  double after = logsumexp(combined);
  if (!std::isfinite(after))
    throw std::runtime_error(
        "ibis: all incremental weights vanished; weights are log-space internally, check the "
        "model/data for an impossible observation");
  ps.log_w = combined;
  double log_incr = after - before;
  ps.log_evidence += log_incr;
  return log_incr;
}

}  // namespace

IbisMarginal::IbisMarginal(MarginalModel model, SmcConfig cfg)
    : model_(std::move(model)), cfg_(cfg) {}

void IbisMarginal::init() {
  const int n = cfg_.n_particles;
  ps_.theta.resize(n, model_.dim);
  ps_.log_w = VectorXd::Zero(n);
  ps_.log_evidence = 0.0;
  ps_.absorbed = 0;
  for (int m = 0; m < n; ++m) {
    RngStream rng(cfg_.seed, {kInitTag, static_cast<std::uint64_t>(m)});
    ps_.theta.row(m) = model_.sample_prior(rng);
  }
}

StepResult IbisMarginal::step(int row) {
  const int n = ps_.n_particles();
  VectorXd log_u(n);
  parallel_for(n, cfg_.workers, [&](std::size_t m) {
    log_u[static_cast<int>(m)] = model_.log_incr(ps_.theta.row(static_cast<int>(m)), row);
  });

  StepResult result;
  result.log_incr = accumulate_incremental(ps_, log_u);
  ps_.absorbed += 1;
  result.ess = ps_.ess();

  const double gamma = cfg_.ess_fraction * n;
  if (result.ess < gamma) {
    result.rejuvenated = true;
    ++ps_.n_rejuvenations;
    VectorXd norm_w = ps_.normalised_weights();
    MatrixXd dense_chol = cloud_dense_chol(ps_.theta, norm_w);

    RngStream res_rng(cfg_.seed, {kResampleTag, static_cast<std::uint64_t>(ps_.n_rejuvenations)});
    auto idx = resample_indices(norm_w, cfg_.resampler, res_rng);
    MatrixXd resampled(n, model_.dim);
    for (int m = 0; m < n; ++m) resampled.row(m) = ps_.theta.row(idx[m]);
    ps_.theta = std::move(resampled);
    ps_.log_w.setZero();

    Target target = model_.make_target(ps_.absorbed);
    KernelConfig kcfg;
    kcfg.n_leapfrog = cfg_.n_leapfrog;
    kcfg.target_accept = cfg_.target_accept;
    kcfg.dense_chol = std::move(dense_chol);
    kcfg.step_size = jitter_step_size(step_scale_, target.dim);

    auto outcome =
        jitter_cloud(ps_.theta, target, kcfg, jitter_budget(cfg_, ps_.absorbed, result.ess / n),
                     cfg_, static_cast<std::uint64_t>(ps_.n_rejuvenations));
    result.jitter_accept = outcome.accept;
    step_scale_ = std::clamp(outcome.eps_final / jitter_step_size(1.0, target.dim), 0.25, 4.0);
  }
  return result;
}

IbisLaplace::IbisLaplace(const Dataset& ordered, const ModelSpec& sequential_spec,
                         const PriorConfig& prior_cfg, SmcConfig cfg)
    : data_(ordered), spec_(sequential_spec), cfg_(cfg) {
  if (!spec_.sequential_form)
    spec_ = reparameterize_single_factor(spec_);
  map_ = std::make_shared<const ParamMap>(spec_);
  MatrixXd s_y = (spec_.p_c > 0) ? pooled_within_covariance(data_) : MatrixXd(0, 0);
  prior_ = std::make_shared<const PriorStack>(spec_, prior_cfg, s_y);
}

void IbisLaplace::init() {
  const int n = cfg_.n_particles;
  ps_.theta.resize(n, map_->dim());
  ps_.log_w = VectorXd::Zero(n);
  ps_.log_evidence = 0.0;
  ps_.absorbed = 0;
  ps_.z.assign(n, {});
  ps_.eta.assign(n, MatrixXd::Zero(data_.n(), spec_.p()));
  for (int m = 0; m < n; ++m) {
    RngStream rng(cfg_.seed, {kInitTag, static_cast<std::uint64_t>(m)});
    Theta th = prior_->sample(rng);
    ps_.theta.row(m) = map_->unconstrain(th);
  }
  refresh_caches();
}

void IbisLaplace::refresh_caches() {
  const int n = ps_.n_particles();
  thetas_.resize(n);
  sigma_llt_.resize(n);
  parallel_for(n, cfg_.workers, [&](std::size_t mi) {
    const int m = static_cast<int>(mi);
    thetas_[m] = map_->constrain(ps_.theta.row(m));
    if (spec_.p_c > 0) {
      sigma_llt_[m].resize(spec_.n_cov_copies());
      for (int c = 0; c < spec_.n_cov_copies(); ++c) {
        int g = spec_.pooled ? 0 : c;
        sigma_llt_[m][c].compute(marginal_covariance(thetas_[m], spec_, g));
      }
    }
  });
}

Theta IbisLaplace::constrained_theta(int m) const {
  Theta th = thetas_[m];
  sign_postprocess(th, spec_);
  return th;
}

StepResult IbisLaplace::step(int row) {
  const int n = ps_.n_particles();
  const int r = data_.row(row).group;
  const int cov = spec_.pooled ? 0 : r;
  const VectorXd y_c = data_.continuous_part(row);
  const VectorXd y_b = data_.binary_part(row);

  VectorXd log_u(n);
  std::vector<double> z_draw(n);
  std::vector<int> fallback(n, 0);
  parallel_for(n, cfg_.workers, [&](std::size_t mi) {
    const int m = static_cast<int>(mi);
    const Theta& th = thetas_[m];
    LaplaceFit fit = laplace_fit(y_b, th, spec_, r, cfg_.laplace);
    if (!fit.converged) fallback[m] = 1;
    RngStream rng(cfg_.seed, {kZTag, static_cast<std::uint64_t>(row), static_cast<std::uint64_t>(m)});
    VectorXd z = laplace_sample(fit, rng);
    z_draw[m] = z[0];

    double lu = 0.0;
    if (spec_.p_c > 0) {
      lu += continuous_marginal_point(y_c, th.alpha.row(r).head(spec_.p_c), sigma_llt_[m][cov]);
    }
    VectorXd eta = binary_eta(th, spec_, r, z);
    lu += loglik_binary_conditional(y_b, eta, nullptr);
    lu += -0.5 * (kLog2Pi + z[0] * z[0]);  // z prior (standard normal after reparameterisation)
    lu -= laplace_logpdf(z, fit);
    log_u[m] = lu;
  });

  StepResult result;
  result.log_incr = accumulate_incremental(ps_, log_u);
  for (int m = 0; m < n; ++m) {
    ps_.z[m].push_back(z_draw[m]);
    VectorXd z1(1);
    z1 << z_draw[m];
    ps_.eta[m].row(row).head(spec_.p_c) = thetas_[m].alpha.row(r).head(spec_.p_c);
    ps_.eta[m].row(row).tail(spec_.p_b) = binary_eta(thetas_[m], spec_, r, z1);
    ps_.n_laplace_fallbacks += fallback[m];
  }
  ps_.absorbed += 1;
  result.ess = ps_.ess();

  if (result.ess < cfg_.ess_fraction * n) {
    result.rejuvenated = true;
    rejuvenate(result);
  }
  return result;
}

void IbisLaplace::rejuvenate(StepResult& result) {
  const int n = ps_.n_particles();
  const int i = ps_.absorbed;
  const int dim = map_->dim() + i;
  ++ps_.n_rejuvenations;

  // pre-resample weighted cloud variance over (theta, z_{1:i})
  MatrixXd cloud(n, dim);
  for (int m = 0; m < n; ++m) {
    cloud.row(m).head(map_->dim()) = ps_.theta.row(m);
    for (int j = 0; j < i; ++j) cloud(m, map_->dim() + j) = ps_.z[m][j];
  }
  VectorXd norm_w = ps_.normalised_weights();
  MatrixXd dense_chol = cloud_dense_chol(cloud, norm_w);

  RngStream res_rng(cfg_.seed, {kResampleTag, static_cast<std::uint64_t>(ps_.n_rejuvenations)});
  auto idx = resample_indices(norm_w, cfg_.resampler, res_rng);
  MatrixXd resampled(n, dim);
  for (int m = 0; m < n; ++m) resampled.row(m) = cloud.row(idx[m]);
  ps_.log_w.setZero();

  auto post = make_posterior(data_, i, spec_, map_, prior_);
  KernelConfig kcfg;
  kcfg.n_leapfrog = cfg_.n_leapfrog;
  kcfg.target_accept = cfg_.target_accept;
  kcfg.dense_chol = std::move(dense_chol);
  kcfg.step_size = jitter_step_size(step_scale_, dim);

  auto outcome = jitter_cloud(resampled, post.target, kcfg,
                              jitter_budget(cfg_, i, result.ess / n), cfg_,
                              static_cast<std::uint64_t>(ps_.n_rejuvenations));

  for (int m = 0; m < n; ++m) {
    ps_.theta.row(m) = resampled.row(m).head(map_->dim());
    ps_.z[m].assign(resampled.row(m).data() + map_->dim(), resampled.row(m).data() + dim);
  }
  result.jitter_accept = outcome.accept;
  step_scale_ = std::clamp(outcome.eps_final / jitter_step_size(1.0, dim), 0.25, 4.0);

  refresh_caches();
  // refresh stored linear predictors from the post-jitter states
  parallel_for(n, cfg_.workers, [&](std::size_t mi) {
    const int m = static_cast<int>(mi);
    for (int j = 0; j < i; ++j) {
      const int rj = data_.row(j).group;
      VectorXd z1(1);
      z1 << ps_.z[m][j];
      ps_.eta[m].row(j).head(spec_.p_c) = thetas_[m].alpha.row(rj).head(spec_.p_c);
      ps_.eta[m].row(j).tail(spec_.p_b) = binary_eta(thetas_[m], spec_, rj, z1);
    }
  });
}

namespace {

McdaTraceRow make_trace_row(int index, const Row& subject, const StepResult& step,
                            const ParticleSystem& ps, const McdaConfig& mcda_cfg,
                            const ModelSpec& spec, const std::function<const Theta&(int)>& theta_of) {
  const int n = ps.n_particles();
  const int R = spec.n_groups;
  ScorePosterior sp;
  sp.scores.resize(n, R);
  sp.weights = ps.normalised_weights();
  for (int m = 0; m < n; ++m)
    for (int r = 0; r < R; ++r) sp.scores(m, r) = mcda_score(theta_of(m), r, mcda_cfg, spec);

  McdaTraceRow row;
  row.index = index;
  row.subject_id = subject.subject_id;
  row.group = subject.group;
  row.ess = step.ess;
  row.log_incr = step.log_incr;
  row.log_evidence = ps.log_evidence;
  row.rejuvenated = step.rejuvenated;
  row.score_mean.resize(R);
  row.score_q025.resize(R);
  row.score_q975.resize(R);
  for (int r = 0; r < R; ++r) {
    row.score_mean[r] = sp.mean(r);
    row.score_q025[r] = sp.quantile(r, 0.025);
    row.score_q975[r] = sp.quantile(r, 0.975);
  }
  row.p_super.resize(R, R);
  row.p_super.setZero();
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b)
      if (a != b) row.p_super(a, b) = superiority_prob(sp, a, b);
  return row;
}

}  // namespace

SequentialResult run_sequential(const Dataset& d, const SequentialSchedule& schedule,
                                const ModelSpec& spec, const PriorConfig& prior_cfg,
                                const McdaConfig& mcda_cfg, const SmcConfig& cfg) {
  if (static_cast<int>(schedule.order.size()) != d.n())
    throw std::invalid_argument("run_sequential: schedule does not cover the dataset");
  mcda_cfg.validate(d.schema());
  Dataset ordered = d.subset(schedule.order);
  SmcConfig run_cfg = cfg;
  if (run_cfg.horizon == 0) run_cfg.horizon = d.n();

  const LatentKind kind = latent_kind_for(spec);
  std::vector<McdaTraceRow> rows;
  SequentialResult out;

  if (kind == LatentKind::Augmented) {
    throw std::invalid_argument(
        "run_sequential: " + spec.name() +
        " has no closed-form marginal and no single-factor form; sequential inference supports "
        "SAT/IND, continuous-only factor models, and EZ1");
  }

  if (kind == LatentKind::SequentialZ) {
    ModelSpec seq = spec.sequential_form ? spec : reparameterize_single_factor(spec);
    IbisLaplace driver(ordered, seq, prior_cfg, run_cfg);
    driver.init();
    for (int i = 0; i < ordered.n(); ++i) {
      StepResult step = driver.step(i);
      rows.push_back(make_trace_row(
          i + 1, ordered.row(i), step, driver.system(), mcda_cfg, seq,
          [&](int m) -> const Theta& { return driver.cached_theta(m); }));
    }
    out.system = driver.system();
    out.final_draws.reserve(cfg.n_particles);
    for (int m = 0; m < cfg.n_particles; ++m) out.final_draws.push_back(driver.constrained_theta(m));
  } else {
    auto map = std::make_shared<const ParamMap>(spec);
    MatrixXd s_y = (spec.p_c > 0) ? pooled_within_covariance(ordered) : MatrixXd(0, 0);
    auto prior = std::make_shared<const PriorStack>(spec, prior_cfg, s_y);

    MarginalModel model;
    model.dim = map->dim();
    model.sample_prior = [map, prior](RngStream& rng) { return map->unconstrain(prior->sample(rng)); };
    model.log_incr = [map, &ordered, spec](const VectorXd& x, int row) {
      Theta th = map->constrain(x);
      return loglik_point_marginal(th, spec, ordered.row(row).y, ordered.row(row).group);
    };
    model.make_target = [map, prior, &ordered, spec](int n_prefix) {
      return make_posterior(ordered, n_prefix, spec, map, prior).target;
    };

    IbisMarginal driver(model, run_cfg);
    driver.init();
    std::vector<Theta> thetas(cfg.n_particles);
    for (int i = 0; i < ordered.n(); ++i) {
      StepResult step = driver.step(i);
      for (int m = 0; m < cfg.n_particles; ++m)
        thetas[m] = map->constrain(driver.system().theta.row(m));
      rows.push_back(make_trace_row(i + 1, ordered.row(i), step, driver.system(), mcda_cfg, spec,
                                    [&](int m) -> const Theta& { return thetas[m]; }));
    }
    out.system = driver.system();
    out.final_draws.reserve(cfg.n_particles);
    for (int m = 0; m < cfg.n_particles; ++m) {
      Theta th = map->constrain(driver.system().theta.row(m));
      sign_postprocess(th, spec);
      out.final_draws.push_back(th);
    }
  }

  out.trace = sequential_trace(rows, mcda_cfg, spec.n_groups);
  return out;
}

}  // namespace bra
