#include "bra/hmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bra {

using Eigen::VectorXd;

ChainState make_chain_state(const Target& target, const VectorXd& x0) {
  ChainState s;
  s.x = x0;
  s.grad.resize(target.dim);
  s.logp = target(s.x, &s.grad);
  if (!std::isfinite(s.logp))
    throw std::invalid_argument("hmc: target not finite at the initial point");
  return s;
}

namespace {

// momentum algebra for identity, diagonal, or dense inverse mass
struct MassOps {
  const KernelConfig& cfg;

  VectorXd sample(int d, RngStream& rng) const {
    VectorXd xi(d);
    for (int i = 0; i < d; ++i) xi[i] = rng.normal();
    if (cfg.dense_chol.size() > 0)
      return cfg.dense_chol.transpose().triangularView<Eigen::Upper>().solve(xi);
    if (cfg.inv_mass.size() > 0) return xi.cwiseQuotient(cfg.inv_mass.cwiseSqrt());
    return xi;
  }
  double kinetic(const VectorXd& p) const {
    if (cfg.dense_chol.size() > 0) return 0.5 * (cfg.dense_chol.transpose() * p).squaredNorm();
    if (cfg.inv_mass.size() > 0) return 0.5 * p.cwiseProduct(cfg.inv_mass).dot(p);
    return 0.5 * p.squaredNorm();
  }
  VectorXd apply_inv(const VectorXd& p) const {
    if (cfg.dense_chol.size() > 0) return cfg.dense_chol * (cfg.dense_chol.transpose() * p);
    if (cfg.inv_mass.size() > 0) return p.cwiseProduct(cfg.inv_mass);
    return p;
  }
};

bool leapfrog_mass(VectorXd& x, VectorXd& p, double& logp, VectorXd& grad, const Target& target,
                   double eps, int n_steps, const MassOps& mass) {
  for (int l = 0; l < n_steps; ++l) {
    p += 0.5 * eps * grad;
    x += eps * mass.apply_inv(p);
    logp = target(x, &grad);
    if (!std::isfinite(logp) || !grad.allFinite()) return false;
    p += 0.5 * eps * grad;
  }
  return true;
}

}  // namespace

bool leapfrog(VectorXd& x, VectorXd& p, double& logp, VectorXd& grad, const Target& target,
              double eps, int n_steps, const VectorXd& inv_mass) {
  KernelConfig cfg;
  cfg.inv_mass = inv_mass;
  return leapfrog_mass(x, p, logp, grad, target, eps, n_steps, MassOps{cfg});
}

void hmc_step(ChainState& state, const Target& target, const KernelConfig& cfg, RngStream& rng) {
  const MassOps mass{cfg};
  VectorXd p = mass.sample(target.dim, rng);

  const int lo = std::max(1, cfg.min_leapfrog);
  const int hi = std::max(lo, cfg.n_leapfrog);
  const int n_leap = lo + static_cast<int>(rng.uniform_index(hi - lo + 1));
  const double h0 = -state.logp + mass.kinetic(p);

  VectorXd x = state.x;
  VectorXd grad = state.grad;
  double logp = state.logp;
  bool bad = !leapfrog_mass(x, p, logp, grad, target, cfg.step_size, n_leap, mass);

  ++state.n_steps;
  double accept_prob = 0.0;
  bool divergent = false;
  if (!bad) {
    const double h1 = -logp + mass.kinetic(p);
    const double energy_error = h1 - h0;
    if (!std::isfinite(energy_error) || energy_error > cfg.divergence_threshold) {
      divergent = true;
    } else {
      accept_prob = std::min(1.0, std::exp(-energy_error));
    }
  } else {
    divergent = true;
  }
  if (divergent) ++state.n_divergent;

  state.last_accept_prob = accept_prob;
  state.last_accept = (!divergent && rng.uniform() < accept_prob);
  if (state.last_accept) {
    state.x = std::move(x);
    state.grad = std::move(grad);
    state.logp = logp;
    ++state.n_accept;
  }
}

namespace {

// Nesterov dual averaging on log step size (standard constants).
struct DualAveraging {
  double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  int t = 0;

  void reset(double eps0) {
    mu = std::log(10.0 * eps0);
    log_eps = std::log(eps0);
    log_eps_bar = std::log(eps0);
    h_bar = 0.0;
    t = 0;
  }
  void update(double accept_prob, double target) {
    ++t;
    h_bar = (1.0 - 1.0 / (t + t0)) * h_bar + (target - accept_prob) / (t + t0);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
    double eta = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
  double current() const { return std::exp(log_eps); }
  double averaged() const { return std::exp(log_eps_bar); }
};

double find_initial_step(const Target& target, const ChainState& state, const KernelConfig& cfg,
                         RngStream& rng) {
  KernelConfig probe = cfg;
  probe.n_leapfrog = 1;
  double eps = cfg.step_size > 0 ? cfg.step_size : 0.1;
  for (int it = 0; it < 30; ++it) {
    probe.step_size = eps;
    ChainState s = state;
    hmc_step(s, target, probe, rng);
    if (s.last_accept_prob > 0.8) {
      eps *= 2.0;
    } else if (s.last_accept_prob < 0.3) {
      eps *= 0.5;
    } else {
      break;
    }
  }
  return eps;
}

}  // namespace

ChainResult run_chain(const Target& target, const VectorXd& init, KernelConfig cfg, int n_warmup,
                      int n_samples, RngStream& rng) {
  ChainState state = make_chain_state(target, init);
  ChainResult out;

  if (n_warmup > 0) {
    DualAveraging da;
    da.reset(find_initial_step(target, state, cfg, rng));

    // mass-update checkpoints at 40% and 70% of warmup
    const int c1 = std::max(2, static_cast<int>(0.4 * n_warmup));
    const int c2 = std::max(c1 + 2, static_cast<int>(0.7 * n_warmup));
    VectorXd sum = VectorXd::Zero(target.dim), sumsq = VectorXd::Zero(target.dim);
    int n_acc = 0;

    for (int it = 0; it < n_warmup; ++it) {
      cfg.step_size = da.current();
      hmc_step(state, target, cfg, rng);
      da.update(state.last_accept_prob, cfg.target_accept);
      sum += state.x;
      sumsq += state.x.cwiseProduct(state.x);
      ++n_acc;
      if ((it + 1 == c1 || it + 1 == c2) && it + 1 < n_warmup && n_acc >= 5) {
        VectorXd mean = sum / n_acc;
        VectorXd var = sumsq / n_acc - mean.cwiseProduct(mean);
        double shrink = n_acc / (n_acc + 5.0);
        cfg.inv_mass =
            (shrink * var.array() + (1.0 - shrink) * 1e-3).max(1e-10).matrix();
        da.reset(da.averaged());
        sum.setZero();
        sumsq.setZero();
        n_acc = 0;
      }
    }
    cfg.step_size = da.averaged();
  }

  out.draws.reserve(n_samples);
  double acc_sum = 0.0;
  for (int it = 0; it < n_samples; ++it) {
    hmc_step(state, target, cfg, rng);
    acc_sum += state.last_accept_prob;
    out.draws.push_back(state.x);
  }
  out.accept_rate = n_samples > 0 ? acc_sum / n_samples : 0.0;
  out.n_divergent = state.n_divergent;
  out.adapted = cfg;
  return out;
}

ChainState jitter(const Target& target, const VectorXd& x0, const KernelConfig& cfg, int n_steps,
                  RngStream& rng) {
  ChainState state = make_chain_state(target, x0);
  for (int s = 0; s < n_steps; ++s) hmc_step(state, target, cfg, rng);
  return state;
}

}  // namespace bra
