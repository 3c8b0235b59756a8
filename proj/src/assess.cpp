#include "bra/assess.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "bra/likelihood.hpp"
#include "bra/math.hpp"
#include "bra/prior.hpp"
#include "bra/rng.hpp"
#include "bra/simulate.hpp"
#include "bra/threads.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double discrepancy_lrt_single(const MatrixXd& sample_cov, const MatrixXd& model_cov, int n) {
  const int p = static_cast<int>(sample_cov.rows());
  Eigen::LLT<MatrixXd> ls(sample_cov);
  if (ls.info() != Eigen::Success)
    throw std::invalid_argument("discrepancy_lrt: singular sample covariance");
  Eigen::LLT<MatrixXd> lm(model_cov);
  if (lm.info() != Eigen::Success)
    throw std::invalid_argument("discrepancy_lrt: singular model covariance");
  double logdet_s = 0.0, logdet_m = 0.0;
  for (int i = 0; i < p; ++i) {
    logdet_s += 2.0 * std::log(ls.matrixLLT()(i, i));
    logdet_m += 2.0 * std::log(lm.matrixLLT()(i, i));
  }
  double tr = lm.solve(sample_cov).trace();
  return (n - 1.0) * (logdet_m + tr - logdet_s - p);
}

namespace {

MatrixXd group_sample_cov(const Dataset& d, int group) {
  const int p_c = d.schema().p_continuous();
  const int n_r = d.group_counts()[group];
  if (n_r <= p_c)
    throw std::invalid_argument("discrepancy_lrt: group too small for a sample covariance");
  VectorXd mean = VectorXd::Zero(p_c);
  for (const auto& row : d.rows())
    if (row.group == group) mean += row.y.head(p_c);
  mean /= n_r;
  MatrixXd s = MatrixXd::Zero(p_c, p_c);
  for (const auto& row : d.rows()) {
    if (row.group != group) continue;
    VectorXd r = row.y.head(p_c) - mean;
    s += r * r.transpose();
  }
  return s / (n_r - 1.0);
}

}  // namespace

double discrepancy_lrt(const Dataset& d, const Theta& theta, const ModelSpec& spec) {
  if (spec.p_c == 0) throw std::invalid_argument("discrepancy_lrt: no continuous block");
  double total = 0.0;
  for (int r = 0; r < spec.n_groups; ++r) {
    if (d.group_counts()[r] == 0) continue;
    total += discrepancy_lrt_single(group_sample_cov(d, r), marginal_covariance(theta, spec, r),
                                    d.group_counts()[r]);
  }
  return total;
}

VectorXd response_pattern_probs(const Theta& theta, const ModelSpec& spec, int group, int n_mc,
                                std::uint64_t seed) {
  const int p_b = spec.p_b;
  if (p_b > 12) throw std::invalid_argument("response_pattern_probs: too many binary items");
  const int n_pat = 1 << p_b;
  VectorXd probs = VectorXd::Zero(n_pat);
  const auto& gc = theta.cov_for(group);
  VectorXd alpha_b = theta.alpha.row(group).tail(p_b);

  const bool latent = spec.k > 0 || spec.has_omega();
  if (!latent) {
    // benchmarks: items independent given theta, probabilities are exact
    for (int pat = 0; pat < n_pat; ++pat) {
      double lp = 0.0;
      for (int j = 0; j < p_b; ++j)
        lp += (pat >> j & 1) ? log_sigmoid(alpha_b[j]) : log1m_sigmoid(alpha_b[j]);
      probs[pat] = std::exp(lp);
    }
    return probs / probs.sum();
  }

  MatrixXd phi_chol, omega_chol;
  if (spec.k > 0) phi_chol = Eigen::LLT<MatrixXd>(gc.phi).matrixL();
  if (spec.has_omega()) omega_chol = Eigen::LLT<MatrixXd>(gc.omega).matrixL();
  MatrixXd lambda_b = gc.lambda.bottomRows(p_b);

  // common random numbers: one (z, u) draw serves every pattern
  RngStream rng(seed, {0x9A77Eu});
  VectorXd sig(p_b), z(spec.k), u(p_b);
  for (int s = 0; s < n_mc; ++s) {
    VectorXd eta = alpha_b;
    if (spec.k > 0) {
      for (int f = 0; f < spec.k; ++f) z[f] = rng.normal();
      eta += lambda_b * (phi_chol * z);
    }
    if (spec.has_omega()) {
      for (int j = 0; j < p_b; ++j) u[j] = rng.normal();
      eta += omega_chol * u;
    }
    for (int j = 0; j < p_b; ++j) sig[j] = sigmoid(eta[j]);
    for (int pat = 0; pat < n_pat; ++pat) {
      double p = 1.0;
      for (int j = 0; j < p_b; ++j) p *= (pat >> j & 1) ? sig[j] : 1.0 - sig[j];
      probs[pat] += p;
    }
  }
  return probs / probs.sum();
}

double discrepancy_g2(const VectorXd& observed_counts, const VectorXd& probs, int n) {
  if (observed_counts.size() != probs.size())
    throw std::invalid_argument("discrepancy_g2: size mismatch");
  double g2 = 0.0;
  for (int r = 0; r < observed_counts.size(); ++r) {
    double o = observed_counts[r];
    if (o <= 0.0) continue;
    if (probs[r] <= 0.0)
      throw std::runtime_error("discrepancy_g2: observed pattern has zero model probability");
    g2 += o * std::log(o / (n * probs[r]));
  }
  return g2;
}

VectorXd observed_pattern_counts(const Dataset& d, int group) {
  const int p_b = d.schema().p_binary();
  const int p_c = d.schema().p_continuous();
  VectorXd counts = VectorXd::Zero(1 << p_b);
  for (const auto& row : d.rows()) {
    if (row.group != group) continue;
    int pat = 0;
    for (int j = 0; j < p_b; ++j)
      if (row.y[p_c + j] > 0.5) pat |= 1 << j;
    counts[pat] += 1.0;
  }
  return counts;
}

namespace {

double binary_discrepancy_data(const Dataset& d, const Theta& theta, const ModelSpec& spec,
                               const std::vector<VectorXd>& probs_per_group) {
  double total = 0.0;
  for (int r = 0; r < spec.n_groups; ++r) {
    int n_r = d.group_counts()[r];
    if (n_r == 0) continue;
    total += discrepancy_g2(observed_pattern_counts(d, r), probs_per_group[r], n_r);
  }
  return total;
}

}  // namespace

double ppp_value(const std::vector<Theta>& draws, const Dataset& d, const ModelSpec& spec,
                 DataBlock which, const AssessConfig& cfg, std::uint64_t seed) {
  if (draws.empty()) throw std::invalid_argument("ppp_value: no posterior draws");
  if (which == DataBlock::Binary && spec.p_b == 0)
    throw std::invalid_argument("ppp_value: no binary block");
  std::vector<int> kept;
  for (size_t m = 0; m < draws.size(); m += std::max(1, cfg.ppp_thin))
    kept.push_back(static_cast<int>(m));

  std::vector<double> indicator(kept.size());
  parallel_for(kept.size(), cfg.workers, [&](std::size_t t) {
    const Theta& theta = draws[kept[t]];
    auto sim = simulate_dataset(spec, theta, d.schema(), d.group_counts(),
                                splitmix64(seed) ^ static_cast<std::uint64_t>(kept[t]));
    double d_obs, d_rep;
    if (which == DataBlock::Continuous) {
      d_obs = discrepancy_lrt(d, theta, spec);
      d_rep = discrepancy_lrt(sim, theta, spec);
    } else {
      std::vector<VectorXd> probs(spec.n_groups);
      for (int r = 0; r < spec.n_groups; ++r)
        probs[r] = response_pattern_probs(theta, spec, r, cfg.n_mc_patterns,
                                          splitmix64(seed + 1) ^ static_cast<std::uint64_t>(kept[t]));
      d_obs = binary_discrepancy_data(d, theta, spec, probs);
      d_rep = binary_discrepancy_data(sim, theta, spec, probs);
    }
    indicator[t] = d_obs < d_rep ? 1.0 : (d_obs == d_rep ? 0.5 : 0.0);
  });
  double s = 0.0;
  for (double v : indicator) s += v;
  return s / indicator.size();
}

MpScorer::MpScorer(const std::vector<Theta>& draws, const ModelSpec& spec, int n_mc_patterns,
                   std::uint64_t seed)
    : draws_(draws), spec_(spec) {
  const int M = static_cast<int>(draws.size());
  sigma_llt_.resize(M);
  log_patterns_.resize(M);
  for (int m = 0; m < M; ++m) {
    sigma_llt_[m].resize(spec_.n_groups);
    log_patterns_[m].resize(spec_.n_groups);
    for (int r = 0; r < spec_.n_groups; ++r) {
      if (spec_.p_c > 0) {
        sigma_llt_[m][r].compute(marginal_covariance(draws_[m], spec_, r));
        if (sigma_llt_[m][r].info() != Eigen::Success)
          throw std::runtime_error("log score: singular implied covariance");
      }
      if (spec_.p_b > 0) {
        VectorXd p = response_pattern_probs(
            draws_[m], spec_, r, n_mc_patterns,
            splitmix64(seed) ^ static_cast<std::uint64_t>(m * 131 + r));
        log_patterns_[m][r] = p.array().max(1e-300).log();
      }
    }
  }
}

LogScore MpScorer::score(const VectorXd& y, int group) const {
  const int M = static_cast<int>(draws_.size());
  if (M == 0) throw std::invalid_argument("log score: empty mixture");
  VectorXd log_c(M), log_b(M);
  int pat = 0;
  for (int j = 0; j < spec_.p_b; ++j)
    if (y[spec_.p_c + j] > 0.5) pat |= 1 << j;
  for (int m = 0; m < M; ++m) {
    log_c[m] = (spec_.p_c > 0)
                   ? continuous_marginal_point(y.head(spec_.p_c),
                                               draws_[m].alpha.row(group).head(spec_.p_c),
                                               sigma_llt_[m][group])
                   : 0.0;
    log_b[m] = (spec_.p_b > 0) ? log_patterns_[m][group][pat] : 0.0;
  }
  LogScore out;
  const double log_m = std::log(static_cast<double>(M));
  out.continuous = -(logsumexp(log_c) - log_m);
  out.binary = -(logsumexp(log_b) - log_m);
  VectorXd log_j = log_c + log_b;
  out.joint = -(logsumexp(log_j) - log_m);
  return out;
}

AssessmentReport assess_model(const Dataset& d, const ModelSpec& spec, const PriorConfig& prior_cfg,
                              const AssessConfig& cfg) {
  AssessmentReport report;
  report.model = spec.name();

  // cross-validated log scores
  auto folds = split_folds(d, cfg.folds, cfg.seed);
  report.fold_ls_continuous.assign(folds.size(), 0.0);
  report.fold_ls_binary.assign(folds.size(), 0.0);
  parallel_for(folds.size(), cfg.workers, [&](std::size_t f) {
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = splitmix64(cfg.seed) ^ (0xF01Du + f);
    auto fit = fit_model(folds[f].train, spec, prior_cfg, fit_cfg);
    std::vector<Theta> mix;
    size_t step = std::max<size_t>(1, fit.draws.size() / std::max(1, cfg.logscore_draws));
    for (size_t m = 0; m < fit.draws.size(); m += step) mix.push_back(fit.draws[m]);
    MpScorer scorer(mix, spec, cfg.n_mc_logscore, splitmix64(cfg.seed + 2) ^ f);
    double ls_c = 0.0, ls_b = 0.0;
    for (int i = 0; i < folds[f].test.n(); ++i) {
      auto s = scorer.score(folds[f].test.row(i).y, folds[f].test.row(i).group);
      ls_c += s.continuous;
      ls_b += s.binary;
    }
    report.fold_ls_continuous[f] = ls_c;
    report.fold_ls_binary[f] = ls_b;
  });
  for (size_t f = 0; f < folds.size(); ++f) {
    report.ls_continuous += report.fold_ls_continuous[f];
    report.ls_binary += report.fold_ls_binary[f];
  }
  report.ls_combined = report.ls_continuous + report.ls_binary;

  // PPP values from a full-data fit
  FitConfig fit_cfg = cfg.fit;
  fit_cfg.seed = splitmix64(cfg.seed) ^ 0xBBu;
  auto fit = fit_model(d, spec, prior_cfg, fit_cfg);
  if (spec.p_c > 0)
    report.ppp_continuous =
        ppp_value(fit.draws, d, spec, DataBlock::Continuous, cfg, splitmix64(cfg.seed + 3));
  if (spec.p_b > 0)
    report.ppp_binary =
        ppp_value(fit.draws, d, spec, DataBlock::Binary, cfg, splitmix64(cfg.seed + 4));
  return report;
}

void write_assessment(const std::vector<AssessmentReport>& reports, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_assessment: cannot open '" + path + "'");
  f << "model,continuous_ls,binary_ls,combined_ls,continuous_ppp,binary_ppp\n";
  char buf[64];
  for (const auto& r : reports) {
    f << r.model;
    for (double v : {r.ls_continuous, r.ls_binary, r.ls_combined, r.ppp_continuous, r.ppp_binary}) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      f << ',' << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_assessment: write failed for '" + path + "'");
}

}  // namespace bra
