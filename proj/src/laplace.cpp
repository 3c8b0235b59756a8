#include "bra/laplace.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "bra/math.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd latent_binary_loadings(const Theta& theta, const ModelSpec& spec, int group) {
  const auto& c = theta.cov_for(group);
  if (spec.sequential_form) {
    const int fb = spec.binary_factor();
    if (fb < 0) return MatrixXd(spec.p_b, 0);
    return c.lambda.col(fb).tail(spec.p_b);
  }
  return c.lambda.bottomRows(spec.p_b);
}

double latent_log_target(const VectorXd& z, const VectorXd& y_bin, const VectorXd& alpha_b,
                         const MatrixXd& beta) {
  double val = -0.5 * z.squaredNorm();
  VectorXd eta = alpha_b + beta * z;
  for (int j = 0; j < y_bin.size(); ++j)
    val += (y_bin[j] > 0.5) ? log_sigmoid(eta[j]) : log1m_sigmoid(eta[j]);
  return val;
}

void latent_score_and_info(const VectorXd& z, const VectorXd& y_bin, const VectorXd& alpha_b,
                           const MatrixXd& beta, VectorXd& score, MatrixXd& info) {
  const int k = static_cast<int>(z.size());
  score = -z;
  info = MatrixXd::Identity(k, k);
  VectorXd eta = alpha_b + beta * z;
  for (int j = 0; j < y_bin.size(); ++j) {
    double pi = sigmoid(eta[j]);
    double w = pi * (1.0 - pi);
    score += (y_bin[j] - pi) * beta.row(j).transpose();
    info += w * (beta.row(j).transpose() * beta.row(j));
  }
}

namespace {

LaplaceFit fisher_scoring(const VectorXd& y_bin, const VectorXd& alpha_b, const MatrixXd& beta,
                          const LaplaceConfig& cfg, double damping, int& iterations) {
  const int k = static_cast<int>(beta.cols());
  LaplaceFit fit;
  VectorXd z = VectorXd::Zero(k);
  VectorXd score(k);
  MatrixXd info(k, k);
  for (int it = 0; it < cfg.max_iter; ++it) {
    ++iterations;
    latent_score_and_info(z, y_bin, alpha_b, beta, score, info);
    if (score.norm() < cfg.tol) {
      Eigen::LLT<MatrixXd> llt(info);
      fit.mode = z;
      fit.covariance = llt.solve(MatrixXd::Identity(k, k));
      fit.info_chol = llt.matrixL();
      fit.log_det_info = 0.0;
      for (int f = 0; f < k; ++f) fit.log_det_info += 2.0 * std::log(fit.info_chol(f, f));
      fit.converged = true;
      return fit;
    }
    z += damping * info.llt().solve(score);
  }
  fit.converged = false;
  return fit;
}

}  // namespace

LaplaceFit laplace_fit(const VectorXd& y_bin, const VectorXd& alpha_b, const MatrixXd& beta,
                       const LaplaceConfig& cfg) {
  const int k = static_cast<int>(beta.cols());
  if (k == 0) {
    LaplaceFit fit;
    fit.mode = VectorXd(0);
    fit.covariance = MatrixXd(0, 0);
    fit.info_chol = MatrixXd(0, 0);
    return fit;
  }
  int iterations = 0;
  LaplaceFit fit = fisher_scoring(y_bin, alpha_b, beta, cfg, 1.0, iterations);
  if (!fit.converged) fit = fisher_scoring(y_bin, alpha_b, beta, cfg, 0.5, iterations);
  if (!fit.converged) {
    // prior fallback: importance weights stay valid, only efficiency suffers
    fit.mode = VectorXd::Zero(k);
    fit.covariance = MatrixXd::Identity(k, k);
    fit.info_chol = MatrixXd::Identity(k, k);
    fit.log_det_info = 0.0;
  }
  fit.iterations = iterations;
  return fit;
}

LaplaceFit laplace_fit(const VectorXd& y_bin, const Theta& theta, const ModelSpec& spec, int group,
                       const LaplaceConfig& cfg) {
  VectorXd alpha_b = theta.alpha.row(group).tail(spec.p_b);
  MatrixXd beta = latent_binary_loadings(theta, spec, group);
  return laplace_fit(y_bin, alpha_b, beta, cfg);
}

double laplace_logpdf(const VectorXd& z, const LaplaceFit& fit) {
  const int k = static_cast<int>(z.size());
  // density of N(mode, info^{-1}); quadratic form via the info Cholesky
  VectorXd r = z - fit.mode;
  VectorXd half = fit.info_chol.transpose() * r;
  return -0.5 * (k * kLog2Pi - fit.log_det_info + half.squaredNorm());
}

VectorXd laplace_sample(const LaplaceFit& fit, RngStream& rng) {
  const int k = static_cast<int>(fit.mode.size());
  VectorXd e(k);
  for (int f = 0; f < k; ++f) e[f] = rng.normal();
  // z = mode + L^{-T} e gives covariance (L L^T)^{-1} = info^{-1}
  return fit.mode + fit.info_chol.transpose().triangularView<Eigen::Upper>().solve(e);
}

}  // namespace bra
