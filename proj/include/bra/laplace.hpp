#ifndef BRA_LAPLACE_HPP
#define BRA_LAPLACE_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "bra/model.hpp"
#include "bra/rng.hpp"

namespace bra {

// Gaussian approximation of the per-subject latent posterior pi(z | y_bin, theta)
// for the binary block, located by Fisher scoring.
struct LaplaceFit {
  Eigen::VectorXd mode;        // mu^L
  Eigen::MatrixXd covariance;  // I(mode)^{-1}
  Eigen::MatrixXd info_chol;   // lower Cholesky of I(mode)
  double log_det_info = 0.0;
  int iterations = 0;
  bool converged = true;       // false => prior fallback N(0, I)
};

struct LaplaceConfig {
  double tol = 1e-8;   // gradient norm at the mode
  int max_iter = 50;   // per attempt; one damped restart before giving up
};

// Binary loading rows for the factor(s) kept latent: p_b x z_dim.
Eigen::MatrixXd latent_binary_loadings(const Theta& theta, const ModelSpec& spec, int group);

// log f(y_bin | z) + log N(z; 0, I): the objective being maximised.
double latent_log_target(const Eigen::VectorXd& z, const Eigen::VectorXd& y_bin,
                         const Eigen::VectorXd& alpha_b, const Eigen::MatrixXd& beta);

// Gradient and expected (Fisher) information of latent_log_target at z.
// info = I + sum_j w_j beta_j beta_j^T with w_j = pi_j (1 - pi_j).
void latent_score_and_info(const Eigen::VectorXd& z, const Eigen::VectorXd& y_bin,
                           const Eigen::VectorXd& alpha_b, const Eigen::MatrixXd& beta,
                           Eigen::VectorXd& score, Eigen::MatrixXd& info);

LaplaceFit laplace_fit(const Eigen::VectorXd& y_bin, const Eigen::VectorXd& alpha_b,
                       const Eigen::MatrixXd& beta, const LaplaceConfig& cfg = {});

// Convenience wrapper on a model/theta pair (sequential form).
LaplaceFit laplace_fit(const Eigen::VectorXd& y_bin, const Theta& theta, const ModelSpec& spec,
                       int group, const LaplaceConfig& cfg = {});

double laplace_logpdf(const Eigen::VectorXd& z, const LaplaceFit& fit);
Eigen::VectorXd laplace_sample(const LaplaceFit& fit, RngStream& rng);

}  // namespace bra

#endif
