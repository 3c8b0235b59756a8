#ifndef BRA_LIKELIHOOD_HPP
#define BRA_LIKELIHOOD_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/model.hpp"
#include "bra/param_map.hpp"

namespace bra {

// Per-group sufficient statistics: continuous mean/scatter and binary counts.
struct GroupStats {
  int n = 0;
  Eigen::VectorXd mean;      // p_c
  Eigen::MatrixXd scatter;   // sum (y - mean)(y - mean)^T
  Eigen::VectorXd bin_ones;  // p_b
};

std::vector<GroupStats> compute_group_stats(const Dataset& d, int n_prefix = -1);

// Pooled within-group covariance of the continuous block (prior scaling).
Eigen::MatrixXd pooled_within_covariance(const Dataset& d);

// Model-implied covariance of the continuous block for a group:
// Lambda_c Phi Lambda_c^T + Psi for factor models, the stored full matrix for
// SAT, diag(psi^2) for IND. The binary-row residual structure never reaches
// the continuous rows.
Eigen::MatrixXd marginal_covariance(const Theta& theta, const ModelSpec& spec, int group);

// log N(y_c | alpha_c, Sigma) for one observation given a ready factorisation
double continuous_marginal_point(const Eigen::VectorXd& y_c, const Eigen::VectorXd& alpha_c,
                                 const Eigen::LLT<Eigen::MatrixXd>& sigma_llt);

// Group-aggregated Gaussian log likelihood from sufficient statistics.
// If grads are requested: d_alpha is df/d alpha_c, g_sigma is df/d Sigma in
// the full-matrix inner-product convention <g_sigma, dSigma>.
double continuous_marginal_group(const GroupStats& stats, const Eigen::VectorXd& alpha_c,
                                 const Eigen::LLT<Eigen::MatrixXd>& sigma_llt,
                                 const Eigen::MatrixXd& sigma_inv, Eigen::VectorXd* d_alpha,
                                 Eigen::MatrixXd* g_sigma);

// All-group marginal log likelihood of the continuous block (value only).
double loglik_continuous_marginal(const Dataset& d, const Theta& theta, const ModelSpec& spec);

// Bernoulli-logit log likelihood of one binary response vector given its
// linear predictors; d_eta accumulates y - sigmoid(eta).
double loglik_binary_conditional(const Eigen::VectorXd& y_bin, const Eigen::VectorXd& eta,
                                 Eigen::VectorXd* d_eta);

// Linear predictor of the binary block: alpha_b + Lambda_b z (+ u). In the
// sequential form z holds the binary factor alone.
Eigen::VectorXd binary_eta(const Theta& theta, const ModelSpec& spec, int group,
                           const Eigen::VectorXd& z, const Eigen::VectorXd* u = nullptr);

// d Sigma_c / d x[q] for every unconstrained coordinate feeding the continuous
// marginal covariance of covariance copy `cov`.
std::vector<std::pair<int, Eigen::MatrixXd>> sigma_c_derivatives(const ParamMap& map,
                                                                 const Eigen::VectorXd& x,
                                                                 const Theta& theta, int cov);

}  // namespace bra

#endif
