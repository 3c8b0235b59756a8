#ifndef BRA_PRIOR_HPP
#define BRA_PRIOR_HPP

#include <Eigen/Dense>

#include "bra/model.hpp"
#include "bra/param_map.hpp"
#include "bra/rng.hpp"

namespace bra {

// Prior stack: normals on intercepts and loadings, inverse-gamma on
// idiosyncratic variances scaled by the sample covariance, LKJ on correlation
// matrices, inverse-Wishart on the binary residual covariance.
class PriorStack {
 public:
  // s_y: sample covariance of the continuous observations (pooled within
  // group). May be 0x0 when p_c == 0 or when cfg fixes the loading scale and
  // psi scales explicitly.
  PriorStack(const ModelSpec& spec, const PriorConfig& cfg, const Eigen::MatrixXd& s_y);

  double log_prior(const Theta& theta) const;

  // Value of log prior(constrain(x)); gradient (including nothing of the
  // Jacobian, which ParamMap handles) accumulated into grad when non-null.
  double log_prior_unconstrained(const ParamMap& map, const Eigen::VectorXd& x,
                                 Eigen::VectorXd* grad) const;

  Theta sample(RngStream& rng) const;

  double loading_sd(bool binary_item, bool cross) const;
  double psi_ig_shape() const { return cfg_.c0; }
  double psi_ig_scale(int j) const { return psi_scale_[j]; }
  const PriorConfig& config() const { return cfg_; }

 private:
  ModelSpec spec_;
  PriorConfig cfg_;
  double loading_sd_cont_ = 1.0;
  Eigen::VectorXd psi_scale_;  // p_c inverse-gamma scales
  double iw_dof_ = 0.0;
};

// LKJ(eta) log density on a correlation matrix, exactly normalised.
double lkj_logpdf(const Eigen::MatrixXd& corr, double eta);

// Beta shape for the canonical partial correlation in column c (0-indexed) of
// a K x K correlation matrix under LKJ(eta).
double lkj_cpc_beta_shape(double eta, int K, int column);

Eigen::MatrixXd sample_lkj(int K, double eta, RngStream& rng);
Eigen::MatrixXd sample_inv_wishart_identity(int p, double dof, RngStream& rng);

}  // namespace bra

#endif
