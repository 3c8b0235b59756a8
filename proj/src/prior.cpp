#include "bra/prior.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "bra/math.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double lkj_cpc_beta_shape(double eta, int K, int column) {
  return eta + 0.5 * (K - 2 - column);
}

double lkj_logpdf(const MatrixXd& corr, double eta) {
  const int K = static_cast<int>(corr.rows());
  if (K <= 1) return 0.0;
  VectorXd x = cpc_unc_from_corr(corr);
  // density factorises over canonical partial correlations; subtract the
  // z -> corr volume so the result is a density in the matrix itself
  double logp = 0.0;
  int q = 0;
  MatrixXd L = MatrixXd::Zero(K, K);
  double log_jac_z_to_corr = 0.0;
  for (int i = 0; i < K; ++i) {
    double sum_sq = 0.0;
    for (int j = 0; j < i; ++j) {
      double z = std::tanh(x[q++]);
      double b = lkj_cpc_beta_shape(eta, K, j);
      logp += scaled_beta_logpdf(z, b, b);
      double rem = 1.0 - sum_sq;
      log_jac_z_to_corr += std::log(L(j, j)) + 0.5 * std::log(rem);
      L(i, j) = z * std::sqrt(rem);
      sum_sq += L(i, j) * L(i, j);
    }
    L(i, i) = std::sqrt(1.0 - sum_sq);
  }
  return logp - log_jac_z_to_corr;
}

MatrixXd sample_lkj(int K, double eta, RngStream& rng) {
  VectorXd x(K * (K - 1) / 2);
  int q = 0;
  for (int i = 1; i < K; ++i)
    for (int j = 0; j < i; ++j) {
      double b = lkj_cpc_beta_shape(eta, K, j);
      double z = 2.0 * rng.beta(b, b) - 1.0;
      x[q++] = std::atanh(z);
    }
  return corr_from_cpc_unc<double>(x, K);
}

MatrixXd sample_inv_wishart_identity(int p, double dof, RngStream& rng) {
  if (dof <= p - 1) throw std::invalid_argument("inverse-Wishart dof too small");
  // Bartlett factor of W ~ Wishart(I, dof); return W^{-1}
  MatrixXd a = MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (dof - i)));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  MatrixXd a_inv = a.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(p, p));
  return a_inv.transpose() * a_inv;
}

PriorStack::PriorStack(const ModelSpec& spec, const PriorConfig& cfg, const MatrixXd& s_y)
    : spec_(spec), cfg_(cfg) {
  iw_dof_ = spec_.p_b + cfg_.iw_dof_offset;
  psi_scale_.resize(spec_.p_c);
  if (spec_.p_c > 0) {
    if (s_y.rows() != spec_.p_c || s_y.cols() != spec_.p_c)
      throw std::invalid_argument("prior: sample covariance has wrong shape");
    MatrixXd s_inv = s_y.llt().solve(MatrixXd::Identity(spec_.p_c, spec_.p_c));
    for (int j = 0; j < spec_.p_c; ++j) psi_scale_[j] = (cfg_.c0 - 1.0) / s_inv(j, j);
    loading_sd_cont_ = (cfg_.loading_sd_continuous > 0.0)
                           ? cfg_.loading_sd_continuous
                           : 2.0 * std::sqrt(s_y(0, 0));
  } else {
    loading_sd_cont_ = (cfg_.loading_sd_continuous > 0.0) ? cfg_.loading_sd_continuous : 1.0;
  }
}

double PriorStack::loading_sd(bool binary_item, bool cross) const {
  if (cross) return cfg_.crossloading_sd;
  return binary_item ? cfg_.loading_sd_binary : loading_sd_cont_;
}

double PriorStack::log_prior(const Theta& theta) const {
  double logp = 0.0;
  for (int r = 0; r < spec_.n_groups; ++r)
    for (int j = 0; j < spec_.p(); ++j)
      logp += norm_logpdf(theta.alpha(r, j), 0.0, cfg_.alpha_sd);
  for (const auto& c : theta.cov) {
    for (int f = 0; f < spec_.k; ++f)
      for (int j = 0; j < spec_.p(); ++j) {
        const int m = spec_.loading_mask(j, f);
        if (m == kMaskPrincipal || m == kMaskCross)
          logp += norm_logpdf(c.lambda(j, f), 0.0, loading_sd(j >= spec_.p_c, m == kMaskCross));
      }
    for (int j = 0; j < spec_.p_c; ++j)
      logp += inv_gamma_logpdf(c.psi2[j], cfg_.c0, psi_scale_[j]);
    if (spec_.phi_free()) logp += lkj_logpdf(c.phi, cfg_.lkj_eta);
    if (spec_.variant == Variant::SAT && spec_.p_c > 1) logp += lkj_logpdf(c.corr_c, cfg_.lkj_eta);
    if (spec_.has_omega()) logp += inv_wishart_logpdf_identity(c.omega, iw_dof_);
  }
  return logp;
}

double PriorStack::log_prior_unconstrained(const ParamMap& map, const VectorXd& x,
                                           VectorXd* grad) const {
  double logp = 0.0;
  // alphas
  const double a_var = cfg_.alpha_sd * cfg_.alpha_sd;
  for (int r = 0; r < spec_.n_groups; ++r)
    for (int j = 0; j < spec_.p(); ++j) {
      const int idx = map.alpha_index(r, j);
      logp += norm_logpdf(x[idx], 0.0, cfg_.alpha_sd);
      if (grad) (*grad)[idx] += -x[idx] / a_var;
    }
  // loadings
  for (const auto& e : map.loadings()) {
    const double sd = loading_sd(e.item >= spec_.p_c, e.cross);
    logp += norm_logpdf(x[e.x_index], 0.0, sd);
    if (grad) (*grad)[e.x_index] += -x[e.x_index] / (sd * sd);
  }
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    // psi^2 = exp(t), inverse-gamma density evaluated in t (Jacobian excluded)
    for (int j = 0; j < spec_.p_c; ++j) {
      const int idx = map.psi_index(c, j);
      const double t = x[idx];
      const double a = cfg_.c0, b = psi_scale_[j];
      logp += a * std::log(b) - std::lgamma(a) - (a + 1.0) * t - b * std::exp(-t);
      if (grad) (*grad)[idx] += -(a + 1.0) + b * std::exp(-t);
    }
    // LKJ on the correlation block. In CPC coordinates the density plus the
    // ParamMap Jacobian reduces to independent scaled-beta terms; the Jacobian
    // piece is added by ParamMap, so here we subtract it analytically by
    // evaluating the matrix-space density.
    if (map.corr_offset(c) >= 0) {
      const int K = map.corr_dim();
      VectorXd xc = x.segment(map.corr_offset(c), map.corr_size());
      MatrixXd corr = corr_from_cpc_unc<double>(xc, K);
      logp += lkj_logpdf(corr, cfg_.lkj_eta);
      if (grad) {
        // combined d/dx of [lkj(corr(x)) + log|dcorr/dx|] is -2 b tanh(x);
        // remove the Jacobian part that ParamMap adds separately
        VectorXd jac_grad = VectorXd::Zero(map.corr_size());
        cpc_log_jacobian(xc, K, &jac_grad);
        int q = 0;
        for (int i = 1; i < K; ++i)
          for (int j = 0; j < i; ++j) {
            double b = lkj_cpc_beta_shape(cfg_.lkj_eta, K, j);
            (*grad)[map.corr_offset(c) + q] += -2.0 * b * std::tanh(xc[q]) - jac_grad[q];
            ++q;
          }
      }
    }
    // inverse-Wishart on omega
    if (map.omega_offset(c) >= 0) {
      const int p = spec_.p_b;
      VectorXd xo = x.segment(map.omega_offset(c), map.omega_size());
      MatrixXd omega = cov_from_logchol(xo, p);
      logp += inv_wishart_logpdf_identity(omega, iw_dof_);
      if (grad) {
        Eigen::LLT<MatrixXd> llt(omega);
        MatrixXd omega_inv = llt.solve(MatrixXd::Identity(p, p));
        MatrixXd g_mat = -0.5 * (iw_dof_ + p + 1.0) * omega_inv + 0.5 * omega_inv * omega_inv;
        for (int q = 0; q < map.omega_size(); ++q) {
          MatrixXd d = logchol_cov_derivative(xo, p, q);
          (*grad)[map.omega_offset(c) + q] += (g_mat.array() * d.array()).sum();
        }
      }
    }
  }
  return logp;
}

Theta PriorStack::sample(RngStream& rng) const {
  Theta th = make_zero_theta(spec_);
  for (int r = 0; r < spec_.n_groups; ++r)
    for (int j = 0; j < spec_.p(); ++j) th.alpha(r, j) = cfg_.alpha_sd * rng.normal();
  for (auto& c : th.cov) {
    for (int f = 0; f < spec_.k; ++f)
      for (int j = 0; j < spec_.p(); ++j) {
        const int m = spec_.loading_mask(j, f);
        if (m == kMaskPrincipal || m == kMaskCross)
          c.lambda(j, f) = loading_sd(j >= spec_.p_c, m == kMaskCross) * rng.normal();
      }
    for (int j = 0; j < spec_.p_c; ++j) c.psi2[j] = psi_scale_[j] / rng.gamma(cfg_.c0);
    if (spec_.phi_free()) c.phi = sample_lkj(spec_.k, cfg_.lkj_eta, rng);
    if (spec_.variant == Variant::SAT && spec_.p_c > 1)
      c.corr_c = sample_lkj(spec_.p_c, cfg_.lkj_eta, rng);
    if (spec_.has_omega()) c.omega = sample_inv_wishart_identity(spec_.p_b, iw_dof_, rng);
  }
  return th;
}

}  // namespace bra
