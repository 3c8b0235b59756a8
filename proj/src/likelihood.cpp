#include "bra/likelihood.hpp"

#include <cmath>
#include <stdexcept>

#include "bra/math.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<GroupStats> compute_group_stats(const Dataset& d, int n_prefix) {
  const auto& schema = d.schema();
  const int R = schema.n_groups();
  const int p_c = schema.p_continuous();
  const int p_b = schema.p_binary();
  const int n = (n_prefix < 0) ? d.n() : n_prefix;

  std::vector<GroupStats> stats(R);
  for (auto& s : stats) {
    s.mean = VectorXd::Zero(p_c);
    s.scatter = MatrixXd::Zero(p_c, p_c);
    s.bin_ones = VectorXd::Zero(p_b);
  }
  for (int i = 0; i < n; ++i) {
    auto& s = stats[d.row(i).group];
    ++s.n;
    if (p_c > 0) s.mean += d.row(i).y.head(p_c);
    if (p_b > 0) s.bin_ones += d.row(i).y.tail(p_b);
  }
  for (auto& s : stats)
    if (s.n > 0 && p_c > 0) s.mean /= s.n;
  for (int i = 0; i < n; ++i) {
    if (p_c == 0) break;
    auto& s = stats[d.row(i).group];
    VectorXd r = d.row(i).y.head(p_c) - s.mean;
    s.scatter += r * r.transpose();
  }
  return stats;
}

MatrixXd pooled_within_covariance(const Dataset& d) {
  const int p_c = d.schema().p_continuous();
  if (p_c == 0) return MatrixXd(0, 0);
  auto stats = compute_group_stats(d);
  MatrixXd scatter = MatrixXd::Zero(p_c, p_c);
  int n = 0, nonempty = 0;
  for (const auto& s : stats) {
    scatter += s.scatter;
    n += s.n;
    if (s.n > 0) ++nonempty;
  }
  if (n - nonempty < p_c)
    throw std::invalid_argument("pooled_within_covariance: too few observations");
  return scatter / (n - nonempty);
}

MatrixXd marginal_covariance(const Theta& theta, const ModelSpec& spec, int group) {
  const auto& c = theta.cov_for(group);
  switch (spec.variant) {
    case Variant::SAT:
      return c.sigma_full();
    case Variant::IND:
      return MatrixXd(c.psi2.asDiagonal());
    default: {
      MatrixXd lambda_c = c.lambda.topRows(spec.p_c);
      MatrixXd sigma = lambda_c * c.phi * lambda_c.transpose();
      sigma += MatrixXd(c.psi2.asDiagonal());
      return sigma;
    }
  }
}

double continuous_marginal_point(const VectorXd& y_c, const VectorXd& alpha_c,
                                 const Eigen::LLT<MatrixXd>& sigma_llt) {
  VectorXd r = y_c - alpha_c;
  return mvn_logpdf_chol(r, sigma_llt);
}

double continuous_marginal_group(const GroupStats& stats, const VectorXd& alpha_c,
                                 const Eigen::LLT<MatrixXd>& sigma_llt, const MatrixXd& sigma_inv,
                                 VectorXd* d_alpha, MatrixXd* g_sigma) {
  const int p = static_cast<int>(alpha_c.size());
  if (stats.n == 0) {
    if (d_alpha) d_alpha->setZero(p);
    if (g_sigma) g_sigma->setZero(p, p);
    return 0.0;
  }
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(sigma_llt.matrixLLT()(i, i));
  VectorXd dm = stats.mean - alpha_c;
  MatrixXd m = stats.scatter + stats.n * (dm * dm.transpose());
  double ll = -0.5 * stats.n * (p * kLog2Pi + logdet) - 0.5 * (sigma_inv.array() * m.array()).sum();
  if (d_alpha) *d_alpha = stats.n * (sigma_inv * dm);
  if (g_sigma) *g_sigma = 0.5 * (sigma_inv * m * sigma_inv - stats.n * sigma_inv);
  return ll;
}

double loglik_continuous_marginal(const Dataset& d, const Theta& theta, const ModelSpec& spec) {
  const int p_c = spec.p_c;
  if (p_c == 0) return 0.0;
  auto stats = compute_group_stats(d);
  double ll = 0.0;
  for (int r = 0; r < spec.n_groups; ++r) {
    if (stats[r].n == 0) continue;
    MatrixXd sigma = marginal_covariance(theta, spec, r);
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("loglik_continuous_marginal: singular implied covariance");
    MatrixXd sigma_inv = llt.solve(MatrixXd::Identity(p_c, p_c));
    ll += continuous_marginal_group(stats[r], theta.alpha.row(r).head(p_c), llt, sigma_inv,
                                    nullptr, nullptr);
  }
  return ll;
}

double loglik_binary_conditional(const VectorXd& y_bin, const VectorXd& eta, VectorXd* d_eta) {
  double ll = 0.0;
  for (int j = 0; j < y_bin.size(); ++j) {
    ll += (y_bin[j] > 0.5) ? log_sigmoid(eta[j]) : log1m_sigmoid(eta[j]);
    if (d_eta) (*d_eta)[j] += y_bin[j] - sigmoid(eta[j]);
  }
  return ll;
}

VectorXd binary_eta(const Theta& theta, const ModelSpec& spec, int group, const VectorXd& z,
                    const VectorXd* u) {
  const auto& c = theta.cov_for(group);
  VectorXd eta = theta.alpha.row(group).tail(spec.p_b);
  if (spec.binary_factor() >= 0 && z.size() > 0) {
    if (spec.sequential_form) {
      eta += c.lambda.col(spec.binary_factor()).tail(spec.p_b) * z[0];
    } else {
      eta += c.lambda.bottomRows(spec.p_b) * z;
    }
  }
  if (u) eta += *u;
  return eta;
}

std::vector<std::pair<int, MatrixXd>> sigma_c_derivatives(const ParamMap& map, const VectorXd& x,
                                                          const Theta& theta, int cov) {
  const ModelSpec& spec = map.spec();
  const int p_c = spec.p_c;
  std::vector<std::pair<int, MatrixXd>> out;
  if (p_c == 0) return out;
  const auto& gc = theta.cov[cov];

  if (spec.variant == Variant::SAT) {
    MatrixXd sigma = gc.sigma_full();
    for (int j = 0; j < p_c; ++j) {
      MatrixXd d = MatrixXd::Zero(p_c, p_c);
      d.row(j) += 0.5 * sigma.row(j);
      d.col(j) += 0.5 * sigma.col(j);
      out.emplace_back(map.psi_index(cov, j), d);
    }
    if (map.corr_offset(cov) >= 0) {
      VectorXd sd = gc.psi2.array().sqrt();
      VectorXd xc = x.segment(map.corr_offset(cov), map.corr_size());
      for (int q = 0; q < map.corr_size(); ++q) {
        MatrixXd dcorr = cpc_corr_derivative(xc, p_c, q);
        out.emplace_back(map.corr_offset(cov) + q,
                         MatrixXd(sd.asDiagonal() * dcorr * sd.asDiagonal()));
      }
    }
    return out;
  }

  if (spec.variant == Variant::IND) {
    for (int j = 0; j < p_c; ++j) {
      MatrixXd d = MatrixXd::Zero(p_c, p_c);
      d(j, j) = gc.psi2[j];
      out.emplace_back(map.psi_index(cov, j), d);
    }
    return out;
  }

  // factor variants: Sigma = Lambda_c Phi Lambda_c^T + diag(psi^2)
  MatrixXd lambda_c = gc.lambda.topRows(p_c);
  MatrixXd phi_lt = gc.phi * lambda_c.transpose();  // k x p_c
  for (const auto& e : map.loadings()) {
    if (e.cov_index != cov || e.item >= p_c) continue;
    MatrixXd d = MatrixXd::Zero(p_c, p_c);
    d.row(e.item) += phi_lt.row(e.factor);
    d.col(e.item) += phi_lt.row(e.factor).transpose();
    out.emplace_back(e.x_index, d);
  }
  for (int j = 0; j < p_c; ++j) {
    MatrixXd d = MatrixXd::Zero(p_c, p_c);
    d(j, j) = gc.psi2[j];
    out.emplace_back(map.psi_index(cov, j), d);
  }
  if (spec.phi_free() && map.corr_offset(cov) >= 0) {
    VectorXd xc = x.segment(map.corr_offset(cov), map.corr_size());
    for (int q = 0; q < map.corr_size(); ++q) {
      MatrixXd dphi = cpc_corr_derivative(xc, spec.k, q);
      out.emplace_back(map.corr_offset(cov) + q,
                       MatrixXd(lambda_c * dphi * lambda_c.transpose()));
    }
  }
  return out;
}

}  // namespace bra
