#include "bra/param_map.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd cpc_unc_from_corr(const MatrixXd& corr) {
  const int K = static_cast<int>(corr.rows());
  Eigen::LLT<MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("cpc_unc_from_corr: matrix not positive definite");
  MatrixXd L = llt.matrixL();
  VectorXd x(K * (K - 1) / 2);
  int q = 0;
  for (int i = 1; i < K; ++i) {
    double sum_sq = 0.0;
    for (int j = 0; j < i; ++j) {
      double denom = std::sqrt(1.0 - sum_sq);
      double z = L(i, j) / denom;
      x[q++] = std::atanh(z);
      sum_sq += L(i, j) * L(i, j);
    }
  }
  return x;
}

double cpc_log_jacobian(const VectorXd& x, int K, VectorXd* grad) {
  // log|d corr / d x| = sum over entries (i>j) of
  //   log(1 - z_ij^2) + log L(j,j) + 0.5 log(1 - sum_{l<j} L(i,l)^2)
  // evaluated on the running Cholesky construction.
  double logj = 0.0;
  if (grad == nullptr) {
    MatrixXd L = MatrixXd::Zero(K, K);
    int q = 0;
    for (int i = 0; i < K; ++i) {
      double sum_sq = 0.0;
      for (int j = 0; j < i; ++j) {
        double z = std::tanh(x[q++]);
        double rem = 1.0 - sum_sq;
        logj += std::log1p(-z * z) + std::log(L(j, j)) + 0.5 * std::log(rem);
        L(i, j) = z * std::sqrt(rem);
        sum_sq += L(i, j) * L(i, j);
      }
      L(i, i) = std::sqrt(1.0 - sum_sq);
    }
    return logj;
  }
  // gradient via complex step on the value computation above
  using C = std::complex<double>;
  auto value = [&](const Eigen::Matrix<C, Eigen::Dynamic, 1>& xc) {
    Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> L =
        Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>::Zero(K, K);
    C out(0.0, 0.0);
    int q = 0;
    for (int i = 0; i < K; ++i) {
      C sum_sq(0.0, 0.0);
      for (int j = 0; j < i; ++j) {
        C z = std::tanh(xc[q++]);
        C rem = C(1.0, 0.0) - sum_sq;
        out += std::log(C(1.0, 0.0) - z * z) + std::log(L(j, j)) + C(0.5) * std::log(rem);
        L(i, j) = z * std::sqrt(rem);
        sum_sq += L(i, j) * L(i, j);
      }
      L(i, i) = std::sqrt(C(1.0, 0.0) - sum_sq);
    }
    return out;
  };
  const double h = 1e-100;
  Eigen::Matrix<C, Eigen::Dynamic, 1> xc = x.cast<C>();
  logj = value(xc).real();
  for (int q = 0; q < x.size(); ++q) {
    xc[q] = C(x[q], h);
    (*grad)[q] += value(xc).imag() / h;
    xc[q] = C(x[q], 0.0);
  }
  return logj;
}

MatrixXd cpc_corr_derivative(const VectorXd& x, int K, int q) {
  using C = std::complex<double>;
  const double h = 1e-100;
  Eigen::Matrix<C, Eigen::Dynamic, 1> xc = x.cast<C>();
  xc[q] = C(x[q], h);
  Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> corr = corr_from_cpc_unc<C>(xc, K);
  return corr.imag() / h;
}

MatrixXd cov_from_logchol(const VectorXd& x, int p) {
  MatrixXd L = MatrixXd::Zero(p, p);
  int q = 0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j <= i; ++j) {
      L(i, j) = (i == j) ? std::exp(x[q]) : x[q];
      ++q;
    }
  return L * L.transpose();
}

VectorXd logchol_from_cov(const MatrixXd& cov) {
  const int p = static_cast<int>(cov.rows());
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("logchol_from_cov: matrix not positive definite");
  MatrixXd L = llt.matrixL();
  VectorXd x(p * (p + 1) / 2);
  int q = 0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j <= i; ++j) x[q++] = (i == j) ? std::log(L(i, i)) : L(i, j);
  return x;
}

double logchol_log_jacobian(const VectorXd& x, int p, VectorXd* grad) {
  // |d cov / d free| = 2^p prod_i L_ii^(p-i) times prod_i L_ii for the log-diag map
  double logj = p * std::log(2.0);
  int q = 0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j <= i; ++j) {
      if (i == j) {
        logj += (p - i + 1) * x[q];
        if (grad) (*grad)[q] += p - i + 1;
      }
      ++q;
    }
  return logj;
}

MatrixXd logchol_cov_derivative(const VectorXd& x, int p, int q) {
  MatrixXd L = MatrixXd::Zero(p, p);
  int t = 0;
  int qi = -1, qj = -1;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j <= i; ++j) {
      L(i, j) = (i == j) ? std::exp(x[t]) : x[t];
      if (t == q) {
        qi = i;
        qj = j;
      }
      ++t;
    }
  // dL is E_{qi,qj} for an off-diagonal parameter and L_ii * E_ii for a
  // log-diagonal one; d cov = dL L^T + L dL^T = e_qi c^T + c e_qi^T.
  VectorXd c = L.col(qj);
  MatrixXd d = MatrixXd::Zero(p, p);
  d.row(qi) += c.transpose();
  d.col(qi) += c;
  if (qi == qj) d *= L(qi, qi);
  return d;
}

namespace {
int lower_tri_size(int p) { return p * (p + 1) / 2; }
}  // namespace

ParamMap::ParamMap(const ModelSpec& spec) : spec_(spec) {
  const int R = spec_.n_groups;
  const int p = spec_.p();
  dim_ = R * p;  // alpha block first
  const int n_cov = spec_.n_cov_copies();
  psi_offset_.assign(n_cov, -1);
  corr_offset_.assign(n_cov, -1);
  omega_offset_.assign(n_cov, -1);

  if (spec_.phi_free()) {
    corr_dim_ = spec_.k;
    corr_size_ = spec_.k * (spec_.k - 1) / 2;
  } else if (spec_.variant == Variant::SAT && spec_.p_c > 1) {
    corr_dim_ = spec_.p_c;
    corr_size_ = spec_.p_c * (spec_.p_c - 1) / 2;
  }
  omega_size_ = spec_.has_omega() ? lower_tri_size(spec_.p_b) : 0;

  for (int c = 0; c < n_cov; ++c) {
    for (int f = 0; f < spec_.k; ++f)
      for (int j = 0; j < p; ++j) {
        const int m = spec_.loading_mask(j, f);
        if (m == kMaskPrincipal || m == kMaskCross)
          loadings_.push_back(LoadingEntry{c, j, f, m == kMaskCross, dim_++});
      }
    if (spec_.p_c > 0) {
      psi_offset_[c] = dim_;
      dim_ += spec_.p_c;
    }
    if (corr_size_ > 0) {
      corr_offset_[c] = dim_;
      dim_ += corr_size_;
    }
    if (omega_size_ > 0) {
      omega_offset_[c] = dim_;
      dim_ += omega_size_;
    }
  }
}

Theta ParamMap::constrain(const VectorXd& x) const {
  Theta th = make_zero_theta(spec_);
  const int R = spec_.n_groups;
  const int p = spec_.p();
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < p; ++j) th.alpha(r, j) = x[alpha_index(r, j)];
  for (const auto& e : loadings_) th.cov[e.cov_index].lambda(e.item, e.factor) = x[e.x_index];
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    auto& gc = th.cov[c];
    if (psi_offset_[c] >= 0)
      for (int j = 0; j < spec_.p_c; ++j) gc.psi2[j] = std::exp(x[psi_offset_[c] + j]);
    if (corr_offset_[c] >= 0) {
      VectorXd xc = x.segment(corr_offset_[c], corr_size_);
      MatrixXd corr = corr_from_cpc_unc<double>(xc, corr_dim_);
      if (spec_.variant == Variant::SAT)
        gc.corr_c = corr;
      else
        gc.phi = corr;
    }
    if (omega_offset_[c] >= 0)
      gc.omega = cov_from_logchol(x.segment(omega_offset_[c], omega_size_), spec_.p_b);
  }
  return th;
}

VectorXd ParamMap::unconstrain(const Theta& theta) const {
  VectorXd x(dim_);
  const int R = spec_.n_groups;
  const int p = spec_.p();
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < p; ++j) x[alpha_index(r, j)] = theta.alpha(r, j);
  for (const auto& e : loadings_) x[e.x_index] = theta.cov[e.cov_index].lambda(e.item, e.factor);
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    const auto& gc = theta.cov[c];
    if (psi_offset_[c] >= 0)
      for (int j = 0; j < spec_.p_c; ++j) x[psi_offset_[c] + j] = std::log(gc.psi2[j]);
    if (corr_offset_[c] >= 0) {
      const MatrixXd& corr = (spec_.variant == Variant::SAT) ? gc.corr_c : gc.phi;
      x.segment(corr_offset_[c], corr_size_) = cpc_unc_from_corr(corr);
    }
    if (omega_offset_[c] >= 0)
      x.segment(omega_offset_[c], omega_size_) = logchol_from_cov(gc.omega);
  }
  return x;
}

double ParamMap::log_jacobian(const VectorXd& x) const {
  double logj = 0.0;
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    if (psi_offset_[c] >= 0)
      for (int j = 0; j < spec_.p_c; ++j) logj += x[psi_offset_[c] + j];
    if (corr_offset_[c] >= 0)
      logj += cpc_log_jacobian(x.segment(corr_offset_[c], corr_size_), corr_dim_);
    if (omega_offset_[c] >= 0)
      logj += logchol_log_jacobian(x.segment(omega_offset_[c], omega_size_), spec_.p_b);
  }
  return logj;
}

void ParamMap::add_log_jacobian_grad(const VectorXd& x, VectorXd& grad) const {
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    if (psi_offset_[c] >= 0)
      for (int j = 0; j < spec_.p_c; ++j) grad[psi_offset_[c] + j] += 1.0;
    if (corr_offset_[c] >= 0) {
      VectorXd g = VectorXd::Zero(corr_size_);
      cpc_log_jacobian(x.segment(corr_offset_[c], corr_size_), corr_dim_, &g);
      grad.segment(corr_offset_[c], corr_size_) += g;
    }
    if (omega_offset_[c] >= 0) {
      VectorXd g = VectorXd::Zero(omega_size_);
      logchol_log_jacobian(x.segment(omega_offset_[c], omega_size_), spec_.p_b, &g);
      grad.segment(omega_offset_[c], omega_size_) += g;
    }
  }
}

std::vector<std::string> ParamMap::names(const OutcomeSchema* schema) const {
  std::vector<std::string> out(dim_);
  auto item_name = [&](int j) {
    return schema ? schema->items()[j].name : "item" + std::to_string(j + 1);
  };
  auto group_name = [&](int r) {
    return schema ? schema->group_label(r) : "g" + std::to_string(r + 1);
  };
  auto cov_tag = [&](int c) { return spec_.pooled ? std::string() : "," + group_name(c); };
  for (int r = 0; r < spec_.n_groups; ++r)
    for (int j = 0; j < spec_.p(); ++j)
      out[alpha_index(r, j)] = "alpha[" + item_name(j) + "," + group_name(r) + "]";
  for (const auto& e : loadings_)
    out[e.x_index] = "lambda[" + std::to_string(e.item + 1) + "," + std::to_string(e.factor + 1) +
                     cov_tag(e.cov_index) + "]";
  for (int c = 0; c < spec_.n_cov_copies(); ++c) {
    if (psi_offset_[c] >= 0)
      for (int j = 0; j < spec_.p_c; ++j)
        out[psi_offset_[c] + j] = "psi2[" + item_name(j) + cov_tag(c) + "]";
    if (corr_offset_[c] >= 0) {
      const char* base = (spec_.variant == Variant::SAT) ? "sigma_corr" : "phi";
      int q = 0;
      for (int i = 1; i < corr_dim_; ++i)
        for (int j = 0; j < i; ++j)
          out[corr_offset_[c] + q++] = std::string(base) + "[" + std::to_string(i + 1) + "," +
                                       std::to_string(j + 1) + cov_tag(c) + "]";
    }
    if (omega_offset_[c] >= 0) {
      int q = 0;
      for (int i = 0; i < spec_.p_b; ++i)
        for (int j = 0; j <= i; ++j)
          out[omega_offset_[c] + q++] = "omega[" + std::to_string(i + 1) + "," +
                                        std::to_string(j + 1) + cov_tag(c) + "]";
    }
  }
  return out;
}

}  // namespace bra
