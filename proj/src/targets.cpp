#include "bra/targets.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bra/math.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

LatentKind latent_kind_for(const ModelSpec& spec) {
  if (spec.is_benchmark() || spec.p_b == 0) return LatentKind::None;
  if (spec.variant == Variant::EZ1) return LatentKind::SequentialZ;
  return LatentKind::Augmented;
}

namespace {

struct PreparedData {
  int n = 0;
  std::vector<int> group;
  std::vector<VectorXd> y_c;
  std::vector<VectorXd> y_b;
  std::vector<GroupStats> stats;
};

PreparedData prepare(const Dataset& d, int n_prefix) {
  PreparedData out;
  out.n = (n_prefix < 0) ? d.n() : n_prefix;
  if (out.n > d.n()) throw std::invalid_argument("make_posterior: prefix exceeds dataset size");
  const int p_c = d.schema().p_continuous();
  const int p_b = d.schema().p_binary();
  out.group.reserve(out.n);
  for (int i = 0; i < out.n; ++i) {
    out.group.push_back(d.row(i).group);
    out.y_c.push_back(d.row(i).y.head(p_c));
    out.y_b.push_back(d.row(i).y.tail(p_b));
  }
  out.stats = compute_group_stats(d, out.n);
  return out;
}

// x index of lambda(item, factor) in covariance copy c, or -1 when fixed/zero
std::vector<MatrixXd> loading_index_tables(const ParamMap& map) {
  const auto& spec = map.spec();
  std::vector<MatrixXd> tables(spec.n_cov_copies(),
                               MatrixXd::Constant(spec.p(), std::max(spec.k, 1), -1.0));
  for (const auto& e : map.loadings()) tables[e.cov_index](e.item, e.factor) = e.x_index;
  return tables;
}

class PosteriorEval {
 public:
  PosteriorEval(const Dataset& d, int n_prefix, const ModelSpec& spec,
                std::shared_ptr<const ParamMap> map, std::shared_ptr<const PriorStack> prior)
      : spec_(spec),
        map_(std::move(map)),
        prior_(std::move(prior)),
        data_(prepare(d, n_prefix)),
        kind_(latent_kind_for(spec)),
        lam_idx_(loading_index_tables(*map_)) {
    theta_dim_ = map_->dim();
    z_dim_ = (kind_ == LatentKind::None) ? 0 : (kind_ == LatentKind::SequentialZ ? 1 : spec_.k);
    u_dim_ = (kind_ == LatentKind::Augmented) ? spec_.u_dim() : 0;
    dim_ = theta_dim_ + data_.n * (z_dim_ + u_dim_);
  }

  int dim() const { return dim_; }
  int theta_dim() const { return theta_dim_; }
  int n() const { return data_.n; }
  int z_dim() const { return z_dim_; }
  int u_dim() const { return u_dim_; }
  LatentKind kind() const { return kind_; }

  double operator()(const VectorXd& x, VectorXd* grad) const {
    if (grad) grad->setZero(dim_);
    Theta theta = map_->constrain(x.head(theta_dim_));
    double val = prior_->log_prior_unconstrained(*map_, x, grad);
    val += map_->log_jacobian(x);
    if (grad) map_->add_log_jacobian_grad(x, *grad);

    switch (kind_) {
      case LatentKind::None:
        val += marginal_block(theta, x, grad);
        if (spec_.is_benchmark() && spec_.p_b > 0) val += benchmark_binary_block(theta, grad);
        break;
      case LatentKind::SequentialZ:
        val += marginal_block(theta, x, grad);
        val += sequential_z_block(theta, x, grad);
        break;
      case LatentKind::Augmented:
        val += augmented_block(theta, x, grad);
        break;
    }
    return val;
  }

 private:
  int cov_index(int group) const { return spec_.pooled ? 0 : group; }

  // group-aggregated marginal Gaussian log likelihood of the continuous block
  double marginal_block(const Theta& theta, const VectorXd& x, VectorXd* grad) const {
    const int p_c = spec_.p_c;
    if (p_c == 0) return 0.0;
    const int n_cov = spec_.n_cov_copies();
    std::vector<bool> ready(n_cov, false);
    std::vector<Eigen::LLT<MatrixXd>> llt(n_cov);
    std::vector<MatrixXd> inv(n_cov);
    std::vector<MatrixXd> g_sigma(n_cov, MatrixXd::Zero(p_c, p_c));
    std::vector<bool> used(n_cov, false);

    double val = 0.0;
    for (int r = 0; r < spec_.n_groups; ++r) {
      if (data_.stats[r].n == 0) continue;
      const int c = cov_index(r);
      if (!ready[c]) {
        MatrixXd sigma = marginal_covariance(theta, spec_, r);
        llt[c].compute(sigma);
        if (llt[c].info() != Eigen::Success)
          return -std::numeric_limits<double>::infinity();
        inv[c] = llt[c].solve(MatrixXd::Identity(p_c, p_c));
        ready[c] = true;
      }
      used[c] = true;
      VectorXd alpha_c = theta.alpha.row(r).head(p_c);
      VectorXd d_alpha;
      MatrixXd g;
      val += continuous_marginal_group(data_.stats[r], alpha_c, llt[c], inv[c],
                                       grad ? &d_alpha : nullptr, grad ? &g : nullptr);
      if (grad) {
        for (int j = 0; j < p_c; ++j) (*grad)[map_->alpha_index(r, j)] += d_alpha[j];
        g_sigma[c] += g;
      }
    }
    if (grad) {
      for (int c = 0; c < n_cov; ++c) {
        if (!used[c]) continue;
        for (const auto& [idx, d_sigma] : sigma_c_derivatives(*map_, x, theta, c))
          (*grad)[idx] += (g_sigma[c].array() * d_sigma.array()).sum();
      }
    }
    return val;
  }

  // independent Bernoulli-logit block of the benchmark models
  double benchmark_binary_block(const Theta& theta, VectorXd* grad) const {
    double val = 0.0;
    for (int r = 0; r < spec_.n_groups; ++r) {
      const auto& s = data_.stats[r];
      if (s.n == 0) continue;
      for (int j = 0; j < spec_.p_b; ++j) {
        double a = theta.alpha(r, spec_.p_c + j);
        double ones = s.bin_ones[j];
        val += ones * log_sigmoid(a) + (s.n - ones) * log1m_sigmoid(a);
        if (grad) (*grad)[map_->alpha_index(r, spec_.p_c + j)] += ones - s.n * sigmoid(a);
      }
    }
    return val;
  }

  // single-factor form: scalar z per subject drives the binary block only
  double sequential_z_block(const Theta& theta, const VectorXd& x, VectorXd* grad) const {
    const int fb = spec_.binary_factor();
    double val = 0.0;
    for (int i = 0; i < data_.n; ++i) {
      const int r = data_.group[i];
      const int c = cov_index(r);
      const auto& gc = theta.cov[c];
      const double z = x[theta_dim_ + i];
      double gz = 0.0;
      for (int j = 0; j < spec_.p_b; ++j) {
        const double lam = gc.lambda(spec_.p_c + j, fb);
        const double eta = theta.alpha(r, spec_.p_c + j) + lam * z;
        double d_eta;
        bernoulli_logit_term(eta, data_.y_b[i][j], val, d_eta);
        if (grad) {
          (*grad)[map_->alpha_index(r, spec_.p_c + j)] += d_eta;
          const int li = static_cast<int>(lam_idx_[c](spec_.p_c + j, fb));
          if (li >= 0) (*grad)[li] += d_eta * z;
          gz += d_eta * lam;
        }
      }
      val += -0.5 * (kLog2Pi + z * z);
      if (grad) (*grad)[theta_dim_ + i] += gz - z;
    }
    return val;
  }

  // full augmented likelihood: z ~ N(0, Phi), u ~ N(0, Omega), conditional
  // Gaussian continuous block, conditional Bernoulli binary block
  double augmented_block(const Theta& theta, const VectorXd& x, VectorXd* grad) const {
    const int p_c = spec_.p_c, p_b = spec_.p_b, k = spec_.k;
    const int n_cov = spec_.n_cov_copies();
    const int stride = z_dim_ + u_dim_;

    std::vector<MatrixXd> phi_inv(n_cov), omega_inv(n_cov);
    std::vector<double> phi_logdet(n_cov, 0.0), omega_logdet(n_cov, 0.0);
    for (int c = 0; c < n_cov; ++c) {
      const auto& gc = theta.cov[c];
      Eigen::LLT<MatrixXd> lp(gc.phi);
      if (lp.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
      phi_inv[c] = lp.solve(MatrixXd::Identity(k, k));
      for (int f = 0; f < k; ++f) phi_logdet[c] += 2.0 * std::log(lp.matrixLLT()(f, f));
      if (u_dim_ > 0) {
        Eigen::LLT<MatrixXd> lo(gc.omega);
        if (lo.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        omega_inv[c] = lo.solve(MatrixXd::Identity(p_b, p_b));
        for (int j = 0; j < p_b; ++j) omega_logdet[c] += 2.0 * std::log(lo.matrixLLT()(j, j));
      }
    }

    std::vector<MatrixXd> s_z(n_cov, MatrixXd::Zero(k, k));
    std::vector<MatrixXd> s_u(n_cov, MatrixXd::Zero(p_b, p_b));
    std::vector<int> n_z(n_cov, 0);

    double val = 0.0;
    for (int i = 0; i < data_.n; ++i) {
      const int r = data_.group[i];
      const int c = cov_index(r);
      const auto& gc = theta.cov[c];
      const int off = theta_dim_ + i * stride;
      VectorXd z = x.segment(off, k);
      VectorXd gz = VectorXd::Zero(k);

      // continuous conditional
      for (int j = 0; j < p_c; ++j) {
        double mu = theta.alpha(r, j) + gc.lambda.row(j).head(k).dot(z);
        double res = data_.y_c[i][j] - mu;
        double psi2 = gc.psi2[j];
        val += -0.5 * (kLog2Pi + std::log(psi2) + res * res / psi2);
        if (grad) {
          double d_mu = res / psi2;
          (*grad)[map_->alpha_index(r, j)] += d_mu;
          for (int f = 0; f < k; ++f) {
            const int li = static_cast<int>(lam_idx_[c](j, f));
            if (li >= 0) (*grad)[li] += d_mu * z[f];
            gz[f] += d_mu * gc.lambda(j, f);
          }
          (*grad)[map_->psi_index(c, j)] += -0.5 + res * res / (2.0 * psi2);
        }
      }

      // binary conditional
      for (int j = 0; j < p_b; ++j) {
        double eta = theta.alpha(r, p_c + j) + gc.lambda.row(p_c + j).head(k).dot(z);
        if (u_dim_ > 0) eta += x[off + k + j];
        const double y = data_.y_b[i][j];
        val += (y > 0.5) ? log_sigmoid(eta) : log1m_sigmoid(eta);
        if (grad) {
          double d_eta = y - sigmoid(eta);
          (*grad)[map_->alpha_index(r, p_c + j)] += d_eta;
          for (int f = 0; f < k; ++f) {
            const int li = static_cast<int>(lam_idx_[c](p_c + j, f));
            if (li >= 0) (*grad)[li] += d_eta * z[f];
            gz[f] += d_eta * gc.lambda(p_c + j, f);
          }
          if (u_dim_ > 0) (*grad)[off + k + j] += d_eta;
        }
      }

      // latent priors
      val += -0.5 * (k * kLog2Pi + phi_logdet[c] + z.dot(phi_inv[c] * z));
      if (grad) gz -= phi_inv[c] * z;
      s_z[c] += z * z.transpose();
      ++n_z[c];
      if (u_dim_ > 0) {
        VectorXd u = x.segment(off + k, p_b);
        val += -0.5 * (p_b * kLog2Pi + omega_logdet[c] + u.dot(omega_inv[c] * u));
        if (grad) {
          VectorXd gu = -omega_inv[c] * u;
          for (int j = 0; j < p_b; ++j) (*grad)[off + k + j] += gu[j];
        }
        s_u[c] += u * u.transpose();
      }
      if (grad)
        for (int f = 0; f < k; ++f) (*grad)[off + f] += gz[f];
    }

    if (grad) {
      for (int c = 0; c < n_cov; ++c) {
        if (n_z[c] == 0) continue;
        if (spec_.phi_free() && map_->corr_offset(c) >= 0) {
          MatrixXd g_phi =
              0.5 * (phi_inv[c] * s_z[c] * phi_inv[c] - double(n_z[c]) * phi_inv[c]);
          VectorXd xc = x.segment(map_->corr_offset(c), map_->corr_size());
          for (int q = 0; q < map_->corr_size(); ++q) {
            MatrixXd d_phi = cpc_corr_derivative(xc, k, q);
            (*grad)[map_->corr_offset(c) + q] += (g_phi.array() * d_phi.array()).sum();
          }
        }
        if (u_dim_ > 0 && map_->omega_offset(c) >= 0) {
          MatrixXd g_om =
              0.5 * (omega_inv[c] * s_u[c] * omega_inv[c] - double(n_z[c]) * omega_inv[c]);
          VectorXd xo = x.segment(map_->omega_offset(c), map_->omega_size());
          for (int q = 0; q < map_->omega_size(); ++q) {
            MatrixXd d_om = logchol_cov_derivative(xo, p_b, q);
            (*grad)[map_->omega_offset(c) + q] += (g_om.array() * d_om.array()).sum();
          }
        }
      }
    }
    return val;
  }

  ModelSpec spec_;
  std::shared_ptr<const ParamMap> map_;
  std::shared_ptr<const PriorStack> prior_;
  PreparedData data_;
  LatentKind kind_;
  std::vector<MatrixXd> lam_idx_;
  int theta_dim_ = 0, z_dim_ = 0, u_dim_ = 0, dim_ = 0;
};

}  // namespace

PosteriorTarget make_posterior(const Dataset& d, int n_prefix, const ModelSpec& spec,
                               std::shared_ptr<const ParamMap> map,
                               std::shared_ptr<const PriorStack> prior) {
  auto eval = std::make_shared<PosteriorEval>(d, n_prefix, spec, std::move(map), std::move(prior));
  PosteriorTarget out;
  out.kind = eval->kind();
  out.theta_dim = eval->theta_dim();
  out.n_subjects = eval->n();
  out.z_dim = eval->z_dim();
  out.u_dim = eval->u_dim();
  out.target.dim = eval->dim();
  out.target.logp = [eval](const VectorXd& x, VectorXd* grad) { return (*eval)(x, grad); };
  return out;
}

double loglik_point_marginal(const Theta& theta, const ModelSpec& spec, const VectorXd& y,
                             int group) {
  if (!(spec.is_benchmark() || spec.p_b == 0))
    throw std::invalid_argument("loglik_point_marginal: model has no closed-form marginal");
  double ll = 0.0;
  if (spec.p_c > 0) {
    MatrixXd sigma = marginal_covariance(theta, spec, group);
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("loglik_point_marginal: singular implied covariance");
    ll += continuous_marginal_point(y.head(spec.p_c), theta.alpha.row(group).head(spec.p_c), llt);
  }
  for (int j = 0; j < spec.p_b; ++j) {
    double a = theta.alpha(group, spec.p_c + j);
    ll += (y[spec.p_c + j] > 0.5) ? log_sigmoid(a) : log1m_sigmoid(a);
  }
  return ll;
}

}  // namespace bra
