#ifndef BRA_PARAM_MAP_HPP
#define BRA_PARAM_MAP_HPP

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "bra/model.hpp"

namespace bra {

// --- correlation-matrix bijection via canonical partial correlations ---
//
// Unconstrained x (length K(K-1)/2, row-major strict lower triangle) maps
// through tanh to partial correlations, then to a unit-row Cholesky factor L
// and the correlation matrix L L^T. Templated so derivatives can be taken by
// complex step.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> corr_from_cpc_unc(
    const Eigen::Matrix<T, Eigen::Dynamic, 1>& x, int K) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  Mat L = Mat::Zero(K, K);
  int q = 0;
  for (int i = 0; i < K; ++i) {
    T sum_sq = T(0);
    for (int j = 0; j < i; ++j) {
      T z = std::tanh(x[q++]);
      L(i, j) = z * std::sqrt(T(1) - sum_sq);
      sum_sq += L(i, j) * L(i, j);
    }
    L(i, i) = std::sqrt(T(1) - sum_sq);
  }
  return L * L.transpose();
}

Eigen::VectorXd cpc_unc_from_corr(const Eigen::MatrixXd& corr);
// log |d corr / d x|; if grad != nullptr, adds the gradient into it (same length as x)
double cpc_log_jacobian(const Eigen::VectorXd& x, int K, Eigen::VectorXd* grad = nullptr);
// d corr / d x[q] by complex step
Eigen::MatrixXd cpc_corr_derivative(const Eigen::VectorXd& x, int K, int q);

// --- covariance bijection via log-Cholesky ---
Eigen::MatrixXd cov_from_logchol(const Eigen::VectorXd& x, int p);
Eigen::VectorXd logchol_from_cov(const Eigen::MatrixXd& cov);
double logchol_log_jacobian(const Eigen::VectorXd& x, int p, Eigen::VectorXd* grad = nullptr);
// d cov / d x[q], analytic
Eigen::MatrixXd logchol_cov_derivative(const Eigen::VectorXd& x, int p, int q);

struct LoadingEntry {
  int cov_index;
  int item;
  int factor;
  bool cross;
  int x_index;
};

// Layout of the unconstrained parameter vector for a model spec:
//   alpha (identity) | per covariance copy: free loadings (identity),
//   log psi^2, correlation CPCs (phi, or SAT's continuous correlation),
//   omega log-Cholesky.
class ParamMap {
 public:
  explicit ParamMap(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  int dim() const { return dim_; }

  int alpha_index(int group, int item) const { return group * spec_.p() + item; }
  const std::vector<LoadingEntry>& loadings() const { return loadings_; }
  int psi_index(int cov, int j) const { return psi_offset_[cov] < 0 ? -1 : psi_offset_[cov] + j; }
  int corr_offset(int cov) const { return corr_offset_[cov]; }  // -1 if absent
  int corr_size() const { return corr_size_; }
  int corr_dim() const { return corr_dim_; }                    // matrix order K
  int omega_offset(int cov) const { return omega_offset_[cov]; }
  int omega_size() const { return omega_size_; }

  Theta constrain(const Eigen::VectorXd& x) const;
  Eigen::VectorXd unconstrain(const Theta& theta) const;

  double log_jacobian(const Eigen::VectorXd& x) const;
  void add_log_jacobian_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  std::vector<std::string> names(const OutcomeSchema* schema = nullptr) const;

 private:
  ModelSpec spec_;
  int dim_ = 0;
  std::vector<LoadingEntry> loadings_;
  std::vector<int> psi_offset_;
  std::vector<int> corr_offset_;
  std::vector<int> omega_offset_;
  int corr_size_ = 0, corr_dim_ = 0, omega_size_ = 0;
};

}  // namespace bra

#endif
