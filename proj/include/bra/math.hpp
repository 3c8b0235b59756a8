#ifndef BRA_MATH_HPP
#define BRA_MATH_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow
inline double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double log_sigmoid(double x) { return -log1pexp(-x); }          // log sigma(x)
inline double log1m_sigmoid(double x) { return -log1pexp(x); }         // log(1 - sigma(x))

// log Bernoulli-logit mass and its eta-derivative from a single exponential
inline void bernoulli_logit_term(double eta, double y, double& ll, double& d_eta) {
  if (eta >= 0.0) {
    double t = std::exp(-eta);
    double l1p = std::log1p(t);
    ll += (y > 0.5) ? -l1p : -eta - l1p;
    d_eta = y - 1.0 / (1.0 + t);
  } else {
    double t = std::exp(eta);
    double l1p = std::log1p(t);
    ll += (y > 0.5) ? eta - l1p : -l1p;
    d_eta = y - t / (1.0 + t);
  }
}

inline double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double logsumexp(const VectorXd& v) {
  return logsumexp(std::span<const double>(v.data(), static_cast<size_t>(v.size())));
}

inline double norm_logpdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -0.5 * (kLog2Pi + z * z) - std::log(sd);
}

// multivariate normal log density from a precomputed Cholesky factor of Sigma
inline double mvn_logpdf_chol(const VectorXd& r, const Eigen::LLT<MatrixXd>& llt) {
  const auto& L = llt.matrixL();
  VectorXd half = L.solve(r);
  double logdet = 0.0;
  for (int i = 0; i < r.size(); ++i) logdet += std::log(llt.matrixLLT()(i, i));
  return -0.5 * (r.size() * kLog2Pi + half.squaredNorm()) - logdet;
}

inline double inv_gamma_logpdf(double x, double shape, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

// Beta(a,b) rescaled to (-1, 1)
inline double scaled_beta_logpdf(double z, double a, double b) {
  if (z <= -1.0 || z >= 1.0) return -std::numeric_limits<double>::infinity();
  double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return (a - 1.0) * std::log1p(z) + (b - 1.0) * std::log1p(-z) - lbeta - (a + b - 1.0) * std::log(2.0);
}

inline double multigamma_log(double a, int p) {
  double s = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 0; j < p; ++j) s += std::lgamma(a - 0.5 * j);
  return s;
}

// Inverse-Wishart(scale = I, dof = nu) log density
inline double inv_wishart_logpdf_identity(const MatrixXd& x, double nu) {
  const int p = static_cast<int>(x.rows());
  Eigen::LLT<MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  double tr_inv = llt.solve(MatrixXd::Identity(p, p)).trace();
  return -0.5 * nu * p * std::log(2.0) - multigamma_log(0.5 * nu, p) -
         0.5 * (nu + p + 1.0) * logdet - 0.5 * tr_inv;
}

// Weighted empirical quantile: smallest v with cumulative weight >= q * total.
// Values are copied and sorted; weights must be nonnegative with a positive sum.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("weighted_quantile: size mismatch or empty input");
  std::vector<size_t> idx(values.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("weighted_quantile: nonpositive total weight");
  double target = q * total, cum = 0.0;
  for (size_t i : idx) {
    cum += weights[i];
    if (cum >= target) return values[i];
  }
  return values[idx.back()];
}

inline double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  double s = 0.0, w = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    s += values[i] * weights[i];
    w += weights[i];
  }
  return s / w;
}

// Gauss-Hermite nodes/weights for integrals against the standard normal:
// E[f(Z)] ~= sum_i w_i f(x_i). Computed by Golub-Welsch on the Jacobi matrix.
struct GaussHermite {
  VectorXd nodes;    // z-scale nodes
  VectorXd weights;  // sum to 1

  explicit GaussHermite(int n) {
    MatrixXd J = MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      double b = std::sqrt(i / 2.0);
      J(i, i - 1) = b;
      J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    nodes = es.eigenvalues() * std::sqrt(2.0);  // physicists' -> probabilists' scale
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      double v = es.eigenvectors()(0, i);
      weights[i] = v * v;
    }
  }
};

}  // namespace bra

#endif
