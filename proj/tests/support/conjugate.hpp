#ifndef BRA_TEST_CONJUGATE_HPP
#define BRA_TEST_CONJUGATE_HPP

#include <cmath>
#include <vector>

#include "bra/math.hpp"
#include "bra/rng.hpp"
#include "bra/targets.hpp"

namespace bra::test {

// Normal-mean model with known observation variance: y_i ~ N(theta, sigma^2),
// theta ~ N(mu0, tau0^2). Everything is available in closed form, which makes
// it the reference oracle for kernels and the sequential machinery.
struct ConjugateNormal {
  double mu0 = 0.0, tau0 = 3.0, sigma = 1.0;
  std::vector<double> y;

  int dim() const { return 1; }

  double sample_prior(RngStream& rng) const { return mu0 + tau0 * rng.normal(); }

  double log_incr(double theta, int i) const { return norm_logpdf(y[i], theta, sigma); }

  // posterior after the first n observations
  void posterior(int n, double& mean, double& sd) const {
    double prec = 1.0 / (tau0 * tau0) + n / (sigma * sigma);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += y[i];
    mean = (mu0 / (tau0 * tau0) + s / (sigma * sigma)) / prec;
    sd = std::sqrt(1.0 / prec);
  }

  // analytic log marginal likelihood of y_{1..n} (telescoped predictives)
  double log_evidence(int n) const {
    double logz = 0.0;
    double mean = mu0, var = tau0 * tau0;
    for (int i = 0; i < n; ++i) {
      logz += norm_logpdf(y[i], mean, std::sqrt(var + sigma * sigma));
      double prec = 1.0 / var + 1.0 / (sigma * sigma);
      mean = (mean / var + y[i] / (sigma * sigma)) / prec;
      var = 1.0 / prec;
    }
    return logz;
  }

  Target posterior_target(int n) const {
    Target t;
    t.dim = 1;
    double mu0c = mu0, tau0c = tau0, sigmac = sigma;
    std::vector<double> data(y.begin(), y.begin() + n);
    t.logp = [mu0c, tau0c, sigmac, data](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      double th = x[0];
      double val = -0.5 * (th - mu0c) * (th - mu0c) / (tau0c * tau0c);
      double g = -(th - mu0c) / (tau0c * tau0c);
      for (double yi : data) {
        val += -0.5 * (yi - th) * (yi - th) / (sigmac * sigmac);
        g += (yi - th) / (sigmac * sigmac);
      }
      if (grad) (*grad)[0] = g;
      return val;
    };
    return t;
  }

  static ConjugateNormal with_data(int n, std::uint64_t seed, double true_theta = 1.4) {
    ConjugateNormal m;
    RngStream rng(seed, {0xC0Fu});
    m.y.resize(n);
    for (int i = 0; i < n; ++i) m.y[i] = true_theta + m.sigma * rng.normal();
    return m;
  }
};

}  // namespace bra::test

#endif
