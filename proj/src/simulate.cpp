#include "bra/simulate.hpp"

#include <Eigen/Cholesky>
#include <cstdio>
#include <stdexcept>

#include "bra/math.hpp"
#include "bra/rng.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Dataset simulate_dataset(const ModelSpec& spec, const Theta& theta, const OutcomeSchema& schema,
                         const std::vector<int>& counts, std::uint64_t seed) {
  if (schema.p_continuous() != spec.p_c || schema.p_binary() != spec.p_b ||
      schema.n_groups() != spec.n_groups)
    throw std::invalid_argument("simulate_dataset: schema does not match model spec");
  if (static_cast<int>(counts.size()) != spec.n_groups)
    throw std::invalid_argument("simulate_dataset: one count per group required");
  validate_theta(spec, theta);

  const int p_c = spec.p_c, p_b = spec.p_b, k = spec.k;

  // Cholesky factors per covariance copy
  std::vector<MatrixXd> phi_chol(theta.cov.size()), omega_chol(theta.cov.size()),
      sigma_chol(theta.cov.size());
  for (size_t c = 0; c < theta.cov.size(); ++c) {
    const auto& gc = theta.cov[c];
    if (k > 0) {
      Eigen::LLT<MatrixXd> llt(gc.phi);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("simulate_dataset: phi not positive definite");
      phi_chol[c] = llt.matrixL();
    }
    if (spec.has_omega()) {
      Eigen::LLT<MatrixXd> llt(gc.omega);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("simulate_dataset: omega not positive definite");
      omega_chol[c] = llt.matrixL();
    }
    if (spec.variant == Variant::SAT && p_c > 0) {
      Eigen::LLT<MatrixXd> llt(gc.sigma_full());
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("simulate_dataset: sigma not positive definite");
      sigma_chol[c] = llt.matrixL();
    }
    if (p_c > 0 && (gc.psi2.array() <= 0.0).any())
      throw std::invalid_argument("simulate_dataset: psi2 must be positive");
  }

  std::vector<Row> rows;
  int subject = 0;
  for (int r = 0; r < spec.n_groups; ++r) {
    const auto& gc = theta.cov_for(r);
    const size_t c = theta.cov.size() == 1 ? 0 : r;
    for (int s = 0; s < counts[r]; ++s) {
      RngStream rng(seed, {0x51Du, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(s)});
      Row row;
      row.group = r;
      char buf[24];
      std::snprintf(buf, sizeof(buf), "S%05d", ++subject);
      row.subject_id = buf;
      row.y.resize(p_c + p_b);

      VectorXd z = VectorXd::Zero(k);
      for (int f = 0; f < k; ++f) z[f] = rng.normal();
      if (k > 0) z = phi_chol[c] * z;
      VectorXd u = VectorXd::Zero(p_b);
      if (spec.has_omega()) {
        for (int j = 0; j < p_b; ++j) u[j] = rng.normal();
        u = omega_chol[c] * u;
      }

      if (spec.variant == Variant::SAT && p_c > 0) {
        VectorXd e(p_c);
        for (int j = 0; j < p_c; ++j) e[j] = rng.normal();
        row.y.head(p_c) = theta.alpha.row(r).head(p_c).transpose() + sigma_chol[c] * e;
      } else {
        for (int j = 0; j < p_c; ++j) {
          double mu = theta.alpha(r, j);
          if (k > 0) mu += gc.lambda.row(j).head(k).dot(z);
          row.y[j] = mu + std::sqrt(gc.psi2[j]) * rng.normal();
        }
      }
      for (int j = 0; j < p_b; ++j) {
        double eta = theta.alpha(r, p_c + j);
        if (k > 0) eta += gc.lambda.row(p_c + j).head(k).dot(z);
        if (spec.has_omega()) eta += u[j];
        row.y[p_c + j] = (rng.uniform() < sigmoid(eta)) ? 1.0 : 0.0;
      }
      rows.push_back(std::move(row));
    }
  }
  return Dataset(schema, std::move(rows));
}

}  // namespace bra
