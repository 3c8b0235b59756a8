#include "bra/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace bra {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::SAT: return "SAT";
    case Variant::IND: return "IND";
    case Variant::EZ1: return "EZ1";
    case Variant::EZ2: return "EZ2";
    case Variant::AZ1: return "AZ1";
    case Variant::AZ2: return "AZ2";
  }
  throw std::logic_error("variant_name: unreachable");
}

Variant variant_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "SAT") return Variant::SAT;
  if (s == "IND") return Variant::IND;
  if (s == "EZ1") return Variant::EZ1;
  if (s == "EZ2") return Variant::EZ2;
  if (s == "AZ1") return Variant::AZ1;
  if (s == "AZ2") return Variant::AZ2;
  throw std::invalid_argument("unknown model variant '" + name + "'");
}

ModelSpec ModelSpec::make(Variant v, bool pooled, int p_c, int p_b, int n_groups) {
  if (p_c < 0 || p_b < 0 || p_c + p_b == 0) throw std::invalid_argument("model: need at least one item");
  if (n_groups < 1) throw std::invalid_argument("model: need at least one group");
  ModelSpec spec;
  spec.variant = v;
  spec.pooled = pooled;
  spec.n_groups = n_groups;
  spec.p_c = p_c;
  spec.p_b = p_b;
  if (v == Variant::SAT || v == Variant::IND) {
    spec.k = 0;
    spec.loading_mask = MatrixXi::Zero(spec.p(), 0);
    return spec;
  }
  spec.k = (p_c > 0 ? 1 : 0) + (p_b > 0 ? 1 : 0);
  spec.loading_mask = MatrixXi::Zero(spec.p(), spec.k);
  if (p_c > 0) {
    spec.loading_mask(0, 0) = kMaskAnchor;
    for (int j = 1; j < p_c; ++j) spec.loading_mask(j, 0) = kMaskPrincipal;
  }
  if (p_b > 0) {
    const int f = spec.k - 1;
    for (int j = 0; j < p_b; ++j) spec.loading_mask(p_c + j, f) = kMaskPrincipal;
  }
  if (v == Variant::AZ2 && spec.k == 2) {
    for (int j = 0; j < p_c; ++j) spec.loading_mask(j, 1) = kMaskCross;
    for (int j = 0; j < p_b; ++j) spec.loading_mask(p_c + j, 0) = kMaskCross;
  }
  return spec;
}

int ModelSpec::anchor_item(int factor) const {
  if (factor == continuous_factor()) return 0;
  if (factor == binary_factor()) return p_c;
  throw std::invalid_argument("anchor_item: no such factor");
}

MatrixXd GroupCov::sigma_full() const {
  VectorXd sd = psi2.array().sqrt();
  return sd.asDiagonal() * corr_c * sd.asDiagonal();
}

Theta make_zero_theta(const ModelSpec& spec) {
  Theta th;
  th.alpha = MatrixXd::Zero(spec.n_groups, spec.p());
  th.cov.resize(spec.n_cov_copies());
  for (auto& c : th.cov) {
    c.lambda = MatrixXd::Zero(spec.p(), spec.k);
    for (int j = 0; j < spec.p(); ++j)
      for (int f = 0; f < spec.k; ++f)
        if (spec.loading_mask(j, f) == kMaskAnchor) c.lambda(j, f) = 1.0;
    c.phi = MatrixXd::Identity(spec.k, spec.k);
    c.psi2 = VectorXd::Ones(spec.p_c);
    c.omega = spec.has_omega() ? MatrixXd::Identity(spec.p_b, spec.p_b) : MatrixXd(0, 0);
    c.corr_c = (spec.variant == Variant::SAT) ? MatrixXd::Identity(spec.p_c, spec.p_c) : MatrixXd(0, 0);
  }
  return th;
}

namespace {

bool is_positive_definite(const MatrixXd& m) {
  if (m.rows() == 0) return true;
  if ((m - m.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void validate_theta(const ModelSpec& spec, const Theta& theta) {
  if (theta.alpha.rows() != spec.n_groups || theta.alpha.cols() != spec.p())
    throw std::invalid_argument("theta: alpha has wrong shape");
  if (static_cast<int>(theta.cov.size()) != spec.n_cov_copies())
    throw std::invalid_argument("theta: wrong number of covariance copies");
  for (const auto& c : theta.cov) {
    if (c.lambda.rows() != spec.p() || c.lambda.cols() != spec.k)
      throw std::invalid_argument("theta: lambda has wrong shape");
    for (int j = 0; j < spec.p(); ++j)
      for (int f = 0; f < spec.k; ++f) {
        const int m = spec.loading_mask(j, f);
        if (m == kMaskZero && c.lambda(j, f) != 0.0)
          throw std::invalid_argument("theta: nonzero loading outside the mask");
        if (m == kMaskAnchor && c.lambda(j, f) != 1.0)
          throw std::invalid_argument("theta: anchor loading must equal 1");
      }
    if (c.phi.rows() != spec.k || c.phi.cols() != spec.k)
      throw std::invalid_argument("theta: phi has wrong shape");
    for (int f = 0; f < spec.k; ++f)
      if (std::abs(c.phi(f, f) - 1.0) > 1e-12)
        throw std::invalid_argument("theta: phi must have unit diagonal");
    if (!is_positive_definite(c.phi)) throw std::invalid_argument("theta: phi not positive definite");
    if (c.psi2.size() != spec.p_c) throw std::invalid_argument("theta: psi2 has wrong length");
    if ((c.psi2.array() <= 0.0).any()) throw std::invalid_argument("theta: psi2 entries must be positive");
    if (spec.has_omega()) {
      if (c.omega.rows() != spec.p_b || c.omega.cols() != spec.p_b)
        throw std::invalid_argument("theta: omega has wrong shape");
      if (!is_positive_definite(c.omega)) throw std::invalid_argument("theta: omega not positive definite");
    }
    if (spec.variant == Variant::SAT) {
      if (c.corr_c.rows() != spec.p_c || c.corr_c.cols() != spec.p_c)
        throw std::invalid_argument("theta: corr_c has wrong shape");
      if (!is_positive_definite(c.corr_c)) throw std::invalid_argument("theta: corr_c not positive definite");
    }
  }
}

ModelSpec reparameterize_single_factor(const ModelSpec& spec) {
  if (spec.variant != Variant::EZ1)
    throw std::invalid_argument(
        "reparameterize_single_factor: requires EZ1 (independent factors); got " + spec.name());
  if (spec.p_b == 0)
    throw std::invalid_argument("reparameterize_single_factor: no binary items to keep latent");
  ModelSpec out = spec;
  out.sequential_form = true;
  return out;
}

void sign_postprocess(Theta& theta, const ModelSpec& spec) {
  for (int f = 0; f < spec.k; ++f) {
    if (spec.anchor_fixed(f)) continue;
    const int a = spec.anchor_item(f);
    for (auto& c : theta.cov) {
      if (c.lambda(a, f) >= 0.0) continue;
      c.lambda.col(f) *= -1.0;
      for (int g = 0; g < spec.k; ++g) {
        if (g == f) continue;
        c.phi(f, g) *= -1.0;
        c.phi(g, f) *= -1.0;
      }
    }
  }
}

void sign_postprocess(std::vector<Theta>& draws, const ModelSpec& spec) {
  for (auto& d : draws) sign_postprocess(d, spec);
}

}  // namespace bra
