#ifndef BRA_MODEL_HPP
#define BRA_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bra/dataset.hpp"

namespace bra {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

// SAT: unrestricted continuous covariance benchmark, independent binary logits.
// IND: fully independent benchmark.
// EZ1/EZ2: exact-zero two-factor structure (independent / correlated factors).
// AZ1/AZ2: approximate-zero extensions (binary residual covariance; AZ2 also
// frees prior-shrunk cross-loadings).
enum class Variant { SAT, IND, EZ1, EZ2, AZ1, AZ2 };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // accepts e.g. "EZ1" / "ez1"

// Loading-mask entry codes.
enum : int {
  kMaskZero = 0,     // structural zero
  kMaskPrincipal = 1,
  kMaskCross = 2,    // AZ2 only, shrunk toward zero
  kMaskAnchor = 3,   // fixed at 1 (continuous-factor scale anchor)
};

struct ModelSpec {
  Variant variant = Variant::EZ1;
  bool pooled = true;
  int n_groups = 1;
  int p_c = 0;
  int p_b = 0;
  int k = 0;               // number of factors (0 for SAT/IND)
  MatrixXi loading_mask;   // p x k

  // Single-factor form for sequential inference: the latent state per subject
  // is the binary factor alone and the continuous block enters marginally.
  bool sequential_form = false;

  static ModelSpec make(Variant v, bool pooled, int p_c, int p_b, int n_groups);

  int p() const { return p_c + p_b; }
  bool has_factors() const { return k > 0; }
  bool has_omega() const { return (variant == Variant::AZ1 || variant == Variant::AZ2) && p_b > 0; }
  bool phi_free() const {
    return k >= 2 && (variant == Variant::EZ2 || variant == Variant::AZ1 || variant == Variant::AZ2);
  }
  bool is_benchmark() const { return variant == Variant::SAT || variant == Variant::IND; }

  int continuous_factor() const { return (has_factors() && p_c > 0) ? 0 : -1; }
  int binary_factor() const { return (has_factors() && p_b > 0) ? k - 1 : -1; }

  // Anchor item index of a factor: first item loading on it. The continuous
  // factor's anchor loading is fixed at 1; the binary factor's is free and
  // sign-identified by post-processing.
  int anchor_item(int factor) const;
  bool anchor_fixed(int factor) const { return factor == continuous_factor(); }

  int n_cov_copies() const { return pooled ? 1 : n_groups; }

  // Number of latent coordinates per subject in the inference representation.
  int z_dim() const { return sequential_form ? (binary_factor() >= 0 ? 1 : 0) : k; }
  int u_dim() const { return has_omega() ? p_b : 0; }

  std::string name() const { return variant_name(variant) + (pooled ? "-p" : ""); }
};

// Covariance-structure parameters for one group (or shared across groups).
struct GroupCov {
  MatrixXd lambda;   // p x k, structural zeros enforced, anchors fixed at 1
  MatrixXd phi;      // k x k factor correlation (identity for EZ1)
  VectorXd psi2;     // p_c idiosyncratic variances (SAT: diagonal of Sigma)
  MatrixXd omega;    // p_b x p_b residual covariance (AZ only, else 0x0)
  MatrixXd corr_c;   // p_c x p_c continuous correlation (SAT only, else 0x0)

  // SAT's full continuous covariance D * corr_c * D with D = diag(sqrt(psi2)).
  MatrixXd sigma_full() const;
};

struct Theta {
  MatrixXd alpha;              // n_groups x p intercepts
  std::vector<GroupCov> cov;   // 1 if pooled else n_groups

  const GroupCov& cov_for(int group) const { return cov.size() == 1 ? cov[0] : cov.at(group); }
  GroupCov& cov_for_mut(int group) { return cov.size() == 1 ? cov[0] : cov.at(group); }
};

Theta make_zero_theta(const ModelSpec& spec);
void validate_theta(const ModelSpec& spec, const Theta& theta);

// Appendix-B reparameterisation: absorbs the continuous factor into the
// continuous marginal likelihood so the per-subject latent posterior depends
// on the binary block only. Requires EZ1 (independent factors).
ModelSpec reparameterize_single_factor(const ModelSpec& spec);

// Reflection post-processing: per covariance copy and per sign-identified
// factor, if the anchor loading is negative flip that loading column and the
// matching phi off-diagonal entries. Leaves every likelihood unchanged.
void sign_postprocess(Theta& theta, const ModelSpec& spec);
void sign_postprocess(std::vector<Theta>& draws, const ModelSpec& spec);

struct PriorConfig {
  double alpha_sd = 10.0;
  double loading_sd_binary = 2.0;
  double crossloading_sd = 0.1;
  double c0 = 2.5;                      // inverse-gamma shape for psi^2
  double lkj_eta = 2.0;
  double iw_dof_offset = 6.0;           // Omega dof = p_b + offset
  double loading_sd_continuous = 0.0;   // <= 0: use 2 * sd of the anchor item
};

}  // namespace bra

#endif
