#ifndef BRA_ASSESS_HPP
#define BRA_ASSESS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/fit.hpp"
#include "bra/model.hpp"

namespace bra {

struct AssessConfig {
  int folds = 3;
  int ppp_thin = 5;             // use every ppp_thin-th posterior draw
  int n_mc_patterns = 100000;   // Monte Carlo size for G2 expected probabilities
  int n_mc_logscore = 10000;    // Monte Carlo size for log-score pattern tables
  int logscore_draws = 400;     // posterior draws entering the MP mixture
  FitConfig fit;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Likelihood-ratio discrepancy between a sample and a model-implied
// covariance: (n-1) { log|Sigma| + tr(S Sigma^{-1}) - log|S| - p }.
double discrepancy_lrt_single(const Eigen::MatrixXd& sample_cov, const Eigen::MatrixXd& model_cov,
                              int n);
// Group-aggregated version on the continuous block of a dataset.
double discrepancy_lrt(const Dataset& d, const Theta& theta, const ModelSpec& spec);

// Response-pattern probabilities over all 2^p_b patterns for one group,
// Monte Carlo over (z, u) with draws shared across patterns; renormalised.
// Pattern index: bit j set when binary item j equals 1.
Eigen::VectorXd response_pattern_probs(const Theta& theta, const ModelSpec& spec, int group,
                                       int n_mc, std::uint64_t seed);

// G2 statistic sum_r O_r log(O_r / (n pi_r)); zero-count patterns contribute 0.
double discrepancy_g2(const Eigen::VectorXd& observed_counts, const Eigen::VectorXd& probs, int n);

// Observed pattern counts of one group's binary block.
Eigen::VectorXd observed_pattern_counts(const Dataset& d, int group);

enum class DataBlock { Continuous, Binary };

// Posterior predictive p-value with the block-specific discrepancy (LRT for
// the continuous block, group-aggregated G2 for the binary one); ties 0.5.
double ppp_value(const std::vector<Theta>& draws, const Dataset& d, const ModelSpec& spec,
                 DataBlock which, const AssessConfig& cfg, std::uint64_t seed);

struct LogScore {
  double joint = 0.0;
  double continuous = 0.0;
  double binary = 0.0;
};

// Precomputed per-draw quantities for scoring test rows under one model.
class MpScorer {
 public:
  MpScorer(const std::vector<Theta>& draws, const ModelSpec& spec, int n_mc_patterns,
           std::uint64_t seed);
  // mixtures-of-parameters log score of one observation (negated log density)
  LogScore score(const Eigen::VectorXd& y, int group) const;

 private:
  const std::vector<Theta>& draws_;
  ModelSpec spec_;
  std::vector<std::vector<Eigen::LLT<Eigen::MatrixXd>>> sigma_llt_;  // [draw][group]
  std::vector<std::vector<Eigen::VectorXd>> log_patterns_;           // [draw][group]
};

struct AssessmentReport {
  std::string model;
  double ls_continuous = 0.0;
  double ls_binary = 0.0;
  double ls_combined = 0.0;  // sum of the per-type scores
  double ppp_continuous = 0.0;
  double ppp_binary = 0.0;
  std::vector<double> fold_ls_continuous;
  std::vector<double> fold_ls_binary;
};

// k-fold cross-validated log scores plus full-data PPP values for one model.
AssessmentReport assess_model(const Dataset& d, const ModelSpec& spec, const PriorConfig& prior_cfg,
                              const AssessConfig& cfg);

void write_assessment(const std::vector<AssessmentReport>& reports, const std::string& path);

}  // namespace bra

#endif
