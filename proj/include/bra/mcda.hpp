#ifndef BRA_MCDA_HPP
#define BRA_MCDA_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/model.hpp"

namespace bra {

struct McdaCriterion {
  std::string name;
  bool binary = false;      // probability-scale criterion
  double weight = 0.0;
  double range_lo = 0.0;    // outcome-scale range as published
  double range_hi = 1.0;
  bool decreasing = true;   // true: the low end of the range is best

  double worst() const { return decreasing ? range_hi : range_lo; }
  double best() const { return decreasing ? range_lo : range_hi; }
};

// How a binary criterion's expected value is read off theta: the event
// probability at z = 0 (the published formula evaluates the intercept), or
// the latent-marginalised probability E sigmoid(eta).
enum class BinaryScoreScale { LinkPoint, Marginalised };

struct McdaConfig {
  std::vector<McdaCriterion> criteria;  // schema item order
  BinaryScoreScale binary_scale = BinaryScoreScale::LinkPoint;
  double crossing_threshold = 0.99;

  void validate(const OutcomeSchema& schema) const;
};

// Linear partial value function: worst endpoint -> 0, best endpoint -> 1,
// clamped outside the range.
double partial_utility(double x, const McdaCriterion& c);

// Weighted sum of per-criterion utilities at the model-implied expected
// outcomes of one group.
double mcda_score(const Theta& theta, int group, const McdaConfig& cfg, const ModelSpec& spec);

// Score samples per group, with draw weights (all ones for plain MCMC draws).
struct ScorePosterior {
  Eigen::MatrixXd scores;   // n_draws x n_groups
  Eigen::VectorXd weights;  // n_draws

  double mean(int group) const;
  double quantile(int group, double q) const;
};

ScorePosterior score_posterior(const std::vector<Theta>& draws, const McdaConfig& cfg,
                               const ModelSpec& spec);

// Weighted fraction of paired draws with s_a > s_b; ties count one half.
double superiority_prob(const ScorePosterior& sp, int a, int b);

// One record per absorbed subject of a sequential run.
struct McdaTraceRow {
  int index = 0;                 // 1-based absorbed-subject count
  std::string subject_id;
  int group = 0;
  double ess = 0.0;
  double log_incr = 0.0;         // log L_i
  double log_evidence = 0.0;     // cumulative
  bool rejuvenated = false;
  Eigen::VectorXd score_mean;    // per group
  Eigen::VectorXd score_q025;
  Eigen::VectorXd score_q975;
  Eigen::MatrixXd p_super;       // p_super(a, b) = P(s_a > s_b)
};

struct CrossingEntry {
  int group_a = 0;
  int group_b = 0;
  int first_index = -1;  // -1: never crossed
};

struct SequentialTrace {
  std::vector<McdaTraceRow> rows;
  std::vector<CrossingEntry> crossings;  // all ordered pairs
  double threshold = 0.99;
};

// Assembles the monitoring table and first-crossing report from step records.
SequentialTrace sequential_trace(const std::vector<McdaTraceRow>& rows, const McdaConfig& cfg,
                                 int n_groups);

void write_trace(const SequentialTrace& trace, const OutcomeSchema& schema,
                 const std::string& path);
void write_crossings(const SequentialTrace& trace, const OutcomeSchema& schema,
                     const std::string& path);

}  // namespace bra

#endif
