#include "bra/mcda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>

#include "bra/math.hpp"

namespace bra {

void McdaConfig::validate(const OutcomeSchema& schema) const {
  if (static_cast<int>(criteria.size()) != schema.p())
    throw std::invalid_argument("mcda: one criterion per schema item required");
  double wsum = 0.0;
  for (int j = 0; j < schema.p(); ++j) {
    const auto& c = criteria[j];
    if (c.name != schema.items()[j].name)
      throw std::invalid_argument("mcda: criterion order must match the schema");
    if (c.binary != (schema.items()[j].kind == ItemKind::Binary))
      throw std::invalid_argument("mcda: criterion type mismatch for '" + c.name + "'");
    if (c.weight < 0.0) throw std::invalid_argument("mcda: negative weight for '" + c.name + "'");
    if (c.range_lo == c.range_hi)
      throw std::invalid_argument("mcda: degenerate range for '" + c.name + "'");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("mcda: weights must sum to 1");
}

double partial_utility(double x, const McdaCriterion& c) {
  double u = (x - c.worst()) / (c.best() - c.worst());
  return std::clamp(u, 0.0, 1.0);
}

namespace {

// E sigmoid(eta) with eta ~ N(alpha, v), 20-node Gauss-Hermite
double marginal_event_prob(double alpha, double v) {
  if (v <= 0.0) return sigmoid(alpha);
  static const GaussHermite gh(20);
  double s = std::sqrt(v);
  double p = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) p += gh.weights[i] * sigmoid(alpha + s * gh.nodes[i]);
  return p;
}

}  // namespace

double mcda_score(const Theta& theta, int group, const McdaConfig& cfg, const ModelSpec& spec) {
  if (static_cast<int>(cfg.criteria.size()) != spec.p())
    throw std::invalid_argument("mcda_score: criterion count does not cover the model items");
  double score = 0.0;
  for (int j = 0; j < spec.p(); ++j) {
    const auto& c = cfg.criteria[j];
    double expected;
    if (!c.binary) {
      expected = theta.alpha(group, j);
    } else if (cfg.binary_scale == BinaryScoreScale::LinkPoint) {
      expected = sigmoid(theta.alpha(group, j));
    } else {
      const auto& gc = theta.cov_for(group);
      const int jb = j - spec.p_c;
      double v = 0.0;
      if (spec.k > 0) {
        Eigen::VectorXd row = gc.lambda.row(j);
        v += row.dot(gc.phi * row);
      }
      if (spec.has_omega()) v += gc.omega(jb, jb);
      expected = marginal_event_prob(theta.alpha(group, j), v);
    }
    score += c.weight * partial_utility(expected, c);
  }
  return score;
}

double ScorePosterior::mean(int group) const {
  return weighted_mean(std::span<const double>(scores.col(group).data(), scores.rows()),
                       std::span<const double>(weights.data(), static_cast<size_t>(weights.size())));
}

double ScorePosterior::quantile(int group, double q) const {
  std::vector<double> v(scores.col(group).data(), scores.col(group).data() + scores.rows());
  std::vector<double> w(weights.data(), weights.data() + weights.size());
  return weighted_quantile(v, w, q);
}

ScorePosterior score_posterior(const std::vector<Theta>& draws, const McdaConfig& cfg,
                               const ModelSpec& spec) {
  ScorePosterior sp;
  sp.scores.resize(static_cast<int>(draws.size()), spec.n_groups);
  sp.weights = Eigen::VectorXd::Ones(static_cast<int>(draws.size()));
  for (size_t m = 0; m < draws.size(); ++m)
    for (int r = 0; r < spec.n_groups; ++r)
      sp.scores(static_cast<int>(m), r) = mcda_score(draws[m], r, cfg, spec);
  return sp;
}

double superiority_prob(const ScorePosterior& sp, int a, int b) {
  double num = 0.0, den = 0.0;
  for (int m = 0; m < sp.scores.rows(); ++m) {
    double w = sp.weights[m];
    den += w;
    if (sp.scores(m, a) > sp.scores(m, b)) {
      num += w;
    } else if (sp.scores(m, a) == sp.scores(m, b)) {
      num += 0.5 * w;
    }
  }
  return num / den;
}

SequentialTrace sequential_trace(const std::vector<McdaTraceRow>& rows, const McdaConfig& cfg,
                                 int n_groups) {
  SequentialTrace out;
  out.rows = rows;
  out.threshold = cfg.crossing_threshold;
  for (int a = 0; a < n_groups; ++a)
    for (int b = 0; b < n_groups; ++b) {
      if (a == b) continue;
      CrossingEntry entry{a, b, -1};
      for (const auto& row : rows) {
        if (row.p_super(a, b) >= cfg.crossing_threshold) {
          entry.first_index = row.index;
          break;
        }
      }
      out.crossings.push_back(entry);
    }
  return out;
}

void write_trace(const SequentialTrace& trace, const OutcomeSchema& schema,
                 const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trace: cannot open '" + path + "'");
  const int R = schema.n_groups();
  f << "i,subject_id,group,ess,log_incr,log_evidence,rejuvenated";
  for (int r = 0; r < R; ++r) {
    const auto& g = schema.group_label(r);
    f << ",mean_" << g << ",q025_" << g << ",q975_" << g;
  }
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b)
      if (a != b) f << ",p_" << schema.group_label(a) << "_gt_" << schema.group_label(b);
  f << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    f << ',' << buf;
  };
  for (const auto& row : trace.rows) {
    f << row.index << ',' << row.subject_id << ',' << schema.group_label(row.group);
    num(row.ess);
    num(row.log_incr);
    num(row.log_evidence);
    f << ',' << (row.rejuvenated ? 1 : 0);
    for (int r = 0; r < R; ++r) {
      num(row.score_mean[r]);
      num(row.score_q025[r]);
      num(row.score_q975[r]);
    }
    for (int a = 0; a < R; ++a)
      for (int b = 0; b < R; ++b)
        if (a != b) num(row.p_super(a, b));
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_trace: write failed for '" + path + "'");
}

void write_crossings(const SequentialTrace& trace, const OutcomeSchema& schema,
                     const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_crossings: cannot open '" + path + "'");
  f << "comparison,threshold,first_crossing\n";
  char buf[32];
  for (const auto& c : trace.crossings) {
    std::snprintf(buf, sizeof(buf), "%.10g", trace.threshold);
    f << schema.group_label(c.group_a) << ">" << schema.group_label(c.group_b) << ',' << buf << ',';
    if (c.first_index < 0) {
      f << "never\n";
    } else {
      f << c.first_index << '\n';
    }
  }
  if (!f) throw std::runtime_error("write_crossings: write failed for '" + path + "'");
}

}  // namespace bra
