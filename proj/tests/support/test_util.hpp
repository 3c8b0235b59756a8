#ifndef BRA_TEST_UTIL_HPP
#define BRA_TEST_UTIL_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "bra/dataset.hpp"
#include "bra/model.hpp"
#include "bra/prior.hpp"
#include "bra/rng.hpp"
#include "bra/simulate.hpp"
#include "bra/targets.hpp"

namespace bra::test {

inline OutcomeSchema make_schema(int p_c, int p_b, int n_groups) {
  std::vector<Item> items;
  for (int j = 0; j < p_c; ++j) items.push_back({"c" + std::to_string(j + 1), ItemKind::Continuous});
  for (int j = 0; j < p_b; ++j) items.push_back({"b" + std::to_string(j + 1), ItemKind::Binary});
  std::vector<std::string> groups;
  for (int r = 0; r < n_groups; ++r) groups.push_back("G" + std::to_string(r + 1));
  return OutcomeSchema(std::move(items), std::move(groups));
}

// central finite differences of a target
inline Eigen::VectorXd fd_gradient(const Target& t, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    double fp = t(xp, nullptr);
    xp[i] = x[i] - h;
    double fm = t(xp, nullptr);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// a small mixed dataset drawn from a prior draw of the same variant
inline Dataset small_dataset(const ModelSpec& spec, const OutcomeSchema& schema, int per_group,
                             std::uint64_t seed) {
  PriorConfig cfg;
  cfg.loading_sd_continuous = 1.0;
  Eigen::MatrixXd s_y = Eigen::MatrixXd::Identity(spec.p_c, spec.p_c);
  PriorStack prior(spec, cfg, s_y);
  RngStream rng(seed, {0xDA7Au});
  Theta truth = prior.sample(rng);
  // keep intercepts moderate so binary items are informative
  truth.alpha = truth.alpha / 10.0;
  std::vector<int> counts(spec.n_groups, per_group);
  return simulate_dataset(spec, truth, schema, counts, seed + 1);
}

}  // namespace bra::test

#endif
