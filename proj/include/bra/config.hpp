#ifndef BRA_CONFIG_HPP
#define BRA_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "bra/assess.hpp"
#include "bra/dataset.hpp"
#include "bra/mcda.hpp"
#include "bra/model.hpp"
#include "bra/smc.hpp"

namespace bra {

struct ModelChoice {
  Variant variant;
  bool pooled;
  std::string name;
};

// One declarative document drives the whole pipeline: schema, MCDA
// parameters, priors, model list, simulation truth, and run settings.
struct RunConfig {
  OutcomeSchema schema;
  McdaConfig mcda;
  PriorConfig prior;
  std::vector<ModelChoice> models;
  std::vector<int> simulate_counts;  // per group
  Theta truth;                       // simulation truth (spec of models[0])
  ModelChoice truth_model;
  FitConfig fit;
  SmcConfig smc;
  AssessConfig assess;
  std::string dataset_path;  // may be empty; CLI flag overrides

  ModelSpec spec_for(const ModelChoice& m) const;
  ModelSpec truth_spec() const { return spec_for(truth_model); }
};

ModelChoice parse_model_name(const std::string& name);

// Built-in default: the published trial layout (three arms, two continuous
// efficacy items, four binary adverse events) with the reported MCDA weights
// and ranges, EZ1-p simulation truth at the reported posterior means.
RunConfig default_config();

RunConfig load_config(const std::string& path);

// Simulation-truth round trip for the truth file written by `simulate`.
std::string truth_to_json(const Theta& theta, const ModelSpec& spec, const OutcomeSchema& schema);
Theta truth_from_json(const std::string& text, const ModelSpec& spec);

void write_draws(const std::vector<Theta>& draws, const ModelSpec& spec,
                 const OutcomeSchema& schema, const std::string& path);
std::vector<Theta> read_draws(const std::string& path, const ModelSpec& spec,
                              const OutcomeSchema& schema);
void write_summary(const std::vector<Theta>& draws, const ModelSpec& spec,
                   const OutcomeSchema& schema, const std::string& path);

}  // namespace bra

#endif
