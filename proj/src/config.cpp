#include "bra/config.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "bra/param_map.hpp"
#include "bra/math.hpp"

namespace bra {

using nlohmann::json;

ModelSpec RunConfig::spec_for(const ModelChoice& m) const {
  return ModelSpec::make(m.variant, m.pooled, schema.p_continuous(), schema.p_binary(),
                         schema.n_groups());
}

ModelChoice parse_model_name(const std::string& name) {
  ModelChoice out;
  out.name = name;
  std::string base = name;
  out.pooled = false;
  if (base.size() > 2 && (base.ends_with("-p") || base.ends_with("-P"))) {
    out.pooled = true;
    base = base.substr(0, base.size() - 2);
  }
  out.variant = variant_from_name(base);
  return out;
}

namespace {

json default_json() {
  json j;
  j["schema"]["groups"] = {"AVM", "MET", "RSG"};
  j["schema"]["items"] = json::array({
      {{"name", "haemoglobin"}, {"kind", "continuous"}, {"range", {-6.0, 3.0}}, {"weight", 0.592}, {"orientation", "decreasing"}},
      {{"name", "glucose"}, {"kind", "continuous"}, {"range", {-15.0, 7.5}}, {"weight", 0.118}, {"orientation", "decreasing"}},
      {{"name", "diarrhoea"}, {"kind", "binary"}, {"range", {0.10, 0.35}}, {"weight", 0.089}, {"orientation", "decreasing"}},
      {{"name", "nausea"}, {"kind", "binary"}, {"range", {0.10, 0.25}}, {"weight", 0.178}, {"orientation", "decreasing"}},
      {{"name", "vomiting"}, {"kind", "binary"}, {"range", {0.10, 0.20}}, {"weight", 0.018}, {"orientation", "decreasing"}},
      {{"name", "dyspepsia"}, {"kind", "binary"}, {"range", {0.10, 0.25}}, {"weight", 0.005}, {"orientation", "decreasing"}},
  });
  j["models"] = {"EZ1-p", "EZ2-p", "IND", "SAT"};
  j["simulate"]["counts"] = {{"AVM", 150}, {"MET", 146}, {"RSG", 153}};
  j["simulate"]["model"] = "EZ1-p";
  j["simulate"]["truth"]["alpha"] = {
      {-2.30, -4.05, -1.87, -2.27, -2.83, -5.19},
      {-1.83, -2.95, -1.39, -2.58, -3.45, -5.17},
      {-1.60, -2.81, -2.70, -2.44, -4.11, -6.55}};
  j["simulate"]["truth"]["lambda"] = {
      {1.0, 0.0}, {1.78, 0.0}, {0.0, 0.46}, {0.0, -0.39}, {0.0, 2.15}, {0.0, 2.36}};
  j["simulate"]["truth"]["psi2"] = {1.0, 9.0};
  return j;
}

OutcomeSchema schema_from_json(const json& js) {
  std::vector<Item> items;
  for (const auto& it : js.at("items")) {
    Item item;
    item.name = it.at("name").get<std::string>();
    std::string kind = it.at("kind").get<std::string>();
    if (kind == "continuous") {
      item.kind = ItemKind::Continuous;
    } else if (kind == "binary") {
      item.kind = ItemKind::Binary;
    } else {
      throw std::invalid_argument("config: unknown item kind '" + kind + "'");
    }
    items.push_back(item);
  }
  std::vector<std::string> groups = js.at("groups").get<std::vector<std::string>>();
  return OutcomeSchema(std::move(items), std::move(groups));
}

McdaConfig mcda_from_json(const json& js, const json& mcda_js, const OutcomeSchema& schema) {
  McdaConfig cfg;
  for (const auto& it : js.at("items")) {
    McdaCriterion c;
    c.name = it.at("name").get<std::string>();
    c.binary = it.at("kind").get<std::string>() == "binary";
    c.weight = it.at("weight").get<double>();
    auto range = it.at("range");
    c.range_lo = range.at(0).get<double>();
    c.range_hi = range.at(1).get<double>();
    std::string orient = it.value("orientation", "decreasing");
    if (orient != "decreasing" && orient != "increasing")
      throw std::invalid_argument("config: orientation must be increasing or decreasing");
    c.decreasing = orient == "decreasing";
    cfg.criteria.push_back(c);
  }
  if (!mcda_js.is_null()) {
    std::string scale = mcda_js.value("binary_scale", "link");
    if (scale == "link") {
      cfg.binary_scale = BinaryScoreScale::LinkPoint;
    } else if (scale == "marginal") {
      cfg.binary_scale = BinaryScoreScale::Marginalised;
    } else {
      throw std::invalid_argument("config: binary_scale must be link or marginal");
    }
    cfg.crossing_threshold = mcda_js.value("threshold", 0.99);
  }
  cfg.validate(schema);
  return cfg;
}

Theta truth_from_json_obj(const json& jt, const ModelSpec& spec) {
  Theta th = make_zero_theta(spec);
  const auto& alpha = jt.at("alpha");
  if (static_cast<int>(alpha.size()) != spec.n_groups)
    throw std::invalid_argument("config: truth alpha needs one row per group");
  for (int r = 0; r < spec.n_groups; ++r)
    for (int j = 0; j < spec.p(); ++j) th.alpha(r, j) = alpha.at(r).at(j).get<double>();

  auto fill_cov = [&](GroupCov& gc, const json& jc) {
    if (jc.contains("lambda")) {
      const auto& lam = jc.at("lambda");
      for (int j = 0; j < spec.p(); ++j)
        for (int f = 0; f < spec.k; ++f) gc.lambda(j, f) = lam.at(j).at(f).get<double>();
    }
    if (jc.contains("psi2"))
      for (int j = 0; j < spec.p_c; ++j) gc.psi2[j] = jc.at("psi2").at(j).get<double>();
    if (jc.contains("phi"))
      for (int a = 0; a < spec.k; ++a)
        for (int b = 0; b < spec.k; ++b) gc.phi(a, b) = jc.at("phi").at(a).at(b).get<double>();
    if (spec.has_omega() && jc.contains("omega"))
      for (int a = 0; a < spec.p_b; ++a)
        for (int b = 0; b < spec.p_b; ++b) gc.omega(a, b) = jc.at("omega").at(a).at(b).get<double>();
    if (spec.variant == Variant::SAT && jc.contains("corr_c"))
      for (int a = 0; a < spec.p_c; ++a)
        for (int b = 0; b < spec.p_c; ++b)
          gc.corr_c(a, b) = jc.at("corr_c").at(a).at(b).get<double>();
  };
  if (jt.contains("cov")) {
    const auto& covs = jt.at("cov");
    if (static_cast<int>(covs.size()) != spec.n_cov_copies())
      throw std::invalid_argument("config: truth cov list has the wrong length");
    for (int c = 0; c < spec.n_cov_copies(); ++c) fill_cov(th.cov[c], covs.at(c));
  } else {
    for (auto& gc : th.cov) fill_cov(gc, jt);
  }
  validate_theta(spec, th);
  return th;
}

void apply_overrides(RunConfig& cfg, const json& j) {
  if (j.contains("prior")) {
    const auto& p = j["prior"];
    cfg.prior.alpha_sd = p.value("alpha_sd", cfg.prior.alpha_sd);
    cfg.prior.loading_sd_binary = p.value("loading_sd_binary", cfg.prior.loading_sd_binary);
    cfg.prior.crossloading_sd = p.value("crossloading_sd", cfg.prior.crossloading_sd);
    cfg.prior.c0 = p.value("c0", cfg.prior.c0);
    cfg.prior.lkj_eta = p.value("lkj_eta", cfg.prior.lkj_eta);
    cfg.prior.iw_dof_offset = p.value("iw_dof_offset", cfg.prior.iw_dof_offset);
    cfg.prior.loading_sd_continuous =
        p.value("loading_sd_continuous", cfg.prior.loading_sd_continuous);
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    cfg.fit.warmup = f.value("warmup", cfg.fit.warmup);
    cfg.fit.samples = f.value("samples", cfg.fit.samples);
    cfg.fit.n_leapfrog = f.value("n_leapfrog", cfg.fit.n_leapfrog);
    cfg.fit.target_accept = f.value("target_accept", cfg.fit.target_accept);
  }
  if (j.contains("smc")) {
    const auto& s = j["smc"];
    cfg.smc.n_particles = s.value("particles", cfg.smc.n_particles);
    cfg.smc.ess_fraction = s.value("ess_fraction", cfg.smc.ess_fraction);
    cfg.smc.n_jitter = s.value("n_jitter", cfg.smc.n_jitter);
    cfg.smc.n_leapfrog = s.value("n_leapfrog", cfg.smc.n_leapfrog);
    cfg.smc.jitter_early_boost = s.value("jitter_early_boost", cfg.smc.jitter_early_boost);
    cfg.smc.target_accept = s.value("target_accept", cfg.smc.target_accept);
    std::string resampler = s.value("resampler", "multinomial");
    if (resampler == "multinomial") {
      cfg.smc.resampler = Resampler::Multinomial;
    } else if (resampler == "systematic") {
      cfg.smc.resampler = Resampler::Systematic;
    } else {
      throw std::invalid_argument("config: resampler must be multinomial or systematic");
    }
  }
  if (j.contains("assess")) {
    const auto& a = j["assess"];
    cfg.assess.folds = a.value("folds", cfg.assess.folds);
    cfg.assess.ppp_thin = a.value("ppp_thin", cfg.assess.ppp_thin);
    cfg.assess.n_mc_patterns = a.value("n_mc_patterns", cfg.assess.n_mc_patterns);
    cfg.assess.n_mc_logscore = a.value("n_mc_logscore", cfg.assess.n_mc_logscore);
    cfg.assess.logscore_draws = a.value("logscore_draws", cfg.assess.logscore_draws);
  }
  cfg.dataset_path = j.value("dataset", cfg.dataset_path);
}

RunConfig config_from_json(const json& j) {
  json schema_js = j.at("schema");
  RunConfig cfg{schema_from_json(schema_js),
                mcda_from_json(schema_js, j.contains("mcda") ? j["mcda"] : json(),
                               schema_from_json(schema_js)),
                PriorConfig{},
                {},
                {},
                Theta{},
                ModelChoice{},
                FitConfig{},
                SmcConfig{},
                AssessConfig{},
                std::string()};
  for (const auto& name : j.at("models"))
    cfg.models.push_back(parse_model_name(name.get<std::string>()));
  if (cfg.models.empty()) throw std::invalid_argument("config: at least one model required");

  const auto& sim = j.at("simulate");
  cfg.simulate_counts.assign(cfg.schema.n_groups(), 0);
  for (int r = 0; r < cfg.schema.n_groups(); ++r)
    cfg.simulate_counts[r] = sim.at("counts").at(cfg.schema.group_label(r)).get<int>();
  cfg.truth_model = parse_model_name(sim.value("model", cfg.models[0].name));
  cfg.truth = truth_from_json_obj(sim.at("truth"), cfg.spec_for(cfg.truth_model));

  apply_overrides(cfg, j);
  return cfg;
}

}  // namespace

RunConfig default_config() { return config_from_json(default_json()); }

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
  json j = json::parse(f);
  return config_from_json(j);
}

std::string truth_to_json(const Theta& theta, const ModelSpec& spec, const OutcomeSchema& schema) {
  json j;
  j["model"] = spec.name();
  j["groups"] = schema.group_labels();
  for (int r = 0; r < spec.n_groups; ++r) {
    json row = json::array();
    for (int jj = 0; jj < spec.p(); ++jj) row.push_back(theta.alpha(r, jj));
    j["alpha"].push_back(row);
  }
  json covs = json::array();
  for (const auto& gc : theta.cov) {
    json jc;
    for (int jj = 0; jj < spec.p(); ++jj) {
      json row = json::array();
      for (int f = 0; f < spec.k; ++f) row.push_back(gc.lambda(jj, f));
      jc["lambda"].push_back(row);
    }
    for (int jj = 0; jj < spec.p_c; ++jj) jc["psi2"].push_back(gc.psi2[jj]);
    if (spec.k > 0)
      for (int a = 0; a < spec.k; ++a) {
        json row = json::array();
        for (int b = 0; b < spec.k; ++b) row.push_back(gc.phi(a, b));
        jc["phi"].push_back(row);
      }
    if (spec.has_omega())
      for (int a = 0; a < spec.p_b; ++a) {
        json row = json::array();
        for (int b = 0; b < spec.p_b; ++b) row.push_back(gc.omega(a, b));
        jc["omega"].push_back(row);
      }
    if (spec.variant == Variant::SAT)
      for (int a = 0; a < spec.p_c; ++a) {
        json row = json::array();
        for (int b = 0; b < spec.p_c; ++b) row.push_back(gc.corr_c(a, b));
        jc["corr_c"].push_back(row);
      }
    covs.push_back(jc);
  }
  j["cov"] = covs;
  return j.dump(2);
}

Theta truth_from_json(const std::string& text, const ModelSpec& spec) {
  return truth_from_json_obj(json::parse(text), spec);
}

namespace {

// Constrained display vector aligned with ParamMap::names: intercepts and
// loadings as-is, variances (not logs), correlation and omega matrix entries.
Eigen::VectorXd display_values(const ParamMap& map, const Theta& theta) {
  const ModelSpec& spec = map.spec();
  Eigen::VectorXd v(map.dim());
  for (int r = 0; r < spec.n_groups; ++r)
    for (int j = 0; j < spec.p(); ++j) v[map.alpha_index(r, j)] = theta.alpha(r, j);
  for (const auto& e : map.loadings()) v[e.x_index] = theta.cov[e.cov_index].lambda(e.item, e.factor);
  for (int c = 0; c < spec.n_cov_copies(); ++c) {
    const auto& gc = theta.cov[c];
    for (int j = 0; j < spec.p_c; ++j) v[map.psi_index(c, j)] = gc.psi2[j];
    if (map.corr_offset(c) >= 0) {
      const Eigen::MatrixXd& corr = (spec.variant == Variant::SAT) ? gc.corr_c : gc.phi;
      int q = 0;
      for (int i = 1; i < map.corr_dim(); ++i)
        for (int j = 0; j < i; ++j) v[map.corr_offset(c) + q++] = corr(i, j);
    }
    if (map.omega_offset(c) >= 0) {
      int q = 0;
      for (int i = 0; i < spec.p_b; ++i)
        for (int j = 0; j <= i; ++j) v[map.omega_offset(c) + q++] = gc.omega(i, j);
    }
  }
  return v;
}

Theta theta_from_display(const ParamMap& map, const Eigen::VectorXd& v) {
  const ModelSpec& spec = map.spec();
  Theta th = make_zero_theta(spec);
  for (int r = 0; r < spec.n_groups; ++r)
    for (int j = 0; j < spec.p(); ++j) th.alpha(r, j) = v[map.alpha_index(r, j)];
  for (const auto& e : map.loadings()) th.cov[e.cov_index].lambda(e.item, e.factor) = v[e.x_index];
  for (int c = 0; c < spec.n_cov_copies(); ++c) {
    auto& gc = th.cov[c];
    for (int j = 0; j < spec.p_c; ++j) gc.psi2[j] = v[map.psi_index(c, j)];
    if (map.corr_offset(c) >= 0) {
      Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(map.corr_dim(), map.corr_dim());
      int q = 0;
      for (int i = 1; i < map.corr_dim(); ++i)
        for (int j = 0; j < i; ++j) {
          corr(i, j) = v[map.corr_offset(c) + q++];
          corr(j, i) = corr(i, j);
        }
      if (spec.variant == Variant::SAT) {
        gc.corr_c = corr;
      } else {
        gc.phi = corr;
      }
    }
    if (map.omega_offset(c) >= 0) {
      int q = 0;
      for (int i = 0; i < spec.p_b; ++i)
        for (int j = 0; j <= i; ++j) {
          gc.omega(i, j) = v[map.omega_offset(c) + q++];
          gc.omega(j, i) = gc.omega(i, j);
        }
    }
  }
  return th;
}

}  // namespace

void write_draws(const std::vector<Theta>& draws, const ModelSpec& spec,
                 const OutcomeSchema& schema, const std::string& path) {
  ParamMap map(spec);
  auto names = map.names(&schema);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_draws: cannot open '" + path + "'");
  for (size_t i = 0; i < names.size(); ++i) f << (i ? "," : "") << names[i];
  f << '\n';
  char buf[64];
  for (const auto& th : draws) {
    Eigen::VectorXd v = display_values(map, th);
    for (int i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      f << (i ? "," : "") << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_draws: write failed for '" + path + "'");
}

std::vector<Theta> read_draws(const std::string& path, const ModelSpec& spec,
                              const OutcomeSchema& schema) {
  ParamMap map(spec);
  auto names = map.names(&schema);
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_draws: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_draws: empty file '" + path + "'");
  {
    std::istringstream ss(line);
    std::string field;
    size_t i = 0;
    while (std::getline(ss, field, ',')) {
      if (i >= names.size() || field != names[i])
        throw std::runtime_error("read_draws: header does not match the model '" + spec.name() + "'");
      ++i;
    }
    if (i != names.size()) throw std::runtime_error("read_draws: header too short");
  }
  std::vector<Theta> draws;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    Eigen::VectorXd v(map.dim());
    int i = 0;
    while (std::getline(ss, field, ',')) {
      if (i >= map.dim()) throw std::runtime_error("read_draws: row too long");
      v[i++] = std::stod(field);
    }
    if (i != map.dim()) throw std::runtime_error("read_draws: row too short");
    draws.push_back(theta_from_display(map, v));
  }
  if (draws.empty()) throw std::runtime_error("read_draws: no draws in '" + path + "'");
  return draws;
}

void write_summary(const std::vector<Theta>& draws, const ModelSpec& spec,
                   const OutcomeSchema& schema, const std::string& path) {
  if (draws.empty()) throw std::invalid_argument("write_summary: no draws");
  ParamMap map(spec);
  auto names = map.names(&schema);
  Eigen::MatrixXd values(static_cast<int>(draws.size()), map.dim());
  for (size_t m = 0; m < draws.size(); ++m) values.row(static_cast<int>(m)) = display_values(map, draws[m]);

  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_summary: cannot open '" + path + "'");
  f << "parameter,q025,q975,mean,median\n";
  char buf[64];
  std::vector<double> w(draws.size(), 1.0);
  for (int i = 0; i < map.dim(); ++i) {
    std::vector<double> col(values.col(i).data(), values.col(i).data() + values.rows());
    double q025 = weighted_quantile(col, w, 0.025);
    double q975 = weighted_quantile(col, w, 0.975);
    double mean = values.col(i).mean();
    double median = weighted_quantile(col, w, 0.5);
    f << names[i];
    for (double v : {q025, q975, mean, median}) {
      std::snprintf(buf, sizeof(buf), "%.8g", v);
      f << ',' << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_summary: write failed for '" + path + "'");
}

}  // namespace bra
