#include "braids/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace braids {

namespace {

class Section {
 public:
  Section(const nlohmann::json& j, std::string name, std::set<std::string> allowed)
      : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    for (const auto& [key, value] : j.items())
      if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in '" + name_ + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const nlohmann::json& at(const std::string& key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return name_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("invalid value for '" + path(key) + "'");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) const {
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
};

ColumnKind parse_kind(const std::string& s) {
  if (s == "continuous") return ColumnKind::kContinuous;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw ConfigError("unknown column kind '" + s + "'");
}

DataConfig parse_data(const nlohmann::json& j) {
  Section s(j, "data", {"path", "outcome", "treatment", "covariates", "propensity_column", "propensity", "id_column",
                        "propensity_bound"});
  DataConfig d;
  std::string path;
  s.get("path", path);
  if (path.empty()) throw ConfigError("'data.path' is required");
  d.path = path;
  s.get("outcome", d.schema.outcome);
  s.get("treatment", d.schema.treatment);
  if (d.schema.outcome.empty() || d.schema.treatment.empty())
    throw ConfigError("'data.outcome' and 'data.treatment' are required");
  if (!s.has("covariates") || !s.at("covariates").is_array() || s.at("covariates").empty())
    throw ConfigError("'data.covariates' must be a nonempty array");
  for (const auto& c : s.at("covariates")) {
    CovariateRole role;
    if (c.is_string()) {
      role.name = c.get<std::string>();
    } else {
      Section cs(c, "data.covariates[]", {"name", "kind"});
      cs.get("name", role.name);
      std::string kind = "continuous";
      cs.get("kind", kind);
      role.kind = parse_kind(kind);
    }
    if (role.name.empty()) throw ConfigError("covariate without a name");
    d.schema.covariates.push_back(role);
  }
  s.get("propensity_column", d.schema.propensity_column);
  s.get("propensity", d.schema.propensity_constant);
  s.get("id_column", d.schema.id_column);
  s.get("propensity_bound", d.schema.propensity_bound);
  return d;
}

RidgePrior parse_prior(const nlohmann::json& j, const std::string& name) {
  Section s(j, name, {"sigma_mu", "s_tau", "sigma2_shape", "sigma2_rate", "intercept_sd", "fixed_sigma",
                      "fixed_sigma_tau"});
  RidgePrior p;
  s.get("sigma_mu", p.sigma_mu);
  s.get("s_tau", p.s_tau);
  s.get("sigma2_shape", p.sigma2_shape);
  s.get("sigma2_rate", p.sigma2_rate);
  s.get("intercept_sd", p.intercept_sd);
  s.get("fixed_sigma", p.fixed_sigma);
  s.get("fixed_sigma_tau", p.fixed_sigma_tau);
  return p;
}

McmcConfig parse_mcmc(const nlohmann::json& j) {
  Section s(j, "mcmc", {"n_draws", "n_burn", "thin"});
  McmcConfig m;
  s.get("n_draws", m.n_draws);
  s.get("n_burn", m.n_burn);
  s.get("thin", m.thin);
  return m;
}

BoostConfig parse_rules(const nlohmann::json& j) {
  Section s(j, "rules", {"n_trees", "max_depth", "learning_rate", "subsample", "min_support", "min_leaf", "max_bins",
                         "max_rules", "proxy_centering", "linear_terms"});
  BoostConfig b;
  s.get("n_trees", b.n_trees);
  s.get("max_depth", b.max_depth);
  s.get("learning_rate", b.learning_rate);
  s.get("subsample", b.subsample);
  s.get("min_support", b.min_support);
  s.get("min_leaf", b.min_leaf);
  s.get("max_bins", b.max_bins);
  s.get("max_rules", b.max_rules);
  s.get("linear_terms", b.linear_terms);
  std::string centering = "prognostic-fit";
  s.get("proxy_centering", centering);
  if (centering == "prognostic-fit") {
    b.centering = ProxyCentering::kPrognosticFit;
  } else if (centering == "arm-mean") {
    b.centering = ProxyCentering::kArmMean;
  } else {
    throw ConfigError("unknown proxy_centering '" + centering + "'");
  }
  return b;
}

SearchMode parse_mode(const std::string& m) {
  if (m == "exact") return SearchMode::kExact;
  if (m == "greedy") return SearchMode::kGreedy;
  throw ConfigError("unknown search mode '" + m + "'");
}

SubgroupsConfig parse_subgroups(const nlohmann::json& j) {
  Section s(j, "subgroups", {"max_depth", "min_leaf", "mode", "lambdas", "depth_penalty", "max_thresholds",
                             "prespecified", "contrasts", "alpha"});
  SubgroupsConfig c;
  s.get("max_depth", c.search.max_depth);
  s.get("min_leaf", c.search.min_leaf);
  std::string mode = "exact";
  s.get("mode", mode);
  c.search.mode = parse_mode(mode);
  s.get("lambdas", c.lambdas);
  s.get("depth_penalty", c.search.depth_penalty);
  s.get("max_thresholds", c.max_thresholds);
  s.get("alpha", c.alpha);
  if (s.has("prespecified")) {
    for (const auto& g : s.at("prespecified")) {
      Section gs(g, "subgroups.prespecified[]", {"name", "factors"});
      PrespecifiedSpec spec;
      gs.get("name", spec.name);
      gs.get("factors", spec.factors);
      if (spec.name.empty() || spec.factors.empty() || spec.factors.size() > 2)
        throw ConfigError("prespecified partitions need a name and one or two factors");
      c.prespecified.push_back(spec);
    }
  }
  if (s.has("contrasts")) {
    for (const auto& pair : s.at("contrasts")) {
      if (!pair.is_array() || pair.size() != 2) throw ConfigError("contrasts must be pairs of group indices");
      c.contrasts.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    }
  }
  return c;
}

PolicyConfig parse_policy(const nlohmann::json& j) {
  Section s(j, "policy", {"utility", "delta", "c", "max_depth", "min_leaf", "max_thresholds"});
  PolicyConfig p;
  std::string utility = "welfare";
  s.get("utility", utility);
  if (utility == "welfare") {
    p.utility = PolicyUtility::kWelfare;
  } else if (utility == "efficacy") {
    p.utility = PolicyUtility::kEfficacy;
  } else {
    throw ConfigError("unknown policy utility '" + utility + "'");
  }
  s.get("delta", p.delta);
  s.get("c", p.c);
  s.get("max_depth", p.max_depth);
  s.get("min_leaf", p.min_leaf);
  s.get("max_thresholds", p.max_thresholds);
  return p;
}

CalibrateConfig parse_calibrate(const nlohmann::json& j) {
  Section s(j, "calibrate", {"depth_law", "lambda_depth", "alpha", "beta", "split_rule", "m_trees", "sigma_tau",
                             "s_tau", "n_samples", "n_rows", "p", "correlation"});
  CalibrateConfig c;
  std::string law = "chipman", rule = "uniform";
  s.get("depth_law", law);
  s.get("split_rule", rule);
  if (law == "poisson") {
    c.prior.depth_law = DepthLaw::kPoisson;
  } else if (law == "chipman") {
    c.prior.depth_law = DepthLaw::kChipman;
  } else {
    throw ConfigError("unknown depth law '" + law + "'");
  }
  if (rule == "uniform") {
    c.prior.split_rule = SplitRule::kUniform;
  } else if (rule == "median") {
    c.prior.split_rule = SplitRule::kMedian;
  } else {
    throw ConfigError("unknown split rule '" + rule + "'");
  }
  s.get("lambda_depth", c.prior.lambda_depth);
  s.get("alpha", c.prior.alpha);
  s.get("beta", c.prior.beta);
  s.get("m_trees", c.prior.m_trees);
  s.get("sigma_tau", c.prior.sigma_tau);
  s.get("s_tau", c.prior.s_tau);
  s.get("n_samples", c.n_samples);
  s.get("n_rows", c.n_rows);
  s.get("p", c.p);
  s.get("correlation", c.correlation);
  return c;
}

Condition parse_condition(const nlohmann::json& j, int p) {
  Section s(j, "condition", {"column", "lower", "upper"});
  Condition c;
  s.get("column", c.column);
  if (c.column < 0 || c.column >= p) throw ConfigError("condition column out of range");
  s.get("lower", c.lower);
  s.get("upper", c.upper);
  return c;
}

SimulateConfig parse_simulate(const nlohmann::json& j) {
  Section s(j, "simulate", {"experiment", "dgp", "preset", "p", "sigma", "methods", "pipelines", "reps", "n", "n_fit",
                            "n_holdout", "alpha", "min_leaf", "max_depth", "max_thresholds", "s_tau_mismatch"});
  SimulateConfig c;
  std::string experiment = "utility";
  s.get("experiment", experiment);
  if (experiment == "utility") {
    c.experiment = Experiment::kUtility;
  } else if (experiment == "coverage") {
    c.experiment = Experiment::kCoverage;
  } else if (experiment == "calibration") {
    c.experiment = Experiment::kCalibration;
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  if (s.has("dgp") && s.has("preset")) throw ConfigError("give either 'simulate.dgp' or 'simulate.preset'");
  int p = 5;
  double sigma = 0.1;
  s.get("p", p);
  s.get("sigma", sigma);
  std::string preset = "linear";
  s.get("preset", preset);
  try {
    c.dgp = s.has("dgp") ? parse_dgp(s.at("dgp")) : preset_dgp(preset, p, sigma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    if (s.has("methods")) {
      c.methods.clear();
      for (const auto& m : s.at("methods").get<std::vector<std::string>>()) c.methods.push_back(parse_method(m));
    }
    if (s.has("pipelines")) {
      c.pipelines.clear();
      for (const auto& m : s.at("pipelines").get<std::vector<std::string>>()) c.pipelines.push_back(parse_pipeline(m));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.get("reps", c.reps);
  s.get("n", c.n);
  s.get("n_fit", c.n_fit);
  s.get("n_holdout", c.n_holdout);
  s.get("alpha", c.alpha);
  s.get("min_leaf", c.min_leaf);
  s.get("max_depth", c.max_depth);
  s.get("max_thresholds", c.max_thresholds);
  s.get("s_tau_mismatch", c.s_tau_mismatch);
  return c;
}

}  // namespace

Surface parse_surface(const nlohmann::json& j, int p) {
  Section s(j, "surface", {"intercept", "linear", "terms"});
  Surface out;
  s.get("intercept", out.intercept);
  if (s.has("linear")) {
    std::vector<double> coef;
    s.get("linear", coef);
    if (static_cast<int>(coef.size()) != p) throw ConfigError("surface 'linear' must have p entries");
    out.linear = Eigen::Map<Eigen::VectorXd>(coef.data(), p);
  }
  if (s.has("terms")) {
    for (const auto& t : s.at("terms")) {
      Section ts(t, "surface.terms[]", {"conditions", "value"});
      Rule r;
      if (!ts.has("conditions")) throw ConfigError("surface term needs conditions");
      for (const auto& c : ts.at("conditions")) r.conditions.push_back(parse_condition(c, p));
      std::sort(r.conditions.begin(), r.conditions.end(),
                [](const Condition& a, const Condition& b) { return a.column < b.column; });
      double value = 0.0;
      ts.get("value", value);
      out.terms.emplace_back(std::move(r), value);
    }
  }
  return out;
}

SyntheticDgp parse_dgp(const nlohmann::json& j) {
  Section s(j, "dgp", {"p", "correlation", "n_binary", "mu", "tau", "treat_prob", "sigma"});
  SyntheticDgp d;
  s.get("p", d.p);
  s.get("correlation", d.correlation);
  s.get("n_binary", d.n_binary);
  s.get("treat_prob", d.treat_prob);
  s.get("sigma", d.sigma);
  if (s.has("mu")) d.mu = parse_surface(s.at("mu"), d.p);
  if (s.has("tau")) d.tau = parse_surface(s.at("tau"), d.p);
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

void RunConfig::validate() const {
  try {
    prior.validate();
    mcmc.validate();
    rules.validate();
    subgroups.search.validate();
    calibrate.prior.validate();
    simulate.dgp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (subgroups.lambdas.empty()) throw ConfigError("'subgroups.lambdas' must not be empty");
  for (double l : subgroups.lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambdas must be finite and >= 0");
  if (!(subgroups.alpha > 0.0 && subgroups.alpha < 1.0)) throw ConfigError("'subgroups.alpha' must lie in (0, 1)");
  if (subgroups.max_thresholds < 1) throw ConfigError("'subgroups.max_thresholds' must be >= 1");
  if (policy.max_depth < 0 || policy.max_depth > kMaxPolicyDepth)
    throw ConfigError("'policy.max_depth' must lie in [0, 2] for exact policy search");
  if (policy.min_leaf < 1) throw ConfigError("'policy.min_leaf' must be >= 1");
  if (!(policy.c >= 0.0 && policy.c <= 1.0)) throw ConfigError("'policy.c' must lie in [0, 1]");
  if (calibrate.n_samples < 100) throw ConfigError("'calibrate.n_samples' must be >= 100");
  if (calibrate.n_rows < 2 || calibrate.p < 1) throw ConfigError("'calibrate' needs n_rows >= 2 and p >= 1");
  if (!(calibrate.correlation >= 0.0 && calibrate.correlation < 1.0))
    throw ConfigError("'calibrate.correlation' must lie in [0, 1)");
  if (simulate.reps < 2) throw ConfigError("'simulate.reps' must be >= 2");
  if (simulate.experiment == Experiment::kCalibration && simulate.reps < 50)
    throw ConfigError("calibration needs 'simulate.reps' >= 50");
  if (simulate.n < 2 || simulate.n_fit < 2 || simulate.n_holdout < 2) throw ConfigError("sample sizes must be >= 2");
  if (!(simulate.alpha > 0.0 && simulate.alpha < 1.0)) throw ConfigError("'simulate.alpha' must lie in (0, 1)");
  if (!(simulate.s_tau_mismatch > 0.0)) throw ConfigError("'simulate.s_tau_mismatch' must be positive");
  if (threads < 1) throw ConfigError("'threads' must be >= 1");
}

RunConfig parse_run_config(const nlohmann::json& j) {
  Section s(j, "config", {"data", "model", "observational", "prior", "mcmc", "rules", "subgroups", "policy",
                          "calibrate", "simulate", "output_dir", "seed", "threads"});
  RunConfig c;
  if (s.has("data")) c.data = parse_data(s.at("data"));
  std::string model = "ridge";
  s.get("model", model);
  try {
    c.model = parse_method(model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.get("observational", c.observational);
  if (s.has("prior")) c.prior = parse_prior(s.at("prior"), "prior");
  if (s.has("mcmc")) c.mcmc = parse_mcmc(s.at("mcmc"));
  if (s.has("rules")) c.rules = parse_rules(s.at("rules"));
  if (s.has("subgroups")) c.subgroups = parse_subgroups(s.at("subgroups"));
  if (s.has("policy")) c.policy = parse_policy(s.at("policy"));
  if (s.has("calibrate")) c.calibrate = parse_calibrate(s.at("calibrate"));
  if (s.has("simulate")) c.simulate = parse_simulate(s.at("simulate"));
  std::string out;
  s.get("output_dir", out);
  if (!out.empty()) c.output_dir = out;
  s.get("seed", c.seed);
  s.get("threads", c.threads);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config file '" + path.string() + "': " + e.what());
  }
  RunConfig c = parse_run_config(j);
  if (c.data && c.data->path.is_relative()) c.data->path = path.parent_path() / c.data->path;
  return c;
}

}  // namespace braids
