// Command-line front end: fit, subgroups, policy, calibrate-prior, simulate.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "braids/config.hpp"
#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/inference.hpp"
#include "braids/prior_calibration.hpp"
#include "braids/ridge.hpp"
#include "braids/rng.hpp"
#include "braids/rules.hpp"
#include "braids/search.hpp"
#include "braids/simulation.hpp"
#include "braids/stats.hpp"
#include "braids/tree.hpp"
#include "braids/utility.hpp"

namespace fs = std::filesystem;
using namespace braids;

namespace {

constexpr int kUsageError = 1;
constexpr int kComputationError = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::optional<int> threads;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

Dataset load_data(const RunConfig& cfg) {
  if (!cfg.data) throw ConfigError("this subcommand needs a 'data' section in the config");
  return load_dataset(cfg.data->path, cfg.data->schema);
}

nlohmann::json recipe_json(const StandardizationRecipe& r, const Dataset& d) {
  nlohmann::json cols = nlohmann::json::array();
  for (int j = 0; j < d.p(); ++j)
    cols.push_back({{"name", d.column(j).name}, {"center", r.x_centers[j]}, {"scale", r.x_scales[j]}});
  return {{"y_center", r.y_center}, {"y_scale", r.y_scale}, {"covariates", cols}};
}

void write_trace(const PosteriorDraws& draws, std::ostream& os) {
  os << "parameter\tmean\tsd\tlag1_autocorrelation\n";
  os.precision(10);
  auto row = [&](const char* name, const Eigen::VectorXd& v) {
    const auto s = as_span(v);
    os << name << '\t' << mean(s) << '\t' << std::sqrt(variance(s, 1)) << '\t' << lag1_autocorrelation(s) << '\n';
  };
  row("ate", draws.ate());
  row("sigma", draws.hyper().col(0));
  row("sigma_tau", draws.hyper().col(1));
}

int cmd_fit(const Overrides& o, const std::optional<std::string>& model_flag, bool csv) {
  RunConfig cfg = resolve(o);
  if (model_flag) cfg.model = parse_method(*model_flag);
  cfg.validate();
  const Dataset d = load_data(cfg);
  fs::create_directories(cfg.output_dir);

  auto [ds, recipe] = standardize(d);
  McmcConfig mcmc = cfg.mcmc;
  mcmc.seed = derive_seed(cfg.seed, "mcmc");
  std::optional<LinearEffectFit> fit;
  if (cfg.model == Method::kRuleBcf) {
    BoostConfig boost = cfg.rules;
    boost.seed = derive_seed(cfg.seed, "rules");
    const RuleBasis basis = extract_rules(ds, boost);
    for (const auto& w : basis.warnings) std::cerr << "warning: " << w << '\n';
    write_json(cfg.output_dir / "rule_basis.json", basis.to_json(d.columns()));
    fit.emplace(fit_rule_bcf(ds, basis, cfg.prior, mcmc, cfg.observational, "rule-bcf"));
  } else {
    const RidgePrior prior = cfg.model == Method::kFlatLinear ? RidgePrior::flat_linear() : cfg.prior;
    fit.emplace(fit_ridge(ds, prior, mcmc, cfg.observational, to_string(cfg.model)));
  }
  const PosteriorDraws draws = fit->draws.rescaled(recipe.y_scale);
  write_draws(draws, cfg.output_dir / "draws");
  if (csv) write_draws_csv(draws, cfg.output_dir / "draws.csv");
  write_json(cfg.output_dir / "standardization.json", recipe_json(recipe, d));
  auto trace = open_out(cfg.output_dir / "trace.tsv");
  write_trace(draws, trace);
  write_trace(draws, std::cout);
  std::cout << "wrote " << draws.n_draws() << " draws for " << draws.n_units() << " units to "
            << (cfg.output_dir / "draws.bin").string() << '\n';
  return 0;
}

PosteriorDraws load_draws_for(const RunConfig& cfg, const std::string& draws_flag, const Dataset& d) {
  const fs::path stem = draws_flag.empty() ? cfg.output_dir / "draws" : fs::path(draws_flag);
  PosteriorDraws draws = read_draws(stem);
  if (draws.n_units() != d.n()) throw std::runtime_error("draws file does not match the dataset size");
  return draws;
}

int cmd_subgroups(const Overrides& o, const std::string& draws_flag, const std::vector<int>& contrast,
                  const std::optional<std::string>& mode_flag, const std::vector<double>& lambda_flag) {
  RunConfig cfg = resolve(o);
  if (mode_flag) cfg.subgroups.search.mode = *mode_flag == "greedy" ? SearchMode::kGreedy : SearchMode::kExact;
  if (mode_flag && *mode_flag != "greedy" && *mode_flag != "exact") throw ConfigError("--mode must be exact or greedy");
  if (!lambda_flag.empty()) cfg.subgroups.lambdas = lambda_flag;
  if (!contrast.empty()) {
    if (contrast.size() != 2) throw ConfigError("--contrast takes two group indices");
    cfg.subgroups.contrasts.emplace_back(contrast[0], contrast[1]);
  }
  cfg.validate();
  const Dataset d = load_data(cfg);
  const PosteriorDraws draws = load_draws_for(cfg, draws_flag, d);
  fs::create_directories(cfg.output_dir);
  const auto& sc = cfg.subgroups;
  const CutpointGrid grid = build_cutpoints(d, sc.search.min_leaf, sc.max_thresholds);
  const Eigen::VectorXd tau_hat = draws.posterior_mean();

  nlohmann::json results = nlohmann::json::array();
  std::optional<SubgroupTree> first_tree;
  for (std::size_t li = 0; li < sc.lambdas.size(); ++li) {
    SearchConfig search = sc.search;
    search.lambda = sc.lambdas[li];
    SubgroupTree tree;
    UtilityReport report;
    if (search.mode == SearchMode::kGreedy) {
      tree = search_greedy_rn(tau_hat, d, grid, search);
      report = expected_utility_braids(draws, tree, d, sc.lambdas[li]);
    } else {
      const SearchResult r = search_exact(draws, d, grid, search);
      tree = r.tree;
      report = r.report;
    }
    if (!first_tree) first_tree = tree;
    const SubgroupSummary summary = subgroup_summary(draws, tree, d, sc.alpha);
    std::cout << "lambda = " << sc.lambdas[li] << "\n" << tree.render(d.columns()) << "\n";
    std::cout << "value " << report.value << "  within_sse " << report.within_sse << "  var_term " << report.var_term
              << "\n";
    summary.write_table(std::cout);
    std::cout << '\n';
    auto table = open_out(cfg.output_dir / ("subgroups_" + std::to_string(li) + ".tsv"));
    summary.write_table(table);
    auto dens = open_out(cfg.output_dir / ("delta_density_" + std::to_string(li) + ".tsv"));
    summary.write_delta_densities(dens);
    results.push_back({{"lambda", sc.lambdas[li]},
                       {"tree", tree.structure().to_json(d.columns())},
                       {"utility", report.to_json()},
                       {"summary", summary.to_json()}});
  }
  write_json(cfg.output_dir / "subgroups.json", results);

  if (!sc.prespecified.empty()) {
    std::vector<PrespecifiedPartition> groups;
    for (const auto& spec : sc.prespecified) {
      PrespecifiedPartition g{spec.name, {}};
      for (const auto& f : spec.factors) g.factors.push_back(d.column_index(f));
      groups.push_back(g);
    }
    const auto rows = evaluate_prespecified(draws, d, groups, sc.lambdas);
    auto out = open_out(cfg.output_dir / "prespecified_ranking.tsv");
    for (std::ostream* os : {static_cast<std::ostream*>(&std::cout), static_cast<std::ostream*>(&out)}) {
      *os << "partition\tlambda\tvalue\trank\tfeasible\n";
      for (const auto& r : rows)
        *os << r.name << '\t' << r.lambda << '\t' << r.value << '\t' << r.rank << '\t' << (r.feasible ? 1 : 0)
            << '\n';
    }
  }

  if (!sc.contrasts.empty()) {
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& [k1, k2] : sc.contrasts) {
      const ContrastSummary c = subgroup_contrast(draws, *first_tree, d, k1 - 1, k2 - 1, sc.alpha);
      std::cout << "contrast " << k1 << " - " << k2 << ": mean " << c.mean << " interval (" << c.interval.lower << ", "
                << c.interval.upper << ") P(<0) " << c.prob_negative << '\n';
      cj.push_back(c.to_json());
    }
    write_json(cfg.output_dir / "contrasts.json", cj);
  }
  return 0;
}

int cmd_policy(const Overrides& o, const std::string& draws_flag) {
  RunConfig cfg = resolve(o);
  cfg.validate();
  const Dataset d = load_data(cfg);
  const PosteriorDraws draws = load_draws_for(cfg, draws_flag, d);
  fs::create_directories(cfg.output_dir);
  const auto& pc = cfg.policy;
  Eigen::VectorXd scores;
  if (pc.utility == PolicyUtility::kWelfare) {
    scores = draws.posterior_mean().array() - pc.delta;
  } else {
    scores = exceedance_probability(draws, pc.delta).array() - pc.c;
  }
  const CutpointGrid grid = build_cutpoints(d, pc.min_leaf, pc.max_thresholds);
  const PolicyResult result = policy_search_exact(scores, d, grid, pc.max_depth, pc.min_leaf);
  const double check = pc.utility == PolicyUtility::kWelfare
                           ? expected_welfare(draws, result.tree, d, pc.delta)
                           : expected_efficacy(draws, result.tree, d, pc.delta, pc.c);
  std::cout << result.tree.render(d.columns()) << "\nexpected value " << result.value << " (recomputed " << check
            << ")\n";
  write_json(cfg.output_dir / "policy.json",
             {{"utility", pc.utility == PolicyUtility::kWelfare ? "welfare" : "efficacy"},
              {"delta", pc.delta},
              {"c", pc.c},
              {"tree", result.tree.structure().to_json(d.columns())},
              {"value", result.value},
              {"value_recomputed", check},
              {"candidates", result.candidates}});
  return 0;
}

Eigen::MatrixXd equicorrelated_rows(int n, int p, double rho, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const double z0 = rng.normal();
    for (int j = 0; j < p; ++j) x(i, j) = std::sqrt(rho) * z0 + std::sqrt(1.0 - rho) * rng.normal();
  }
  return x;
}

int cmd_calibrate(const Overrides& o) {
  RunConfig cfg = resolve(o);
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const auto& cc = cfg.calibrate;
  const Eigen::MatrixXd x = equicorrelated_rows(cc.n_rows, cc.p, cc.correlation, derive_seed(cfg.seed, "rows"));
  const HeterogeneitySample hs = prior_heterogeneity_mc(x, cc.prior, cc.n_samples, derive_seed(cfg.seed, "prior"),
                                                        cfg.threads);
  double lambda = cc.prior.lambda_depth;
  double tail = 0.0;
  if (cc.prior.depth_law == DepthLaw::kChipman) {
    const MeanLeafDepth m = mean_leaf_depth_chipman(cc.prior.alpha, cc.prior.beta);
    lambda = m.lambda;
    tail = m.tail_mass;
  }
  const double sigma2 = cc.prior.s_tau ? 2.0 * *cc.prior.s_tau * *cc.prior.s_tau : cc.prior.sigma_tau * cc.prior.sigma_tau;
  const double closed = sigma2 * theorem3_closed_form(1.0, lambda, cc.prior.split_rule);
  nlohmann::json report{{"mean_leaf_depth", lambda},
                        {"depth_truncation_tail_mass", tail},
                        {"closed_form_h2", closed},
                        {"mc", hs.to_json()}};
  if (cc.prior.depth_law == DepthLaw::kChipman && cc.prior.beta == 0.0 && cc.prior.alpha <= 0.5)
    report["geometric_closed_form_h2"] = sigma2 * geometric_variant_closed_form(1.0, cc.prior.alpha);
  write_json(cfg.output_dir / "calibration.json", report);
  auto hist = open_out(cfg.output_dir / "heterogeneity_histograms.tsv");
  hs.write_histograms(hist);
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const Overrides& o, const std::optional<int>& reps_flag) {
  RunConfig cfg = resolve(o);
  if (reps_flag) cfg.simulate.reps = *reps_flag;
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const auto& sc = cfg.simulate;
  const FitSettings fit{cfg.prior, cfg.mcmc, cfg.rules};
  const std::uint64_t seed = derive_seed(cfg.seed, "simulate");
  switch (sc.experiment) {
    case Experiment::kUtility: {
      UtilityExperimentConfig uc;
      uc.reps = sc.reps;
      uc.n = sc.n;
      uc.search.max_depth = sc.max_depth;
      uc.search.min_leaf = sc.min_leaf;
      uc.max_thresholds = sc.max_thresholds;
      uc.fit = fit;
      uc.threads = cfg.threads;
      const auto report = run_utility_experiment(sc.dgp, sc.methods, uc, seed);
      auto rec = open_out(cfg.output_dir / "utility_records.tsv");
      report.write_records(rec);
      auto sum = open_out(cfg.output_dir / "utility_summary.tsv");
      report.write_summary(sum, sc.methods);
      report.write_summary(std::cout, sc.methods);
      break;
    }
    case Experiment::kCoverage: {
      CoverageExperimentConfig cc;
      cc.reps = sc.reps;
      cc.n_fit = sc.n_fit;
      cc.n_holdout = sc.n_holdout;
      cc.alpha = sc.alpha;
      cc.search.max_depth = sc.max_depth;
      cc.search.min_leaf = sc.min_leaf;
      cc.max_thresholds = sc.max_thresholds;
      cc.fit = fit;
      cc.threads = cfg.threads;
      const auto report = run_coverage_experiment(sc.dgp, sc.pipelines, cc, seed);
      auto iv = open_out(cfg.output_dir / "coverage_intervals.tsv");
      report.write_intervals(iv);
      auto w = open_out(cfg.output_dir / "coverage_widths.tsv");
      report.write_widths(w);
      auto sum = open_out(cfg.output_dir / "coverage_summary.tsv");
      report.write_summary(sum, sc.pipelines);
      report.write_summary(std::cout, sc.pipelines);
      break;
    }
    case Experiment::kCalibration: {
      CalibrationConfig cc;
      cc.reps = sc.reps;
      cc.alpha = sc.alpha;
      cc.generating_prior = cfg.prior;
      if (cc.generating_prior.intercept_sd > 10.0) {
        std::cerr << "note: calibration draws intercepts from Normal(0, 1); the flat intercept prior cannot be sampled\n";
        cc.generating_prior.intercept_sd = 1.0;
      }
      if (sc.s_tau_mismatch != 1.0) {
        RidgePrior fp = cc.generating_prior;
        fp.s_tau *= sc.s_tau_mismatch;
        cc.fit_prior = fp;
      }
      cc.mcmc = cfg.mcmc;
      cc.search.max_depth = sc.max_depth;
      cc.search.min_leaf = sc.min_leaf;
      cc.max_thresholds = sc.max_thresholds;
      cc.threads = cfg.threads;
      const SyntheticData design = generate(sc.dgp, sc.n, derive_seed(seed, "design"));
      const CalibrationReport report = prior_predictive_calibration(design.data, cc, seed);
      write_json(cfg.output_dir / "prior_predictive_calibration.json", report.to_json());
      std::cout << report.to_json().dump(2) << '\n';
      break;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian subgroup detection and policy estimation from posterior draws"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Root seed (overrides the config)");
    sub->add_option("--output-dir", o.output_dir, "Output directory (overrides the config)");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* fit = app.add_subcommand("fit", "Fit a heterogeneous-effects model and write posterior draws");
  add_common(fit);
  std::optional<std::string> model;
  bool csv = false;
  fit->add_option("--model", model, "ridge | flat-linear | rule-bcf")
      ->check(CLI::IsMember({"ridge", "flat-linear", "rule-bcf"}));
  fit->add_flag("--csv", csv, "Also write a delimited text export of the draws");

  auto* sub = app.add_subcommand("subgroups", "Search for subgroups and summarize their effects");
  add_common(sub);
  std::string draws_path;
  std::vector<int> contrast;
  std::optional<std::string> mode;
  std::vector<double> lambdas;
  sub->add_option("--draws", draws_path, "Draws file stem (default <output-dir>/draws)");
  sub->add_option("--contrast", contrast, "Two group numbers (1-based) to contrast")->expected(2);
  sub->add_option("--mode", mode, "exact | greedy")->check(CLI::IsMember({"exact", "greedy"}));
  sub->add_option("--lambda", lambdas, "Risk parameters");

  auto* pol = app.add_subcommand("policy", "Exact policy tree search");
  add_common(pol);
  pol->add_option("--draws", draws_path, "Draws file stem (default <output-dir>/draws)");

  auto* cal = app.add_subcommand("calibrate-prior", "Monte Carlo of the tree-ensemble heterogeneity prior");
  add_common(cal);

  auto* sim = app.add_subcommand("simulate", "Run a simulation experiment");
  add_common(sim);
  std::optional<int> reps;
  sim->add_option("--reps", reps, "Replications (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, model, csv);
    if (sub->parsed()) return cmd_subgroups(o, draws_path, contrast, mode, lambdas);
    if (pol->parsed()) return cmd_policy(o, draws_path);
    if (cal->parsed()) return cmd_calibrate(o);
    if (sim->parsed()) return cmd_simulate(o, reps);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kComputationError;
  }
  return kUsageError;
}
