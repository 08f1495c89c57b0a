#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/ridge.hpp"
#include "braids/rules.hpp"
#include "braids/search.hpp"

namespace braids {

// intercept + linear . x + sum of values of the rules that hold.
struct Surface {
  double intercept = 0.0;
  Eigen::VectorXd linear;  // empty or length p
  std::vector<std::pair<Rule, double>> terms;

  double operator()(const Eigen::MatrixXd& x, Eigen::Index row) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& x) const;
};

// Continuous covariates are equicorrelated standard normals; the last
// n_binary of the p columns are replaced by Bernoulli(0.5) indicators coded
// as continuous 0/1.
struct SyntheticDgp {
  int p = 5;
  double correlation = 0.0;
  int n_binary = 0;
  Surface mu;
  Surface tau;
  double treat_prob = 0.2;
  double sigma = 0.1;

  void validate() const;
};

struct SyntheticData {
  Dataset data;
  Eigen::VectorXd tau0;
  Eigen::VectorXd mu0;
};

SyntheticData generate(const SyntheticDgp& dgp, int n, std::uint64_t seed);

// Named designs: "linear" (sparse linear effect), "tree" (step-function
// effect), "constant" (homogeneous effect 0.5), "null" (no effect).
SyntheticDgp preset_dgp(const std::string& name, int p = 5, double sigma = 0.1);

enum class Method { kRidge, kFlatLinear, kRuleBcf };
std::string to_string(Method m);
Method parse_method(const std::string& name);

struct FitSettings {
  RidgePrior prior;
  McmcConfig mcmc;
  BoostConfig boost;
};

// A model fitted to standardized data, reported in outcome units.
struct MethodFit {
  Method method;
  StandardizationRecipe recipe;
  LinearEffectFit fit;
  RuleBasis basis;
  PosteriorDraws draws;
  Eigen::VectorXd dummy_centers;  // ridge design centering for categorical levels

  // Posterior-mean outcome regressions for new units, in outcome units.
  ArmPredictions predict(const Dataset& d) const;
};

MethodFit fit_method(Method method, const Dataset& d, const FitSettings& settings, std::uint64_t seed);

struct UtilityRecord {
  int rep = 0;
  Method method = Method::kRidge;
  bool failed = false;
  double cate_mse = 0.0;
  double realized_utility = 0.0;  // between-group variance of the true effects
  int n_groups = 0;
};

struct MethodSummary {
  std::string name;
  int n_ok = 0;
  int n_failed = 0;
  double mse_mean = 0.0;
  double mse_se = 0.0;
  double utility_mean = 0.0;
  double utility_se = 0.0;
};

struct UtilityExperimentReport {
  std::uint64_t seed = 0;
  int reps = 0;
  std::vector<UtilityRecord> records;

  std::vector<MethodSummary> summary(const std::vector<Method>& methods) const;
  // Per-rep paired difference a - b of CATE MSE (reps where both succeeded).
  std::vector<double> paired_mse_difference(Method a, Method b) const;
  void write_records(std::ostream& os) const;
  void write_summary(std::ostream& os, const std::vector<Method>& methods) const;
};

struct UtilityExperimentConfig {
  int reps = 50;
  int n = 500;
  SearchConfig search{.max_depth = 2, .min_leaf = 50, .mode = SearchMode::kGreedy};
  int max_thresholds = 32;
  FitSettings fit;
  int threads = 1;
};

// Per rep: fit each method, greedy risk-neutral search on its posterior
// mean, realized utility (1/N) sum_i (tau0(G_(i)) - mean tau0)^2 under the
// true effects, and CATE MSE.
UtilityExperimentReport run_utility_experiment(const SyntheticDgp& dgp, const std::vector<Method>& methods,
                                               const UtilityExperimentConfig& cfg, std::uint64_t seed);

enum class Pipeline { kRidgeDoubleDip, kRuleBcfDoubleDip, kFlatLinearDoubleDip, kHonestAipw };
std::string to_string(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

struct IntervalRecord {
  int rep = 0;
  Pipeline pipeline = Pipeline::kHonestAipw;
  int group = 0;
  int size = 0;
  double truth = 0.0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool covered = false;
};

struct PipelineSummary {
  std::string name;
  int n_intervals = 0;
  int n_skipped = 0;
  int n_failed = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_width = 0.0;
};

struct CoverageExperimentReport {
  std::uint64_t seed = 0;
  int reps = 0;
  std::vector<IntervalRecord> intervals;
  std::vector<std::pair<int, Pipeline>> skipped;  // empty holdout groups (rep, pipeline)
  std::vector<std::pair<int, Pipeline>> failed;

  std::vector<PipelineSummary> summary(const std::vector<Pipeline>& pipelines) const;
  void write_intervals(std::ostream& os) const;
  // Boxplot-ready: pipeline, width.
  void write_widths(std::ostream& os) const;
  void write_summary(std::ostream& os, const std::vector<Pipeline>& pipelines) const;
};

struct CoverageExperimentConfig {
  int reps = 100;
  int n_fit = 1000;
  int n_holdout = 500;
  double alpha = 0.05;
  SearchConfig search{.max_depth = 2, .min_leaf = 100, .mode = SearchMode::kGreedy};
  int max_thresholds = 32;
  FitSettings fit;
  int threads = 1;
};

// Per rep: subgroups are found by greedy risk-neutral search on the fit set.
// Double-dip pipelines report credible intervals for tau(G_k) from the same
// fit. The honest pipeline detects with the ridge fit, then applies the AIPW
// estimator on the holdout with that fit's outcome predictions. Truth is the
// mean true effect over the group's units in the evaluation sample.
CoverageExperimentReport run_coverage_experiment(const SyntheticDgp& dgp, const std::vector<Pipeline>& pipelines,
                                                 const CoverageExperimentConfig& cfg, std::uint64_t seed);

// Default ridge prior with unit-sd intercepts, so it can be sampled from.
inline RidgePrior proper_intercept_prior() {
  RidgePrior p;
  p.intercept_sd = 1.0;
  return p;
}

struct CalibrationConfig {
  int reps = 200;
  double alpha = 0.05;
  RidgePrior generating_prior = proper_intercept_prior();
  std::optional<RidgePrior> fit_prior;  // defaults to the generating prior
  McmcConfig mcmc;
  SearchConfig search{.max_depth = 2, .min_leaf = 20, .mode = SearchMode::kGreedy};
  int max_thresholds = 16;
  int threads = 1;
};

struct CalibrationReport {
  int reps = 0;
  double alpha = 0.05;
  // Intervals for tau(G_k) of the data-selected groups.
  int n_group_intervals = 0;
  double group_coverage = 0.0;
  double group_coverage_se = 0.0;
  // Intervals for tau(G_k) - tau(X) of the same groups.
  int n_delta_intervals = 0;
  double delta_coverage = 0.0;
  double delta_coverage_se = 0.0;
  // Intervals for tau(G_k) and tau(G_k) - tau(X) of the selected group that
  // holds one unit chosen per rep independently of the data; one interval
  // per rep, so the binomial SE applies without clustering.
  double member_coverage = 0.0;
  double member_coverage_se = 0.0;
  int n_member_delta = 0;
  double member_delta_coverage = 0.0;
  double member_delta_coverage_se = 0.0;
  // Interval for tau(X_i) of one unit chosen per rep independently of the data.
  double unit_coverage = 0.0;
  double unit_coverage_se = 0.0;

  nlohmann::json to_json() const;
};

// Draws coefficients, noise and hyperparameters from the generating prior on
// the ridge design of `design` (its outcomes are ignored), simulates
// outcomes, fits with the fit prior, selects subgroups on the posterior mean
// and checks interval coverage of the draw's true subgroup effects.
CalibrationReport prior_predictive_calibration(const Dataset& design, const CalibrationConfig& cfg,
                                               std::uint64_t seed);

}  // namespace braids
