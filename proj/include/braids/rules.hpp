#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/ridge.hpp"

namespace braids {

// Constraint on one column: lower < x <= upper for continuous columns, or
// membership of the level mask for categorical columns.
struct Condition {
  int column = -1;
  bool categorical = false;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::uint64_t levels = 0;

  bool holds(double value) const;
  std::string describe(const std::vector<ColumnSpec>& columns) const;
  friend bool operator==(const Condition&, const Condition&) = default;
};

// Conjunction of conditions, at most one per column, sorted by column.
struct Rule {
  std::vector<Condition> conditions;
  double support = 0.0;

  bool holds(const Eigen::MatrixXd& x, Eigen::Index row) const;
  Eigen::VectorXd indicator(const Eigen::MatrixXd& x) const;
  std::string describe(const std::vector<ColumnSpec>& columns) const;
  nlohmann::json to_json(const std::vector<ColumnSpec>& columns) const;
  static Rule from_json(const nlohmann::json& j);
};

class RuleSet {
 public:
  RuleSet() = default;
  // Computes supports and column means on the reference covariates.
  RuleSet(std::vector<Rule> rules, const Eigen::MatrixXd& x);

  int size() const { return static_cast<int>(rules_.size()); }
  bool empty() const { return rules_.empty(); }
  const std::vector<Rule>& rules() const { return rules_; }
  const Eigen::VectorXd& centers() const { return centers_; }
  // N x K indicator design centered by the reference means.
  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const;

 private:
  std::vector<Rule> rules_;
  Eigen::VectorXd centers_;
};

struct RuleBasis {
  RuleSet prognostic;
  RuleSet modifier;
  std::vector<std::string> warnings;
  // Continuous covariate columns entering the prognostic design as centered
  // linear terms, with their reference means.
  std::vector<int> linear_columns;
  Eigen::VectorXd linear_centers;

  // Prognostic rule indicators followed by the linear terms.
  Eigen::MatrixXd prognostic_design(const Eigen::MatrixXd& x) const;

  nlohmann::json to_json(const std::vector<ColumnSpec>& columns) const;
  static RuleBasis from_json(const nlohmann::json& j, const Eigen::MatrixXd& x);
};

// Centering of the outcome inside the effect proxy: the arm means of Y, or
// the in-sample fit of the prognostic ensemble.
enum class ProxyCentering { kArmMean, kPrognosticFit };

struct BoostConfig {
  int n_trees = 50;
  int max_depth = 3;
  double learning_rate = 0.1;
  double subsample = 0.8;
  double min_support = 0.05;
  int min_leaf = 5;
  int max_bins = 32;
  int max_rules = 100;  // per basis, in extraction order
  bool linear_terms = true;  // continuous covariates join the prognostic design
  ProxyCentering centering = ProxyCentering::kPrognosticFit;
  std::uint64_t seed = 1;

  void validate() const;
};

// Squared-error gradient boosting of `target` on the covariates; every
// non-root node's path condition becomes a rule. Rules with identical or
// complementary indicators on d are dropped after the first, as are rules
// with support outside [min_support, 1 - min_support].
std::vector<Rule> boosted_rules(const Dataset& d, const Eigen::VectorXd& target, const BoostConfig& cfg);

struct BoostFit {
  std::vector<Rule> rules;
  Eigen::VectorXd fitted;  // ensemble prediction of the target per row
};
BoostFit boosted_fit(const Dataset& d, const Eigen::VectorXd& target, const BoostConfig& cfg);

// Per-unit effect proxy (Y - mean_arm(Y)) (A - e) / (e (1 - e)).
Eigen::VectorXd effect_proxy(const Dataset& d);
// Per-unit effect proxy (Y - m_hat) (A - e) / (e (1 - e)).
Eigen::VectorXd effect_proxy(const Dataset& d, const Eigen::VectorXd& m_hat);

// Prognostic rules from Y, modifier rules from the effect proxy.
RuleBasis extract_rules(const Dataset& d, const BoostConfig& cfg);

// Linear effect model on the centered rule designs. An empty modifier basis
// gives a constant-effect model; an empty prognostic basis is an error.
LinearEffectFit fit_rule_bcf(const Dataset& d, const RuleBasis& basis, const RidgePrior& prior,
                             const McmcConfig& mcmc, bool observational = false,
                             std::string model_name = "rule_bcf");

}  // namespace braids
