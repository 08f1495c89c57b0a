#include "braids/utility.hpp"

#include <cmath>

namespace braids {

namespace {

void check_partition(const PosteriorDraws& draws, const Partition& groups) {
  if (groups.n_units() != draws.n_units()) {
    throw std::invalid_argument("partition and draws disagree on the number of units");
  }
}

// Plug-in (denominator S) variance of a column of draws.
double draw_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().mean();
}

void check_actions(const PosteriorDraws& draws, std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != draws.n_units()) {
    throw std::invalid_argument("policy actions and draws disagree on the number of units");
  }
}

}  // namespace

nlohmann::json UtilityReport::to_json() const {
  nlohmann::json g = nlohmann::json::array();
  for (const auto& s : groups) {
    g.push_back({{"group", s.k + 1}, {"size", s.size}, {"tau_hat", s.tau_hat}, {"variance", s.variance}});
  }
  return {{"lambda", lambda}, {"value", value}, {"within_sse", within_sse}, {"var_term", var_term}, {"groups", g}};
}

Eigen::MatrixXd subgroup_tau_draws(const PosteriorDraws& draws, const Partition& groups) {
  check_partition(draws, groups);
  const auto sizes = groups.sizes();
  for (int s : sizes) {
    if (s == 0) throw EmptySubgroupError();
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(draws.n_draws(), groups.n_groups);
  for (int i = 0; i < draws.n_units(); ++i) out.col(groups.group[i]) += draws.tau().col(i);
  for (int k = 0; k < groups.n_groups; ++k) out.col(k) /= static_cast<double>(sizes[k]);
  return out;
}

Eigen::MatrixXd subgroup_tau_draws(const PosteriorDraws& draws, const SubgroupTree& tree,
                                   const Dataset& d) {
  return subgroup_tau_draws(draws, tree.partition(d));
}

UtilityReport expected_utility_braids(const PosteriorDraws& draws, const Partition& groups,
                                      double lambda) {
  const Eigen::MatrixXd group_draws = subgroup_tau_draws(draws, groups);
  const Eigen::VectorXd tau_hat = draws.posterior_mean();
  const auto sizes = groups.sizes();
  const double n = draws.n_units();

  UtilityReport r;
  r.lambda = lambda;
  std::vector<double> group_hat(groups.n_groups);
  for (int k = 0; k < groups.n_groups; ++k) {
    const Eigen::VectorXd col = group_draws.col(k);
    GroupStat g{k, sizes[k], col.mean(), draw_variance(col)};
    group_hat[k] = g.tau_hat;
    r.var_term += sizes[k] * g.variance;
    r.groups.push_back(g);
  }
  r.var_term /= n;
  for (int i = 0; i < draws.n_units(); ++i) {
    const double dev = tau_hat[i] - group_hat[groups.group[i]];
    r.within_sse += dev * dev;
  }
  r.within_sse /= n;
  r.value = (1.0 - lambda) * r.var_term - r.within_sse;
  return r;
}

UtilityReport expected_utility_braids(const PosteriorDraws& draws, const SubgroupTree& tree,
                                      const Dataset& d, double lambda) {
  return expected_utility_braids(draws, tree.partition(d), lambda);
}

double expected_utility_with_predictions(const PosteriorDraws& draws, const Partition& groups,
                                         double lambda, std::span<const double> predictions) {
  if (static_cast<int>(predictions.size()) != groups.n_groups) {
    throw std::invalid_argument("one prediction per group required");
  }
  const UtilityReport r = expected_utility_braids(draws, groups, lambda);
  double miss = 0.0;
  for (const auto& g : r.groups) {
    const double d = g.tau_hat - predictions[g.k];
    miss += g.size * d * d;
  }
  return r.value - lambda * miss / draws.n_units();
}

RsDecomposition expected_utility_rs_decomposed(const PosteriorDraws& draws, const Partition& groups) {
  const Eigen::MatrixXd group_draws = subgroup_tau_draws(draws, groups);
  const auto sizes = groups.sizes();
  const Eigen::VectorXd& ate = draws.ate();
  const double ate_hat = ate.mean();
  double a = 0.0;
  for (int k = 0; k < groups.n_groups; ++k) {
    const Eigen::VectorXd dev = group_draws.col(k) - ate;
    const double shift = group_draws.col(k).mean() - ate_hat;
    a += sizes[k] * (shift * shift + draw_variance(dev));
  }
  RsDecomposition out;
  out.form_a = a / draws.n_units();
  out.form_b = expected_utility_braids(draws, groups, 0.0).value;
  return out;
}

double expected_welfare(const PosteriorDraws& draws, std::span<const int> actions, double delta) {
  check_actions(draws, actions);
  const Eigen::VectorXd tau_hat = draws.posterior_mean();
  double total = 0.0;
  for (int i = 0; i < draws.n_units(); ++i) {
    if (actions[i] == 1) total += tau_hat[i] - delta;
  }
  return total;
}

double expected_welfare(const PosteriorDraws& draws, const PolicyTree& policy, const Dataset& d,
                        double delta) {
  const auto actions = policy.actions(d);
  return expected_welfare(draws, actions, delta);
}

Eigen::VectorXd exceedance_probability(const PosteriorDraws& draws, double delta) {
  return (draws.tau().array() >= delta).cast<double>().colwise().mean().transpose();
}

double expected_efficacy(const PosteriorDraws& draws, std::span<const int> actions, double delta,
                         double c) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("c must lie in [0, 1]");
  check_actions(draws, actions);
  const Eigen::VectorXd p = exceedance_probability(draws, delta);
  double total = 0.0;
  for (int i = 0; i < draws.n_units(); ++i) {
    if (actions[i] == 1) total += p[i] - c;
  }
  return total;
}

double expected_efficacy(const PosteriorDraws& draws, const PolicyTree& policy, const Dataset& d,
                         double delta, double c) {
  const auto actions = policy.actions(d);
  return expected_efficacy(draws, actions, delta, c);
}

}  // namespace braids
