#include "braids/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "braids/utility.hpp"

namespace braids {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

std::span<const double> column_span(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

double fraction_below(std::span<const double> x, double value) {
  std::size_t count = 0;
  for (double v : x)
    if (v < value) ++count;
  return static_cast<double>(count) / static_cast<double>(x.size());
}

constexpr double kZ975 = 1.959963984540054;

}  // namespace

Interval credible_interval(std::span<const double> draws, double alpha) {
  check_alpha(alpha);
  if (draws.empty()) throw std::invalid_argument("no draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, alpha / 2.0), quantile_sorted(sorted, 1.0 - alpha / 2.0)};
}

SubgroupSummary subgroup_summary(const PosteriorDraws& draws, const Partition& groups, double alpha) {
  check_alpha(alpha);
  SubgroupSummary out;
  out.alpha = alpha;
  out.group_draws = subgroup_tau_draws(draws, groups);
  out.delta_draws = out.group_draws.colwise() - draws.ate();
  const auto sizes = groups.sizes();
  for (int k = 0; k < groups.n_groups; ++k) {
    GroupSummary g;
    g.k = k;
    g.size = sizes[k];
    const auto gd = column_span(out.group_draws, k);
    const auto dd = column_span(out.delta_draws, k);
    g.mean = mean(gd);
    g.interval = credible_interval(gd, alpha);
    g.delta_mean = mean(dd);
    g.delta_interval = credible_interval(dd, alpha);
    g.prob_delta_negative = fraction_below(dd, 0.0);
    out.groups.push_back(g);
  }
  return out;
}

SubgroupSummary subgroup_summary(const PosteriorDraws& draws, const SubgroupTree& tree, const Dataset& d,
                                 double alpha) {
  return subgroup_summary(draws, tree.partition(d), alpha);
}

nlohmann::json SubgroupSummary::to_json() const {
  nlohmann::json groups_j = nlohmann::json::array();
  for (const auto& g : groups) {
    groups_j.push_back({{"group", g.k + 1},
                        {"size", g.size},
                        {"tau_mean", g.mean},
                        {"tau_interval", {g.interval.lower, g.interval.upper}},
                        {"delta_mean", g.delta_mean},
                        {"delta_interval", {g.delta_interval.lower, g.delta_interval.upper}},
                        {"prob_delta_negative", g.prob_delta_negative}});
  }
  return {{"alpha", alpha}, {"groups", std::move(groups_j)}};
}

void SubgroupSummary::write_table(std::ostream& os) const {
  os << "group\tsize\ttau_mean\ttau_lower\ttau_upper\tdelta_mean\tdelta_lower\tdelta_upper\tprob_delta_negative\n";
  os.precision(10);
  for (const auto& g : groups) {
    os << g.k + 1 << '\t' << g.size << '\t' << g.mean << '\t' << g.interval.lower << '\t' << g.interval.upper << '\t'
       << g.delta_mean << '\t' << g.delta_interval.lower << '\t' << g.delta_interval.upper << '\t'
       << g.prob_delta_negative << '\n';
  }
}

void SubgroupSummary::write_delta_densities(std::ostream& os, int grid_points) const {
  os << "group\tbandwidth\tx\tdensity\n";
  os.precision(10);
  for (Eigen::Index k = 0; k < delta_draws.cols(); ++k) {
    const auto curve = kernel_density(column_span(delta_draws, k), grid_points);
    for (std::size_t g = 0; g < curve.grid.size(); ++g)
      os << k << '\t' << curve.bandwidth << '\t' << curve.grid[g] << '\t' << curve.density[g] << '\n';
  }
}

ContrastSummary subgroup_contrast(const PosteriorDraws& draws, const Partition& groups, int k1, int k2,
                                  double alpha) {
  check_alpha(alpha);
  if (k1 == k2) throw std::invalid_argument("contrast requires two different groups");
  if (k1 < 0 || k2 < 0 || k1 >= groups.n_groups || k2 >= groups.n_groups)
    throw std::invalid_argument("group index out of range");
  const Eigen::MatrixXd gd = subgroup_tau_draws(draws, groups);
  ContrastSummary c;
  c.k1 = k1;
  c.k2 = k2;
  c.draws = gd.col(k1) - gd.col(k2);
  const auto s = as_span(c.draws);
  c.mean = mean(s);
  c.interval = credible_interval(s, alpha);
  c.prob_negative = fraction_below(s, 0.0);
  return c;
}

ContrastSummary subgroup_contrast(const PosteriorDraws& draws, const SubgroupTree& tree, const Dataset& d,
                                  int k1, int k2, double alpha) {
  return subgroup_contrast(draws, tree.partition(d), k1, k2, alpha);
}

nlohmann::json ContrastSummary::to_json() const {
  return {{"group_1", k1 + 1},
          {"group_2", k2 + 1},
          {"mean", mean},
          {"interval", {interval.lower, interval.upper}},
          {"prob_negative", prob_negative}};
}

Eigen::VectorXd aipw_influence(const Dataset& d, const Eigen::VectorXd& mu0_hat, const Eigen::VectorXd& mu1_hat) {
  if (mu0_hat.size() != d.n() || mu1_hat.size() != d.n())
    throw std::invalid_argument("outcome predictions and data have different N");
  Eigen::VectorXd out(d.n());
  for (int i = 0; i < d.n(); ++i) {
    const double e = d.propensity()[i];
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("propensity must lie strictly inside (0, 1)");
    const double mu_a = d.treated(i) ? mu1_hat[i] : mu0_hat[i];
    out[i] = mu1_hat[i] - mu0_hat[i] + (d.a()[i] - e) * (d.y()[i] - mu_a) / (e * (1.0 - e));
  }
  return out;
}

AipwEstimate aipw_subgroup(const Dataset& d, const Eigen::VectorXd& mu0_hat, const Eigen::VectorXd& mu1_hat,
                           std::span<const int> mask) {
  if (mask.size() != static_cast<std::size_t>(d.n())) throw std::invalid_argument("mask and data have different N");
  AipwEstimate out;
  out.influence = aipw_influence(d, mu0_hat, mu1_hat);
  std::vector<double> values;
  for (int i = 0; i < d.n(); ++i)
    if (mask[i] != 0) values.push_back(out.influence[i]);
  if (values.empty()) throw EmptySubgroupError();
  out.size = static_cast<int>(values.size());
  out.estimate = mean(values);
  out.se = values.size() > 1 ? std::sqrt(variance(values, 1) / static_cast<double>(values.size()))
                             : std::numeric_limits<double>::quiet_NaN();
  out.interval = {out.estimate - kZ975 * out.se, out.estimate + kZ975 * out.se};
  return out;
}

std::vector<AipwEstimate> aipw_subgroups(const Dataset& d, const Eigen::VectorXd& mu0_hat,
                                         const Eigen::VectorXd& mu1_hat, const Partition& groups) {
  if (groups.n_units() != d.n()) throw std::invalid_argument("partition and data have different N");
  std::vector<AipwEstimate> out;
  std::vector<int> mask(d.n());
  for (int k = 0; k < groups.n_groups; ++k) {
    for (int i = 0; i < d.n(); ++i) mask[i] = groups.group[i] == k ? 1 : 0;
    out.push_back(aipw_subgroup(d, mu0_hat, mu1_hat, mask));
  }
  return out;
}

}  // namespace braids
