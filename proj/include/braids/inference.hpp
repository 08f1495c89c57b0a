#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/stats.hpp"
#include "braids/tree.hpp"

namespace braids {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Equal-tailed (alpha/2, 1 - alpha/2) interval from type-7 quantiles.
Interval credible_interval(std::span<const double> draws, double alpha);

struct GroupSummary {
  int k = 0;
  int size = 0;
  double mean = 0.0;        // posterior mean of tau(G_k)
  Interval interval;        // for tau(G_k)
  double delta_mean = 0.0;  // posterior mean of tau(G_k) - tau(X)
  Interval delta_interval;
  double prob_delta_negative = 0.0;
};

struct SubgroupSummary {
  double alpha = 0.05;
  std::vector<GroupSummary> groups;
  Eigen::MatrixXd group_draws;  // S x K draws of tau(G_k)
  Eigen::MatrixXd delta_draws;  // S x K draws of tau(G_k) - tau(X)

  nlohmann::json to_json() const;
  void write_table(std::ostream& os) const;
  // Long-format kernel density curves of the deviation draws:
  // group, bandwidth, x, density.
  void write_delta_densities(std::ostream& os, int grid_points = 256) const;
};

SubgroupSummary subgroup_summary(const PosteriorDraws& draws, const Partition& groups, double alpha);
SubgroupSummary subgroup_summary(const PosteriorDraws& draws, const SubgroupTree& tree, const Dataset& d,
                                 double alpha);

struct ContrastSummary {
  int k1 = 0;
  int k2 = 0;
  Eigen::VectorXd draws;  // tau(G_k1) - tau(G_k2)
  double mean = 0.0;
  Interval interval;
  double prob_negative = 0.0;

  nlohmann::json to_json() const;
};

ContrastSummary subgroup_contrast(const PosteriorDraws& draws, const Partition& groups, int k1, int k2,
                                  double alpha);
ContrastSummary subgroup_contrast(const PosteriorDraws& draws, const SubgroupTree& tree, const Dataset& d,
                                  int k1, int k2, double alpha);

// mu1 - mu0 + (A - e)(Y - mu_A) / (e (1 - e)) per unit.
Eigen::VectorXd aipw_influence(const Dataset& d, const Eigen::VectorXd& mu0_hat, const Eigen::VectorXd& mu1_hat);

struct AipwEstimate {
  double estimate = 0.0;
  double se = 0.0;
  Interval interval;  // normal approximation, 95%
  int size = 0;
  Eigen::VectorXd influence;  // all units
};

// Estimate over the units whose mask entry is nonzero.
AipwEstimate aipw_subgroup(const Dataset& d, const Eigen::VectorXd& mu0_hat, const Eigen::VectorXd& mu1_hat,
                           std::span<const int> mask);
// One estimate per group of the partition.
std::vector<AipwEstimate> aipw_subgroups(const Dataset& d, const Eigen::VectorXd& mu0_hat,
                                         const Eigen::VectorXd& mu1_hat, const Partition& groups);

}  // namespace braids
