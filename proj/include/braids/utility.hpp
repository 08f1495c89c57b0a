#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/tree.hpp"

namespace braids {

class EmptySubgroupError : public std::runtime_error {
 public:
  EmptySubgroupError() : std::runtime_error("empty subgroup") {}
};

struct GroupStat {
  int k = 0;
  int size = 0;
  double tau_hat = 0.0;   // posterior mean of tau(G_k)
  double variance = 0.0;  // posterior variance of tau(G_k), denominator S
};

// Expected BRAIDS utility of a partition, up to a partition-independent
// constant:
//   value = (1 - lambda) * var_term - within_sse
//   var_term   = (1/N) sum_k N_k Var{tau(G_k) | D}
//   within_sse = (1/N) sum_i (tau_hat(X_i) - tau_hat(G_(i)))^2
struct UtilityReport {
  double lambda = 0.0;
  double value = 0.0;
  double within_sse = 0.0;
  double var_term = 0.0;
  std::vector<GroupStat> groups;

  nlohmann::json to_json() const;
};

// S x K matrix of per-draw subgroup effects tau(G_k): the mean of tau(X_i)
// over the units in group k.
Eigen::MatrixXd subgroup_tau_draws(const PosteriorDraws& draws, const Partition& groups);
Eigen::MatrixXd subgroup_tau_draws(const PosteriorDraws& draws, const SubgroupTree& tree,
                                   const Dataset& d);

UtilityReport expected_utility_braids(const PosteriorDraws& draws, const Partition& groups,
                                      double lambda);
UtilityReport expected_utility_braids(const PosteriorDraws& draws, const SubgroupTree& tree,
                                      const Dataset& d, double lambda);

// Expected utility when the follow-up predictions t_k are supplied instead of
// set to their optimum: adds -lambda (1/N) sum_k N_k (tau_hat(G_k) - t_k)^2.
double expected_utility_with_predictions(const PosteriorDraws& draws, const Partition& groups,
                                         double lambda, std::span<const double> predictions);

// Risk-seeking utility two ways. form_a is the direct posterior expectation
//   (1/N) sum_k N_k [ (tau_hat(G_k) - tau_hat(X))^2 + Var{tau(G_k) - tau(X) | D} ]
// and form_b the lambda = 0 BRAIDS value. form_a - form_b does not depend on
// the partition.
struct RsDecomposition {
  double form_a = 0.0;
  double form_b = 0.0;
};
RsDecomposition expected_utility_rs_decomposed(const PosteriorDraws& draws, const Partition& groups);

// sum_i V(X_i) (tau_hat(X_i) - delta)
double expected_welfare(const PosteriorDraws& draws, std::span<const int> actions, double delta);
double expected_welfare(const PosteriorDraws& draws, const PolicyTree& policy, const Dataset& d,
                        double delta);

// sum_i V(X_i) (Pr{tau(X_i) >= delta | D} - c)
double expected_efficacy(const PosteriorDraws& draws, std::span<const int> actions, double delta,
                         double c);
double expected_efficacy(const PosteriorDraws& draws, const PolicyTree& policy, const Dataset& d,
                         double delta, double c);

// Per-unit posterior probability Pr{tau(X_i) >= delta | D}.
Eigen::VectorXd exceedance_probability(const PosteriorDraws& draws, double delta);

}  // namespace braids
