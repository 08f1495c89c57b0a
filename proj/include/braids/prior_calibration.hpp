#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "braids/rng.hpp"

namespace braids {

enum class DepthLaw { kPoisson, kChipman };
enum class SplitRule { kUniform, kMedian };

// Prior over sums of m_trees regression trees. A node at depth d branches
// with probability p(d): Pr(Z > d | Z >= d) for Z ~ Poisson(lambda_depth), or
// alpha / (1 + d)^beta. Leaf values are Normal(0, sigma_tau^2 / m_trees); when
// s_tau is set, sigma_tau ~ Exp(scale = s_tau) per forest.
struct TreePriorConfig {
  DepthLaw depth_law = DepthLaw::kChipman;
  double lambda_depth = 1.2;
  double alpha = 0.95;
  double beta = 2.0;
  SplitRule split_rule = SplitRule::kUniform;
  int m_trees = 50;
  double sigma_tau = 1.0;
  std::optional<double> s_tau;
  int max_depth = 64;  // hard cap; nodes at this depth are leaves

  void validate() const;
  double split_probability(int depth) const;
};

struct PriorTreeDraw {
  Eigen::VectorXd value;   // per row
  std::vector<int> depth;  // leaf depth per row
  std::vector<int> leaf;   // leaf id per row
};

// One tree. The split column is uniform over columns. Uniform rule: one of
// the n + 1 gaps between the node's sorted values is chosen uniformly (the
// end gaps leave a child empty). Median rule: the lower ceil(n / 2) values go
// left. Nodes with fewer than two rows are leaves.
PriorTreeDraw sample_prior_tree(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, double leaf_sd, Rng& rng);

// Sum of m_trees trees with leaf sd sigma_tau / sqrt(m_trees).
Eigen::VectorXd sample_prior_forest(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, double sigma_tau,
                                    std::uint64_t seed);

struct HeterogeneitySample {
  std::vector<double> h;  // sqrt of the empirical variance (denominator N)
  std::vector<double> m;  // max_i |tau(X_i) - mean|
  double mean_h2 = 0.0;
  double mc_se = 0.0;

  nlohmann::json to_json() const;
  // Histogram rows: quantity, bin_lower, bin_upper, count.
  void write_histograms(std::ostream& os, int bins = 50) const;
};

// Sample s uses seed derive_seed(seed, s), so results do not depend on the
// thread count.
HeterogeneitySample prior_heterogeneity_mc(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, int n_samples,
                                           std::uint64_t seed, int threads = 1);

// sigma_tau^2 (1 - exp(-lambda / 3)) for uniform splits, and
// sigma_tau^2 (1 - exp(-lambda / 2)) for median splits.
double theorem3_closed_form(double sigma_tau, double mean_leaf_depth, SplitRule rule = SplitRule::kUniform);

// sigma_tau^2 alpha / (3 - 2 alpha) for a geometric depth law; alpha <= 0.5.
double geometric_variant_closed_form(double sigma_tau, double alpha);

struct MeanLeafDepth {
  double lambda = 0.0;
  double tail_mass = 0.0;  // probability of reaching max_depth
};

// Expected leaf depth under p(d) = alpha / (1 + d)^beta, with nodes at
// max_depth forced to be leaves.
MeanLeafDepth mean_leaf_depth_chipman(double alpha, double beta, int max_depth = 10);

}  // namespace braids
