#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/tree.hpp"
#include "braids/utility.hpp"

namespace braids {

enum class SearchMode { kExact, kGreedy };

inline constexpr int kMaxExactDepth = 3;

struct SearchConfig {
  int max_depth = 2;
  int min_leaf = 10;
  SearchMode mode = SearchMode::kExact;
  double lambda = 1.0;
  double depth_penalty = 0.0;  // eta in objective = value - eta * depth

  void validate() const;
};

struct SearchResult {
  SubgroupTree tree;
  UtilityReport report;
  double objective = 0.0;          // report.value - depth_penalty * depth
  std::uint64_t candidates = 0;    // trees in the search space
};

class InfeasibleSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact maximizer of the expected BRAIDS utility minus the depth penalty over
// all trees of depth <= max_depth built from grid splits with every leaf
// holding at least min_leaf units. The utility is additive over leaves, so
// the search recurses on (node, remaining depth) and sweeps each column once
// with running per-draw sums at the last level. Ties keep the earlier
// candidate in the order: leaf, then splits by (column, threshold); smaller
// depths are tried first.
SearchResult search_exact(const PosteriorDraws& draws, const Dataset& d, const CutpointGrid& grid,
                          const SearchConfig& cfg);

// CART-style recursive partitioning of tau_hat minimizing within-group SSE
// (the risk-neutral criterion). Stops at max_depth, when a node cannot hold
// two leaves of min_leaf, or when the best SSE reduction (per unit of the
// full sample) is <= depth_penalty.
SubgroupTree search_greedy_rn(const Eigen::VectorXd& tau_hat, const Dataset& d,
                              const CutpointGrid& grid, const SearchConfig& cfg);

struct SplitScore {
  Split split;
  int n_left = 0;
  int n_right = 0;
  double sse_left = 0.0;
  double sse_right = 0.0;
};

// Within-child SSE of `values` for every admissible grid split of `rows`,
// from sorted prefix sums (continuous) or per-level sums (categorical).
std::vector<SplitScore> score_splits(const Eigen::VectorXd& values, const Eigen::MatrixXd& x,
                                     const std::vector<ColumnSpec>& columns, std::span<const int> rows,
                                     const CutpointGrid& grid, int min_leaf);

// Prespecified partitions defined by one or two crossed categorical factors.
struct PrespecifiedPartition {
  std::string name;
  std::vector<int> factors;  // column indices
};

struct RankingRow {
  std::string name;
  double lambda = 0.0;
  double value = 0.0;
  int rank = 0;  // 1 = best within lambda; 0 when infeasible
  bool feasible = true;
};

// Throws EmptySubgroupError if a factor level combination has no units.
Partition crossed_partition(const Dataset& d, std::span<const int> factors);

std::vector<RankingRow> evaluate_prespecified(const PosteriorDraws& draws, const Dataset& d,
                                              const std::vector<PrespecifiedPartition>& groups,
                                              const std::vector<double>& lambdas);

struct PolicyResult {
  PolicyTree tree;
  double value = 0.0;
  std::uint64_t candidates = 0;
};

inline constexpr int kMaxPolicyDepth = 2;

// Exact maximizer of sum_i scores_i * V(X_i) over policy trees of depth
// <= max_depth on the grid. Leaves treat iff their score sum is > 0.
PolicyResult policy_search_exact(const Eigen::VectorXd& scores, const Dataset& d,
                                 const CutpointGrid& grid, int max_depth, int min_leaf = 1);

}  // namespace braids
