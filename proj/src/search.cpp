#include "braids/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace braids {

void SearchConfig::validate() const {
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  if (mode == SearchMode::kExact && max_depth > kMaxExactDepth)
    throw std::invalid_argument("exact search supports max_depth <= 3");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(depth_penalty >= 0.0) || !std::isfinite(depth_penalty))
    throw std::invalid_argument("depth_penalty must be finite and >= 0");
}

namespace {

bool improves(double candidate, double incumbent) {
  return candidate > incumbent + 1e-12 * (1.0 + std::abs(incumbent));
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > std::numeric_limits<std::uint64_t>::max() - b) ? std::numeric_limits<std::uint64_t>::max()
                                                             : a + b;
}

// Column orders of the full sample, reused to sort any node in O(N).
std::vector<std::vector<int>> column_orders(const Eigen::MatrixXd& x) {
  std::vector<std::vector<int>> orders(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& o = orders[j];
    o.resize(x.rows());
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, j) < x(b, j); });
  }
  return orders;
}

// Visits every grid split of `rows` on column j in grid order with the left
// and right aggregates. Agg provides add(i), operator+=, operator-, n.
template <class Agg, class Visit>
void sweep_column(const Eigen::MatrixXd& x, const ColumnSpec& spec, int j,
                  const std::vector<Split>& splits, const std::vector<int>& order,
                  const std::vector<char>& in_node, const Agg& zero, const Agg& total, Visit&& visit) {
  if (splits.empty()) return;
  std::vector<Agg> left(splits.size(), zero);
  if (spec.categorical()) {
    std::vector<Agg> level(spec.levels, zero);
    for (int i : order)
      if (in_node[i]) level[static_cast<int>(x(i, j))].add(i);
    for (std::size_t s = 0; s < splits.size(); ++s)
      for (int l = 0; l < spec.levels; ++l)
        if ((splits[s].left_levels >> l) & 1ULL) left[s] += level[l];
  } else {
    std::vector<std::size_t> by_threshold(splits.size());
    std::iota(by_threshold.begin(), by_threshold.end(), 0);
    std::stable_sort(by_threshold.begin(), by_threshold.end(), [&](std::size_t a, std::size_t b) {
      return splits[a].threshold < splits[b].threshold;
    });
    Agg running = zero;
    std::size_t pos = 0;
    for (std::size_t s : by_threshold) {
      const double t = splits[s].threshold;
      while (pos < order.size() && x(order[pos], j) <= t) {
        if (in_node[order[pos]]) running.add(order[pos]);
        ++pos;
      }
      left[s] = running;
    }
  }
  for (std::size_t s = 0; s < splits.size(); ++s) visit(s, left[s], total - left[s]);
}

struct Node {
  double score = 0.0;
  BinaryTree tree;
  std::uint64_t count = 1;
};

// ---- exact subgroup search ----

struct ExactAgg {
  const Eigen::MatrixXd* tau = nullptr;  // S x N
  const Eigen::VectorXd* hat = nullptr;  // centered posterior means
  Eigen::VectorXd g;
  int n = 0;
  double sh = 0.0;
  double shh = 0.0;

  void add(int i) {
    g += tau->col(i);
    ++n;
    const double h = (*hat)[i];
    sh += h;
    shh += h * h;
  }
  ExactAgg& operator+=(const ExactAgg& o) {
    g += o.g;
    n += o.n;
    sh += o.sh;
    shh += o.shh;
    return *this;
  }
  ExactAgg operator-(const ExactAgg& o) const {
    ExactAgg r = *this;
    r.g -= o.g;
    r.n -= o.n;
    r.sh -= o.sh;
    r.shh -= o.shh;
    return r;
  }
};

class ExactSearcher {
 public:
  ExactSearcher(const PosteriorDraws& draws, const Dataset& d, const CutpointGrid& grid,
                const SearchConfig& cfg)
      : tau_(draws.tau()), x_(d.x()), columns_(d.columns()), grid_(grid), cfg_(cfg),
        orders_(column_orders(d.x())) {
    hat_ = draws.posterior_mean();
    hat_.array() -= hat_.mean();
  }

  Node solve(const std::vector<int>& rows, int remaining) const {
    const ExactAgg total = aggregate(rows);
    Node best{leaf_score(total), BinaryTree::leaf(), 1};
    if (remaining == 0 || static_cast<int>(rows.size()) < 2 * cfg_.min_leaf) return best;
    std::vector<char> in_node(x_.cols() == 0 ? 0 : x_.rows(), 0);
    for (int i : rows) in_node[i] = 1;

    if (remaining == 1) {
      int best_col = -1;
      std::size_t best_split = 0;
      for (int j = 0; j < static_cast<int>(columns_.size()); ++j) {
        sweep_column(x_, columns_[j], j, grid_.column(j), orders_[j], in_node, zero(), total,
                     [&](std::size_t s, const ExactAgg& l, const ExactAgg& r) {
                       if (l.n < cfg_.min_leaf || r.n < cfg_.min_leaf) return;
                       best.count = sat_add(best.count, 1);
                       const double v = leaf_score(l) + leaf_score(r);
                       if (improves(v, best.score)) {
                         best.score = v;
                         best_col = j;
                         best_split = s;
                       }
                     });
      }
      if (best_col >= 0)
        best.tree = BinaryTree::branch(grid_.column(best_col)[best_split], BinaryTree::leaf(),
                                       BinaryTree::leaf());
      return best;
    }

    std::vector<int> left, right;
    for (int j = 0; j < static_cast<int>(columns_.size()); ++j) {
      for (const Split& s : grid_.column(j)) {
        left.clear();
        right.clear();
        for (int i : rows) (s.goes_left(x_(i, j)) ? left : right).push_back(i);
        if (static_cast<int>(left.size()) < cfg_.min_leaf ||
            static_cast<int>(right.size()) < cfg_.min_leaf)
          continue;
        Node l = solve(left, remaining - 1);
        Node r = solve(right, remaining - 1);
        best.count = sat_add(best.count, sat_mul(l.count, r.count));
        const double v = l.score + r.score;
        if (improves(v, best.score)) {
          best.score = v;
          best.tree = BinaryTree::branch(s, l.tree, r.tree);
        }
      }
    }
    return best;
  }

 private:
  ExactAgg zero() const { return ExactAgg{&tau_, &hat_, Eigen::VectorXd::Zero(tau_.rows()), 0, 0.0, 0.0}; }

  ExactAgg aggregate(const std::vector<int>& rows) const {
    ExactAgg a = zero();
    for (int i : rows) a.add(i);
    return a;
  }

  // Leaf contribution scaled by N: (1 - lambda) n Var{tau(G)} - SSE(G).
  double leaf_score(const ExactAgg& a) const {
    if (a.n == 0) return 0.0;
    const double sse = std::max(0.0, a.shh - a.sh * a.sh / a.n);
    double value = -sse;
    if (cfg_.lambda != 1.0) {
      const Eigen::ArrayXd m = a.g.array() / a.n;
      const double var = (m - m.mean()).square().mean();
      value += (1.0 - cfg_.lambda) * a.n * var;
    }
    return value;
  }

  const Eigen::MatrixXd& tau_;
  Eigen::VectorXd hat_;
  const Eigen::MatrixXd& x_;
  const std::vector<ColumnSpec>& columns_;
  const CutpointGrid& grid_;
  const SearchConfig& cfg_;
  std::vector<std::vector<int>> orders_;
};

}  // namespace

SearchResult search_exact(const PosteriorDraws& draws, const Dataset& d, const CutpointGrid& grid,
                          const SearchConfig& cfg) {
  cfg.validate();
  if (draws.n_units() != d.n()) throw std::invalid_argument("draws and data have different N");
  if (grid.by_column.size() != static_cast<std::size_t>(d.p()))
    throw std::invalid_argument("cutpoint grid does not match covariates");
  if (d.n() < cfg.min_leaf) throw InfeasibleSearchError("fewer units than min_leaf");

  ExactSearcher searcher(draws, d, grid, cfg);
  std::vector<int> all(d.n());
  std::iota(all.begin(), all.end(), 0);

  SearchResult out;
  bool have = false;
  for (int depth = 0; depth <= cfg.max_depth; ++depth) {
    Node node = searcher.solve(all, depth);
    SubgroupTree tree(node.tree);
    UtilityReport report = expected_utility_braids(draws, tree, d, cfg.lambda);
    const double objective = report.value - cfg.depth_penalty * tree.depth();
    if (!have || improves(objective, out.objective)) {
      out.tree = tree;
      out.report = std::move(report);
      out.objective = objective;
      have = true;
    }
    if (depth == cfg.max_depth) out.candidates = node.count;
  }
  return out;
}

std::vector<SplitScore> score_splits(const Eigen::VectorXd& values, const Eigen::MatrixXd& x,
                                     const std::vector<ColumnSpec>& columns, std::span<const int> rows,
                                     const CutpointGrid& grid, int min_leaf) {
  std::vector<SplitScore> out;
  if (rows.empty()) return out;
  double centre = 0.0;
  for (int i : rows) centre += values[i];
  centre /= static_cast<double>(rows.size());

  struct Moments {
    int n = 0;
    double s = 0.0;
    double ss = 0.0;
    double sse() const { return n == 0 ? 0.0 : std::max(0.0, ss - s * s / n); }
  };

  for (int j = 0; j < static_cast<int>(columns.size()); ++j) {
    const auto& splits = grid.column(j);
    if (splits.empty()) continue;
    std::vector<Moments> left(splits.size());
    Moments total;
    for (int i : rows) {
      const double v = values[i] - centre;
      ++total.n;
      total.s += v;
      total.ss += v * v;
    }
    if (columns[j].categorical()) {
      std::vector<Moments> level(columns[j].levels);
      for (int i : rows) {
        auto& m = level[static_cast<int>(x(i, j))];
        const double v = values[i] - centre;
        ++m.n;
        m.s += v;
        m.ss += v * v;
      }
      for (std::size_t s = 0; s < splits.size(); ++s)
        for (int l = 0; l < columns[j].levels; ++l)
          if ((splits[s].left_levels >> l) & 1ULL) {
            left[s].n += level[l].n;
            left[s].s += level[l].s;
            left[s].ss += level[l].ss;
          }
    } else {
      std::vector<int> sorted(rows.begin(), rows.end());
      std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) { return x(a, j) < x(b, j); });
      std::vector<Moments> prefix(sorted.size() + 1);
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double v = values[sorted[k]] - centre;
        prefix[k + 1] = {prefix[k].n + 1, prefix[k].s + v, prefix[k].ss + v * v};
      }
      for (std::size_t s = 0; s < splits.size(); ++s) {
        const double t = splits[s].threshold;
        const auto pos = std::upper_bound(sorted.begin(), sorted.end(), t,
                                          [&](double value, int i) { return value < x(i, j); }) -
                         sorted.begin();
        left[s] = prefix[pos];
      }
    }
    for (std::size_t s = 0; s < splits.size(); ++s) {
      Moments r{total.n - left[s].n, total.s - left[s].s, total.ss - left[s].ss};
      if (left[s].n < min_leaf || r.n < min_leaf) continue;
      out.push_back({splits[s], left[s].n, r.n, left[s].sse(), r.sse()});
    }
  }
  return out;
}

namespace {

BinaryTree greedy_node(const Eigen::VectorXd& values, const Dataset& d, const CutpointGrid& grid,
                       const SearchConfig& cfg, const std::vector<int>& rows, int depth) {
  if (depth >= cfg.max_depth || static_cast<int>(rows.size()) < 2 * cfg.min_leaf) return BinaryTree::leaf();
  double mean = 0.0;
  for (int i : rows) mean += values[i];
  mean /= static_cast<double>(rows.size());
  double parent = 0.0;
  for (int i : rows) parent += (values[i] - mean) * (values[i] - mean);

  const auto scores = score_splits(values, d.x(), d.columns(), rows, grid, cfg.min_leaf);
  const SplitScore* best = nullptr;
  double best_reduction = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores) {
    const double reduction = parent - s.sse_left - s.sse_right;
    if (best == nullptr || improves(reduction, best_reduction)) {
      best = &s;
      best_reduction = reduction;
    }
  }
  if (best == nullptr || best_reduction / d.n() <= cfg.depth_penalty || best_reduction <= 0.0)
    return BinaryTree::leaf();

  std::vector<int> left, right;
  const int j = best->split.column;
  for (int i : rows) (best->split.goes_left(d.x()(i, j)) ? left : right).push_back(i);
  return BinaryTree::branch(best->split, greedy_node(values, d, grid, cfg, left, depth + 1),
                            greedy_node(values, d, grid, cfg, right, depth + 1));
}

}  // namespace

SubgroupTree search_greedy_rn(const Eigen::VectorXd& tau_hat, const Dataset& d, const CutpointGrid& grid,
                              const SearchConfig& cfg) {
  cfg.validate();
  if (tau_hat.size() != d.n()) throw std::invalid_argument("tau_hat and data have different N");
  if (grid.by_column.size() != static_cast<std::size_t>(d.p()))
    throw std::invalid_argument("cutpoint grid does not match covariates");
  std::vector<int> all(d.n());
  std::iota(all.begin(), all.end(), 0);
  return SubgroupTree(greedy_node(tau_hat, d, grid, cfg, all, 0));
}

Partition crossed_partition(const Dataset& d, std::span<const int> factors) {
  if (factors.empty()) throw std::invalid_argument("prespecified partition needs at least one factor");
  std::vector<int> labels(d.n(), 0);
  int cells = 1;
  for (int j : factors) {
    if (j < 0 || j >= d.p()) throw std::invalid_argument("factor column out of range");
    const auto& spec = d.column(j);
    if (!spec.categorical()) throw std::invalid_argument("factor '" + spec.name + "' is not categorical");
    for (int i = 0; i < d.n(); ++i) labels[i] = labels[i] * spec.levels + static_cast<int>(d.x()(i, j));
    cells *= spec.levels;
  }
  std::vector<int> counts(cells, 0);
  for (int g : labels) ++counts[g];
  for (int c : counts)
    if (c == 0) throw EmptySubgroupError();
  return Partition::from_labels(std::move(labels), cells);
}

std::vector<RankingRow> evaluate_prespecified(const PosteriorDraws& draws, const Dataset& d,
                                              const std::vector<PrespecifiedPartition>& groups,
                                              const std::vector<double>& lambdas) {
  std::vector<RankingRow> out;
  for (double lambda : lambdas) {
    std::vector<RankingRow> rows;
    for (const auto& g : groups) {
      RankingRow row{g.name, lambda, 0.0, 0, true};
      try {
        const Partition p = crossed_partition(d, g.factors);
        row.value = expected_utility_braids(draws, p, lambda).value;
      } catch (const EmptySubgroupError&) {
        row.feasible = false;
        row.value = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(row);
    }
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (rows[k].feasible) order.push_back(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].value > rows[b].value; });
    for (std::size_t r = 0; r < order.size(); ++r) rows[order[r]].rank = static_cast<int>(r) + 1;
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

// ---- exact policy search ----

namespace {

struct PolicyAgg {
  const Eigen::VectorXd* scores = nullptr;
  double sum = 0.0;
  int n = 0;

  void add(int i) {
    sum += (*scores)[i];
    ++n;
  }
  PolicyAgg& operator+=(const PolicyAgg& o) {
    sum += o.sum;
    n += o.n;
    return *this;
  }
  PolicyAgg operator-(const PolicyAgg& o) const { return {scores, sum - o.sum, n - o.n}; }
};

class PolicySearcher {
 public:
  PolicySearcher(const Eigen::VectorXd& scores, const Dataset& d, const CutpointGrid& grid, int min_leaf)
      : scores_(scores), x_(d.x()), columns_(d.columns()), grid_(grid), min_leaf_(min_leaf),
        orders_(column_orders(d.x())) {}

  Node solve(const std::vector<int>& rows, int remaining) const {
    PolicyAgg total{&scores_, 0.0, 0};
    for (int i : rows) total.add(i);
    Node best{leaf_value(total), leaf_tree(total), 1};
    if (remaining == 0 || static_cast<int>(rows.size()) < 2 * min_leaf_) return best;
    std::vector<char> in_node(x_.rows(), 0);
    for (int i : rows) in_node[i] = 1;

    if (remaining == 1) {
      for (int j = 0; j < static_cast<int>(columns_.size()); ++j) {
        const auto& splits = grid_.column(j);
        sweep_column(x_, columns_[j], j, splits, orders_[j], in_node, PolicyAgg{&scores_, 0.0, 0}, total,
                     [&](std::size_t s, const PolicyAgg& l, const PolicyAgg& r) {
                       if (l.n < min_leaf_ || r.n < min_leaf_) return;
                       best.count = sat_add(best.count, 1);
                       const double v = leaf_value(l) + leaf_value(r);
                       if (improves(v, best.score)) {
                         best.score = v;
                         best.tree = BinaryTree::branch(splits[s], leaf_tree(l), leaf_tree(r));
                       }
                     });
      }
      return best;
    }

    std::vector<int> left, right;
    for (int j = 0; j < static_cast<int>(columns_.size()); ++j) {
      for (const Split& s : grid_.column(j)) {
        left.clear();
        right.clear();
        for (int i : rows) (s.goes_left(x_(i, j)) ? left : right).push_back(i);
        if (static_cast<int>(left.size()) < min_leaf_ || static_cast<int>(right.size()) < min_leaf_) continue;
        Node l = solve(left, remaining - 1);
        Node r = solve(right, remaining - 1);
        best.count = sat_add(best.count, sat_mul(l.count, r.count));
        const double v = l.score + r.score;
        if (improves(v, best.score)) {
          best.score = v;
          best.tree = BinaryTree::branch(s, l.tree, r.tree);
        }
      }
    }
    return best;
  }

 private:
  static double leaf_value(const PolicyAgg& a) { return std::max(0.0, a.sum); }
  static BinaryTree leaf_tree(const PolicyAgg& a) { return BinaryTree::leaf(a.sum > 0.0 ? 1 : 0); }

  const Eigen::VectorXd& scores_;
  const Eigen::MatrixXd& x_;
  const std::vector<ColumnSpec>& columns_;
  const CutpointGrid& grid_;
  int min_leaf_;
  std::vector<std::vector<int>> orders_;
};

}  // namespace

PolicyResult policy_search_exact(const Eigen::VectorXd& scores, const Dataset& d, const CutpointGrid& grid,
                                 int max_depth, int min_leaf) {
  if (max_depth < 0 || max_depth > kMaxPolicyDepth)
    throw std::invalid_argument("policy search supports max_depth in [0, 2]");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (scores.size() != d.n()) throw std::invalid_argument("scores and data have different N");
  if (!scores.allFinite()) throw std::invalid_argument("non-finite policy score");
  if (grid.by_column.size() != static_cast<std::size_t>(d.p()))
    throw std::invalid_argument("cutpoint grid does not match covariates");
  PolicySearcher searcher(scores, d, grid, min_leaf);
  std::vector<int> all(d.n());
  std::iota(all.begin(), all.end(), 0);
  Node node = searcher.solve(all, max_depth);
  return {PolicyTree(node.tree), node.score, node.count};
}

}  // namespace braids
