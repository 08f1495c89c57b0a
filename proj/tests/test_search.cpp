#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "braids/rng.hpp"
#include "braids/ridge.hpp"
#include "braids/search.hpp"
#include "helpers.hpp"

using namespace braids;

namespace {

using Rows = std::vector<int>;

// Every tree of depth <= depth on the grid whose leaves hold >= min_leaf rows.
void enumerate(const Dataset& d, const CutpointGrid& grid, const Rows& rows, int depth, int min_leaf,
               std::vector<BinaryTree>& out) {
  if (static_cast<int>(rows.size()) < min_leaf) return;
  out.push_back(BinaryTree::leaf());
  if (depth == 0) return;
  for (const auto& column : grid.by_column)
    for (const Split& s : column) {
      Rows l, r;
      for (int i : rows) (s.goes_left(d.x()(i, s.column)) ? l : r).push_back(i);
      std::vector<BinaryTree> lt, rt;
      enumerate(d, grid, l, depth - 1, min_leaf, lt);
      enumerate(d, grid, r, depth - 1, min_leaf, rt);
      for (const auto& a : lt)
        for (const auto& b : rt) out.push_back(BinaryTree::branch(s, a, b));
    }
}

std::vector<BinaryTree> all_trees(const Dataset& d, const CutpointGrid& grid, int depth, int min_leaf) {
  Rows rows(d.n());
  for (int i = 0; i < d.n(); ++i) rows[i] = i;
  std::vector<BinaryTree> out;
  enumerate(d, grid, rows, depth, min_leaf, out);
  return out;
}

Dataset small_data(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = std::round(4.0 * rng.normal()) / 4.0;
  return testing::continuous_dataset(x, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
}

}  // namespace

TEST_CASE("depth-one search over three cutpoints") {
  Eigen::MatrixXd x(8, 1);
  x << 0, 0, 1, 1, 2, 2, 3, 3;
  const Dataset d = testing::continuous_dataset(x, Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(8));
  const CutpointGrid grid = build_cutpoints(d, 1);
  REQUIRE(grid.size() == 3);
  const PosteriorDraws draws = testing::random_draws(20, 8, 3);
  SearchConfig cfg;
  cfg.max_depth = 1;
  cfg.min_leaf = 1;
  const SearchResult r = search_exact(draws, d, grid, cfg);
  CHECK(r.candidates == 4);
}

TEST_CASE("zero-variance step effect is split at the step") {
  Rng rng(5);
  const int n = 20;
  Eigen::MatrixXd x(n, 2);
  Eigen::MatrixXd tau(2, n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    tau(0, i) = tau(1, i) = x(i, 0) > 0 ? 1.0 : 0.0;
  }
  const Dataset d = testing::continuous_dataset(x, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
  SearchConfig cfg;
  cfg.max_depth = 1;
  cfg.min_leaf = 1;
  const SearchResult r = search_exact(testing::make_draws(tau), d, build_cutpoints(d, 1), cfg);
  const TreeNode& root = r.tree.structure().nodes()[0];
  REQUIRE(!root.leaf);
  CHECK(root.split.column == 0);
  double below = -INFINITY, above = INFINITY;
  for (int i = 0; i < n; ++i) (x(i, 0) > 0 ? above : below) = x(i, 0) > 0 ? std::min(above, x(i, 0)) : std::max(below, x(i, 0));
  CHECK(root.split.threshold > below);
  CHECK(root.split.threshold < above);
  CHECK(r.report.value == doctest::Approx(0.0));
}

TEST_CASE("exact search matches brute-force enumeration") {
  for (int rep = 0; rep < 4; ++rep) {
    const int n = 16 + rep, p = 1 + rep % 3;
    const Dataset d = small_data(n, p, 100 + rep);
    const PosteriorDraws draws = testing::random_draws(30, n, 200 + rep, 0.7);
    const int min_leaf = 2;
    const CutpointGrid grid = build_cutpoints(d, min_leaf);
    for (int depth : {1, 2}) {
      const auto trees = all_trees(d, grid, depth, min_leaf);
      for (double lambda : {0.0, 1.0, 2.0})
        for (double eta : {0.0, 0.05}) {
          SearchConfig cfg;
          cfg.max_depth = depth;
          cfg.min_leaf = min_leaf;
          cfg.lambda = lambda;
          cfg.depth_penalty = eta;
          const SearchResult r = search_exact(draws, d, grid, cfg);
          double best = -INFINITY;
          for (const auto& t : trees) {
            const SubgroupTree st(t);
            const double v = expected_utility_braids(draws, st.partition(d), lambda).value - eta * t.depth();
            best = std::max(best, v);
          }
          CHECK(r.candidates == trees.size());
          CHECK(r.objective == doctest::Approx(best).epsilon(1e-10));
          const double own = expected_utility_braids(draws, r.tree.partition(d), lambda).value;
          CHECK(own == doctest::Approx(r.report.value).epsilon(1e-10));
          CHECK(r.objective == doctest::Approx(own - eta * r.tree.depth()).epsilon(1e-10));
          for (int size : r.tree.partition(d).sizes()) CHECK(size >= min_leaf);
        }
    }
  }
}

TEST_CASE("exact search is deterministic and rejects bad settings") {
  const Dataset d = small_data(18, 2, 9);
  const PosteriorDraws draws = testing::random_draws(20, 18, 10);
  const CutpointGrid grid = build_cutpoints(d, 2);
  SearchConfig cfg;
  cfg.min_leaf = 2;
  const SearchResult a = search_exact(draws, d, grid, cfg), b = search_exact(draws, d, grid, cfg);
  CHECK(a.tree.structure().encoding() == b.tree.structure().encoding());
  cfg.min_leaf = 19;
  CHECK_THROWS_AS(search_exact(draws, d, grid, cfg), InfeasibleSearchError);
  cfg.min_leaf = 2;
  cfg.max_depth = 4;
  CHECK_THROWS(search_exact(draws, d, grid, cfg));
  cfg.max_depth = 2;
  cfg.depth_penalty = -1;
  CHECK_THROWS(search_exact(draws, d, grid, cfg));
}

TEST_CASE("exact search prefers the lexicographically smallest of tied trees") {
  // Constant effects: every tree ties at lambda = 1, so the leaf wins.
  const Dataset d = small_data(12, 2, 3);
  const PosteriorDraws draws = testing::make_draws(Eigen::MatrixXd::Ones(3, 12));
  SearchConfig cfg;
  cfg.min_leaf = 2;
  const SearchResult r = search_exact(draws, d, build_cutpoints(d, 2), cfg);
  CHECK(r.tree.n_groups() == 1);
}

TEST_CASE("prefix split scores equal naive recomputation") {
  Rng rng(12);
  const Dataset d = small_data(40, 3, 13);
  Eigen::VectorXd v(40);
  for (int i = 0; i < 40; ++i) v[i] = rng.normal();
  std::vector<int> rows;
  for (int i = 0; i < 40; ++i)
    if (i % 4 != 0) rows.push_back(i);
  const CutpointGrid grid = build_cutpoints(d, 3);
  const auto scores = score_splits(v, d.x(), d.columns(), rows, grid, 3);
  REQUIRE(!scores.empty());
  for (const SplitScore& s : scores) {
    std::vector<double> l, r;
    for (int i : rows) (s.split.goes_left(d.x()(i, s.split.column)) ? l : r).push_back(v[i]);
    auto sse = [](const std::vector<double>& z) {
      double m = 0.0;
      for (double q : z) m += q;
      m /= z.size();
      double out = 0.0;
      for (double q : z) out += (q - m) * (q - m);
      return out;
    };
    CHECK(s.n_left == static_cast<int>(l.size()));
    CHECK(s.n_right == static_cast<int>(r.size()));
    CHECK(std::abs(s.sse_left - sse(l)) < 1e-10);
    CHECK(std::abs(s.sse_right - sse(r)) < 1e-10);
    CHECK(s.n_left >= 3);
    CHECK(s.n_right >= 3);
  }
}

TEST_CASE("greedy recovers a separable split") {
  Rng rng(14);
  const Dataset d = small_data(50, 3, 15);
  Eigen::VectorXd hat(50);
  for (int i = 0; i < 50; ++i) hat[i] = d.x()(i, 1) > 0.1 ? 2.0 : -1.0;
  SearchConfig cfg;
  cfg.mode = SearchMode::kGreedy;
  cfg.min_leaf = 1;
  cfg.max_depth = 3;
  const SubgroupTree t = search_greedy_rn(hat, d, build_cutpoints(d, 1), cfg);
  CHECK(t.n_groups() == 2);
  CHECK(t.structure().nodes()[0].split.column == 1);
  const PosteriorDraws draws = testing::make_draws(hat.transpose().replicate(2, 1));
  CHECK(expected_utility_braids(draws, t.partition(d), 1.0).within_sse == doctest::Approx(0.0));
}

TEST_CASE("greedy agrees with exact search at depth one") {
  for (int rep = 0; rep < 5; ++rep) {
    const Dataset d = small_data(30, 3, 300 + rep);
    const PosteriorDraws draws = testing::random_draws(25, 30, 400 + rep);
    const CutpointGrid grid = build_cutpoints(d, 3);
    SearchConfig cfg;
    cfg.max_depth = 1;
    cfg.min_leaf = 3;
    const SearchResult exact = search_exact(draws, d, grid, cfg);
    cfg.mode = SearchMode::kGreedy;
    const SubgroupTree greedy = search_greedy_rn(draws.posterior_mean(), d, grid, cfg);
    CHECK(greedy.structure().encoding() == exact.tree.structure().encoding());
  }
}

TEST_CASE("greedy value grows with depth and beats the pooled tree") {
  const Dataset d = small_data(80, 3, 16);
  const PosteriorDraws draws = testing::random_draws(20, 80, 17);
  const CutpointGrid grid = build_cutpoints(d, 5);
  const double pooled = expected_utility_braids(draws, Partition::trivial(80), 1.0).value;
  double previous = pooled;
  for (int depth = 0; depth <= 4; ++depth) {
    SearchConfig cfg;
    cfg.mode = SearchMode::kGreedy;
    cfg.min_leaf = 5;
    cfg.max_depth = depth;
    const double v = expected_utility_braids(draws, search_greedy_rn(draws.posterior_mean(), d, grid, cfg).partition(d), 1.0).value;
    CHECK(v >= previous - 1e-12);
    previous = v;
  }
  CHECK(previous > pooled);
}

TEST_CASE("greedy stops when the reduction does not exceed the penalty") {
  const Dataset d = small_data(40, 2, 18);
  const PosteriorDraws draws = testing::random_draws(10, 40, 19, 0.1);
  SearchConfig cfg;
  cfg.mode = SearchMode::kGreedy;
  cfg.min_leaf = 2;
  cfg.depth_penalty = 1e6;
  CHECK(search_greedy_rn(draws.posterior_mean(), d, build_cutpoints(d, 2), cfg).n_groups() == 1);
}

TEST_CASE("prespecified rankings") {
  Rng rng(20);
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(rng.index(2));
    x(i, 1) = static_cast<double>(rng.index(3));
  }
  x(0, 0) = 0, x(1, 0) = 1, x(0, 1) = 0, x(1, 1) = 1, x(2, 1) = 2;
  std::vector<ColumnSpec> cols{ColumnSpec::categorical("f1", 2), ColumnSpec::categorical("f2", 3)};
  const Dataset d(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), x, cols, Eigen::VectorXd::Constant(n, 0.5));
  const PosteriorDraws draws = testing::random_draws(30, n, 21);
  const auto single = evaluate_prespecified(draws, d, {{"f1", {0}}}, {0.0, 1.0, 2.0});
  for (const auto& row : single) CHECK(row.rank == 1);
  const auto rows = evaluate_prespecified(draws, d, {{"f1", {0}}, {"f1xf2", {0, 1}}}, {1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].value >= rows[0].value);
  CHECK(rows[1].rank == 1);

  Eigen::MatrixXd sparse = x;
  for (int i = 0; i < n; ++i)
    if (sparse(i, 0) == 1 && sparse(i, 1) == 2) sparse(i, 1) = 0;
  const Dataset ds(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), sparse, cols, Eigen::VectorXd::Constant(n, 0.5));
  const auto flagged = evaluate_prespecified(draws, ds, {{"f1", {0}}, {"f1xf2", {0, 1}}}, {1.0});
  CHECK(!flagged[1].feasible);
  CHECK(flagged[1].rank == 0);
  CHECK(flagged[0].rank == 1);
}

TEST_CASE("the effect-driving factor outranks a noise factor") {
  int wins = 0;
  for (int run = 0; run < 100; ++run) {
    Rng rng(derive_seed(500, run));
    const int n = 300;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n), a(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = static_cast<double>(rng.index(3));
      x(i, 1) = static_cast<double>(rng.index(3));
      a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      y[i] = a[i] * (x(i, 0) - 1.0) + 0.5 * rng.normal();
    }
    std::vector<ColumnSpec> cols{ColumnSpec::categorical("f1", 3), ColumnSpec::categorical("f2", 3)};
    const Dataset d(y, a, x, cols, Eigen::VectorXd::Constant(n, 0.5));
    const LinearEffectFit fit = fit_ridge(d, RidgePrior{}, McmcConfig{200, 100, 1, derive_seed(501, run)});
    const auto rows = evaluate_prespecified(fit.draws, d, {{"f1", {0}}, {"f2", {1}}}, {1.0});
    wins += rows[0].rank == 1;
  }
  CHECK(wins >= 95);
}

TEST_CASE("policy search simple cases") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 1;
  const Dataset d = testing::continuous_dataset(x, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  const CutpointGrid grid = build_cutpoints(d, 1);
  Eigen::VectorXd pos(2), mixed(2);
  pos << 0.5, 0.25;
  mixed << -1.0, 1.0;
  const PolicyResult all = policy_search_exact(pos, d, grid, 2);
  CHECK(all.value == doctest::Approx(0.75));
  CHECK(all.tree.depth() == 0);
  const PolicyResult one = policy_search_exact(mixed, d, grid, 2);
  CHECK(one.value == doctest::Approx(1.0));
  CHECK(one.tree.actions(d) == std::vector<int>{0, 1});
  CHECK_THROWS(policy_search_exact(pos, d, grid, 3));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(policy_search_exact(zero, d, grid, 1).tree.actions(d) == std::vector<int>{0, 0});
}

TEST_CASE("policy search matches brute force over actions and trees") {
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 14 + rep, p = 1 + rep % 3;
    const Dataset d = small_data(n, p, 600 + rep);
    Rng rng(700 + rep);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.normal();
    const CutpointGrid grid = build_cutpoints(d, 1);
    for (int depth : {0, 1, 2}) {
      const PolicyResult r = policy_search_exact(g, d, grid, depth);
      double best = -INFINITY;
      for (const auto& t : all_trees(d, grid, depth, 1)) {
        const Partition part = SubgroupTree(t).partition(d);
        for (int mask = 0; mask < (1 << part.n_groups); ++mask) {
          double v = 0.0;
          for (int i = 0; i < n; ++i)
            if ((mask >> part.group[i]) & 1) v += g[i];
          best = std::max(best, v);
        }
      }
      CHECK(r.value == doctest::Approx(best).epsilon(1e-10));
      const std::vector<int> actions = r.tree.actions(d);
      double own = 0.0;
      for (int i = 0; i < n; ++i) own += actions[i] * g[i];
      CHECK(own == doctest::Approx(r.value).epsilon(1e-10));
    }
  }
}
