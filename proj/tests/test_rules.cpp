#include <doctest.h>

#include <cmath>

#include "braids/rules.hpp"
#include "braids/simulation.hpp"
#include "braids/stats.hpp"
#include "helpers.hpp"

using namespace braids;

namespace {

Rule above(int column, double t) { return Rule{{Condition{column, false, t, INFINITY, 0}}, 0.0}; }

SyntheticDgp step_dgp() {
  SyntheticDgp dgp;
  dgp.p = 5;
  dgp.mu.intercept = 1.0;
  dgp.tau.terms.emplace_back(above(0, 0.0), 1.0);
  dgp.treat_prob = 0.5;
  dgp.sigma = 0.1;
  return dgp;
}

BoostConfig single_stump() {
  BoostConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  cfg.subsample = 1.0;
  cfg.min_leaf = 1;
  return cfg;
}

}  // namespace

TEST_CASE("a single stump yields one rule after complement removal") {
  Rng rng(2);
  const int n = 100;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    y[i] = x(i, 0) > 0 ? 1.0 : 0.0;
  }
  const Dataset d = testing::continuous_dataset(x, y, Eigen::VectorXd::Zero(n));
  const auto rules = boosted_rules(d, y, single_stump());
  REQUIRE(rules.size() == 1);
  REQUIRE(rules[0].conditions.size() == 1);
  const Condition& c = rules[0].conditions[0];
  CHECK(c.column == 0);
  CHECK(std::isinf(c.upper));
  CHECK(std::abs(c.lower) < 0.1);
}

TEST_CASE("support filter drops rare rules") {
  const int n = 100;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) x(i, 0) = i >= 98 ? 1.0 : 0.0;
  y[98] = y[99] = 10.0;
  const Dataset d = testing::continuous_dataset(x, y, Eigen::VectorXd::Zero(n));
  BoostConfig cfg = single_stump();
  CHECK(boosted_rules(d, y, cfg).empty());
  cfg.min_support = 0.01;
  const auto rules = boosted_rules(d, y, cfg);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].support == doctest::Approx(0.02));
}

TEST_CASE("rule designs are centred indicators with matching supports") {
  const SyntheticData sd = generate(preset_dgp("tree"), 400, 5);
  BoostConfig cfg;
  cfg.seed = 3;
  const RuleBasis basis = extract_rules(sd.data, cfg);
  REQUIRE(!basis.prognostic.empty());
  for (const RuleSet* set : {&basis.prognostic, &basis.modifier}) {
    const Eigen::MatrixXd z = set->design(sd.data.x());
    for (int k = 0; k < set->size(); ++k) {
      const Rule& r = set->rules()[k];
      const Eigen::VectorXd raw = r.indicator(sd.data.x());
      CHECK((raw.array() * (1.0 - raw.array())).abs().maxCoeff() == 0.0);
      CHECK(raw.mean() == doctest::Approx(r.support));
      CHECK(r.support >= cfg.min_support);
      CHECK(r.support <= 1.0 - cfg.min_support);
      CHECK(std::abs(z.col(k).sum()) < 1e-9);
      CHECK((z.col(k) - (raw.array() - set->centers()[k]).matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
    for (int a = 0; a < set->size(); ++a)
      for (int b = a + 1; b < set->size(); ++b) {
        const Eigen::VectorXd ia = set->rules()[a].indicator(sd.data.x());
        const Eigen::VectorXd ib = set->rules()[b].indicator(sd.data.x());
        CHECK(ia != ib);
        CHECK(ia != (1.0 - ib.array()).matrix());
      }
  }
}

TEST_CASE("rule basis survives a json round trip") {
  const SyntheticData sd = generate(preset_dgp("tree"), 300, 6);
  BoostConfig cfg;
  cfg.n_trees = 10;
  const RuleBasis basis = extract_rules(sd.data, cfg);
  const RuleBasis back = RuleBasis::from_json(basis.to_json(sd.data.columns()), sd.data.x());
  REQUIRE(back.prognostic.size() == basis.prognostic.size());
  REQUIRE(back.modifier.size() == basis.modifier.size());
  CHECK(back.linear_columns == basis.linear_columns);
  CHECK(back.prognostic_design(sd.data.x()) == basis.prognostic_design(sd.data.x()));
  CHECK(back.modifier.design(sd.data.x()) == basis.modifier.design(sd.data.x()));
}

TEST_CASE("modifier basis finds the effect threshold") {
  const SyntheticDgp dgp = step_dgp();
  int found = 0;
  const int runs = 100;
  for (int run = 0; run < runs; ++run) {
    const SyntheticData sd = generate(dgp, 2000, derive_seed(77, run));
    BoostConfig cfg;
    cfg.seed = derive_seed(78, run);
    const RuleBasis basis = extract_rules(sd.data, cfg);
    bool hit = false;
    for (const Rule& r : basis.modifier.rules()) {
      if (r.conditions.size() != 1) continue;
      const Condition& c = r.conditions[0];
      if (c.column == 0 && std::isinf(c.upper) && std::abs(c.lower) < 0.2) hit = true;
    }
    found += hit;
  }
  CHECK(found >= 95);
}

TEST_CASE("rule fit tracks a step effect") {
  const SyntheticData sd = generate(step_dgp(), 2000, 11);
  BoostConfig cfg;
  cfg.seed = 12;
  const RuleBasis basis = extract_rules(sd.data, cfg);
  const LinearEffectFit fit = fit_rule_bcf(sd.data, basis, RidgePrior{}, McmcConfig{300, 200, 1, 13});
  const Eigen::VectorXd est = fit.draws.posterior_mean();
  CHECK(correlation(as_span(est), as_span(sd.tau0)) > 0.9);
}

TEST_CASE("binarized covariate rules reproduce the ridge fit") {
  Rng rng(31);
  const int n = 120, p = 3;
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n), a(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    a[i] = i % 2;
    y[i] = x(i, 0) + a[i] * (0.5 + x(i, 1)) + rng.normal();
  }
  std::vector<ColumnSpec> cols;
  for (int j = 0; j < p; ++j) cols.push_back(ColumnSpec::categorical("b" + std::to_string(j), 2));
  const Dataset d(y, a, x, cols, Eigen::VectorXd::Constant(n, 0.5));
  std::vector<Rule> raw;
  for (int j = 0; j < p; ++j) raw.push_back(Rule{{Condition{j, true, -INFINITY, INFINITY, 0b10}}, 0.0});
  const RuleBasis basis{RuleSet(raw, x), RuleSet(raw, x), {}};
  const McmcConfig mcmc{200, 50, 1, 5};
  const LinearEffectFit ridge = fit_ridge(d, RidgePrior{}, mcmc);
  const LinearEffectFit rules = fit_rule_bcf(d, basis, RidgePrior{}, mcmc);
  CHECK((ridge.draws.tau() - rules.draws.tau()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((ridge.draws.hyper() - rules.draws.hyper()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("empty modifier basis gives homogeneous draws") {
  const SyntheticData sd = generate(preset_dgp("constant"), 200, 3);
  BoostConfig cfg;
  RuleBasis basis = extract_rules(sd.data, cfg);
  basis.modifier = RuleSet();
  const LinearEffectFit fit = fit_rule_bcf(sd.data, basis, RidgePrior{}, McmcConfig{100, 50, 1, 2});
  const Eigen::MatrixXd& tau = fit.draws.tau();
  for (int s = 0; s < tau.rows(); ++s) CHECK(tau.row(s).maxCoeff() - tau.row(s).minCoeff() < 1e-12);
  basis.prognostic = RuleSet();
  CHECK_NOTHROW(fit_rule_bcf(sd.data, basis, RidgePrior{}, McmcConfig{100, 50, 1, 2}));
  basis.linear_columns.clear();
  basis.linear_centers.resize(0);
  CHECK_THROWS(fit_rule_bcf(sd.data, basis, RidgePrior{}, McmcConfig{100, 50, 1, 2}));
}

TEST_CASE("linear terms cover the continuous covariates") {
  SyntheticDgp dgp = preset_dgp("constant", 4);
  dgp.n_binary = 1;
  const SyntheticData sd = generate(dgp, 200, 8);
  BoostConfig cfg;
  cfg.n_trees = 5;
  const RuleBasis with = extract_rules(sd.data, cfg);
  CHECK(with.linear_columns == std::vector<int>{0, 1, 2, 3});
  const Eigen::MatrixXd design = with.prognostic_design(sd.data.x());
  CHECK(design.cols() == with.prognostic.size() + 4);
  CHECK(design.rightCols(4).colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  cfg.linear_terms = false;
  const RuleBasis without = extract_rules(sd.data, cfg);
  CHECK(without.linear_columns.empty());
  CHECK(without.prognostic_design(sd.data.x()).cols() == without.prognostic.size());
}

TEST_CASE("posterior heterogeneity grows with the shrinkage scale") {
  const SyntheticData sd = generate(preset_dgp("tree"), 500, 21);
  BoostConfig cfg;
  cfg.seed = 22;
  const RuleBasis basis = extract_rules(sd.data, cfg);
  double previous = -1.0, previous_se = 0.0;
  for (double s : {0.01, 0.1, 1.0}) {
    RidgePrior prior;
    prior.s_tau = s;
    const LinearEffectFit fit = fit_rule_bcf(sd.data, basis, prior, McmcConfig{1000, 300, 1, 23});
    const Eigen::MatrixXd& tau = fit.draws.tau();
    Eigen::VectorXd h(tau.rows());
    for (int r = 0; r < tau.rows(); ++r) {
      const Eigen::VectorXd row = tau.row(r).transpose();
      h[r] = variance(as_span(row), 0);
    }
    const double m = mean(as_span(h));
    const double se = batch_means_se(as_span(h), 20);
    CHECK(m + 2.0 * std::hypot(se, previous_se) >= previous);
    previous = m;
    previous_se = se;
  }
}

TEST_CASE("boost settings are validated") {
  BoostConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = BoostConfig{};
  cfg.min_support = 0.5;
  CHECK_THROWS(cfg.validate());
  cfg = BoostConfig{};
  cfg.subsample = 1.5;
  CHECK_THROWS(cfg.validate());
}
