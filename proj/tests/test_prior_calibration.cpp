#include <doctest.h>

#include <cmath>
#include <sstream>

#include "braids/prior_calibration.hpp"
#include "braids/rng.hpp"
#include "braids/stats.hpp"

using namespace braids;

namespace {

Eigen::MatrixXd covariates(int n, int p, double rho, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const double shared = rng.normal();
    for (int j = 0; j < p; ++j) x(i, j) = std::sqrt(rho) * shared + std::sqrt(1 - rho) * rng.normal();
  }
  return x;
}

TreePriorConfig poisson(double lambda) {
  TreePriorConfig cfg;
  cfg.depth_law = DepthLaw::kPoisson;
  cfg.lambda_depth = lambda;
  return cfg;
}

}  // namespace

TEST_CASE("closed forms") {
  CHECK(theorem3_closed_form(1.0, 1.2) == doctest::Approx(0.3297).epsilon(1e-4));
  CHECK(theorem3_closed_form(1.0, 1.2, SplitRule::kMedian) == doctest::Approx(0.4512).epsilon(1e-4));
  CHECK(theorem3_closed_form(1.0, 0.0) == 0.0);
  CHECK(theorem3_closed_form(2.0, 1.2) == doctest::Approx(4 * 0.32968).epsilon(1e-4));
  CHECK(geometric_variant_closed_form(1.0, 0.5) == doctest::Approx(0.25));
  CHECK(geometric_variant_closed_form(1.0, 1e-12) < 1e-11);
  CHECK(geometric_variant_closed_form(1.0, 0.4) == doctest::Approx(0.4 / 2.2));
  CHECK_THROWS(geometric_variant_closed_form(1.0, 0.6));
}

TEST_CASE("mean leaf depth under the depth-dependent law") {
  const MeanLeafDepth a = mean_leaf_depth_chipman(0.95, 2.0);
  CHECK(a.lambda == doctest::Approx(1.20).epsilon(0.01));
  CHECK(a.tail_mass < 1e-6);
  CHECK(mean_leaf_depth_chipman(0.25, 3.0).lambda / 3.0 == doctest::Approx(0.086).epsilon(0.01));
  CHECK(mean_leaf_depth_chipman(0.4, 0.0, 60).lambda == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK_THROWS(mean_leaf_depth_chipman(1.0, 2.0));
}

TEST_CASE("degenerate priors") {
  const Eigen::MatrixXd x = covariates(50, 3, 0.0, 1);
  CHECK(sample_prior_forest(x, poisson(1.2), 0.0, 4).cwiseAbs().maxCoeff() == 0.0);
  const HeterogeneitySample none = prior_heterogeneity_mc(x, poisson(1e-12), 100, 5);
  for (double h : none.h) CHECK(h < 1e-12);
  TreePriorConfig flat = poisson(1.2);
  flat.sigma_tau = 0.0;
  const HeterogeneitySample zero = prior_heterogeneity_mc(x, flat, 100, 6);
  for (std::size_t s = 0; s < zero.h.size(); ++s) {
    CHECK(zero.h[s] == 0.0);
    CHECK(zero.m[s] == 0.0);
  }
  CHECK_THROWS(prior_heterogeneity_mc(x, flat, 99, 6));
}

TEST_CASE("forest values scale with sigma") {
  const Eigen::MatrixXd x = covariates(80, 4, 0.3, 2);
  const Eigen::VectorXd one = sample_prior_forest(x, TreePriorConfig{}, 1.0, 9);
  const Eigen::VectorXd two = sample_prior_forest(x, TreePriorConfig{}, 2.0, 9);
  CHECK((two - 2.0 * one).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(one.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("unit depths follow the poisson law") {
  const Eigen::MatrixXd x = covariates(2000, 3, 0.0, 3);
  TreePriorConfig cfg = poisson(1.2);
  cfg.max_depth = 12;
  Rng rng(10);
  const int trees = 100000;
  std::vector<double> observed(6, 0.0);
  int together = 0;
  double shrink = 0.0;
  for (int t = 0; t < trees; ++t) {
    const PriorTreeDraw draw = sample_prior_tree(x, cfg, 1.0, rng);
    const int i = static_cast<int>(rng.index(2000));
    int j = static_cast<int>(rng.index(1999));
    if (j >= i) ++j;
    observed[std::min(draw.depth[i], 5)] += 1.0;
    together += draw.leaf[i] == draw.leaf[j];
    shrink += std::pow(2.0 / 3.0, draw.depth[i]);
  }
  std::vector<double> pmf(6);
  double tail = 1.0;
  for (int d = 0; d < 5; ++d) {
    pmf[d] = std::exp(-1.2) * std::pow(1.2, d) / std::tgamma(d + 1.0);
    tail -= pmf[d];
  }
  pmf[5] = tail;
  double chi2 = 0.0;
  for (int d = 0; d < 6; ++d) {
    const double expected = trees * pmf[d];
    chi2 += (observed[d] - expected) * (observed[d] - expected) / expected;
  }
  // Upper 1% point of chi-square with five degrees of freedom.
  CHECK(chi2 < 15.086);

  const double p_together = static_cast<double>(together) / trees;
  const double se = std::sqrt(p_together * (1 - p_together) / trees);
  CHECK(std::abs(p_together - shrink / trees) < 4.0 * se);
  CHECK(std::abs(p_together - std::exp(-0.4)) < 4.0 * se);
}

TEST_CASE("mean squared heterogeneity is invariant to the covariate design") {
  const TreePriorConfig base = [] {
    TreePriorConfig c = poisson(1.2);
    c.m_trees = 5;
    return c;
  }();
  const double target = theorem3_closed_form(1.0, 1.2);
  int seed = 20;
  for (int p : {1, 5, 20})
    for (double rho : {0.0, 0.6}) {
      const HeterogeneitySample s = prior_heterogeneity_mc(covariates(500, p, rho, seed), base, 20000, seed + 1);
      seed += 2;
      CAPTURE(p);
      CAPTURE(rho);
      CHECK(std::abs(s.mean_h2 - target) < 3.0 * s.mc_se);
    }
}

TEST_CASE("median splits follow the faster decay") {
  TreePriorConfig cfg = poisson(1.2);
  cfg.m_trees = 5;
  cfg.split_rule = SplitRule::kMedian;
  const HeterogeneitySample s = prior_heterogeneity_mc(covariates(500, 5, 0.0, 30), cfg, 20000, 31);
  CHECK(std::abs(s.mean_h2 - theorem3_closed_form(1.0, 1.2, SplitRule::kMedian)) < 3.0 * s.mc_se);
}

TEST_CASE("exponential sigma doubles the mean squared heterogeneity") {
  TreePriorConfig cfg = poisson(1.2);
  cfg.m_trees = 5;
  cfg.s_tau = 1.0;
  const HeterogeneitySample s = prior_heterogeneity_mc(covariates(500, 5, 0.0, 40), cfg, 20000, 41);
  CHECK(std::abs(s.mean_h2 - 2.0 * theorem3_closed_form(1.0, 1.2)) < 3.0 * s.mc_se);
}

TEST_CASE("heterogeneity samples are reproducible across threads") {
  const Eigen::MatrixXd x = covariates(100, 3, 0.0, 50);
  const HeterogeneitySample a = prior_heterogeneity_mc(x, TreePriorConfig{}, 200, 51, 1);
  const HeterogeneitySample b = prior_heterogeneity_mc(x, TreePriorConfig{}, 200, 51, 3);
  CHECK(a.h == b.h);
  CHECK(a.m == b.m);
  std::ostringstream os;
  a.write_histograms(os, 10);
  CHECK(!os.str().empty());
  CHECK(a.to_json().contains("mean_h2"));
}

TEST_CASE("prior settings are validated") {
  TreePriorConfig cfg = poisson(0.0);
  CHECK_THROWS(cfg.validate());
  cfg = TreePriorConfig{};
  cfg.alpha = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = TreePriorConfig{};
  cfg.m_trees = 0;
  CHECK_THROWS(cfg.validate());
}
