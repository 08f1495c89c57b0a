#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "braids/config.hpp"

using namespace braids;
using nlohmann::json;

TEST_CASE("defaults from an empty document") {
  const RunConfig c = parse_run_config(json::object());
  CHECK(c.model == Method::kRidge);
  CHECK(c.seed == 1);
  CHECK(c.threads == 1);
  CHECK(!c.data);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_run_config(json{{"sed", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"mcmc", {{"n_drawz", 10}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"prior", {{"s_tau", 1.0}, {"tau", 2}}}}), ConfigError);
  CHECK_THROWS_AS(parse_dgp(json{{"p", 3}, {"noise", 1.0}}), ConfigError);
  CHECK_THROWS_AS(parse_surface(json{{"terms", {{{"conditions", {{{"column", 0}, {"lo", 1}}}}}}}}, 3), ConfigError);
}

TEST_CASE("wrong types and values are rejected") {
  CHECK_THROWS_AS(parse_run_config(json{{"seed", "one"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"model", "forest"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"subgroups", {{"mode", "annealing"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json{{"simulate", {{"experiment", "other"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_dgp(json{{"p", 3}, {"tau", {{"linear", {1.0, 2.0}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_dgp(json{{"p", 2}, {"tau", {{"terms", {{{"conditions", {{{"column", 5}}}}}}}}}}), ConfigError);
}

TEST_CASE("a full document round trips into settings") {
  const json j = {{"model", "rule-bcf"},
                  {"seed", 42},
                  {"threads", 2},
                  {"mcmc", {{"n_draws", 300}, {"n_burn", 100}}},
                  {"prior", {{"s_tau", 0.5}}},
                  {"subgroups", {{"mode", "exact"}, {"lambdas", {0, 1, 2}}, {"max_depth", 2}}},
                  {"policy", {{"utility", "efficacy"}, {"c", 0.3}}},
                  {"simulate", {{"experiment", "coverage"}, {"preset", "tree"}, {"reps", 5}}}};
  const RunConfig c = parse_run_config(j);
  CHECK(c.model == Method::kRuleBcf);
  CHECK(c.seed == 42);
  CHECK(c.threads == 2);
  CHECK(c.mcmc.n_draws == 300);
  CHECK(c.prior.s_tau == 0.5);
  CHECK(c.subgroups.search.mode == SearchMode::kExact);
  CHECK(c.subgroups.lambdas == std::vector<double>{0, 1, 2});
  CHECK(c.policy.utility == PolicyUtility::kEfficacy);
  CHECK(c.policy.c == doctest::Approx(0.3));
  CHECK(c.simulate.experiment == Experiment::kCoverage);
  CHECK(c.simulate.reps == 5);
}

TEST_CASE("custom effect surfaces") {
  const json j = {{"p", 3},
                  {"sigma", 0.2},
                  {"tau", {{"intercept", 0.1}, {"linear", {1, 0, 0}}, {"terms", {{{"conditions", {{{"column", 1}, {"lower", 0.0}}}}, {"value", 2.0}}}}}}};
  const SyntheticDgp d = parse_dgp(j);
  Eigen::MatrixXd x(1, 3);
  x << 0.5, 1.0, 0.0;
  CHECK(d.tau(x, 0) == doctest::Approx(0.1 + 0.5 + 2.0));
  CHECK(d.sigma == 0.2);
}

TEST_CASE("config files resolve data paths next to themselves") {
  const auto dir = std::filesystem::temp_directory_path() / "braids_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "c.json");
    out << R"({"data": {"path": "toy.csv", "outcome": "y", "treatment": "a", "covariates": [{"name": "x1", "kind": "continuous"}]}})";
  }
  const RunConfig c = load_run_config(dir / "c.json");
  REQUIRE(c.data);
  CHECK(c.data->path == dir / "toy.csv");
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}
