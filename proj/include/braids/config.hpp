#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/prior_calibration.hpp"
#include "braids/ridge.hpp"
#include "braids/rules.hpp"
#include "braids/search.hpp"
#include "braids/simulation.hpp"

namespace braids {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::filesystem::path path;
  DataSchema schema;
};

struct PrespecifiedSpec {
  std::string name;
  std::vector<std::string> factors;
};

struct SubgroupsConfig {
  SearchConfig search;
  std::vector<double> lambdas{1.0};
  int max_thresholds = 64;
  std::vector<PrespecifiedSpec> prespecified;
  std::vector<std::pair<int, int>> contrasts;  // 1-based group numbers
  double alpha = 0.05;
};

enum class PolicyUtility { kWelfare, kEfficacy };

struct PolicyConfig {
  PolicyUtility utility = PolicyUtility::kWelfare;
  double delta = 0.0;
  double c = 0.5;
  int max_depth = 2;
  int min_leaf = 1;
  int max_thresholds = 64;
};

struct CalibrateConfig {
  TreePriorConfig prior;
  int n_samples = 10000;
  int n_rows = 500;
  int p = 5;
  double correlation = 0.0;
};

enum class Experiment { kUtility, kCoverage, kCalibration };

struct SimulateConfig {
  Experiment experiment = Experiment::kUtility;
  SyntheticDgp dgp = preset_dgp("linear");
  std::vector<Method> methods{Method::kRidge, Method::kFlatLinear, Method::kRuleBcf};
  std::vector<Pipeline> pipelines{Pipeline::kRidgeDoubleDip, Pipeline::kRuleBcfDoubleDip,
                                  Pipeline::kFlatLinearDoubleDip, Pipeline::kHonestAipw};
  int reps = 50;
  int n = 500;
  int n_fit = 1000;
  int n_holdout = 500;
  double alpha = 0.05;
  int min_leaf = 50;
  int max_depth = 2;
  int max_thresholds = 32;
  double s_tau_mismatch = 1.0;  // calibration: fit s_tau = generating s_tau * factor
};

struct RunConfig {
  std::optional<DataConfig> data;
  Method model = Method::kRidge;
  bool observational = false;
  RidgePrior prior;
  McmcConfig mcmc;
  BoostConfig rules;
  SubgroupsConfig subgroups;
  PolicyConfig policy;
  CalibrateConfig calibrate;
  SimulateConfig simulate;
  std::filesystem::path output_dir = "braids_out";
  std::uint64_t seed = 1;
  int threads = 1;

  // Cross-field checks; throws ConfigError.
  void validate() const;
};

// Every object level rejects keys it does not know.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

SyntheticDgp parse_dgp(const nlohmann::json& j);
Surface parse_surface(const nlohmann::json& j, int p);

}  // namespace braids
