#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace braids {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { kContinuous, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  int levels = 0;                         // categorical only
  std::vector<std::string> level_labels;  // code -> label

  bool categorical() const { return kind == ColumnKind::kCategorical; }
  static ColumnSpec continuous(std::string name);
  static ColumnSpec categorical(std::string name, int levels, std::vector<std::string> labels = {});
};

inline constexpr double kDefaultPropensityBound = 1e-3;

// Outcomes, binary treatments, typed covariates and propensities for N units.
// Validated on construction and immutable afterwards.
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::VectorXd a, Eigen::MatrixXd x, std::vector<ColumnSpec> columns,
          Eigen::VectorXd propensity, std::vector<std::string> ids = {},
          double propensity_bound = kDefaultPropensityBound);

  int n() const { return static_cast<int>(y_.size()); }
  int p() const { return static_cast<int>(x_.cols()); }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& a() const { return a_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& propensity() const { return propensity_; }
  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(int j) const { return columns_.at(j); }
  const std::vector<std::string>& ids() const { return ids_; }
  double propensity_bound() const { return propensity_bound_; }
  bool treated(int i) const { return a_[i] > 0.5; }
  int n_treated() const;
  int column_index(std::string_view name) const;  // throws DataError if absent

  Dataset with_outcome(Eigen::VectorXd y) const;
  Dataset with_covariates(Eigen::MatrixXd x, std::vector<ColumnSpec> columns) const;
  Dataset subset(std::span<const int> rows) const;

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd a_;
  Eigen::MatrixXd x_;
  std::vector<ColumnSpec> columns_;
  Eigen::VectorXd propensity_;
  std::vector<std::string> ids_;
  double propensity_bound_;
};

struct CovariateRole {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
};

// Column roles for delimited input.
struct DataSchema {
  std::string outcome;
  std::string treatment;
  std::vector<CovariateRole> covariates;
  std::optional<std::string> propensity_column;
  std::optional<double> propensity_constant;  // used when no propensity column
  std::optional<std::string> id_column;
  double propensity_bound = kDefaultPropensityBound;
};

// Comma- or tab-separated text with a header row. Without a propensity
// column or constant, the propensity is the observed treated fraction.
Dataset load_dataset(const std::filesystem::path& path, const DataSchema& schema);
Dataset parse_dataset(std::istream& in, const DataSchema& schema);

struct StandardizationRecipe {
  double y_center = 0.0;
  double y_scale = 1.0;
  Eigen::VectorXd x_centers;
  Eigen::VectorXd x_scales;

  Eigen::VectorXd apply_y(const Eigen::VectorXd& y) const;
  Eigen::VectorXd invert_y(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd apply_x(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert_x(const Eigen::MatrixXd& x) const;
  Dataset apply(const Dataset& d) const;
  Dataset invert(const Dataset& d) const;
};

// Centers and scales y and the continuous covariates to mean 0, variance 1
// (denominator N - 1). Categorical columns pass through unchanged.
std::pair<Dataset, StandardizationRecipe> standardize(const Dataset& d);

// An axis-aligned split. Continuous: left iff x <= threshold. Categorical:
// left iff the level's bit is set in left_levels.
struct Split {
  int column = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;

  bool goes_left(double value) const {
    if (categorical) return ((left_levels >> static_cast<int>(value)) & 1ULL) != 0;
    return value <= threshold;
  }
  std::string describe(const std::vector<ColumnSpec>& columns, bool left = true) const;

  // Deterministic ordering used for tie-breaking: column, then threshold or
  // level mask.
  friend std::strong_ordering operator<=>(const Split& a, const Split& b);
  friend bool operator==(const Split& a, const Split& b) = default;
};

// Candidate splits per covariate column.
struct CutpointGrid {
  std::vector<std::vector<Split>> by_column;

  std::size_t size() const;
  const std::vector<Split>& column(int j) const { return by_column.at(j); }
};

// Continuous columns: midpoints between consecutive distinct values leaving
// at least min_leaf units per side, thinned evenly to max_thresholds.
// Categorical columns: one-vs-rest splits, and for at most four levels every
// nonempty proper subset up to complement.
CutpointGrid build_cutpoints(const Dataset& d, int min_leaf, int max_thresholds = 64);

inline constexpr int kMaxSubsetLevels = 4;

}  // namespace braids
