#include "braids/data.hpp"

#include "braids/stats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace braids {

ColumnSpec ColumnSpec::continuous(std::string name) {
  return ColumnSpec{std::move(name), ColumnKind::kContinuous, 0, {}};
}

ColumnSpec ColumnSpec::categorical(std::string name, int levels, std::vector<std::string> labels) {
  if (labels.empty()) {
    for (int l = 0; l < levels; ++l) labels.push_back(std::to_string(l));
  }
  return ColumnSpec{std::move(name), ColumnKind::kCategorical, levels, std::move(labels)};
}

Dataset::Dataset(Eigen::VectorXd y, Eigen::VectorXd a, Eigen::MatrixXd x,
                 std::vector<ColumnSpec> columns, Eigen::VectorXd propensity,
                 std::vector<std::string> ids, double propensity_bound)
    : y_(std::move(y)),
      a_(std::move(a)),
      x_(std::move(x)),
      columns_(std::move(columns)),
      propensity_(std::move(propensity)),
      ids_(std::move(ids)),
      propensity_bound_(propensity_bound) {
  const auto n = y_.size();
  if (n == 0) throw DataError("dataset has no rows");
  if (a_.size() != n || x_.rows() != n || propensity_.size() != n) {
    throw DataError("dataset vectors have inconsistent lengths");
  }
  if (static_cast<Eigen::Index>(columns_.size()) != x_.cols()) {
    throw DataError("covariate column specs do not match matrix width");
  }
  if (!ids_.empty() && static_cast<Eigen::Index>(ids_.size()) != n) {
    throw DataError("unit labels do not match row count");
  }
  if (!(propensity_bound_ > 0.0 && propensity_bound_ < 0.5)) {
    throw DataError("propensity bound must lie in (0, 0.5)");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y_[i])) throw DataError("non-finite outcome in row " + std::to_string(i));
    if (a_[i] != 0.0 && a_[i] != 1.0) {
      throw DataError("invalid treatment value in row " + std::to_string(i));
    }
    const double e = propensity_[i];
    if (!(e > 0.0 && e < 1.0)) {
      throw DataError("propensity outside (0,1) in row " + std::to_string(i));
    }
    if (e < propensity_bound_ || e > 1.0 - propensity_bound_) {
      throw DataError("propensity outside [bound, 1 - bound] in row " + std::to_string(i));
    }
  }
  for (Eigen::Index j = 0; j < x_.cols(); ++j) {
    const ColumnSpec& c = columns_[j];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = x_(i, j);
      if (!std::isfinite(v)) {
        throw DataError("non-finite value in column " + c.name + " row " + std::to_string(i));
      }
      if (c.categorical() && (v < 0 || v >= c.levels || v != std::floor(v))) {
        throw DataError("invalid level code in column " + c.name + " row " + std::to_string(i));
      }
    }
    if (c.categorical() && (c.levels < 1 || c.levels > 64)) {
      throw DataError("categorical column " + c.name + " must have 1..64 levels");
    }
  }
}

int Dataset::n_treated() const {
  return static_cast<int>((a_.array() > 0.5).count());
}

int Dataset::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return static_cast<int>(j);
  }
  throw DataError("unknown column " + std::string(name));
}

Dataset Dataset::with_outcome(Eigen::VectorXd y) const {
  return Dataset(std::move(y), a_, x_, columns_, propensity_, ids_, propensity_bound_);
}

Dataset Dataset::with_covariates(Eigen::MatrixXd x, std::vector<ColumnSpec> columns) const {
  return Dataset(y_, a_, std::move(x), std::move(columns), propensity_, ids_, propensity_bound_);
}

Dataset Dataset::subset(std::span<const int> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m), a(m), e(m);
  Eigen::MatrixXd x(m, x_.cols());
  std::vector<std::string> ids;
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = rows[r];
    y[r] = y_[i];
    a[r] = a_[i];
    e[r] = propensity_[i];
    x.row(r) = x_.row(i);
    if (!ids_.empty()) ids.push_back(ids_[i]);
  }
  return Dataset(std::move(y), std::move(a), std::move(x), columns_, std::move(e), std::move(ids),
                 propensity_bound_);
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "null";
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

double require_number(const std::string& s, const std::string& column, std::size_t row) {
  if (is_missing(s)) {
    throw DataError("missing value in column " + column + " row " + std::to_string(row));
  }
  auto v = parse_number(s);
  if (!v) throw DataError("malformed number '" + s + "' in column " + column + " row " + std::to_string(row));
  return *v;
}

// Level labels sorted numerically when every label parses as a number,
// lexicographically otherwise.
std::vector<std::string> sorted_levels(const std::vector<std::string>& values) {
  std::vector<std::string> levels(values);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const bool numeric = std::all_of(levels.begin(), levels.end(),
                                   [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric) {
    std::sort(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  return levels;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const DataSchema& schema) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("malformed file: missing header row");
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto names = split_line(header, delim);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < names.size(); ++c) index[names[c]] = c;
  auto find = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("unknown column " + name);
    return it->second;
  };

  const auto y_col = find(schema.outcome);
  const auto a_col = find(schema.treatment);
  std::vector<std::size_t> x_cols;
  for (const auto& cov : schema.covariates) x_cols.push_back(find(cov.name));
  std::optional<std::size_t> e_col;
  if (schema.propensity_column) e_col = find(*schema.propensity_column);
  std::optional<std::size_t> id_col;
  if (schema.id_column) id_col = find(*schema.id_column);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_line(line, delim);
    if (fields.size() != names.size()) {
      throw DataError("malformed file: row " + std::to_string(rows.size() + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(names.size()));
    }
    rows.push_back(std::move(fields));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw DataError("malformed file: no data rows");

  Eigen::VectorXd y(n), a(n), e(n);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[i];
    y[i] = require_number(r[y_col], schema.outcome, i + 1);
    a[i] = require_number(r[a_col], schema.treatment, i + 1);
    if (a[i] != 0.0 && a[i] != 1.0) {
      throw DataError("invalid treatment value '" + r[a_col] + "' in row " + std::to_string(i + 1));
    }
    if (id_col) ids.push_back(r[*id_col]);
  }
  if (e_col) {
    for (Eigen::Index i = 0; i < n; ++i) {
      e[i] = require_number(rows[i][*e_col], *schema.propensity_column, i + 1);
      if (!(e[i] > 0.0 && e[i] < 1.0)) {
        throw DataError("propensity outside (0,1) in row " + std::to_string(i + 1));
      }
    }
  } else if (schema.propensity_constant) {
    const double c = *schema.propensity_constant;
    if (!(c > 0.0 && c < 1.0)) throw DataError("propensity outside (0,1): constant " + std::to_string(c));
    e.setConstant(c);
  } else {
    e.setConstant(a.mean());
  }

  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));
  std::vector<ColumnSpec> specs;
  for (std::size_t j = 0; j < x_cols.size(); ++j) {
    const auto& role = schema.covariates[j];
    if (role.kind == ColumnKind::kContinuous) {
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = require_number(rows[i][x_cols[j]], role.name, i + 1);
      specs.push_back(ColumnSpec::continuous(role.name));
    } else {
      std::vector<std::string> raw;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = rows[i][x_cols[j]];
        if (is_missing(v)) {
          throw DataError("missing value in column " + role.name + " row " + std::to_string(i + 1));
        }
        raw.push_back(v);
      }
      auto levels = sorted_levels(raw);
      std::map<std::string, int> code;
      for (std::size_t l = 0; l < levels.size(); ++l) code[levels[l]] = static_cast<int>(l);
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = code[raw[i]];
      specs.push_back(ColumnSpec::categorical(role.name, static_cast<int>(levels.size()), levels));
    }
  }
  return Dataset(std::move(y), std::move(a), std::move(x), std::move(specs), std::move(e),
                 std::move(ids), schema.propensity_bound);
}

Dataset load_dataset(const std::filesystem::path& path, const DataSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_dataset(in, schema);
}

Eigen::VectorXd StandardizationRecipe::apply_y(const Eigen::VectorXd& y) const {
  return (y.array() - y_center) / y_scale;
}

Eigen::VectorXd StandardizationRecipe::invert_y(const Eigen::VectorXd& y) const {
  return y.array() * y_scale + y_center;
}

Eigen::MatrixXd StandardizationRecipe::apply_x(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.col(j) = (x.col(j).array() - x_centers[j]) / x_scales[j];
  }
  return out;
}

Eigen::MatrixXd StandardizationRecipe::invert_x(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.col(j) = x.col(j).array() * x_scales[j] + x_centers[j];
  }
  return out;
}

Dataset StandardizationRecipe::apply(const Dataset& d) const {
  return Dataset(apply_y(d.y()), d.a(), apply_x(d.x()), d.columns(), d.propensity(), d.ids(),
                 d.propensity_bound());
}

Dataset StandardizationRecipe::invert(const Dataset& d) const {
  return Dataset(invert_y(d.y()), d.a(), invert_x(d.x()), d.columns(), d.propensity(), d.ids(),
                 d.propensity_bound());
}

std::pair<Dataset, StandardizationRecipe> standardize(const Dataset& d) {
  StandardizationRecipe r;
  auto center_scale = [](const Eigen::VectorXd& v, const std::string& name) {
    const double m = mean(as_span(v));
    const double var = variance(as_span(v), 1);
    if (!(var > 0.0)) throw DataError("zero-variance column " + name);
    return std::pair{m, std::sqrt(var)};
  };
  if (d.n() < 2) throw DataError("standardization needs at least two rows");
  std::tie(r.y_center, r.y_scale) = center_scale(d.y(), "outcome");
  r.x_centers = Eigen::VectorXd::Zero(d.p());
  r.x_scales = Eigen::VectorXd::Ones(d.p());
  for (int j = 0; j < d.p(); ++j) {
    if (d.column(j).categorical()) continue;
    Eigen::VectorXd col = d.x().col(j);
    std::tie(r.x_centers[j], r.x_scales[j]) = center_scale(col, d.column(j).name);
  }
  return {r.apply(d), r};
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string level_set(const ColumnSpec& c, std::uint64_t mask) {
  std::string out = "{";
  bool first = true;
  for (int l = 0; l < c.levels; ++l) {
    if (((mask >> l) & 1ULL) == 0) continue;
    if (!first) out += ",";
    out += l < static_cast<int>(c.level_labels.size()) ? c.level_labels[l] : std::to_string(l);
    first = false;
  }
  return out + "}";
}

}  // namespace

std::string Split::describe(const std::vector<ColumnSpec>& columns, bool left) const {
  const ColumnSpec& c = columns.at(column);
  if (categorical) {
    const std::uint64_t all = c.levels >= 64 ? ~0ULL : ((1ULL << c.levels) - 1);
    return c.name + " in " + level_set(c, left ? left_levels : (all & ~left_levels));
  }
  return c.name + (left ? " <= " : " > ") + format_number(threshold);
}

std::strong_ordering operator<=>(const Split& a, const Split& b) {
  if (auto c = a.column <=> b.column; c != 0) return c;
  if (a.categorical != b.categorical) return a.categorical ? std::strong_ordering::greater : std::strong_ordering::less;
  if (a.categorical) return a.left_levels <=> b.left_levels;
  if (a.threshold < b.threshold) return std::strong_ordering::less;
  if (a.threshold > b.threshold) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::size_t CutpointGrid::size() const {
  std::size_t s = 0;
  for (const auto& c : by_column) s += c.size();
  return s;
}

CutpointGrid build_cutpoints(const Dataset& d, int min_leaf, int max_thresholds) {
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be at least 1");
  if (max_thresholds < 1) throw std::invalid_argument("max_thresholds must be at least 1");
  CutpointGrid grid;
  grid.by_column.resize(d.p());
  const int n = d.n();
  for (int j = 0; j < d.p(); ++j) {
    const ColumnSpec& c = d.column(j);
    auto& out = grid.by_column[j];
    if (!c.categorical()) {
      std::vector<double> v(d.x().col(j).data(), d.x().col(j).data() + n);
      std::sort(v.begin(), v.end());
      std::vector<double> admissible;
      for (int i = 0; i + 1 < n; ++i) {
        if (v[i] == v[i + 1]) continue;
        const int left = i + 1;  // values <= v[i]
        if (left >= min_leaf && n - left >= min_leaf) admissible.push_back(0.5 * (v[i] + v[i + 1]));
      }
      const int m = static_cast<int>(admissible.size());
      if (m > max_thresholds) {
        std::vector<double> thinned;
        for (int k = 0; k < max_thresholds; ++k) {
          const int idx = max_thresholds == 1
                              ? m / 2
                              : static_cast<int>(std::lround(static_cast<double>(k) * (m - 1) /
                                                             (max_thresholds - 1)));
          if (thinned.empty() || thinned.back() != admissible[idx]) thinned.push_back(admissible[idx]);
        }
        admissible = std::move(thinned);
      }
      for (double t : admissible) out.push_back(Split{j, false, t, 0});
      continue;
    }
    std::vector<int> counts(c.levels, 0);
    for (int i = 0; i < n; ++i) counts[static_cast<int>(d.x()(i, j))]++;
    std::vector<std::uint64_t> masks;
    if (c.levels >= 2) {
      // One-vs-rest; with two levels the second singleton is the complement.
      const int singles = c.levels == 2 ? 1 : c.levels;
      for (int l = 0; l < singles; ++l) masks.push_back(1ULL << l);
      if (c.levels <= kMaxSubsetLevels) {
        const std::uint64_t all = (1ULL << c.levels) - 1;
        for (std::uint64_t m = 1; m < all; ++m) {
          const int size = std::popcount(m);
          const int rest = c.levels - size;
          if (size < 2 || size > rest) continue;
          if (size == rest && (m & 1ULL) == 0) continue;  // complement carries level 0
          masks.push_back(m);
        }
      }
    }
    for (auto m : masks) {
      int left = 0;
      for (int l = 0; l < c.levels; ++l) {
        if ((m >> l) & 1ULL) left += counts[l];
      }
      if (left >= min_leaf && n - left >= min_leaf) out.push_back(Split{j, true, 0.0, m});
    }
  }
  return grid;
}

}  // namespace braids
