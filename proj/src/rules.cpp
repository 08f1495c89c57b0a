#include "braids/rules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "braids/rng.hpp"

namespace braids {

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string level_label(const ColumnSpec& c, int level) {
  if (level < static_cast<int>(c.level_labels.size())) return c.level_labels[level];
  return std::to_string(level);
}

}  // namespace

bool Condition::holds(double value) const {
  if (categorical) return ((levels >> static_cast<int>(value)) & 1ULL) != 0;
  return value > lower && value <= upper;
}

std::string Condition::describe(const std::vector<ColumnSpec>& columns) const {
  const ColumnSpec& c = columns.at(column);
  if (categorical) {
    std::string out = c.name + " in {";
    bool first = true;
    for (int l = 0; l < c.levels; ++l) {
      if (!((levels >> l) & 1ULL)) continue;
      if (!first) out += ", ";
      out += level_label(c, l);
      first = false;
    }
    return out + "}";
  }
  if (std::isinf(lower)) return c.name + " <= " + format_number(upper);
  if (std::isinf(upper)) return c.name + " > " + format_number(lower);
  return format_number(lower) + " < " + c.name + " <= " + format_number(upper);
}

bool Rule::holds(const Eigen::MatrixXd& x, Eigen::Index row) const {
  for (const auto& c : conditions)
    if (!c.holds(x(row, c.column))) return false;
  return true;
}

Eigen::VectorXd Rule::indicator(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = holds(x, i) ? 1.0 : 0.0;
  return out;
}

std::string Rule::describe(const std::vector<ColumnSpec>& columns) const {
  std::string out;
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    if (k > 0) out += " & ";
    out += conditions[k].describe(columns);
  }
  return out;
}

nlohmann::json Rule::to_json(const std::vector<ColumnSpec>& columns) const {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json j{{"column", c.column}, {"name", columns.at(c.column).name}};
    if (c.categorical) {
      j["kind"] = "categorical";
      std::vector<int> levels;
      for (int l = 0; l < 64; ++l)
        if ((c.levels >> l) & 1ULL) levels.push_back(l);
      j["levels"] = levels;
    } else {
      j["kind"] = "continuous";
      j["lower"] = std::isinf(c.lower) ? nlohmann::json(nullptr) : nlohmann::json(c.lower);
      j["upper"] = std::isinf(c.upper) ? nlohmann::json(nullptr) : nlohmann::json(c.upper);
    }
    conds.push_back(std::move(j));
  }
  return {{"rule", describe(columns)}, {"support", support}, {"conditions", std::move(conds)}};
}

Rule Rule::from_json(const nlohmann::json& j) {
  Rule r;
  r.support = j.value("support", 0.0);
  for (const auto& jc : j.at("conditions")) {
    Condition c;
    c.column = jc.at("column").get<int>();
    if (jc.at("kind").get<std::string>() == "categorical") {
      c.categorical = true;
      for (int l : jc.at("levels").get<std::vector<int>>()) c.levels |= 1ULL << l;
    } else {
      if (!jc.at("lower").is_null()) c.lower = jc.at("lower").get<double>();
      if (!jc.at("upper").is_null()) c.upper = jc.at("upper").get<double>();
    }
    r.conditions.push_back(c);
  }
  return r;
}

RuleSet::RuleSet(std::vector<Rule> rules, const Eigen::MatrixXd& x)
    : rules_(std::move(rules)), centers_(rules_.size()) {
  for (std::size_t k = 0; k < rules_.size(); ++k) {
    for (const auto& c : rules_[k].conditions)
      if (c.column < 0 || c.column >= x.cols()) throw std::invalid_argument("rule references invalid column");
    const double s = rules_[k].indicator(x).mean();
    rules_[k].support = s;
    centers_[static_cast<Eigen::Index>(k)] = s;
  }
}

Eigen::MatrixXd RuleSet::design(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), size());
  for (int k = 0; k < size(); ++k) out.col(k) = rules_[k].indicator(x).array() - centers_[k];
  return out;
}

nlohmann::json RuleBasis::to_json(const std::vector<ColumnSpec>& columns) const {
  nlohmann::json prog = nlohmann::json::array();
  nlohmann::json mod = nlohmann::json::array();
  for (const auto& r : prognostic.rules()) prog.push_back(r.to_json(columns));
  for (const auto& r : modifier.rules()) mod.push_back(r.to_json(columns));
  std::vector<double> centers(linear_centers.data(), linear_centers.data() + linear_centers.size());
  return {{"prognostic", std::move(prog)},
          {"modifier", std::move(mod)},
          {"linear_columns", linear_columns},
          {"linear_centers", centers},
          {"warnings", warnings}};
}

Eigen::MatrixXd RuleBasis::prognostic_design(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd rules = prognostic.design(x);
  Eigen::MatrixXd out(x.rows(), rules.cols() + static_cast<Eigen::Index>(linear_columns.size()));
  out.leftCols(rules.cols()) = rules;
  for (std::size_t k = 0; k < linear_columns.size(); ++k) {
    const auto c = rules.cols() + static_cast<Eigen::Index>(k);
    out.col(c) = x.col(linear_columns[k]).array() - linear_centers[static_cast<Eigen::Index>(k)];
  }
  return out;
}

RuleBasis RuleBasis::from_json(const nlohmann::json& j, const Eigen::MatrixXd& x) {
  auto read = [&](const char* key) {
    std::vector<Rule> rules;
    for (const auto& jr : j.at(key)) rules.push_back(Rule::from_json(jr));
    return RuleSet(std::move(rules), x);
  };
  RuleBasis b{read("prognostic"), read("modifier"), {}};
  if (j.contains("warnings")) b.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (j.contains("linear_columns")) {
    b.linear_columns = j.at("linear_columns").get<std::vector<int>>();
    auto centers = j.at("linear_centers").get<std::vector<double>>();
    if (centers.size() != b.linear_columns.size()) throw std::invalid_argument("linear_centers size mismatch");
    for (int c : b.linear_columns)
      if (c < 0 || c >= x.cols()) throw std::invalid_argument("linear column out of range");
    b.linear_centers = Eigen::Map<Eigen::VectorXd>(centers.data(), static_cast<Eigen::Index>(centers.size()));
  }
  return b;
}

void BoostConfig::validate() const {
  if (n_trees < 0) throw std::invalid_argument("n_trees must be >= 0");
  if (max_depth < 1) throw std::invalid_argument("boosting max_depth must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw std::invalid_argument("subsample must lie in (0, 1]");
  if (!(min_support >= 0.0 && min_support < 0.5)) throw std::invalid_argument("min_support must lie in [0, 0.5)");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (max_bins < 2) throw std::invalid_argument("max_bins must be >= 2");
  if (max_rules < 0) throw std::invalid_argument("max_rules must be >= 0");
}

namespace {

struct Binned {
  std::vector<std::vector<double>> thresholds;  // continuous: ascending cut values
  std::vector<std::vector<int>> bin;            // per column, per unit
  std::vector<int> n_bins;
};

Binned bin_covariates(const Dataset& d, int max_bins) {
  Binned b;
  const int n = d.n();
  b.thresholds.resize(d.p());
  b.bin.assign(d.p(), std::vector<int>(n));
  b.n_bins.resize(d.p());
  for (int j = 0; j < d.p(); ++j) {
    const auto col = d.x().col(j);
    if (d.column(j).categorical()) {
      for (int i = 0; i < n; ++i) b.bin[j][i] = static_cast<int>(col[i]);
      b.n_bins[j] = d.column(j).levels;
      continue;
    }
    std::vector<double> u(col.data(), col.data() + n);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<double>& t = b.thresholds[j];
    if (static_cast<int>(u.size()) <= max_bins) {
      for (std::size_t k = 0; k + 1 < u.size(); ++k) t.push_back(0.5 * (u[k] + u[k + 1]));
    } else {
      for (int q = 1; q < max_bins; ++q) {
        const std::size_t k = std::min(u.size() - 2, u.size() * q / max_bins);
        const double cut = 0.5 * (u[k] + u[k + 1]);
        if (t.empty() || cut > t.back()) t.push_back(cut);
      }
    }
    for (int i = 0; i < n; ++i)
      b.bin[j][i] = static_cast<int>(std::lower_bound(t.begin(), t.end(), col[i]) - t.begin());
    b.n_bins[j] = static_cast<int>(t.size()) + 1;
  }
  return b;
}

void add_condition(std::vector<Condition>& path, const Condition& c) {
  for (auto& existing : path) {
    if (existing.column != c.column) continue;
    if (c.categorical) {
      existing.levels &= c.levels;
    } else {
      existing.lower = std::max(existing.lower, c.lower);
      existing.upper = std::min(existing.upper, c.upper);
    }
    return;
  }
  path.push_back(c);
  std::sort(path.begin(), path.end(), [](const Condition& a, const Condition& b) { return a.column < b.column; });
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, const Binned& bins, const BoostConfig& cfg)
      : d_(d), bins_(bins), cfg_(cfg) {}

  // Grows one tree on the sample rows, adds lr * leaf means to f for all
  // rows, and appends the non-root path conditions to `paths`.
  void grow(const Eigen::VectorXd& residual, std::vector<int> sample, std::vector<int> all,
            Eigen::VectorXd& f, std::vector<std::vector<Condition>>& paths) {
    node(residual, sample, all, 0, {}, f, paths);
  }

 private:
  struct Best {
    double gain = 0.0;
    int column = -1;
    Condition left, right;
  };

  Best best_split(const Eigen::VectorXd& r, const std::vector<int>& rows) const {
    Best best;
    double total = 0.0;
    for (int i : rows) total += r[i];
    const double n = static_cast<double>(rows.size());
    const double parent = total * total / n;
    for (int j = 0; j < d_.p(); ++j) {
      const int nb = bins_.n_bins[j];
      std::vector<double> sum(nb, 0.0);
      std::vector<int> cnt(nb, 0);
      for (int i : rows) {
        sum[bins_.bin[j][i]] += r[i];
        ++cnt[bins_.bin[j][i]];
      }
      // Bin order along which prefix splits are scanned.
      std::vector<int> order;
      if (d_.column(j).categorical()) {
        for (int l = 0; l < nb; ++l)
          if (cnt[l] > 0) order.push_back(l);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return sum[a] / cnt[a] < sum[b] / cnt[b]; });
      } else {
        order.resize(nb);
        std::iota(order.begin(), order.end(), 0);
      }
      double sl = 0.0;
      int nl = 0;
      std::uint64_t mask = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const int b = order[k];
        sl += sum[b];
        nl += cnt[b];
        mask |= 1ULL << b;
        const int nr = static_cast<int>(rows.size()) - nl;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        const double sr = total - sl;
        const double gain = sl * sl / nl + sr * sr / nr - parent;
        if (gain > best.gain + 1e-12 * (1.0 + std::abs(best.gain))) {
          best.gain = gain;
          best.column = j;
          if (d_.column(j).categorical()) {
            const std::uint64_t full = (d_.column(j).levels >= 64) ? ~0ULL : ((1ULL << d_.column(j).levels) - 1);
            best.left = Condition{j, true, -INFINITY, INFINITY, mask};
            best.right = Condition{j, true, -INFINITY, INFINITY, full & ~mask};
          } else {
            const double t = bins_.thresholds[j][b];
            best.left = Condition{j, false, -INFINITY, t, 0};
            best.right = Condition{j, false, t, INFINITY, 0};
          }
        }
      }
    }
    return best;
  }

  void node(const Eigen::VectorXd& r, const std::vector<int>& sample, const std::vector<int>& all, int depth,
            std::vector<Condition> path, Eigen::VectorXd& f, std::vector<std::vector<Condition>>& paths) {
    Best best;
    if (depth < cfg_.max_depth && static_cast<int>(sample.size()) >= 2 * cfg_.min_leaf) best = best_split(r, sample);
    if (best.column < 0) {
      double mean = 0.0;
      for (int i : sample) mean += r[i];
      if (!sample.empty()) mean /= static_cast<double>(sample.size());
      for (int i : all) f[i] += cfg_.learning_rate * mean;
      return;
    }
    const int j = best.column;
    auto split_rows = [&](const std::vector<int>& rows, std::vector<int>& l, std::vector<int>& rr) {
      for (int i : rows) (best.left.holds(d_.x()(i, j)) ? l : rr).push_back(i);
    };
    std::vector<int> sl, sr, al, ar;
    split_rows(sample, sl, sr);
    split_rows(all, al, ar);
    std::vector<Condition> lp = path, rp = path;
    add_condition(lp, best.left);
    add_condition(rp, best.right);
    paths.push_back(rp);
    paths.push_back(lp);
    node(r, sl, al, depth + 1, lp, f, paths);
    node(r, sr, ar, depth + 1, rp, f, paths);
  }

  const Dataset& d_;
  const Binned& bins_;
  const BoostConfig& cfg_;
};

}  // namespace

std::vector<Rule> boosted_rules(const Dataset& d, const Eigen::VectorXd& target, const BoostConfig& cfg) {
  return boosted_fit(d, target, cfg).rules;
}

BoostFit boosted_fit(const Dataset& d, const Eigen::VectorXd& target, const BoostConfig& cfg) {
  cfg.validate();
  if (target.size() != d.n()) throw std::invalid_argument("target and data have different N");
  const int n = d.n();
  const Binned bins = bin_covariates(d, cfg.max_bins);
  TreeBuilder builder(d, bins, cfg);
  Rng rng(cfg.seed);

  Eigen::VectorXd f = Eigen::VectorXd::Constant(n, target.mean());
  std::vector<std::vector<Condition>> paths;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const int m = std::max(1, static_cast<int>(std::floor(cfg.subsample * n)));
  for (int t = 0; t < cfg.n_trees; ++t) {
    std::vector<int> perm = all;
    for (int k = 0; k < m; ++k) std::swap(perm[k], perm[k + rng.index(n - k)]);
    std::vector<int> sample(perm.begin(), perm.begin() + m);
    std::sort(sample.begin(), sample.end());
    const Eigen::VectorXd residual = target - f;
    builder.grow(residual, std::move(sample), all, f, paths);
  }

  std::vector<Rule> rules;
  std::unordered_set<std::string> seen;
  for (auto& path : paths) {
    if (static_cast<int>(rules.size()) >= cfg.max_rules) break;
    Rule r{std::move(path), 0.0};
    const Eigen::VectorXd ind = r.indicator(d.x());
    r.support = ind.mean();
    if (r.support < cfg.min_support || r.support > 1.0 - cfg.min_support) continue;
    if (r.support <= 0.0 || r.support >= 1.0) continue;
    std::string key(n, '0'), complement(n, '1');
    for (int i = 0; i < n; ++i)
      if (ind[i] > 0.5) {
        key[i] = '1';
        complement[i] = '0';
      }
    if (seen.contains(key) || seen.contains(complement)) continue;
    seen.insert(key);
    rules.push_back(std::move(r));
  }
  return {std::move(rules), std::move(f)};
}

Eigen::VectorXd effect_proxy(const Dataset& d) {
  double s1 = 0.0, s0 = 0.0;
  int n1 = 0, n0 = 0;
  for (int i = 0; i < d.n(); ++i) {
    if (d.treated(i)) {
      s1 += d.y()[i];
      ++n1;
    } else {
      s0 += d.y()[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("both treatment arms must be present");
  const double m1 = s1 / n1, m0 = s0 / n0;
  Eigen::VectorXd m_hat(d.n());
  for (int i = 0; i < d.n(); ++i) m_hat[i] = d.treated(i) ? m1 : m0;
  return effect_proxy(d, m_hat);
}

Eigen::VectorXd effect_proxy(const Dataset& d, const Eigen::VectorXd& m_hat) {
  if (m_hat.size() != d.n()) throw std::invalid_argument("m_hat and data have different N");
  Eigen::VectorXd out(d.n());
  for (int i = 0; i < d.n(); ++i) {
    const double e = d.propensity()[i];
    out[i] = (d.y()[i] - m_hat[i]) * (d.a()[i] - e) / (e * (1.0 - e));
  }
  return out;
}

RuleBasis extract_rules(const Dataset& d, const BoostConfig& cfg) {
  cfg.validate();
  BoostConfig pc = cfg, mc = cfg;
  pc.seed = derive_seed(cfg.seed, "prognostic");
  mc.seed = derive_seed(cfg.seed, "modifier");
  BoostFit prognostic = boosted_fit(d, d.y(), pc);
  const Eigen::VectorXd proxy =
      cfg.centering == ProxyCentering::kArmMean ? effect_proxy(d) : effect_proxy(d, prognostic.fitted);
  RuleBasis basis{RuleSet(std::move(prognostic.rules), d.x()), RuleSet(boosted_rules(d, proxy, mc), d.x()), {}};
  if (cfg.linear_terms) {
    std::vector<double> centers;
    for (int j = 0; j < d.p(); ++j) {
      if (d.column(j).categorical()) continue;
      basis.linear_columns.push_back(j);
      centers.push_back(d.x().col(j).mean());
    }
    basis.linear_centers = Eigen::Map<Eigen::VectorXd>(centers.data(), static_cast<Eigen::Index>(centers.size()));
  }
  if (basis.prognostic.empty() && basis.linear_columns.empty())
    basis.warnings.emplace_back("empty prognostic rule basis");
  if (basis.modifier.empty()) basis.warnings.emplace_back("empty modifier rule basis; effects are homogeneous");
  return basis;
}

LinearEffectFit fit_rule_bcf(const Dataset& d, const RuleBasis& basis, const RidgePrior& prior,
                             const McmcConfig& mcmc, bool observational, std::string model_name) {
  if (basis.prognostic.empty() && basis.linear_columns.empty())
    throw std::invalid_argument("empty prognostic rule basis");
  const int treated = d.n_treated();
  if (treated == 0 || treated == d.n()) throw std::invalid_argument("both treatment arms must be present");
  EffectDesign design;
  design.prognostic = basis.prognostic_design(d.x());
  design.modifier = basis.modifier.design(d.x());
  design.offset = observational ? d.propensity() : Eigen::VectorXd::Zero(d.n());
  design.treatment = d.a() - design.offset;
  return sample_effect_model(d.y(), design, prior, mcmc, std::move(model_name));
}

}  // namespace braids
