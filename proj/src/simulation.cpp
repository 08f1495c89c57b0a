#include "braids/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "braids/inference.hpp"
#include "braids/parallel.hpp"
#include "braids/rng.hpp"
#include "braids/stats.hpp"
#include "braids/utility.hpp"

namespace braids {

double Surface::operator()(const Eigen::MatrixXd& x, Eigen::Index row) const {
  double v = intercept;
  if (linear.size() > 0) {
    if (linear.size() != x.cols()) throw std::invalid_argument("surface has wrong number of coefficients");
    v += x.row(row).dot(linear);
  }
  for (const auto& [rule, value] : terms)
    if (rule.holds(x, row)) v += value;
  return v;
}

Eigen::VectorXd Surface::evaluate(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = (*this)(x, i);
  return out;
}

void SyntheticDgp::validate() const {
  if (p < 1) throw std::invalid_argument("dgp needs p >= 1");
  if (!(correlation >= 0.0 && correlation < 1.0)) throw std::invalid_argument("correlation must lie in [0, 1)");
  if (n_binary < 0 || n_binary > p) throw std::invalid_argument("n_binary must lie in [0, p]");
  if (!(treat_prob > 0.0 && treat_prob < 1.0)) throw std::invalid_argument("treat_prob must lie in (0, 1)");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  for (const Surface* s : {&mu, &tau}) {
    if (s->linear.size() != 0 && s->linear.size() != p)
      throw std::invalid_argument("surface coefficients must have length p");
    for (const auto& term : s->terms)
      for (const auto& c : term.first.conditions)
        if (c.column < 0 || c.column >= p) throw std::invalid_argument("surface rule references invalid column");
  }
}

SyntheticData generate(const SyntheticDgp& dgp, int n, std::uint64_t seed) {
  dgp.validate();
  if (n < 2) throw std::invalid_argument("generate needs n >= 2");
  Rng rng(seed);
  const double shared = std::sqrt(dgp.correlation);
  const double own = std::sqrt(1.0 - dgp.correlation);
  const int n_cont = dgp.p - dgp.n_binary;
  Eigen::MatrixXd x(n, dgp.p);
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) {
    const double z0 = rng.normal();
    for (int j = 0; j < n_cont; ++j) x(i, j) = shared * z0 + own * rng.normal();
    for (int j = n_cont; j < dgp.p; ++j) x(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    a[i] = rng.bernoulli(dgp.treat_prob) ? 1.0 : 0.0;
  }
  const Eigen::VectorXd mu0 = dgp.mu.evaluate(x);
  const Eigen::VectorXd tau0 = dgp.tau.evaluate(x);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = mu0[i] + a[i] * tau0[i] + dgp.sigma * rng.normal();
  std::vector<ColumnSpec> columns;
  for (int j = 0; j < dgp.p; ++j) columns.push_back(ColumnSpec::continuous("x" + std::to_string(j + 1)));
  return {Dataset(std::move(y), std::move(a), std::move(x), std::move(columns),
                  Eigen::VectorXd::Constant(n, dgp.treat_prob)),
          tau0, mu0};
}

namespace {

Rule threshold_rule(std::initializer_list<std::tuple<int, double, bool>> parts) {
  Rule r;
  for (const auto& [column, t, above] : parts) {
    Condition c;
    c.column = column;
    if (above) {
      c.lower = t;
    } else {
      c.upper = t;
    }
    r.conditions.push_back(c);
  }
  std::sort(r.conditions.begin(), r.conditions.end(),
            [](const Condition& a, const Condition& b) { return a.column < b.column; });
  return r;
}

Eigen::VectorXd coefficients(int p, std::initializer_list<double> leading) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  int j = 0;
  for (double c : leading) {
    if (j >= p) break;
    v[j++] = c;
  }
  return v;
}

}  // namespace

SyntheticDgp preset_dgp(const std::string& name, int p, double sigma) {
  SyntheticDgp dgp;
  dgp.p = p;
  dgp.sigma = sigma;
  dgp.mu.intercept = 1.0;
  dgp.mu.linear = coefficients(p, {1.0, 0.5, 0.0, -0.5});
  if (name == "linear") {
    dgp.tau.intercept = 0.5;
    dgp.tau.linear = coefficients(p, {0.5, -0.3, 0.2});
  } else if (name == "tree") {
    if (p < 2) throw std::invalid_argument("tree preset needs p >= 2");
    dgp.tau.intercept = 0.2;
    dgp.tau.terms.emplace_back(threshold_rule({{0, 0.0, true}}), 0.8);
    dgp.tau.terms.emplace_back(threshold_rule({{0, 0.0, true}, {1, 0.5, true}}), 0.6);
    dgp.tau.terms.emplace_back(threshold_rule({{1, -0.5, false}}), -0.4);
  } else if (name == "constant") {
    dgp.tau.intercept = 0.5;
  } else if (name == "null") {
    dgp.tau.intercept = 0.0;
  } else {
    throw std::invalid_argument("unknown dgp preset '" + name + "'");
  }
  return dgp;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kRidge: return "ridge";
    case Method::kFlatLinear: return "flat-linear";
    case Method::kRuleBcf: return "rule-bcf";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "ridge") return Method::kRidge;
  if (name == "flat-linear") return Method::kFlatLinear;
  if (name == "rule-bcf") return Method::kRuleBcf;
  throw std::invalid_argument("unknown method '" + name + "'");
}

namespace {

// Ridge covariates with categorical indicators centered by `centers` (or by
// their own means, which are then written to `centers`).
Eigen::MatrixXd ridge_covariates(const Dataset& d, Eigen::VectorXd& centers, bool fit_centers) {
  Eigen::MatrixXd out = covariate_design(d);
  int col = 0;
  std::vector<double> found;
  for (int j = 0; j < d.p(); ++j) {
    const ColumnSpec& c = d.column(j);
    if (!c.categorical()) {
      ++col;
      continue;
    }
    for (int level = 1; level < c.levels; ++level, ++col) {
      const Eigen::VectorXd ind = (d.x().col(j).array() == level).cast<double>();
      const double own = ind.mean();
      if (fit_centers) {
        found.push_back(own);
      } else {
        out.col(col) = ind.array() - centers[static_cast<Eigen::Index>(found.size())];
        found.push_back(0.0);
      }
    }
  }
  if (fit_centers) centers = Eigen::Map<Eigen::VectorXd>(found.data(), static_cast<Eigen::Index>(found.size()));
  return out;
}

}  // namespace

ArmPredictions MethodFit::predict(const Dataset& d) const {
  const Dataset ds = recipe.apply(d);
  Eigen::MatrixXd prog, mod;
  if (method == Method::kRuleBcf) {
    prog = basis.prognostic_design(ds.x());
    mod = basis.modifier.design(ds.x());
  } else {
    Eigen::VectorXd centers = dummy_centers;
    prog = ridge_covariates(ds, centers, false);
    mod = prog;
  }
  ArmPredictions arms = fit.predict_arms(prog, mod, Eigen::VectorXd::Zero(d.n()));
  arms.mu0 = recipe.invert_y(arms.mu0);
  arms.mu1 = recipe.invert_y(arms.mu1);
  return arms;
}

MethodFit fit_method(Method method, const Dataset& d, const FitSettings& settings, std::uint64_t seed) {
  auto [ds, recipe] = standardize(d);
  McmcConfig mcmc = settings.mcmc;
  mcmc.seed = derive_seed(seed, "mcmc");
  RuleBasis basis;
  Eigen::VectorXd centers;
  ridge_covariates(ds, centers, true);
  std::optional<LinearEffectFit> fit;
  switch (method) {
    case Method::kRidge:
      fit.emplace(fit_ridge(ds, settings.prior, mcmc, false, "ridge"));
      break;
    case Method::kFlatLinear:
      fit.emplace(fit_ridge(ds, RidgePrior::flat_linear(), mcmc, false, "flat-linear"));
      break;
    case Method::kRuleBcf: {
      BoostConfig boost = settings.boost;
      boost.seed = derive_seed(seed, "rules");
      basis = extract_rules(ds, boost);
      fit.emplace(fit_rule_bcf(ds, basis, settings.prior, mcmc, false, "rule-bcf"));
      break;
    }
  }
  PosteriorDraws draws = fit->draws.rescaled(recipe.y_scale);
  return MethodFit{method, std::move(recipe), std::move(*fit), std::move(basis), std::move(draws),
                   std::move(centers)};
}

namespace {

double between_group_variance(const Eigen::VectorXd& truth, const Partition& p) {
  std::vector<double> sum(p.n_groups, 0.0);
  std::vector<int> count(p.n_groups, 0);
  for (int i = 0; i < p.n_units(); ++i) {
    sum[p.group[i]] += truth[i];
    ++count[p.group[i]];
  }
  const double overall = truth.mean();
  double v = 0.0;
  for (int k = 0; k < p.n_groups; ++k)
    if (count[k] > 0) v += count[k] * std::pow(sum[k] / count[k] - overall, 2);
  return v / p.n_units();
}

std::vector<double> group_means(const Eigen::VectorXd& values, const Partition& p) {
  std::vector<double> sum(p.n_groups, 0.0);
  std::vector<int> count(p.n_groups, 0);
  for (int i = 0; i < p.n_units(); ++i) {
    sum[p.group[i]] += values[i];
    ++count[p.group[i]];
  }
  for (int k = 0; k < p.n_groups; ++k)
    sum[k] = count[k] > 0 ? sum[k] / count[k] : std::numeric_limits<double>::quiet_NaN();
  return sum;
}

std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double m = mean(v);
  const double se = v.size() > 1 ? std::sqrt(variance(v, 1) / static_cast<double>(v.size())) : 0.0;
  return {m, se};
}

}  // namespace

UtilityExperimentReport run_utility_experiment(const SyntheticDgp& dgp, const std::vector<Method>& methods,
                                               const UtilityExperimentConfig& cfg, std::uint64_t seed) {
  dgp.validate();
  cfg.search.validate();
  if (cfg.reps < 2) throw std::invalid_argument("reps must be >= 2");
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  const int m = static_cast<int>(methods.size());
  std::vector<UtilityRecord> records(static_cast<std::size_t>(cfg.reps) * m);
  parallel_for(cfg.reps, cfg.threads, [&](int rep) {
    const std::uint64_t rs = derive_seed(seed, static_cast<std::uint64_t>(rep));
    const SyntheticData sim = generate(dgp, cfg.n, derive_seed(rs, "data"));
    const CutpointGrid grid = build_cutpoints(sim.data, cfg.search.min_leaf, cfg.max_thresholds);
    for (int k = 0; k < m; ++k) {
      UtilityRecord& r = records[static_cast<std::size_t>(rep) * m + k];
      r.rep = rep;
      r.method = methods[k];
      try {
        const MethodFit fit = fit_method(methods[k], sim.data, cfg.fit, derive_seed(rs, to_string(methods[k])));
        const Eigen::VectorXd tau_hat = fit.draws.posterior_mean();
        r.cate_mse = (tau_hat - sim.tau0).squaredNorm() / sim.data.n();
        const SubgroupTree tree = search_greedy_rn(tau_hat, sim.data, grid, cfg.search);
        const Partition part = tree.partition(sim.data);
        r.realized_utility = between_group_variance(sim.tau0, part);
        r.n_groups = part.n_groups;
      } catch (const std::exception&) {
        r.failed = true;
      }
    }
  });
  return {seed, cfg.reps, std::move(records)};
}

std::vector<MethodSummary> UtilityExperimentReport::summary(const std::vector<Method>& methods) const {
  std::vector<MethodSummary> out;
  for (Method method : methods) {
    MethodSummary s;
    s.name = to_string(method);
    std::vector<double> mse, util;
    for (const auto& r : records) {
      if (r.method != method) continue;
      if (r.failed) {
        ++s.n_failed;
        continue;
      }
      mse.push_back(r.cate_mse);
      util.push_back(r.realized_utility);
    }
    s.n_ok = static_cast<int>(mse.size());
    std::tie(s.mse_mean, s.mse_se) = mean_and_se(mse);
    std::tie(s.utility_mean, s.utility_se) = mean_and_se(util);
    out.push_back(s);
  }
  return out;
}

std::vector<double> UtilityExperimentReport::paired_mse_difference(Method a, Method b) const {
  std::map<int, double> va, vb;
  for (const auto& r : records) {
    if (r.failed) continue;
    if (r.method == a) va[r.rep] = r.cate_mse;
    if (r.method == b) vb[r.rep] = r.cate_mse;
  }
  std::vector<double> out;
  for (const auto& [rep, x] : va)
    if (auto it = vb.find(rep); it != vb.end()) out.push_back(x - it->second);
  return out;
}

void UtilityExperimentReport::write_records(std::ostream& os) const {
  os << "rep\tmethod\tfailed\tcate_mse\trealized_utility\tn_groups\n";
  os.precision(12);
  for (const auto& r : records)
    os << r.rep << '\t' << to_string(r.method) << '\t' << (r.failed ? 1 : 0) << '\t' << r.cate_mse << '\t'
       << r.realized_utility << '\t' << r.n_groups << '\n';
}

void UtilityExperimentReport::write_summary(std::ostream& os, const std::vector<Method>& methods) const {
  os << "method\tn_ok\tn_failed\tcate_mse\tcate_mse_se\trealized_utility\trealized_utility_se\n";
  os.precision(10);
  for (const auto& s : summary(methods))
    os << s.name << '\t' << s.n_ok << '\t' << s.n_failed << '\t' << s.mse_mean << '\t' << s.mse_se << '\t'
       << s.utility_mean << '\t' << s.utility_se << '\n';
}

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kRidgeDoubleDip: return "bayes-ridge-doubledip";
    case Pipeline::kRuleBcfDoubleDip: return "bayes-rulebcf-doubledip";
    case Pipeline::kFlatLinearDoubleDip: return "flat-linear-doubledip";
    case Pipeline::kHonestAipw: return "honest-aipw";
  }
  return "?";
}

Pipeline parse_pipeline(const std::string& name) {
  for (Pipeline p : {Pipeline::kRidgeDoubleDip, Pipeline::kRuleBcfDoubleDip, Pipeline::kFlatLinearDoubleDip,
                     Pipeline::kHonestAipw})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown pipeline '" + name + "'");
}

namespace {

Method pipeline_method(Pipeline p) {
  switch (p) {
    case Pipeline::kRuleBcfDoubleDip: return Method::kRuleBcf;
    case Pipeline::kFlatLinearDoubleDip: return Method::kFlatLinear;
    default: return Method::kRidge;
  }
}

struct RepOutput {
  std::vector<IntervalRecord> intervals;
  std::vector<std::pair<int, Pipeline>> skipped;
  std::vector<std::pair<int, Pipeline>> failed;
};

}  // namespace

CoverageExperimentReport run_coverage_experiment(const SyntheticDgp& dgp, const std::vector<Pipeline>& pipelines,
                                                 const CoverageExperimentConfig& cfg, std::uint64_t seed) {
  dgp.validate();
  cfg.search.validate();
  if (cfg.reps < 2) throw std::invalid_argument("reps must be >= 2");
  if (pipelines.empty()) throw std::invalid_argument("no pipelines requested");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  std::vector<RepOutput> outputs(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](int rep) {
    RepOutput& out = outputs[rep];
    const std::uint64_t rs = derive_seed(seed, static_cast<std::uint64_t>(rep));
    const SyntheticData fit_set = generate(dgp, cfg.n_fit, derive_seed(rs, "fit"));
    const SyntheticData holdout = generate(dgp, cfg.n_holdout, derive_seed(rs, "holdout"));
    const CutpointGrid grid = build_cutpoints(fit_set.data, cfg.search.min_leaf, cfg.max_thresholds);
    std::map<Method, MethodFit> fits;
    auto get_fit = [&](Method m) -> const MethodFit& {
      auto it = fits.find(m);
      if (it == fits.end())
        it = fits.emplace(m, fit_method(m, fit_set.data, cfg.fit, derive_seed(rs, to_string(m)))).first;
      return it->second;
    };
    for (Pipeline pipe : pipelines) {
      try {
        const MethodFit& fit = get_fit(pipeline_method(pipe));
        const Eigen::VectorXd tau_hat = fit.draws.posterior_mean();
        const SubgroupTree tree = search_greedy_rn(tau_hat, fit_set.data, grid, cfg.search);
        if (pipe != Pipeline::kHonestAipw) {
          const Partition part = tree.partition(fit_set.data);
          const SubgroupSummary summary = subgroup_summary(fit.draws, part, cfg.alpha);
          const auto truth = group_means(fit_set.tau0, part);
          for (const auto& g : summary.groups) {
            const bool covered = g.interval.lower <= truth[g.k] && truth[g.k] <= g.interval.upper;
            out.intervals.push_back(
                {rep, pipe, g.k, g.size, truth[g.k], g.mean, g.interval.lower, g.interval.upper, covered});
          }
          continue;
        }
        const Partition part = tree.partition(holdout.data);
        const ArmPredictions arms = fit.predict(holdout.data);
        const auto truth = group_means(holdout.tau0, part);
        const auto sizes = part.sizes();
        std::vector<int> mask(holdout.data.n());
        for (int k = 0; k < part.n_groups; ++k) {
          if (sizes[k] < 2) {
            out.skipped.emplace_back(rep, pipe);
            continue;
          }
          for (int i = 0; i < holdout.data.n(); ++i) mask[i] = part.group[i] == k ? 1 : 0;
          const AipwEstimate est = aipw_subgroup(holdout.data, arms.mu0, arms.mu1, mask);
          const bool covered = est.interval.lower <= truth[k] && truth[k] <= est.interval.upper;
          out.intervals.push_back(
              {rep, pipe, k, sizes[k], truth[k], est.estimate, est.interval.lower, est.interval.upper, covered});
        }
      } catch (const std::exception&) {
        out.failed.emplace_back(rep, pipe);
      }
    }
  });
  CoverageExperimentReport report;
  report.seed = seed;
  report.reps = cfg.reps;
  for (auto& o : outputs) {
    report.intervals.insert(report.intervals.end(), o.intervals.begin(), o.intervals.end());
    report.skipped.insert(report.skipped.end(), o.skipped.begin(), o.skipped.end());
    report.failed.insert(report.failed.end(), o.failed.begin(), o.failed.end());
  }
  return report;
}

std::vector<PipelineSummary> CoverageExperimentReport::summary(const std::vector<Pipeline>& pipelines) const {
  std::vector<PipelineSummary> out;
  for (Pipeline pipe : pipelines) {
    PipelineSummary s;
    s.name = to_string(pipe);
    int covered = 0;
    CompensatedSum width;
    for (const auto& r : intervals) {
      if (r.pipeline != pipe) continue;
      ++s.n_intervals;
      covered += r.covered ? 1 : 0;
      width.add(r.upper - r.lower);
    }
    for (const auto& sk : skipped) s.n_skipped += sk.second == pipe ? 1 : 0;
    for (const auto& f : failed) s.n_failed += f.second == pipe ? 1 : 0;
    if (s.n_intervals > 0) {
      s.coverage = static_cast<double>(covered) / s.n_intervals;
      s.coverage_se = binomial_se(s.coverage, s.n_intervals);
      s.mean_width = width.value() / s.n_intervals;
    }
    out.push_back(s);
  }
  return out;
}

void CoverageExperimentReport::write_intervals(std::ostream& os) const {
  os << "rep\tpipeline\tgroup\tsize\ttruth\testimate\tlower\tupper\tcovered\n";
  os.precision(12);
  for (const auto& r : intervals)
    os << r.rep << '\t' << to_string(r.pipeline) << '\t' << r.group << '\t' << r.size << '\t' << r.truth << '\t'
       << r.estimate << '\t' << r.lower << '\t' << r.upper << '\t' << (r.covered ? 1 : 0) << '\n';
}

void CoverageExperimentReport::write_widths(std::ostream& os) const {
  os << "pipeline\twidth\n";
  os.precision(12);
  for (const auto& r : intervals) os << to_string(r.pipeline) << '\t' << r.upper - r.lower << '\n';
}

void CoverageExperimentReport::write_summary(std::ostream& os, const std::vector<Pipeline>& pipelines) const {
  os << "pipeline\tn_intervals\tn_skipped\tn_failed\tcoverage\tcoverage_se\tmean_width\n";
  os.precision(10);
  for (const auto& s : summary(pipelines))
    os << s.name << '\t' << s.n_intervals << '\t' << s.n_skipped << '\t' << s.n_failed << '\t' << s.coverage << '\t'
       << s.coverage_se << '\t' << s.mean_width << '\n';
}

nlohmann::json CalibrationReport::to_json() const {
  return {{"reps", reps},
          {"alpha", alpha},
          {"group", {{"n", n_group_intervals}, {"coverage", group_coverage}, {"se", group_coverage_se}}},
          {"delta", {{"n", n_delta_intervals}, {"coverage", delta_coverage}, {"se", delta_coverage_se}}},
          {"member", {{"n", reps}, {"coverage", member_coverage}, {"se", member_coverage_se}}},
          {"member_delta",
           {{"n", n_member_delta}, {"coverage", member_delta_coverage}, {"se", member_delta_coverage_se}}},
          {"unit", {{"n", reps}, {"coverage", unit_coverage}, {"se", unit_coverage_se}}}};
}

CalibrationReport prior_predictive_calibration(const Dataset& design, const CalibrationConfig& cfg,
                                               std::uint64_t seed) {
  if (cfg.reps < 50) throw std::invalid_argument("reps must be >= 50");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  cfg.generating_prior.validate();
  cfg.search.validate();
  const RidgePrior& gp = cfg.generating_prior;
  const RidgePrior& fp = cfg.fit_prior ? *cfg.fit_prior : gp;
  const EffectDesign w = ridge_design(design, false);
  const CutpointGrid grid = build_cutpoints(design, cfg.search.min_leaf, cfg.max_thresholds);
  const int n = design.n();

  struct RepResult {
    int group_n = 0, group_hit = 0, delta_n = 0, delta_hit = 0;
    bool unit_hit = false, member_hit = false, member_delta = false, member_delta_hit = false;
  };
  std::vector<RepResult> results(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](int rep) {
    const std::uint64_t rs = derive_seed(seed, static_cast<std::uint64_t>(rep));
    Rng rng(derive_seed(rs, "prior"));
    const double sigma = gp.fixed_sigma ? *gp.fixed_sigma : std::sqrt(1.0 / rng.gamma(gp.sigma2_shape, 1.0 / gp.sigma2_rate));
    const double sigma_tau = gp.fixed_sigma_tau ? *gp.fixed_sigma_tau : rng.exponential(gp.s_tau);
    const double mu0 = rng.normal(0.0, gp.intercept_sd);
    const double tau0 = rng.normal(0.0, gp.intercept_sd);
    Eigen::VectorXd beta_mu(w.prognostic.cols()), beta_tau(w.modifier.cols());
    for (Eigen::Index j = 0; j < beta_mu.size(); ++j) beta_mu[j] = rng.normal(0.0, gp.sigma_mu);
    for (Eigen::Index j = 0; j < beta_tau.size(); ++j) beta_tau[j] = rng.normal(0.0, sigma_tau);
    const Eigen::VectorXd tau_true = (w.modifier * beta_tau).array() + tau0;
    Eigen::VectorXd y = (w.prognostic * beta_mu).array() + mu0;
    for (int i = 0; i < n; ++i) y[i] += w.treatment[i] * tau_true[i] + sigma * rng.normal();
    const int unit = static_cast<int>(rng.index(static_cast<std::size_t>(n)));

    McmcConfig mcmc = cfg.mcmc;
    mcmc.seed = derive_seed(rs, "mcmc");
    const LinearEffectFit fit = sample_effect_model(y, w, fp, mcmc, "ridge");
    const Dataset d = design.with_outcome(y);
    const SubgroupTree tree = search_greedy_rn(fit.draws.posterior_mean(), d, grid, cfg.search);
    const Partition part = tree.partition(d);
    const SubgroupSummary summary = subgroup_summary(fit.draws, part, cfg.alpha);
    const auto truth = group_means(tau_true, part);
    const double overall = tau_true.mean();
    RepResult& r = results[rep];
    for (const auto& g : summary.groups) {
      ++r.group_n;
      r.group_hit += (g.interval.lower <= truth[g.k] && truth[g.k] <= g.interval.upper) ? 1 : 0;
      if (part.n_groups > 1) {
        const double dt = truth[g.k] - overall;
        ++r.delta_n;
        r.delta_hit += (g.delta_interval.lower <= dt && dt <= g.delta_interval.upper) ? 1 : 0;
      }
    }
    const GroupSummary& own = summary.groups[static_cast<std::size_t>(part.group[unit])];
    r.member_hit = own.interval.lower <= truth[own.k] && truth[own.k] <= own.interval.upper;
    if (part.n_groups > 1) {
      const double dt = truth[own.k] - overall;
      r.member_delta = true;
      r.member_delta_hit = own.delta_interval.lower <= dt && dt <= own.delta_interval.upper;
    }
    const Eigen::VectorXd unit_draws = fit.draws.tau().col(unit);
    const Interval ui = credible_interval(as_span(unit_draws), cfg.alpha);
    r.unit_hit = ui.lower <= tau_true[unit] && tau_true[unit] <= ui.upper;
  });

  CalibrationReport report;
  report.reps = cfg.reps;
  report.alpha = cfg.alpha;
  int gh = 0, dh = 0, uh = 0, mh = 0, mdh = 0;
  for (const auto& r : results) {
    mh += r.member_hit ? 1 : 0;
    report.n_member_delta += r.member_delta ? 1 : 0;
    mdh += r.member_delta_hit ? 1 : 0;
    report.n_group_intervals += r.group_n;
    gh += r.group_hit;
    report.n_delta_intervals += r.delta_n;
    dh += r.delta_hit;
    uh += r.unit_hit ? 1 : 0;
  }
  report.group_coverage = static_cast<double>(gh) / report.n_group_intervals;
  report.group_coverage_se = binomial_se(report.group_coverage, report.n_group_intervals);
  if (report.n_delta_intervals > 0) {
    report.delta_coverage = static_cast<double>(dh) / report.n_delta_intervals;
    report.delta_coverage_se = binomial_se(report.delta_coverage, report.n_delta_intervals);
  }
  report.member_coverage = static_cast<double>(mh) / cfg.reps;
  report.member_coverage_se = binomial_se(report.member_coverage, cfg.reps);
  if (report.n_member_delta > 0) {
    report.member_delta_coverage = static_cast<double>(mdh) / report.n_member_delta;
    report.member_delta_coverage_se = binomial_se(report.member_delta_coverage, report.n_member_delta);
  }
  report.unit_coverage = static_cast<double>(uh) / cfg.reps;
  report.unit_coverage_se = binomial_se(report.unit_coverage, cfg.reps);
  return report;
}

}  // namespace braids
