#include "braids/prior_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "braids/parallel.hpp"
#include "braids/stats.hpp"

namespace braids {

void TreePriorConfig::validate() const {
  if (depth_law == DepthLaw::kPoisson && !(lambda_depth > 0.0))
    throw std::invalid_argument("lambda_depth must be positive");
  if (depth_law == DepthLaw::kChipman) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  }
  if (m_trees < 1) throw std::invalid_argument("m_trees must be >= 1");
  if (!(sigma_tau >= 0.0)) throw std::invalid_argument("sigma_tau must be >= 0");
  if (s_tau && !(*s_tau > 0.0)) throw std::invalid_argument("s_tau must be positive");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
}

double TreePriorConfig::split_probability(int depth) const {
  if (depth >= max_depth) return 0.0;
  if (depth_law == DepthLaw::kChipman) return alpha / std::pow(1.0 + depth, beta);
  // Pr(Z > d | Z >= d) from upper tails summed from far out for accuracy.
  const int top = depth + 200;
  double log_pmf = -lambda_depth + top * std::log(lambda_depth) - std::lgamma(top + 1.0);
  double tail = 0.0;
  double tail_above = 0.0;
  for (int k = top; k >= depth; --k) {
    if (k == depth) tail_above = tail;
    tail += std::exp(log_pmf);
    log_pmf -= std::log(lambda_depth) - std::log(static_cast<double>(k));
  }
  return tail > 0.0 ? tail_above / tail : 0.0;
}

namespace {

class TreeSampler {
 public:
  TreeSampler(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, const std::vector<double>& split_prob,
              double leaf_sd, Rng& rng)
      : x_(x), cfg_(cfg), split_prob_(split_prob), leaf_sd_(leaf_sd), rng_(rng) {}

  PriorTreeDraw run() {
    const int n = static_cast<int>(x_.rows());
    out_.value = Eigen::VectorXd::Zero(n);
    out_.depth.assign(n, 0);
    out_.leaf.assign(n, 0);
    rows_.resize(n);
    for (int i = 0; i < n; ++i) rows_[i] = i;
    n_leaves_ = 0;
    node(0, n, 0);
    return std::move(out_);
  }

 private:
  double p(int depth) const { return depth < static_cast<int>(split_prob_.size()) ? split_prob_[depth] : 0.0; }

  void node(int begin, int end, int depth) {
    const int n = end - begin;
    if (n < 2 || !(rng_.uniform() < p(depth))) {
      const double v = leaf_sd_ > 0.0 ? rng_.normal(0.0, leaf_sd_) : 0.0;
      const int id = n_leaves_++;
      for (int k = begin; k < end; ++k) {
        out_.value[rows_[k]] = v;
        out_.depth[rows_[k]] = depth;
        out_.leaf[rows_[k]] = id;
      }
      return;
    }
    const int j = static_cast<int>(rng_.index(static_cast<std::size_t>(x_.cols())));
    const int g = cfg_.split_rule == SplitRule::kUniform ? static_cast<int>(rng_.index(n + 1)) : (n + 1) / 2;
    if (g > 0 && g < n) {
      std::nth_element(rows_.begin() + begin, rows_.begin() + begin + g, rows_.begin() + end,
                       [&](int a, int b) { return x_(a, j) < x_(b, j); });
    }
    node(begin, begin + g, depth + 1);
    node(begin + g, end, depth + 1);
  }

  const Eigen::MatrixXd& x_;
  const TreePriorConfig& cfg_;
  const std::vector<double>& split_prob_;
  double leaf_sd_;
  Rng& rng_;
  std::vector<int> rows_;
  PriorTreeDraw out_;
  int n_leaves_ = 0;
};

std::vector<double> split_table(const TreePriorConfig& cfg) {
  std::vector<double> table;
  for (int d = 0; d <= cfg.max_depth && d < 512; ++d) {
    const double p = cfg.split_probability(d);
    table.push_back(p);
    if (p == 0.0) break;
  }
  return table;
}

Eigen::VectorXd forest(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, const std::vector<double>& table,
                       double sigma_tau, std::uint64_t seed) {
  Rng rng(seed);
  const double leaf_sd = sigma_tau / std::sqrt(static_cast<double>(cfg.m_trees));
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.rows());
  for (int t = 0; t < cfg.m_trees; ++t) total += TreeSampler(x, cfg, table, leaf_sd, rng).run().value;
  return total;
}

}  // namespace

PriorTreeDraw sample_prior_tree(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, double leaf_sd, Rng& rng) {
  cfg.validate();
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("prior sampling needs a nonempty design");
  if (!(leaf_sd >= 0.0)) throw std::invalid_argument("leaf sd must be >= 0");
  const auto table = split_table(cfg);
  return TreeSampler(x, cfg, table, leaf_sd, rng).run();
}

Eigen::VectorXd sample_prior_forest(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, double sigma_tau,
                                    std::uint64_t seed) {
  cfg.validate();
  if (x.rows() < 2) throw std::invalid_argument("prior sampling needs at least two rows");
  if (!(sigma_tau >= 0.0)) throw std::invalid_argument("sigma_tau must be >= 0");
  return forest(x, cfg, split_table(cfg), sigma_tau, seed);
}

HeterogeneitySample prior_heterogeneity_mc(const Eigen::MatrixXd& x, const TreePriorConfig& cfg, int n_samples,
                                           std::uint64_t seed, int threads) {
  cfg.validate();
  if (n_samples < 100) throw std::invalid_argument("n_samples must be >= 100");
  if (x.rows() < 2) throw std::invalid_argument("prior sampling needs at least two rows");
  const auto table = split_table(cfg);
  HeterogeneitySample out;
  out.h.assign(n_samples, 0.0);
  out.m.assign(n_samples, 0.0);
  parallel_for(n_samples, threads, [&](int s) {
    const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(s));
    double sigma = cfg.sigma_tau;
    if (cfg.s_tau) {
      Rng hyper(derive_seed(sample_seed, "sigma_tau"));
      sigma = hyper.exponential(*cfg.s_tau);
    }
    const Eigen::VectorXd tau = forest(x, cfg, table, sigma, sample_seed);
    const Eigen::ArrayXd centred = tau.array() - tau.mean();
    out.h[s] = std::sqrt(centred.square().mean());
    out.m[s] = centred.abs().maxCoeff();
  });

  std::vector<double> h2(n_samples);
  for (int s = 0; s < n_samples; ++s) h2[s] = out.h[s] * out.h[s];
  out.mean_h2 = mean(h2);
  out.mc_se = std::sqrt(variance(h2, 1) / n_samples);
  return out;
}

nlohmann::json HeterogeneitySample::to_json() const {
  auto summary = [](const std::vector<double>& v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    return nlohmann::json{{"mean", mean(s)},
                          {"q025", quantile_sorted(s, 0.025)},
                          {"median", quantile_sorted(s, 0.5)},
                          {"q975", quantile_sorted(s, 0.975)}};
  };
  return {{"n_samples", h.size()}, {"mean_h2", mean_h2}, {"mc_se", mc_se}, {"h", summary(h)}, {"m", summary(m)}};
}

void HeterogeneitySample::write_histograms(std::ostream& os, int bins) const {
  os << "quantity\tbin_lower\tbin_upper\tcount\n";
  os.precision(10);
  for (const auto& [name, values] : {std::pair<const char*, const std::vector<double>*>{"H", &h}, {"M", &m}}) {
    const Histogram hist = histogram(*values, bins);
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
      os << name << '\t' << hist.edges[b] << '\t' << hist.edges[b + 1] << '\t' << hist.counts[b] << '\n';
  }
}

double theorem3_closed_form(double sigma_tau, double mean_leaf_depth, SplitRule rule) {
  if (!(sigma_tau >= 0.0) || !(mean_leaf_depth >= 0.0)) throw std::invalid_argument("inputs must be nonnegative");
  const double divisor = rule == SplitRule::kUniform ? 3.0 : 2.0;
  return sigma_tau * sigma_tau * -std::expm1(-mean_leaf_depth / divisor);
}

double geometric_variant_closed_form(double sigma_tau, double alpha) {
  if (!(sigma_tau >= 0.0)) throw std::invalid_argument("sigma_tau must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 0.5)) throw std::invalid_argument("geometric variant requires 0 <= alpha <= 0.5");
  return sigma_tau * sigma_tau * alpha / (3.0 - 2.0 * alpha);
}

MeanLeafDepth mean_leaf_depth_chipman(double alpha, double beta, int max_depth) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  double reach = 1.0;  // probability a path reaches depth d
  double lambda = 0.0;
  for (int d = 0; d < max_depth; ++d) {
    const double p = alpha / std::pow(1.0 + d, beta);
    lambda += d * reach * (1.0 - p);
    reach *= p;
  }
  lambda += max_depth * reach;
  return {lambda, reach};
}

}  // namespace braids
