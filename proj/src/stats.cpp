#include "braids/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace braids {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double variance(std::span<const double> x, int ddof) {
  const auto n = static_cast<double>(x.size());
  if (n - ddof <= 0) throw std::invalid_argument("variance needs more observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / (n - ddof);
}

double lag1_autocorrelation(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  const double m = mean(x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + 1 < x.size()) num += (x[i] - m) * (x[i + 1] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation of samples with different sizes");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw std::invalid_argument("correlation of a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

double batch_means_se(std::span<const double> x, int batches) {
  if (batches < 2) throw std::invalid_argument("batch means need at least two batches");
  const std::size_t size = x.size() / static_cast<std::size_t>(batches);
  if (size == 0) throw std::invalid_argument("fewer observations than batches");
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b) means[b] = mean(x.subspan(b * size, size));
  return std::sqrt(variance(means) / batches);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, p);
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    c_ += (sum_ - t) + v;
  } else {
    c_ += (v - t) + sum_;
  }
  sum_ = t;
}

DensityCurve kernel_density(std::span<const double> x, int grid_points) {
  if (x.size() < 2) throw std::invalid_argument("density needs at least two points");
  if (grid_points < 2) throw std::invalid_argument("density grid needs at least two points");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(variance(x, 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1e-8;
  DensityCurve out;
  out.bandwidth = 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
  const double lo = sorted.front() - 3.0 * out.bandwidth;
  const double hi = sorted.back() + 3.0 * out.bandwidth;
  const double step = (hi - lo) / (grid_points - 1);
  const double norm = 1.0 / (static_cast<double>(x.size()) * out.bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  out.grid.resize(grid_points);
  out.density.assign(grid_points, 0.0);
  for (int g = 0; g < grid_points; ++g) {
    const double at = lo + step * g;
    out.grid[g] = at;
    double acc = 0.0;
    for (double v : x) {
      const double z = (at - v) / out.bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    out.density[g] = acc * norm;
  }
  return out;
}

Histogram histogram(std::span<const double> x, int bins) {
  if (x.empty() || bins < 1) throw std::invalid_argument("histogram needs data and bins");
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  double lo = *mn;
  double hi = *mx;
  if (hi <= lo) hi = lo + 1.0;
  Histogram h;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  for (double v : x) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    h.counts[std::clamp(b, 0, bins - 1)]++;
  }
  return h;
}

double binomial_se(double p, int n) {
  if (n <= 0) throw std::invalid_argument("binomial_se needs n > 0");
  return std::sqrt(p * (1.0 - p) / n);
}

}  // namespace braids
