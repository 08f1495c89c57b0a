#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace braids {

double mean(std::span<const double> x);
// Variance with denominator n - ddof.
double variance(std::span<const double> x, int ddof = 1);
double lag1_autocorrelation(std::span<const double> x);
double correlation(std::span<const double> x, std::span<const double> y);
// Standard error of the mean of a correlated chain from `batches` contiguous
// batch means.
double batch_means_se(std::span<const double> x, int batches = 20);

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> x, double p);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Neumaier-compensated running sum; used where aggregation order must not
// change results beyond rounding.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

// Gaussian kernel density estimate on an evenly spaced grid covering the
// sample range padded by three bandwidths. Bandwidth: Silverman's rule.
DensityCurve kernel_density(std::span<const double> x, int grid_points = 256);

struct Histogram {
  std::vector<double> edges;  // size bins + 1
  std::vector<int> counts;
};
Histogram histogram(std::span<const double> x, int bins);

// Binomial standard error of a proportion.
double binomial_se(double p, int n);

}  // namespace braids
