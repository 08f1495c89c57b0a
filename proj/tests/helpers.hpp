#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "braids/data.hpp"
#include "braids/draws.hpp"
#include "braids/rng.hpp"

namespace testing {

inline braids::Dataset continuous_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& a,
                                          double e = 0.5) {
  std::vector<braids::ColumnSpec> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) cols.push_back(braids::ColumnSpec::continuous("x" + std::to_string(j + 1)));
  return braids::Dataset(y, a, x, cols, Eigen::VectorXd::Constant(y.size(), e));
}

// Random dataset with n rows, p standard normal covariates, Bernoulli(0.5)
// treatment and standard normal outcome.
inline braids::Dataset random_dataset(int n, int p, std::uint64_t seed) {
  braids::Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n), a(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
    a[i] = i % 2;
    y[i] = rng.normal();
  }
  return continuous_dataset(x, y, a);
}

inline braids::PosteriorDraws make_draws(const Eigen::MatrixXd& tau) {
  Eigen::MatrixXd hyper = Eigen::MatrixXd::Ones(tau.rows(), 2);
  return braids::PosteriorDraws(tau, hyper, braids::DrawsMeta{"test", 0, 1, 0});
}

inline braids::PosteriorDraws random_draws(int s, int n, std::uint64_t seed, double spread = 1.0) {
  braids::Rng rng(seed);
  Eigen::MatrixXd tau(s, n);
  Eigen::VectorXd centre(n);
  for (int i = 0; i < n; ++i) centre[i] = spread * rng.normal();
  for (int r = 0; r < s; ++r)
    for (int i = 0; i < n; ++i) tau(r, i) = centre[i] + rng.normal();
  return make_draws(tau);
}

}  // namespace testing
