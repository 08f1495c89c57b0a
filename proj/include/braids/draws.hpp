#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

namespace braids {

struct McmcConfig {
  int n_draws = 2000;
  int n_burn = 1000;
  int thin = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DrawsMeta {
  std::string model;
  int n_burn = 0;
  int thin = 1;
  std::uint64_t seed = 0;
};

// S x N matrix of sampled unit-level treatment effects, the S average effects
// (row means), and per-draw hyperparameters (sigma, sigma_tau).
class PosteriorDraws {
 public:
  PosteriorDraws(Eigen::MatrixXd tau, Eigen::MatrixXd hyper, DrawsMeta meta);

  int n_draws() const { return static_cast<int>(tau_.rows()); }
  int n_units() const { return static_cast<int>(tau_.cols()); }
  const Eigen::MatrixXd& tau() const { return tau_; }
  const Eigen::VectorXd& ate() const { return ate_; }
  const Eigen::MatrixXd& hyper() const { return hyper_; }
  const DrawsMeta& meta() const { return meta_; }

  // Posterior mean of tau(X_i) per unit.
  Eigen::VectorXd posterior_mean() const { return tau_.colwise().mean().transpose(); }

  // Effects (and sigma) multiplied by `factor`, e.g. to return from
  // standardized to outcome units.
  PosteriorDraws rescaled(double factor) const;

 private:
  Eigen::MatrixXd tau_;
  Eigen::VectorXd ate_;
  Eigen::MatrixXd hyper_;
  DrawsMeta meta_;
};

// Binary container `<stem>.bin` (magic, dimensions, little-endian doubles)
// plus a JSON sidecar `<stem>.json` holding metadata.
void write_draws(const PosteriorDraws& draws, const std::filesystem::path& stem);
PosteriorDraws read_draws(const std::filesystem::path& stem);
// Delimited text export: one row per draw, columns ate, sigma, sigma_tau,
// tau_1..tau_N.
void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path);

}  // namespace braids
