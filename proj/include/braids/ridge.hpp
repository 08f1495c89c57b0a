#pragma once

#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "braids/data.hpp"
#include "braids/draws.hpp"

namespace braids {

// Priors for the linear heterogeneous-effects model. Intercepts get a normal
// prior with sd intercept_sd (1e6 is flat at data scale). Prognostic slopes
// are Normal(0, sigma_mu^2). Effect-modifier slopes are Normal(0, sigma_tau^2)
// with sigma_tau ~ Exp(scale = s_tau). Noise variance is inverse-gamma.
// fixed_sigma / fixed_sigma_tau replace the corresponding hyperprior by a
// point mass.
struct RidgePrior {
  double sigma_mu = 1.0;
  double s_tau = 1.0;
  double sigma2_shape = 1.0;
  double sigma2_rate = 1.0;
  double intercept_sd = 1e6;
  std::optional<double> fixed_sigma;
  std::optional<double> fixed_sigma_tau;

  void validate() const;

  // Normal(0, 100^2) on every slope: the unregularized comparison model.
  static RidgePrior flat_linear();
};

// y = mu0 + prognostic * beta_mu + t * (tau0 + modifier * beta_tau) + eps,
// where t = A - offset (offset is zero for randomized data, e(X) for
// observational data).
struct EffectDesign {
  Eigen::MatrixXd prognostic;
  Eigen::MatrixXd modifier;
  Eigen::VectorXd treatment;
  Eigen::VectorXd offset;
};

// Coefficient vector layout: [mu0, beta_mu (kp), tau0, beta_tau (km)].
struct CoefficientLayout {
  int n_prognostic = 0;
  int n_modifier = 0;

  int size() const { return 2 + n_prognostic + n_modifier; }
  int tau0() const { return 1 + n_prognostic; }
  int modifier_begin() const { return 2 + n_prognostic; }
};

struct ArmPredictions {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
};

struct LinearEffectFit {
  PosteriorDraws draws;
  Eigen::MatrixXd coefficients;  // S x layout.size()
  CoefficientLayout layout;

  Eigen::VectorXd coefficient_mean() const { return coefficients.colwise().mean().transpose(); }
  // Posterior-mean outcome regressions E(Y | A = a, X) at new design rows.
  ArmPredictions predict_arms(const Eigen::MatrixXd& prognostic, const Eigen::MatrixXd& modifier,
                              const Eigen::VectorXd& offset) const;
};

// Blocked Gibbs sampler shared by the ridge and rule-ensemble models: all
// coefficients jointly from their multivariate normal full conditional,
// sigma^2 from its inverse-gamma full conditional, sigma_tau by slice
// sampling on log sigma_tau.
LinearEffectFit sample_effect_model(const Eigen::VectorXd& y, const EffectDesign& design,
                                    const RidgePrior& prior, const McmcConfig& mcmc,
                                    std::string model_name);

// Covariate design for the ridge model: continuous columns as given,
// categorical columns as centered indicators of levels 1..L-1.
Eigen::MatrixXd covariate_design(const Dataset& d);
EffectDesign ridge_design(const Dataset& d, bool observational);

// Fits the linear model with prognostic and modifier designs both equal to
// the covariates. Expects standardized data; effects come back in the units
// of d.y().
LinearEffectFit fit_ridge(const Dataset& d, const RidgePrior& prior, const McmcConfig& mcmc,
                          bool observational = false, std::string model_name = "ridge");

// Prior mean of H^2 = beta_tau' R beta_tau: sigma_tau^2 tr(R) for fixed
// sigma_tau, and E(sigma_tau^2) tr(R) = 2 s_tau^2 P under the exponential
// hyperprior.
double prior_heterogeneity_mean_linear(double s_tau, const Eigen::MatrixXd& corr);
double prior_heterogeneity_mean_linear_fixed(double sigma_tau, const Eigen::MatrixXd& corr);

}  // namespace braids
