#include "braids/ridge.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "braids/rng.hpp"

namespace braids {

void RidgePrior::validate() const {
  if (!(sigma_mu > 0.0)) throw std::invalid_argument("sigma_mu must be positive");
  if (!(s_tau > 0.0)) throw std::invalid_argument("s_tau must be positive");
  if (!(sigma2_shape > 0.0) || !(sigma2_rate > 0.0)) {
    throw std::invalid_argument("inverse-gamma hyperparameters must be positive");
  }
  if (!(intercept_sd > 0.0)) throw std::invalid_argument("intercept_sd must be positive");
  if (fixed_sigma && !(*fixed_sigma > 0.0)) throw std::invalid_argument("fixed sigma must be positive");
  if (fixed_sigma_tau && !(*fixed_sigma_tau > 0.0)) {
    throw std::invalid_argument("fixed sigma_tau must be positive");
  }
}

RidgePrior RidgePrior::flat_linear() {
  RidgePrior p;
  p.sigma_mu = 100.0;
  p.fixed_sigma_tau = 100.0;
  return p;
}

ArmPredictions LinearEffectFit::predict_arms(const Eigen::MatrixXd& prognostic,
                                             const Eigen::MatrixXd& modifier,
                                             const Eigen::VectorXd& offset) const {
  if (prognostic.cols() != layout.n_prognostic || modifier.cols() != layout.n_modifier) {
    throw std::invalid_argument("prediction design does not match fitted layout");
  }
  const Eigen::VectorXd beta = coefficient_mean();
  const Eigen::VectorXd base =
      (prognostic * beta.segment(1, layout.n_prognostic)).array() + beta[0];
  const Eigen::VectorXd effect =
      (modifier * beta.segment(layout.modifier_begin(), layout.n_modifier)).array() +
      beta[layout.tau0()];
  ArmPredictions out;
  out.mu0 = base.array() - offset.array() * effect.array();
  out.mu1 = base.array() + (1.0 - offset.array()) * effect.array();
  return out;
}

namespace {

// Stepping-out slice sampler for a univariate log density.
template <typename LogDensity>
double slice_sample(double x0, LogDensity&& logf, double width, int max_steps, Rng& rng) {
  const double level = logf(x0) - rng.exponential(1.0);
  double left = x0 - width * rng.uniform();
  double right = left + width;
  int j = static_cast<int>(std::floor(max_steps * rng.uniform()));
  int k = max_steps - 1 - j;
  while (j-- > 0 && logf(left) > level) left -= width;
  while (k-- > 0 && logf(right) > level) right += width;
  for (int guard = 0; guard < 200; ++guard) {
    const double x1 = left + rng.uniform() * (right - left);
    if (logf(x1) > level) return x1;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  return x0;
}

}  // namespace

LinearEffectFit sample_effect_model(const Eigen::VectorXd& y, const EffectDesign& design,
                                    const RidgePrior& prior, const McmcConfig& mcmc,
                                    std::string model_name) {
  prior.validate();
  mcmc.validate();
  const Eigen::Index n = y.size();
  const Eigen::Index kp = design.prognostic.cols();
  const Eigen::Index km = design.modifier.cols();
  if (design.prognostic.rows() != n || design.modifier.rows() != n || design.treatment.size() != n ||
      design.offset.size() != n) {
    throw std::invalid_argument("design rows do not match outcome length");
  }
  const CoefficientLayout layout{static_cast<int>(kp), static_cast<int>(km)};
  const Eigen::Index k = layout.size();

  Eigen::MatrixXd w(n, k);
  w.col(0).setOnes();
  w.middleCols(1, kp) = design.prognostic;
  w.col(layout.tau0()) = design.treatment;
  w.middleCols(layout.modifier_begin(), km) =
      design.modifier.array().colwise() * design.treatment.array();
  const Eigen::MatrixXd wtw = w.transpose() * w;
  const Eigen::VectorXd wty = w.transpose() * y;

  Eigen::VectorXd base_precision = Eigen::VectorXd::Zero(k);
  const double flat = 1.0 / (prior.intercept_sd * prior.intercept_sd);
  base_precision[0] = flat;
  base_precision[layout.tau0()] = flat;
  base_precision.segment(1, kp).setConstant(1.0 / (prior.sigma_mu * prior.sigma_mu));

  Rng rng(mcmc.seed);
  double sigma2 = prior.fixed_sigma ? (*prior.fixed_sigma) * (*prior.fixed_sigma)
                                    : std::max((y.array() - y.mean()).square().mean(), 1e-8);
  double sigma_tau = prior.fixed_sigma_tau.value_or(prior.s_tau);

  const int total = mcmc.n_burn + mcmc.n_draws * mcmc.thin;
  Eigen::MatrixXd tau(mcmc.n_draws, n);
  Eigen::MatrixXd hyper(mcmc.n_draws, 2);
  Eigen::MatrixXd coefficients(mcmc.n_draws, k);
  Eigen::VectorXd beta(k), z(k);
  Eigen::LLT<Eigen::MatrixXd> llt;
  int stored = 0;

  for (int iter = 0; iter < total; ++iter) {
    Eigen::MatrixXd q = wtw / sigma2;
    Eigen::VectorXd precision = base_precision;
    precision.segment(layout.modifier_begin(), km).setConstant(1.0 / (sigma_tau * sigma_tau));
    q.diagonal() += precision;
    llt.compute(q);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("penalized design is not positive definite");
    }
    const Eigen::VectorXd mean = llt.solve(wty / sigma2);
    for (Eigen::Index j = 0; j < k; ++j) z[j] = rng.normal();
    beta = mean + llt.matrixU().solve(z);

    if (!prior.fixed_sigma) {
      const double rss = (y - w * beta).squaredNorm();
      const double shape = prior.sigma2_shape + 0.5 * static_cast<double>(n);
      const double rate = prior.sigma2_rate + 0.5 * rss;
      sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate);
    }

    if (!prior.fixed_sigma_tau) {
      const double ss = beta.segment(layout.modifier_begin(), km).squaredNorm();
      const double kmd = static_cast<double>(km);
      const double inv_scale = 1.0 / prior.s_tau;
      // log density of u = log sigma_tau, including the Jacobian.
      auto logf = [&](double u) {
        return -kmd * u - 0.5 * ss * std::exp(-2.0 * u) - std::exp(u) * inv_scale + u;
      };
      sigma_tau = std::exp(slice_sample(std::log(sigma_tau), logf, 1.0, 50, rng));
    }

    if (iter >= mcmc.n_burn && (iter - mcmc.n_burn) % mcmc.thin == 0) {
      const Eigen::VectorXd effect =
          (design.modifier * beta.segment(layout.modifier_begin(), km)).array() +
          beta[layout.tau0()];
      tau.row(stored) = effect.transpose();
      hyper(stored, 0) = std::sqrt(sigma2);
      hyper(stored, 1) = sigma_tau;
      coefficients.row(stored) = beta.transpose();
      ++stored;
    }
  }

  DrawsMeta meta{std::move(model_name), mcmc.n_burn, mcmc.thin, mcmc.seed};
  return LinearEffectFit{PosteriorDraws(std::move(tau), std::move(hyper), std::move(meta)),
                         std::move(coefficients), layout};
}

Eigen::MatrixXd covariate_design(const Dataset& d) {
  int width = 0;
  for (const auto& c : d.columns()) width += c.categorical() ? std::max(c.levels - 1, 0) : 1;
  Eigen::MatrixXd out(d.n(), width);
  int col = 0;
  for (int j = 0; j < d.p(); ++j) {
    const ColumnSpec& c = d.column(j);
    if (!c.categorical()) {
      out.col(col++) = d.x().col(j);
      continue;
    }
    for (int level = 1; level < c.levels; ++level) {
      Eigen::VectorXd ind = (d.x().col(j).array() == level).cast<double>();
      out.col(col++) = ind.array() - ind.mean();
    }
  }
  return out;
}

EffectDesign ridge_design(const Dataset& d, bool observational) {
  EffectDesign design;
  design.prognostic = covariate_design(d);
  design.modifier = design.prognostic;
  design.offset = observational ? d.propensity() : Eigen::VectorXd::Zero(d.n());
  design.treatment = d.a() - design.offset;
  return design;
}

LinearEffectFit fit_ridge(const Dataset& d, const RidgePrior& prior, const McmcConfig& mcmc,
                          bool observational, std::string model_name) {
  const int treated = d.n_treated();
  if (treated == 0 || treated == d.n()) {
    throw std::invalid_argument("both treatment arms must be present");
  }
  return sample_effect_model(d.y(), ridge_design(d, observational), prior, mcmc,
                             std::move(model_name));
}

namespace {

void check_correlation(const Eigen::MatrixXd& corr) {
  if (corr.rows() != corr.cols() || corr.rows() == 0) {
    throw std::invalid_argument("correlation matrix must be square and nonempty");
  }
  for (Eigen::Index j = 0; j < corr.rows(); ++j) {
    if (std::abs(corr(j, j) - 1.0) > 1e-12) {
      throw std::invalid_argument("correlation matrix must have unit diagonal");
    }
  }
  if (!corr.isApprox(corr.transpose(), 1e-12)) {
    throw std::invalid_argument("correlation matrix must be symmetric");
  }
}

}  // namespace

double prior_heterogeneity_mean_linear(double s_tau, const Eigen::MatrixXd& corr) {
  check_correlation(corr);
  if (!(s_tau > 0.0)) throw std::invalid_argument("s_tau must be positive");
  // sigma_tau ~ Exp(scale s): E(sigma_tau^2) = 2 s^2.
  return 2.0 * s_tau * s_tau * corr.trace();
}

double prior_heterogeneity_mean_linear_fixed(double sigma_tau, const Eigen::MatrixXd& corr) {
  check_correlation(corr);
  if (!(sigma_tau >= 0.0)) throw std::invalid_argument("sigma_tau must be nonnegative");
  return sigma_tau * sigma_tau * corr.trace();
}

}  // namespace braids
