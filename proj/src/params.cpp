#include "rippler/params.hpp"

#include <algorithm>
#include <cmath>

namespace rippler {

double log_prior(const ModelParams& theta, const PriorSpec& priors) {
  if (theta.beta_g < 0.0 || theta.beta_h < 0.0) return kLogZero;
  double lp = std::log(priors.mu_g) - priors.mu_g * theta.beta_g;
  lp += std::log(priors.mu_h) - priors.mu_h * theta.beta_h;
  lp += std::log(priors.mu_a / 2.0) - priors.mu_a * std::fabs(theta.delta_age);
  lp += std::log(priors.mu_s / 2.0) - priors.mu_s * std::fabs(theta.delta_sex);
  return lp;
}

double param_log_posterior(const ModelParams& theta, const StateMatrix& x,
                           const PriorSpec& priors, const Population& pop,
                           const FixedModel& fixed) {
  const double lp = log_prior(theta, priors);
  if (lp == kLogZero) return kLogZero;
  const double lt = transmission_log_density(x, theta, pop, fixed);
  if (lt == kLogZero) return kLogZero;
  return lp + lt;
}

bool cholesky4(const Mat4& a, Mat4& lower) {
  lower = {};
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k <= i; ++k) {
      double s = a[i][k];
      for (int m = 0; m < k; ++m) s -= lower[i][m] * lower[k][m];
      if (i == k) {
        if (s <= 0.0) return false;
        lower[i][i] = std::sqrt(s);
      } else {
        lower[i][k] = s / lower[k][k];
      }
    }
  }
  return true;
}

AdaptState AdaptState::init(const AdaptOptions& options, const ModelParams& theta0) {
  AdaptState s;
  s.opt = options;
  s.kappa = options.kappa0;
  for (int i = 0; i < 4; ++i) s.sigma0[i][i] = options.sigma0_sd[i] * options.sigma0_sd[i];
  s.sigma = s.sigma0;
  s.mean = theta0.as_array();
  return s;
}

namespace {

/// Cholesky-like factor for positive SEMIdefinite matrices: zero pivots
/// produce zero columns, so degenerate covariances give degenerate
/// proposals instead of failing.
Mat4 cholesky4_psd(const Mat4& a) {
  Mat4 lower{};
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k <= i; ++k) {
      double s = a[i][k];
      for (int m = 0; m < k; ++m) s -= lower[i][m] * lower[k][m];
      if (i == k) {
        lower[i][i] = s > 0.0 ? std::sqrt(s) : 0.0;
      } else {
        lower[i][k] = lower[k][k] > 0.0 ? s / lower[k][k] : 0.0;
      }
    }
  }
  return lower;
}

Vec4 propose_from(const Vec4& centre, const Mat4& cov, Rng& rng) {
  const Mat4 chol = cholesky4_psd(cov);
  const auto [z0, z1] = rng.normal_pair();
  const auto [z2, z3] = rng.normal_pair();
  const Vec4 z = {z0, z1, z2, z3};
  Vec4 out = centre;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k <= i; ++k) out[i] += chol[i][k] * z[k];
  }
  return out;
}

}  // namespace

RwmResult rwm_step(const ModelParams& theta, const StateMatrix& x, AdaptState& adapt,
                   const PriorSpec& priors, const Population& pop, const FixedModel& fixed,
                   Rng& rng) {
  const Vec4 cur = theta.as_array();
  const bool escape = rng.unit() < adapt.opt.epsilon;
  Mat4 cov;
  if (escape) {
    cov = adapt.sigma0;
  } else {
    const double k2 = adapt.kappa * adapt.kappa;
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < 4; ++k) cov[i][k] = k2 * adapt.sigma[i][k];
    }
  }
  const Vec4 prop = propose_from(cur, cov, rng);
  const ModelParams theta_star = ModelParams::from_array(prop);

  const double lp_star = param_log_posterior(theta_star, x, priors, pop, fixed);
  double log_ratio;
  if (lp_star == kLogZero) {
    log_ratio = kLogZero;
  } else {
    const double lp_cur = param_log_posterior(theta, x, priors, pop, fixed);
    log_ratio = lp_star - lp_cur;
  }

  RwmResult result;
  result.log_ratio = log_ratio;
  const double alpha = std::min(1.0, std::exp(log_ratio));
  result.accepted = rng.unit() < alpha;
  result.theta = result.accepted ? theta_star : theta;

  if (result.accepted) adapt.n_accept += 1;
  adapt_update(adapt, alpha, result.theta);
  return result;
}

void adapt_update(AdaptState& adapt, double alpha, const ModelParams& current) {
  adapt.n += 1;
  if (adapt.frozen) return;
  const double gain =
      adapt.opt.scale_gain / std::pow(static_cast<double>(adapt.n), adapt.opt.scale_decay);
  adapt.kappa *= std::exp(gain * (alpha - adapt.opt.target_accept));
  const double w = std::pow(static_cast<double>(adapt.n) + adapt.opt.shaping_offset,
                            -adapt.opt.shaping_decay);
  const Vec4 now = current.as_array();
  Vec4 dev;
  for (int i = 0; i < 4; ++i) dev[i] = now[i] - adapt.mean[i];
  for (int i = 0; i < 4; ++i) adapt.mean[i] += w * dev[i];
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k <= i; ++k) {
      const double v = (1.0 - w) * adapt.sigma[i][k] + w * dev[i] * dev[k];
      adapt.sigma[i][k] = v;
      adapt.sigma[k][i] = v;
    }
  }
}

}  // namespace rippler
