#pragma once

#include <array>

#include "rippler/model.hpp"

namespace rippler {

/// Prior hyperparameters: exponential rates for the transmission rates,
/// Laplace rates for the covariate effects.
struct PriorSpec {
  double mu_g = 0.001;
  double mu_h = 0.001;
  double mu_a = 0.001;
  double mu_s = 0.001;
};

double log_prior(const ModelParams& theta, const PriorSpec& priors);

/// log pi(theta | X, Y) up to constants: transmission term plus prior. The
/// observation factor does not involve theta (sensitivity/specificity are
/// fixed) and is omitted.
double param_log_posterior(const ModelParams& theta, const StateMatrix& x,
                           const PriorSpec& priors, const Population& pop,
                           const FixedModel& fixed);

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

struct AdaptOptions {
  double epsilon = 0.05;         // escape-proposal probability
  double kappa0 = 1.19;          // 2.38 / sqrt(n_params)
  double target_accept = 0.234;
  double scale_gain = 1.0;       // kappa step: gain * n^-scale_decay
  double scale_decay = 0.6;
  double shaping_offset = 10.0;  // covariance weight (n+offset)^-shaping_decay
  double shaping_decay = 0.7;
  Vec4 sigma0_sd = {0.02, 0.2, 0.005, 0.05};
  bool freeze_after_burnin = false;
};

/// Mutable state of the adaptive random-walk proposal: scale kappa, shaped
/// covariance Sigma, fixed fallback Sigma0 and the running moments.
struct AdaptState {
  double kappa = 1.19;
  Mat4 sigma{};
  Mat4 sigma0{};
  Vec4 mean{};
  long n = 0;
  long n_accept = 0;
  bool frozen = false;
  AdaptOptions opt;

  static AdaptState init(const AdaptOptions& opt, const ModelParams& theta0);
  double acceptance_rate() const { return n > 0 ? static_cast<double>(n_accept) / n : 0.0; }
};

struct RwmResult {
  ModelParams theta;
  bool accepted = false;
  double log_ratio = 0.0;
};

/// One joint Metropolis update of all four parameters. The proposal mixes
/// Normal(theta, kappa^2 Sigma) with an escape kernel Normal(theta, Sigma0);
/// both components are symmetric so the acceptance ratio is the posterior
/// ratio alone. Scale and covariance adapt afterwards unless frozen.
RwmResult rwm_step(const ModelParams& theta, const StateMatrix& x, AdaptState& adapt,
                   const PriorSpec& priors, const Population& pop, const FixedModel& fixed,
                   Rng& rng);

/// The adaptation recursion on its own: kappa moves by the acceptance
/// probability's distance from target, the covariance shrinks towards the
/// running scatter of the chain.
void adapt_update(AdaptState& adapt, double alpha, const ModelParams& current);

/// Lower-triangular Cholesky factor; false if the matrix is not positive
/// definite.
bool cholesky4(const Mat4& a, Mat4& lower);

}  // namespace rippler
