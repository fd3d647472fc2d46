#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rippler/errors.hpp"
#include "rippler/lattice.hpp"
#include "rippler/rng.hpp"

namespace rippler {

/// Log-density sentinel for impossible states; always loses an
/// accept-reject comparison.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// P(event) over one time-step with hazard*dt = rate_dt.
inline double event_prob(double rate_dt) { return -std::expm1(-rate_dt); }

inline double log_event_prob(double rate_dt) {
  const double p = -std::expm1(-rate_dt);
  return p > 0.0 ? std::log(p) : kLogZero;
}

/// log P(no event) = -rate_dt, exact in log space.
inline double log_stay_prob(double rate_dt) { return -rate_dt; }

/// Transmission parameters under inference.
struct ModelParams {
  double beta_g = 0.0;    // global transmission rate (per week)
  double beta_h = 0.0;    // relative within-household factor
  double delta_age = 0.0; // age covariate effect (per year)
  double delta_sex = 0.0; // sex covariate effect

  std::array<double, 4> as_array() const { return {beta_g, beta_h, delta_age, delta_sex}; }
  static ModelParams from_array(const std::array<double, 4>& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

/// Quantities treated as known: de-colonisation rate, initial colonisation
/// probability, test characteristics, step length and seasonal phase.
struct FixedModel {
  double gamma = 0.5;   // de-colonisation rate (per week)
  double p0 = 0.3;      // initial colonisation probability
  double sens = 0.8;    // test sensitivity
  double spec = 0.99;   // test specificity
  double dt = 1.0;      // time-step length (weeks)
  double t_star = 17.0; // seasonal offset (weeks)
  double period = 52.0; // seasonal period (weeks)

  double p_cu() const { return event_prob(gamma * dt); }
};

/// Household structure and centred covariates for the study population.
class Population {
 public:
  Population() = default;
  Population(std::vector<int> household_of, std::vector<double> age_centred,
             std::vector<double> sex_centred);

  int n() const { return static_cast<int>(household_of_.size()); }
  int n_households() const { return static_cast<int>(members_.size()); }
  int household(int j) const { return household_of_[j]; }
  const std::vector<int>& members(int h) const { return members_[h]; }
  double age_c(int j) const { return age_c_[j]; }
  double sex_c(int j) const { return sex_c_[j]; }

  /// Covariate multipliers e^{delta . c_j} for every individual.
  std::vector<double> susceptibility(const ModelParams& theta) const;

 private:
  std::vector<int> household_of_;
  std::vector<std::vector<int>> members_;
  std::vector<double> age_c_;
  std::vector<double> sex_c_;
};

/// Seasonal modifier at time-step t; in [0,2] with period `fixed.period`.
/// Pressure at step t uses the value at t-1 (start-of-step convention).
double seasonal_modifier(double t, const FixedModel& fixed);

/// Shared sub-expressions of the pressure so that every evaluation path
/// produces bit-identical values for identical inputs.
struct PressureTerms {
  double global_term = 0.0;  // beta_g * season * colonised/N
  double bgh = 0.0;          // beta_g * beta_h
};

inline PressureTerms pressure_terms(const ModelParams& theta, double season,
                                    int colonised_total, int n) {
  return {theta.beta_g * season * (static_cast<double>(colonised_total) / n),
          theta.beta_g * theta.beta_h};
}

inline double pressure_cell(double sus, const PressureTerms& pt, int house_excl_self) {
  return sus * (pt.global_term + pt.bgh * static_cast<double>(house_excl_self));
}

/// Colonisation pressure on every individual at step t (t >= 1), given the
/// state row at t-1. Computed for all j; consumers apply it only where
/// x_{t-1,j} = 0.
std::vector<double> colonisation_pressure(int t, const std::uint8_t* x_prev,
                                          const ModelParams& theta,
                                          const Population& pop,
                                          const FixedModel& fixed);

/// Low-level row evaluation with susceptibilities and per-household
/// colonised counts (including self; self-exclusion happens inside).
void pressure_row(const ModelParams& theta, const Population& pop, double season,
                  const std::uint8_t* x_prev, const std::vector<double>& sus,
                  const int* house_cnt, int colonised_total, double* out);

/// Forward simulation of the transmission model over T steps.
StateMatrix simulate(const ModelParams& theta, const Population& pop,
                     const FixedModel& fixed, int n_steps, Rng& rng);

/// Deterministic realisation X = f(U, theta); the inverse direction of the
/// bounds construction.
StateMatrix realise(const DrawMatrix& u, const ModelParams& theta,
                    const Population& pop, const FixedModel& fixed);

/// Widest per-cell draw intervals consistent with x under theta. Throws
/// InvalidState if x contains a zero-pressure colonisation event.
BoundsLattice proposal_bounds(const StateMatrix& x, const ModelParams& theta,
                              const Population& pop, const FixedModel& fixed);

/// log pi(X | theta); kLogZero for unreachable states.
double transmission_log_density(const StateMatrix& x, const ModelParams& theta,
                                const Population& pop, const FixedModel& fixed);

/// log pi(Y | X); untested cells contribute nothing.
double observation_log_density(const ObservationMatrix& y, const StateMatrix& x,
                               const FixedModel& fixed);

/// Per-cell observation log factor (also the oracle's building block).
double observation_cell_log_factor(bool positive, bool colonised,
                                   const FixedModel& fixed);

/// Draw test results over the given (t, j) schedule.
ObservationMatrix simulate_observations(const StateMatrix& x,
                                        const std::vector<std::pair<int, int>>& schedule,
                                        const FixedModel& fixed, Rng& rng);

/// Per-row colonised totals and per-household colonised counts, kept in
/// step with a state matrix by the samplers.
struct CountCache {
  std::vector<int> colonised;  // per row
  Lattice<int> house;          // rows x n_households

  void rebuild(const StateMatrix& x, const Population& pop);
  void apply_flip(int t, int j, int new_value, const Population& pop);
};

}  // namespace rippler
