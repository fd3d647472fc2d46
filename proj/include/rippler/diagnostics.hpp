#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rippler/model.hpp"

namespace rippler {

/// Mean squared jump distance between consecutive latent snapshots; for a
/// binary lattice this is the mean Hamming distance.
double msjd(const std::vector<StateMatrix>& chain);

/// Per-time-step decomposition; sums to msjd().
std::vector<double> msjd_by_time(const std::vector<StateMatrix>& chain);

/// Same metrics from persisted per-iteration jump counts (one row per
/// iteration, one column per time-step).
double msjd_from_jumps(const std::vector<std::vector<int>>& jumps);
std::vector<double> msjd_by_time_from_jumps(const std::vector<std::vector<int>>& jumps);

/// Interpolated empirical quantile (linear between order statistics).
double quantile(std::vector<double> samples, double q);

/// Central credible interval via interpolated quantiles.
std::pair<double, double> credible_interval(const std::vector<double>& samples, double level);

std::vector<int> colonised_count(const StateMatrix& x);

/// Scenario for the within-household risk ratio: pressures at step t+1
/// with the given colonised counts.
struct RiskScenario {
  int t = 0;
  int colonised_global = 0;
  int colonised_household = 0;
};

/// (global + household pressure) / global pressure for one parameter draw;
/// covariate multipliers cancel. Throws UndefinedRatio if the global
/// pressure is zero.
double risk_ratio_value(const ModelParams& theta, const RiskScenario& scenario,
                        int n_population, const FixedModel& fixed);

std::pair<double, double> household_risk_ratio(const std::vector<ModelParams>& samples,
                                               const RiskScenario& scenario, int n_population,
                                               const FixedModel& fixed, double level = 0.95);

/// Exhaustive posterior over every colonisation lattice (enumeration
/// oracle). Guarded to at most 20 cells.
struct ExactDistribution {
  int n_cells = 0;
  std::vector<double> prob;  // indexed by lattice bitmask, bit = t * N + j
};

ExactDistribution exact_latent_posterior(const ObservationMatrix& y, const ModelParams& theta,
                                         const Population& pop, const FixedModel& fixed,
                                         int n_steps);

std::uint32_t lattice_bitmask(const StateMatrix& x);
StateMatrix lattice_from_bitmask(std::uint32_t mask, int rows, int cols);

/// Total variation distance between two distributions on the same support.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// Spearman rank correlation (average ranks on ties).
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rippler
