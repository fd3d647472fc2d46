#pragma once

#include <utility>
#include <vector>

#include "rippler/model.hpp"

namespace rippler {

struct RipplerConfig {
  int n_latent_updates = 400;  // latent updates per MCMC sweep
  int n_elements = 1;          // draw-matrix entries altered per proposal
};

struct RipplerStepRecord {
  bool accepted = false;
  std::vector<std::pair<int, int>> origins;  // perturbed (t, j) cells, selection order
  int cells_changed = 0;                     // state cells differing in the proposal
  double log_acceptance_ratio = 0.0;
};

/// Draw U | theta, X: independent Unif[a,b) per cell; realising the result
/// reproduces x exactly.
DrawMatrix sample_noncentred(const StateMatrix& x, const BoundsLattice& bounds,
                             Rng& rng);

/// Pick k_elements cells with probability proportional to complement mass
/// (with replacement) and resample each chosen entry uniformly from
/// [0,a) u [b,1). Returns the perturbed matrix and the origin cells.
std::pair<DrawMatrix, std::vector<std::pair<int, int>>> select_and_perturb(
    const DrawMatrix& u, const BoundsLattice& bounds, int k_elements, Rng& rng);

double bounds_complement_sum(const BoundsLattice& bounds);

/// log q(U|theta,U*) - log q(U*|theta,U); the reverse-move bounds come from
/// the proposed state.
double log_proposal_ratio(const BoundsLattice& current, const BoundsLattice& proposed,
                          int k_elements);

/// Reference single latent update: non-centre, perturb, re-realise,
/// accept/reject on the observation and proposal ratios. The transmission
/// density cancels and is not evaluated.
std::pair<StateMatrix, RipplerStepRecord> rippler_latent_update(
    const StateMatrix& x, const ModelParams& theta, const ObservationMatrix& y,
    const RipplerConfig& cfg, const Population& pop, const FixedModel& fixed,
    Rng& rng);

/// Production chain. Equivalent in distribution to the reference update,
/// but bounds, complement masses and row counts are maintained across steps
/// so a step only touches rows the ripple actually reaches, and untouched
/// draw-matrix entries are never materialised (their values cannot affect
/// either the realisation or the acceptance ratio).
class RipplerChain {
 public:
  RipplerChain(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
               const Population* pop, const FixedModel* fixed);

  const StateMatrix& state() const { return x_; }
  const ModelParams& theta() const { return theta_; }

  /// Total complement mass, freshly summed from the per-row totals.
  double complement_sum() const;

  /// Replace parameters and rebuild every cache.
  void set_theta(const ModelParams& theta);

  /// Recompute the per-row mass totals from the exact bounds.
  void refresh_masses();

  RipplerStepRecord step(Rng& rng, int k_elements = 1);

  /// Test hook: capture per-step proposal internals.
  struct Capture {
    bool enabled = false;
    bool valid = false;
    double log_obs_delta = 0.0;
    double log_prop_ratio = 0.0;
    double sum_current = 0.0;
    double sum_proposed = 0.0;
    StateMatrix x_proposed;
  };
  void enable_capture(bool on) { capture_.enabled = on; }
  const Capture& capture() const { return capture_; }

 private:
  void rebuild();
  double obs_delta(int t, int j, std::uint8_t new_value) const;
  std::pair<int, int> select_origin(double r) const;
  double row_mass_sum(int t) const;

  const Population* pop_;
  const FixedModel* fixed_;
  const ObservationMatrix* y_;
  ModelParams theta_;
  StateMatrix x_;
  BoundsLattice bounds_;
  std::vector<double> row_mass_;  // per-row complement-mass totals
  CountCache counts_;
  std::vector<double> sus_;
  double p_cu_ = 0.0;

  // per-step scratch, preallocated
  StateMatrix xp_;
  BoundsLattice bp_;
  std::vector<std::uint8_t> row_touched_;
  std::vector<int> touched_rows_;
  std::vector<int> diff_, diff_next_;
  std::vector<int> hc_new_;
  Capture capture_;
};

}  // namespace rippler
