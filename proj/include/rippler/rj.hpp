#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rippler/model.hpp"

namespace rippler {

struct RjConfig {
  int max_block = 4;  // longest span of cells altered by one proposal (weeks)
};

/// Ordered times t in 1..T at which x_{t,j} != x_{t-1,j}.
std::vector<int> events_of_column(const StateMatrix& x, int j);

/// Inverse view: rebuild a column from its initial state and event times.
std::vector<std::uint8_t> column_from_events(std::uint8_t x0, const std::vector<int>& events,
                                             int n_steps);

enum class RjKind { kMove, kAdd, kRemove };

/// Candidate new times for event e (1-based index into ev), bounded by the
/// neighbouring events and the block limit. Boundary conventions t_0 = 0,
/// t_{E+1} = T+1.
std::vector<int> rj_move_targets(const std::vector<int>& ev, int e, int max_block,
                                 int n_steps);

/// Times where a new event pair may start: flat three-cell neighbourhoods
/// for t < T, and t = T itself when the last two cells agree (the partner
/// then sits at the virtual horizon time T+1).
std::vector<int> rj_add_sites(const StateMatrix& x, int j);

/// Partner times closing a new event started at t_a. T+1 stands for "runs
/// to the end of the horizon" and is available when no real event follows
/// t_a and the block limit reaches the horizon.
std::vector<int> rj_add_partners(const std::vector<int>& ev, int t_a, int max_block,
                                 int n_steps);

/// 1-based indices e of removable events: pairs (e, e+1) within the block
/// limit, plus the final event paired with the virtual horizon time T+1.
/// Without the horizon pairing no move could ever change x_{T,j} (every
/// span the three kinds flip ends before T), leaving the chain reducible.
std::vector<int> rj_remove_pairs(const std::vector<int>& ev, int max_block, int n_steps);

struct RjProposal {
  RjKind kind{};
  int individual = 0;
  int lo = 0;  // flipped rows are lo..hi inclusive (within 1..T)
  int hi = 0;
  double log_q = 0.0;  // log of the Hastings factor Q
};

/// Draw a move/add/remove proposal for column j, including the reverse-move
/// set sizes evaluated on the proposed column. nullopt when the required
/// candidate set is empty (callers count a rejection).
std::optional<RjProposal> rj_propose(const StateMatrix& x, int j, RjKind kind,
                                     int max_block, Rng& rng);

/// Target log-density change of flipping rows lo..hi of column j: the
/// affected transmission terms (own transitions, plus every individual's
/// next-step pressure terms) and observation terms only.
double rj_log_target_delta(const StateMatrix& x, int j, int lo, int hi,
                           const ObservationMatrix& y, const ModelParams& theta,
                           const Population& pop, const FixedModel& fixed,
                           const CountCache& counts, const std::vector<double>& sus);

/// Same for flipping the initial state of individual j (includes the p0
/// prior term and any row-0 observation).
double rj_initial_flip_delta(const StateMatrix& x, int j, const ObservationMatrix& y,
                             const ModelParams& theta, const Population& pop,
                             const FixedModel& fixed, const CountCache& counts,
                             const std::vector<double>& sus);

/// Reference initial-state update: flip one uniformly chosen individual,
/// accept on the full-density ratio (proposal ratio is 1).
std::pair<StateMatrix, bool> rj_flip_initial(const StateMatrix& x, const ModelParams& theta,
                                             const ObservationMatrix& y, const Population& pop,
                                             const FixedModel& fixed, Rng& rng);

/// Reference interior update: uniformly chosen individual and kind,
/// full-density evaluation. Infeasible proposals return (x, false).
std::pair<StateMatrix, bool> rj_latent_update(const StateMatrix& x, const ModelParams& theta,
                                              const ObservationMatrix& y, const RjConfig& cfg,
                                              const Population& pop, const FixedModel& fixed,
                                              Rng& rng);

/// Production chain with incremental density evaluation.
class RjChain {
 public:
  RjChain(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
          const Population* pop, const FixedModel* fixed, RjConfig cfg);

  const StateMatrix& state() const { return x_; }
  const ModelParams& theta() const { return theta_; }
  void set_theta(const ModelParams& theta);

  /// One attempt at flipping a random individual's initial state.
  bool initial_step(Rng& rng);

  /// One move/add/remove attempt on a random individual.
  bool interior_step(Rng& rng);

 private:
  const Population* pop_;
  const FixedModel* fixed_;
  const ObservationMatrix* y_;
  ModelParams theta_;
  RjConfig cfg_;
  StateMatrix x_;
  CountCache counts_;
  std::vector<double> sus_;
};

}  // namespace rippler
