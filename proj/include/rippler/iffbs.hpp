#pragma once

#include <vector>

#include "rippler/model.hpp"

namespace rippler {

/// P(x_cur | x_prev) for one individual over one step.
double iffbs_transition_prob(int x_prev, int x_cur, double lambda, const FixedModel& fixed);

/// Normalised filtered probabilities P(x_{t,j} = 1 | ...) for t = 0..T.
struct ForwardTable {
  std::vector<double> p1;
};

/// Forward pass for individual j with every other individual's transition
/// factor kept explicitly (the slow, literal route; factors that do not
/// involve x_{t,j} cancel in the normalisation). Accumulates each step in
/// linear space and falls back to log space if the unnormalised pair
/// underflows.
ForwardTable iffbs_forward(int j, const StateMatrix& x, const ModelParams& theta,
                           const ObservationMatrix& y, const Population& pop,
                           const FixedModel& fixed);

/// Gibbs draw of column j from its full conditional; every other column is
/// returned bit-identical.
StateMatrix iffbs_update(const StateMatrix& x, const ModelParams& theta,
                         const ObservationMatrix& y, int j, const Population& pop,
                         const FixedModel& fixed, Rng& rng);

/// Distribution over the 2^(T+1) paths of individual j implied by the
/// forward table and the backward kernels; path bit t is x_{t,j}.
std::vector<double> iffbs_path_distribution(const ForwardTable& fwd, int j,
                                            const StateMatrix& x, const ModelParams& theta,
                                            const Population& pop, const FixedModel& fixed);

/// Production chain; keeps row counts so the forward pass only spends an
/// O(N) accumulation plus a handful of transcendentals per time-step, and
/// drops the others' factors that cancel in the normalisation.
class IffbsChain {
 public:
  IffbsChain(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
             const Population* pop, const FixedModel* fixed);

  const StateMatrix& state() const { return x_; }
  const ModelParams& theta() const { return theta_; }
  void set_theta(const ModelParams& theta);

  /// Resample the column of a uniformly chosen individual.
  int step(Rng& rng);

  /// Resample a specific column.
  void update_column(int j, Rng& rng);

  /// Optimised forward table for tests against the literal route.
  ForwardTable forward_table(int j) const;

  /// Cells changed by the most recent update.
  int last_changed() const { return last_changed_; }

 private:
  void fill_forward(int j, std::vector<double>& p1) const;
  double own_lambda(int j, int t) const;

  const Population* pop_;
  const FixedModel* fixed_;
  const ObservationMatrix* y_;
  ModelParams theta_;
  StateMatrix x_;
  CountCache counts_;
  std::vector<double> sus_;
  int last_changed_ = 0;
  mutable std::vector<double> p1_;
};

}  // namespace rippler
