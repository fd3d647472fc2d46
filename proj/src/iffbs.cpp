#include "rippler/iffbs.hpp"

#include <algorithm>
#include <cmath>

namespace rippler {

double iffbs_transition_prob(int x_prev, int x_cur, double lambda, const FixedModel& fixed) {
  if (x_prev == 0) {
    const double p = event_prob(lambda * fixed.dt);
    return x_cur ? p : 1.0 - p;
  }
  const double p = event_prob(fixed.gamma * fixed.dt);
  return x_cur ? 1.0 - p : p;
}

namespace {

double obs_log_factor_or_zero(const ObservationMatrix& y, int t, int j, bool colonised,
                              const FixedModel& fixed) {
  const TestResult r = y.at(t, j);
  if (r == TestResult::kNotTested) return 0.0;
  return observation_cell_log_factor(r == TestResult::kPositive, colonised, fixed);
}

/// Pressure vector at step t+1 with x_{t,j} forced to `cand`.
std::vector<double> pressures_with_candidate(const StateMatrix& x, int t, int j, int cand,
                                             const ModelParams& theta, const Population& pop,
                                             const FixedModel& fixed) {
  std::vector<std::uint8_t> row(x.row(t), x.row(t) + x.cols());
  row[j] = static_cast<std::uint8_t>(cand);
  return colonisation_pressure(t + 1, row.data(), theta, pop, fixed);
}

}  // namespace

ForwardTable iffbs_forward(int j, const StateMatrix& x, const ModelParams& theta,
                           const ObservationMatrix& y, const Population& pop,
                           const FixedModel& fixed) {
  const int n = x.cols();
  const int n_steps = x.rows() - 1;
  ForwardTable fwd;
  fwd.p1.assign(n_steps + 1, 0.0);

  double f0 = 0.0, f1 = 0.0;  // previous filtered pair
  for (int t = 0; t <= n_steps; ++t) {
    double lw[2];
    for (int cand = 0; cand < 2; ++cand) {
      double lp = 0.0;
      if (t == 0) {
        lp += cand ? std::log(fixed.p0) : std::log1p(-fixed.p0);
      } else {
        const std::vector<double> lam_prev =
            pressures_with_candidate(x, t - 1, j, 0, theta, pop, fixed);
        const double r = iffbs_transition_prob(0, cand, lam_prev[j], fixed) * f0 +
                         iffbs_transition_prob(1, cand, lam_prev[j], fixed) * f1;
        lp += r > 0.0 ? std::log(r) : kLogZero;
      }
      lp += obs_log_factor_or_zero(y, t, j, cand != 0, fixed);
      if (t < n_steps) {
        // every other individual's transition into t+1, literally
        const std::vector<double> lam =
            pressures_with_candidate(x, t, j, cand, theta, pop, fixed);
        double linear = 1.0;
        bool underflow = false;
        for (int i = 0; i < n && !underflow; ++i) {
          if (i == j) continue;
          linear *= iffbs_transition_prob(x(t, i), x(t + 1, i), lam[i], fixed);
          if (linear < 1e-290) underflow = true;
        }
        if (!underflow) {
          lp += linear > 0.0 ? std::log(linear) : kLogZero;
        } else {
          for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const double p = iffbs_transition_prob(x(t, i), x(t + 1, i), lam[i], fixed);
            lp += p > 0.0 ? std::log(p) : kLogZero;
          }
        }
      }
      lw[cand] = lp;
    }
    const double m = std::max(lw[0], lw[1]);
    if (m == kLogZero) {
      throw InvalidState("forward filter hit an impossible configuration");
    }
    const double e0 = std::exp(lw[0] - m);
    const double e1 = std::exp(lw[1] - m);
    f1 = e1 / (e0 + e1);
    f0 = 1.0 - f1;
    fwd.p1[t] = f1;
  }
  return fwd;
}

namespace {

/// Backward kernel P(x_t = 1 | x_{t+1} = x_next) from the filtered pair and
/// the individual's own pressure at t+1.
double backward_p1(double p1_t, int x_next, double lambda, const FixedModel& fixed) {
  const double q0 = iffbs_transition_prob(0, x_next, lambda, fixed) * (1.0 - p1_t);
  const double q1 = iffbs_transition_prob(1, x_next, lambda, fixed) * p1_t;
  return q1 / (q0 + q1);
}

}  // namespace

StateMatrix iffbs_update(const StateMatrix& x, const ModelParams& theta,
                         const ObservationMatrix& y, int j, const Population& pop,
                         const FixedModel& fixed, Rng& rng) {
  const int n_steps = x.rows() - 1;
  const ForwardTable fwd = iffbs_forward(j, x, theta, y, pop, fixed);
  StateMatrix out = x;
  out(n_steps, j) = rng.unit() < fwd.p1[n_steps] ? 1 : 0;
  for (int t = n_steps - 1; t >= 0; --t) {
    const std::vector<double> lam = pressures_with_candidate(x, t, j, 0, theta, pop, fixed);
    const double p = backward_p1(fwd.p1[t], out(t + 1, j), lam[j], fixed);
    out(t, j) = rng.unit() < p ? 1 : 0;
  }
  return out;
}

std::vector<double> iffbs_path_distribution(const ForwardTable& fwd, int j,
                                            const StateMatrix& x, const ModelParams& theta,
                                            const Population& pop, const FixedModel& fixed) {
  const int n_steps = x.rows() - 1;
  std::vector<double> own_lambda(n_steps + 1, 0.0);
  for (int t = 0; t < n_steps; ++t) {
    const std::vector<double> lam = pressures_with_candidate(x, t, j, 0, theta, pop, fixed);
    own_lambda[t + 1] = lam[j];
  }
  const int n_paths = 1 << (n_steps + 1);
  std::vector<double> prob(n_paths, 0.0);
  for (int path = 0; path < n_paths; ++path) {
    double p = (path >> n_steps) & 1 ? fwd.p1[n_steps] : 1.0 - fwd.p1[n_steps];
    for (int t = n_steps - 1; t >= 0; --t) {
      const int x_next = (path >> (t + 1)) & 1;
      const double b1 = backward_p1(fwd.p1[t], x_next, own_lambda[t + 1], fixed);
      p *= (path >> t) & 1 ? b1 : 1.0 - b1;
    }
    prob[path] = p;
  }
  return prob;
}

IffbsChain::IffbsChain(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
                       const Population* pop, const FixedModel* fixed)
    : pop_(pop), fixed_(fixed), y_(y), theta_(theta), x_(std::move(x)) {
  counts_.rebuild(x_, *pop_);
  sus_ = pop_->susceptibility(theta_);
  p1_.assign(x_.rows(), 0.0);
}

void IffbsChain::set_theta(const ModelParams& theta) {
  theta_ = theta;
  sus_ = pop_->susceptibility(theta_);
}

double IffbsChain::own_lambda(int j, int t) const {
  const int cnt = counts_.colonised[t - 1] - x_(t - 1, j);
  const int hc = counts_.house(t - 1, pop_->household(j)) - x_(t - 1, j);
  const double season = seasonal_modifier(static_cast<double>(t) - 1.0, *fixed_);
  return pressure_cell(sus_[j], pressure_terms(theta_, season, cnt, pop_->n()), hc);
}

void IffbsChain::fill_forward(int j, std::vector<double>& p1) const {
  const int n = x_.cols();
  const int n_steps = x_.rows() - 1;
  const double dt = fixed_->dt;
  const double p_cu = fixed_->p_cu();
  const double stay_c = 1.0 - p_cu;
  const int h_j = pop_->household(j);

  double f0 = 0.0, f1 = 0.0;
  for (int t = 0; t <= n_steps; ++t) {
    double lw0, lw1;
    if (t == 0) {
      lw0 = std::log1p(-fixed_->p0);
      lw1 = std::log(fixed_->p0);
    } else {
      const double lam_dt = own_lambda(j, t) * dt;
      const double p_uc = event_prob(lam_dt);
      const double r0 = (1.0 - p_uc) * f0 + p_cu * f1;
      const double r1 = p_uc * f0 + stay_c * f1;
      lw0 = r0 > 0.0 ? std::log(r0) : kLogZero;
      lw1 = r1 > 0.0 ? std::log(r1) : kLogZero;
    }
    const TestResult r = y_->at(t, j);
    if (r != TestResult::kNotTested) {
      const bool pos = r == TestResult::kPositive;
      lw0 += observation_cell_log_factor(pos, false, *fixed_);
      lw1 += observation_cell_log_factor(pos, true, *fixed_);
    }
    if (t < n_steps) {
      // others' transitions into t+1; only the factors that depend on
      // x_{t,j} survive the normalisation (uncolonised others)
      const int base = counts_.colonised[t] - x_(t, j);
      const double season = seasonal_modifier(static_cast<double>(t), *fixed_);
      const PressureTerms pt0 = pressure_terms(theta_, season, base, n);
      const PressureTerms pt1 = pressure_terms(theta_, season, base + 1, n);
      double a0 = 0.0, a1 = 0.0;  // hazard sums over uncolonised stayers
      double b0 = 0.0, b1 = 0.0;  // log event terms over new colonisations
      for (int i = 0; i < n; ++i) {
        if (i == j || x_(t, i)) continue;
        const int h_i = pop_->household(i);
        const int same = h_i == h_j ? 1 : 0;
        const int hc = counts_.house(t, h_i) - same * x_(t, j);
        const double lam0 = pressure_cell(sus_[i], pt0, hc);
        const double lam1 = pressure_cell(sus_[i], pt1, hc + same);
        if (x_(t + 1, i)) {
          b0 += log_event_prob(lam0 * dt);
          b1 += log_event_prob(lam1 * dt);
        } else {
          a0 += lam0;
          a1 += lam1;
        }
      }
      lw0 += -a0 * dt + b0;
      lw1 += -a1 * dt + b1;
    }
    const double m = std::max(lw0, lw1);
    if (m == kLogZero) {
      throw InvalidState("forward filter hit an impossible configuration");
    }
    const double e0 = std::exp(lw0 - m);
    const double e1 = std::exp(lw1 - m);
    f1 = e1 / (e0 + e1);
    f0 = 1.0 - f1;
    p1[t] = f1;
  }
}

ForwardTable IffbsChain::forward_table(int j) const {
  ForwardTable fwd;
  fwd.p1.assign(x_.rows(), 0.0);
  fill_forward(j, fwd.p1);
  return fwd;
}

void IffbsChain::update_column(int j, Rng& rng) {
  const int n_steps = x_.rows() - 1;
  fill_forward(j, p1_);

  last_changed_ = 0;
  int next = rng.unit() < p1_[n_steps] ? 1 : 0;
  // sample backwards, deferring writes so the counts stay consistent
  // while own_lambda still reads the pre-update column
  std::vector<std::uint8_t> col(n_steps + 1);
  col[n_steps] = static_cast<std::uint8_t>(next);
  for (int t = n_steps - 1; t >= 0; --t) {
    const double p = backward_p1(p1_[t], next, own_lambda(j, t + 1), *fixed_);
    next = rng.unit() < p ? 1 : 0;
    col[t] = static_cast<std::uint8_t>(next);
  }
  for (int t = 0; t <= n_steps; ++t) {
    if (col[t] != x_(t, j)) {
      x_(t, j) = col[t];
      counts_.apply_flip(t, j, col[t], *pop_);
      ++last_changed_;
    }
  }
}

int IffbsChain::step(Rng& rng) {
  const int j = static_cast<int>(rng.below(x_.cols()));
  update_column(j, rng);
  return j;
}

}  // namespace rippler
