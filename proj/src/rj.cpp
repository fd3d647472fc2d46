#include "rippler/rj.hpp"

#include <algorithm>
#include <cmath>

namespace rippler {

std::vector<int> events_of_column(const StateMatrix& x, int j) {
  std::vector<int> ev;
  for (int t = 1; t < x.rows(); ++t) {
    if (x(t, j) != x(t - 1, j)) ev.push_back(t);
  }
  return ev;
}

std::vector<std::uint8_t> column_from_events(std::uint8_t x0, const std::vector<int>& events,
                                             int n_steps) {
  std::vector<std::uint8_t> col(n_steps + 1, x0);
  std::uint8_t v = x0;
  std::size_t e = 0;
  for (int t = 1; t <= n_steps; ++t) {
    if (e < events.size() && events[e] == t) {
      v = 1 - v;
      ++e;
    }
    col[t] = v;
  }
  return col;
}

std::vector<int> rj_move_targets(const std::vector<int>& ev, int e, int max_block,
                                 int n_steps) {
  const int E = static_cast<int>(ev.size());
  const int t_e = ev[e - 1];
  const int t_prev = e == 1 ? 0 : ev[e - 2];
  const int t_next = e == E ? n_steps + 1 : ev[e];
  const int lo = std::max(t_prev + 1, t_e - max_block);
  const int hi = std::min(t_next - 1, t_e + max_block);
  std::vector<int> h;
  for (int t = lo; t <= hi; ++t) {
    if (t != t_e) h.push_back(t);
  }
  return h;
}

namespace {

std::vector<int> add_sites_of_column(const std::uint8_t* col, int n_steps) {
  std::vector<int> a;
  for (int t = 1; t < n_steps; ++t) {
    if (col[t - 1] == col[t] && col[t] == col[t + 1]) a.push_back(t);
  }
  if (n_steps >= 1 && col[n_steps - 1] == col[n_steps]) a.push_back(n_steps);
  return a;
}

}  // namespace

std::vector<int> rj_add_sites(const StateMatrix& x, int j) {
  std::vector<std::uint8_t> col(x.rows());
  for (int t = 0; t < x.rows(); ++t) col[t] = x(t, j);
  return add_sites_of_column(col.data(), x.rows() - 1);
}

std::vector<int> rj_add_partners(const std::vector<int>& ev, int t_a, int max_block,
                                 int n_steps) {
  int t_next = n_steps + 1;
  for (int t : ev) {
    if (t > t_a) {
      t_next = t;
      break;
    }
  }
  // a real partner must stop short of the next event; the virtual partner
  // T+1 is available when the remaining horizon is unbroken
  const int hi = t_next == n_steps + 1 ? std::min(t_a + max_block, n_steps + 1)
                                       : std::min(t_a + max_block, t_next - 1);
  std::vector<int> b;
  for (int t = t_a + 1; t <= hi; ++t) b.push_back(t);
  return b;
}

std::vector<int> rj_remove_pairs(const std::vector<int>& ev, int max_block, int n_steps) {
  std::vector<int> r;
  const int n_events = static_cast<int>(ev.size());
  for (int e = 1; e < n_events; ++e) {
    if (ev[e - 1] + max_block >= ev[e]) r.push_back(e);
  }
  if (n_events >= 1 && ev[n_events - 1] + max_block >= n_steps + 1) {
    r.push_back(n_events);
  }
  return r;
}

std::optional<RjProposal> rj_propose(const StateMatrix& x, int j, RjKind kind,
                                     int max_block, Rng& rng) {
  const int n_steps = x.rows() - 1;
  const std::vector<int> ev = events_of_column(x, j);
  RjProposal p;
  p.kind = kind;
  p.individual = j;

  switch (kind) {
    case RjKind::kMove: {
      const int E = static_cast<int>(ev.size());
      if (E == 0) return std::nullopt;
      const int e = 1 + static_cast<int>(rng.below(E));
      const std::vector<int> h = rj_move_targets(ev, e, max_block, n_steps);
      if (h.empty()) return std::nullopt;
      const int t_star = h[rng.below(h.size())];
      const int t_e = ev[e - 1];
      p.lo = std::min(t_e, t_star);
      p.hi = std::max(t_e, t_star) - 1;
      std::vector<int> ev_new = ev;
      ev_new[e - 1] = t_star;  // neighbours bound the target, order is kept
      const std::vector<int> h_rev = rj_move_targets(ev_new, e, max_block, n_steps);
      p.log_q = std::log(static_cast<double>(h.size())) -
                std::log(static_cast<double>(h_rev.size()));
      return p;
    }
    case RjKind::kAdd: {
      const std::vector<int> a = rj_add_sites(x, j);
      if (a.empty()) return std::nullopt;
      const int t_a = a[rng.below(a.size())];
      const std::vector<int> b = rj_add_partners(ev, t_a, max_block, n_steps);
      const int t_b = b[rng.below(b.size())];
      p.lo = t_a;
      p.hi = t_b - 1;  // t_b = T+1 flips through the last row
      std::vector<int> ev_new = ev;
      ev_new.insert(std::lower_bound(ev_new.begin(), ev_new.end(), t_a), t_a);
      if (t_b <= n_steps) {
        ev_new.insert(std::lower_bound(ev_new.begin(), ev_new.end(), t_b), t_b);
      }
      const std::vector<int> r_rev = rj_remove_pairs(ev_new, max_block, n_steps);
      p.log_q = std::log(static_cast<double>(a.size())) +
                std::log(static_cast<double>(b.size())) -
                std::log(static_cast<double>(r_rev.size()));
      return p;
    }
    case RjKind::kRemove: {
      const std::vector<int> r = rj_remove_pairs(ev, max_block, n_steps);
      if (r.empty()) return std::nullopt;
      const int e = r[rng.below(r.size())];
      const bool at_horizon = e == static_cast<int>(ev.size());
      p.lo = ev[e - 1];
      p.hi = at_horizon ? n_steps : ev[e] - 1;
      std::vector<int> ev_new = ev;
      ev_new.erase(ev_new.begin() + (e - 1), ev_new.begin() + (at_horizon ? e : e + 1));
      // reverse move: add back at t_a = old t_e with the old partner
      const std::vector<std::uint8_t> col = column_from_events(x(0, j), ev_new, n_steps);
      const std::vector<int> a_rev = add_sites_of_column(col.data(), n_steps);
      const std::vector<int> b_rev = rj_add_partners(ev_new, p.lo, max_block, n_steps);
      p.log_q = std::log(static_cast<double>(r.size())) -
                std::log(static_cast<double>(a_rev.size())) -
                std::log(static_cast<double>(b_rev.size()));
      return p;
    }
  }
  return std::nullopt;
}

namespace {

double own_transition_log_prob(std::uint8_t prev, std::uint8_t cur, double lambda_dt,
                               double gamma_dt) {
  if (prev) return cur ? log_stay_prob(gamma_dt) : log_event_prob(gamma_dt);
  return cur ? log_event_prob(lambda_dt) : log_stay_prob(lambda_dt);
}

/// Pressure on individual j at step t from the others' states in row t-1.
double own_pressure(const StateMatrix& x, int j, int t, const ModelParams& theta,
                    const Population& pop, const FixedModel& fixed,
                    const CountCache& counts, const std::vector<double>& sus) {
  const int cnt = counts.colonised[t - 1] - x(t - 1, j);
  const int hc = counts.house(t - 1, pop.household(j)) - x(t - 1, j);
  const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
  return pressure_cell(sus[j], pressure_terms(theta, season, cnt, pop.n()), hc);
}

/// Change of every other individual's transition term into t+1 when
/// x_{t,j} flips to 1 - x_{t,j}.
double others_delta(const StateMatrix& x, int j, int t, const ModelParams& theta,
                    const Population& pop, const FixedModel& fixed,
                    const CountCache& counts, const std::vector<double>& sus) {
  const int n = pop.n();
  const int d = x(t, j) ? -1 : 1;
  const int cnt_old = counts.colonised[t];
  const int cnt_new = cnt_old + d;
  const double season = seasonal_modifier(static_cast<double>(t), fixed);
  const PressureTerms pt_old = pressure_terms(theta, season, cnt_old, n);
  const PressureTerms pt_new = pressure_terms(theta, season, cnt_new, n);
  const int h_j = pop.household(j);
  double delta = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == j || x(t, i)) continue;
    // x(t,i) = 0, so the household count already excludes i itself
    const int hc_old = counts.house(t, pop.household(i));
    const int hc_new = hc_old + (pop.household(i) == h_j ? d : 0);
    const double lam_old = pressure_cell(sus[i], pt_old, hc_old);
    const double lam_new = pressure_cell(sus[i], pt_new, hc_new);
    if (x(t + 1, i)) {
      delta += log_event_prob(lam_new * fixed.dt) - log_event_prob(lam_old * fixed.dt);
    } else {
      delta += (lam_old - lam_new) * fixed.dt;
    }
  }
  return delta;
}

double obs_flip_delta(const ObservationMatrix& y, const StateMatrix& x, int t, int j,
                      const FixedModel& fixed) {
  const TestResult r = y.at(t, j);
  if (r == TestResult::kNotTested) return 0.0;
  const bool pos = r == TestResult::kPositive;
  return observation_cell_log_factor(pos, x(t, j) == 0, fixed) -
         observation_cell_log_factor(pos, x(t, j) != 0, fixed);
}

}  // namespace

double rj_log_target_delta(const StateMatrix& x, int j, int lo, int hi,
                           const ObservationMatrix& y, const ModelParams& theta,
                           const Population& pop, const FixedModel& fixed,
                           const CountCache& counts, const std::vector<double>& sus) {
  const int n_steps = x.rows() - 1;
  const double gamma_dt = fixed.gamma * fixed.dt;
  double delta = 0.0;

  // own transition terms into each t in lo..hi+1; rows below lo are intact
  for (int t = lo; t <= std::min(hi + 1, n_steps); ++t) {
    const std::uint8_t prev_old = x(t - 1, j);
    const std::uint8_t cur_old = x(t, j);
    const std::uint8_t prev_new = (t - 1 >= lo && t - 1 <= hi) ? 1 - prev_old : prev_old;
    const std::uint8_t cur_new = (t >= lo && t <= hi) ? 1 - cur_old : cur_old;
    const double lam_dt = own_pressure(x, j, t, theta, pop, fixed, counts, sus) * fixed.dt;
    delta += own_transition_log_prob(prev_new, cur_new, lam_dt, gamma_dt) -
             own_transition_log_prob(prev_old, cur_old, lam_dt, gamma_dt);
  }
  // pressure terms of everyone else for each flipped row
  for (int t = lo; t <= hi; ++t) {
    if (t + 1 <= n_steps) {
      delta += others_delta(x, j, t, theta, pop, fixed, counts, sus);
    }
    delta += obs_flip_delta(y, x, t, j, fixed);
  }
  return delta;
}

double rj_initial_flip_delta(const StateMatrix& x, int j, const ObservationMatrix& y,
                             const ModelParams& theta, const Population& pop,
                             const FixedModel& fixed, const CountCache& counts,
                             const std::vector<double>& sus) {
  const double lp1 = std::log(fixed.p0);
  const double lp0 = std::log1p(-fixed.p0);
  double delta = x(0, j) ? lp0 - lp1 : lp1 - lp0;
  if (x.rows() > 1) {
    const std::uint8_t cur = x(1, j);
    const std::uint8_t prev_old = x(0, j);
    const double gamma_dt = fixed.gamma * fixed.dt;
    const double lam_dt = own_pressure(x, j, 1, theta, pop, fixed, counts, sus) * fixed.dt;
    delta += own_transition_log_prob(1 - prev_old, cur, lam_dt, gamma_dt) -
             own_transition_log_prob(prev_old, cur, lam_dt, gamma_dt);
    delta += others_delta(x, j, 0, theta, pop, fixed, counts, sus);
  }
  delta += obs_flip_delta(y, x, 0, j, fixed);
  return delta;
}

std::pair<StateMatrix, bool> rj_flip_initial(const StateMatrix& x, const ModelParams& theta,
                                             const ObservationMatrix& y, const Population& pop,
                                             const FixedModel& fixed, Rng& rng) {
  const int j = static_cast<int>(rng.below(x.cols()));
  StateMatrix x_star = x;
  x_star(0, j) = 1 - x_star(0, j);
  const double lp_new = transmission_log_density(x_star, theta, pop, fixed) +
                        observation_log_density(y, x_star, fixed);
  const double lp_old = transmission_log_density(x, theta, pop, fixed) +
                        observation_log_density(y, x, fixed);
  const double log_ratio = lp_new == kLogZero ? kLogZero : lp_new - lp_old;
  if (rng.unit() < std::exp(log_ratio)) return {std::move(x_star), true};
  return {x, false};
}

std::pair<StateMatrix, bool> rj_latent_update(const StateMatrix& x, const ModelParams& theta,
                                              const ObservationMatrix& y, const RjConfig& cfg,
                                              const Population& pop, const FixedModel& fixed,
                                              Rng& rng) {
  const int j = static_cast<int>(rng.below(x.cols()));
  const RjKind kind = static_cast<RjKind>(rng.below(3));
  const std::optional<RjProposal> prop = rj_propose(x, j, kind, cfg.max_block, rng);
  if (!prop) return {x, false};
  StateMatrix x_star = x;
  for (int t = prop->lo; t <= prop->hi; ++t) x_star(t, j) = 1 - x_star(t, j);
  const double lp_new = transmission_log_density(x_star, theta, pop, fixed) +
                        observation_log_density(y, x_star, fixed);
  const double lp_old = transmission_log_density(x, theta, pop, fixed) +
                        observation_log_density(y, x, fixed);
  const double log_ratio =
      lp_new == kLogZero ? kLogZero : lp_new - lp_old + prop->log_q;
  if (rng.unit() < std::exp(log_ratio)) return {std::move(x_star), true};
  return {x, false};
}

RjChain::RjChain(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
                 const Population* pop, const FixedModel* fixed, RjConfig cfg)
    : pop_(pop), fixed_(fixed), y_(y), theta_(theta), cfg_(cfg), x_(std::move(x)) {
  counts_.rebuild(x_, *pop_);
  sus_ = pop_->susceptibility(theta_);
}

void RjChain::set_theta(const ModelParams& theta) {
  theta_ = theta;
  sus_ = pop_->susceptibility(theta_);
}

bool RjChain::initial_step(Rng& rng) {
  const int j = static_cast<int>(rng.below(x_.cols()));
  const double delta =
      rj_initial_flip_delta(x_, j, *y_, theta_, *pop_, *fixed_, counts_, sus_);
  if (rng.unit() < std::exp(delta)) {
    const std::uint8_t nv = 1 - x_(0, j);
    x_(0, j) = nv;
    counts_.apply_flip(0, j, nv, *pop_);
    return true;
  }
  return false;
}

bool RjChain::interior_step(Rng& rng) {
  const int j = static_cast<int>(rng.below(x_.cols()));
  const RjKind kind = static_cast<RjKind>(rng.below(3));
  const std::optional<RjProposal> prop = rj_propose(x_, j, kind, cfg_.max_block, rng);
  if (!prop) return false;
  const double delta =
      rj_log_target_delta(x_, j, prop->lo, prop->hi, *y_, theta_, *pop_, *fixed_,
                          counts_, sus_);
  if (rng.unit() < std::exp(delta + prop->log_q)) {
    for (int t = prop->lo; t <= prop->hi; ++t) {
      const std::uint8_t nv = 1 - x_(t, j);
      x_(t, j) = nv;
      counts_.apply_flip(t, j, nv, *pop_);
    }
    return true;
  }
  return false;
}

}  // namespace rippler
