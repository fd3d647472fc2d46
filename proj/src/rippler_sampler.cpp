#include "rippler/rippler_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace rippler {

DrawMatrix sample_noncentred(const StateMatrix& x, const BoundsLattice& bounds,
                             Rng& rng) {
  DrawMatrix u(x.rows(), x.cols());
  for (int t = 0; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j) {
      const Interval iv = bounds(t, j);
      u(t, j) = rng.uniform(iv.a, iv.b);
    }
  }
  return u;
}

double bounds_complement_sum(const BoundsLattice& bounds) {
  double s = 0.0;
  for (int t = 0; t < bounds.rows(); ++t) {
    for (int j = 0; j < bounds.cols(); ++j) s += bounds(t, j).complement_mass();
  }
  return s;
}

std::pair<DrawMatrix, std::vector<std::pair<int, int>>> select_and_perturb(
    const DrawMatrix& u, const BoundsLattice& bounds, int k_elements, Rng& rng) {
  const int rows = u.rows();
  const int n = u.cols();
  const int cells = rows * n;
  std::vector<double> cum(cells);
  double total = 0.0;
  for (int t = 0; t < rows; ++t) {
    for (int j = 0; j < n; ++j) {
      total += bounds(t, j).complement_mass();
      cum[t * n + j] = total;
    }
  }
  if (!(total > 0.0)) {
    throw NoPerturbableCell("all complement masses are zero");
  }

  DrawMatrix out = u;
  std::vector<std::pair<int, int>> origins;
  origins.reserve(k_elements);
  for (int k = 0; k < k_elements; ++k) {
    const double r = rng.uniform(0.0, total);
    int idx = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
    if (idx >= cells) idx = cells - 1;
    while (idx < cells - 1 && bounds(idx / n, idx % n).complement_mass() <= 0.0) ++idx;
    while (idx > 0 && bounds(idx / n, idx % n).complement_mass() <= 0.0) --idx;
    const int t = idx / n;
    const int j = idx % n;
    const Interval iv = bounds(t, j);
    const double v = rng.uniform(0.0, iv.complement_mass());
    out(t, j) = v < iv.a ? v : v + iv.width();
    origins.emplace_back(t, j);
  }
  return {std::move(out), std::move(origins)};
}

double log_proposal_ratio(const BoundsLattice& current, const BoundsLattice& proposed,
                          int k_elements) {
  const double s_cur = bounds_complement_sum(current);
  const double s_prop = bounds_complement_sum(proposed);
  if (!(s_cur > 0.0) || !(s_prop > 0.0)) {
    throw DegenerateProposal("complement-mass sum is zero");
  }
  return k_elements * (std::log(s_cur) - std::log(s_prop));
}

std::pair<StateMatrix, RipplerStepRecord> rippler_latent_update(
    const StateMatrix& x, const ModelParams& theta, const ObservationMatrix& y,
    const RipplerConfig& cfg, const Population& pop, const FixedModel& fixed,
    Rng& rng) {
  const BoundsLattice bounds = proposal_bounds(x, theta, pop, fixed);
  const DrawMatrix u = sample_noncentred(x, bounds, rng);
  auto [u_star, origins] = select_and_perturb(u, bounds, cfg.n_elements, rng);
  StateMatrix x_star = realise(u_star, theta, pop, fixed);
  const BoundsLattice bounds_star = proposal_bounds(x_star, theta, pop, fixed);

  RipplerStepRecord rec;
  rec.origins = std::move(origins);
  for (int t = 0; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j) {
      if (x_star(t, j) != x(t, j)) ++rec.cells_changed;
    }
  }
  rec.log_acceptance_ratio = observation_log_density(y, x_star, fixed) -
                             observation_log_density(y, x, fixed) +
                             log_proposal_ratio(bounds, bounds_star, cfg.n_elements);
  if (rng.unit() < std::exp(rec.log_acceptance_ratio)) {
    rec.accepted = true;
    return {std::move(x_star), std::move(rec)};
  }
  return {x, std::move(rec)};
}

RipplerChain::RipplerChain(StateMatrix x, const ModelParams& theta,
                           const ObservationMatrix* y, const Population* pop,
                           const FixedModel* fixed)
    : pop_(pop),
      fixed_(fixed),
      y_(y),
      theta_(theta),
      x_(std::move(x)),
      xp_(x_.rows(), x_.cols()),
      bp_(x_.rows(), x_.cols()),
      row_touched_(x_.rows(), 0),
      hc_new_(pop->n_households(), 0) {
  touched_rows_.reserve(x_.rows());
  diff_.reserve(x_.cols());
  diff_next_.reserve(x_.cols());
  rebuild();
}

void RipplerChain::set_theta(const ModelParams& theta) {
  theta_ = theta;
  rebuild();
}

void RipplerChain::rebuild() {
  sus_ = pop_->susceptibility(theta_);
  p_cu_ = fixed_->p_cu();
  bounds_ = proposal_bounds(x_, theta_, *pop_, *fixed_);
  counts_.rebuild(x_, *pop_);
  refresh_masses();
}

double RipplerChain::row_mass_sum(int t) const {
  const Interval* row = bounds_.row(t);
  double s = 0.0;
  for (int j = 0; j < bounds_.cols(); ++j) s += row[j].complement_mass();
  return s;
}

void RipplerChain::refresh_masses() {
  row_mass_.assign(x_.rows(), 0.0);
  for (int t = 0; t < x_.rows(); ++t) row_mass_[t] = row_mass_sum(t);
}

double RipplerChain::complement_sum() const {
  double s = 0.0;
  for (double v : row_mass_) s += v;
  return s;
}

std::pair<int, int> RipplerChain::select_origin(double r) const {
  const int n = x_.cols();
  const int rows = x_.rows();
  int t = 0;
  for (; t < rows - 1; ++t) {
    if (r < row_mass_[t]) break;
    r -= row_mass_[t];
  }
  if (row_mass_[t] <= 0.0) {
    // rounding spilled into a massless row; take the nearest positive one
    int down = t;
    while (down > 0 && row_mass_[down] <= 0.0) --down;
    int up = t;
    while (up < rows - 1 && row_mass_[up] <= 0.0) ++up;
    t = row_mass_[down] > 0.0 ? down : up;
    r = 0.0;
  }
  const Interval* row = bounds_.row(t);
  int last_positive = 0;
  for (int j = 0; j < n; ++j) {
    const double w = row[j].complement_mass();
    if (w > 0.0) {
      last_positive = j;
      if (r < w) return {t, j};
      r -= w;
    }
  }
  return {t, last_positive};
}

double RipplerChain::obs_delta(int t, int j, std::uint8_t new_value) const {
  const TestResult r = y_->at(t, j);
  if (r == TestResult::kNotTested) return 0.0;
  const bool pos = r == TestResult::kPositive;
  return observation_cell_log_factor(pos, new_value != 0, *fixed_) -
         observation_cell_log_factor(pos, x_(t, j) != 0, *fixed_);
}

RipplerStepRecord RipplerChain::step(Rng& rng, int k_elements) {
  const int n = x_.cols();
  const int n_rows = x_.rows();
  const double total = complement_sum();
  if (!(total > 0.0)) throw NoPerturbableCell("no cell has positive complement mass");

  RipplerStepRecord rec;
  struct Origin {
    int t, j;
    double u;
  };
  std::vector<Origin> origins;
  origins.reserve(k_elements);
  for (int k = 0; k < k_elements; ++k) {
    const auto [t, j] = select_origin(rng.uniform(0.0, total));
    const Interval iv = bounds_(t, j);
    const double v = rng.uniform(0.0, iv.complement_mass());
    const double u = v < iv.a ? v : v + iv.width();
    rec.origins.emplace_back(t, j);
    bool dup = false;
    for (Origin& o : origins) {
      if (o.t == t && o.j == j) {
        o.u = u;  // later resample wins
        dup = true;
        break;
      }
    }
    if (!dup) origins.push_back({t, j, u});
  }
  std::sort(origins.begin(), origins.end(), [](const Origin& a, const Origin& b) {
    return a.t != b.t ? a.t < b.t : a.j < b.j;
  });

  touched_rows_.clear();
  diff_.clear();
  double dmass = 0.0;
  double dobs = 0.0;
  int cells_changed = 0;
  std::size_t next_origin = 0;
  const double dt = fixed_->dt;

  int t = origins.front().t;
  while (t < n_rows) {
    const bool origin_row = next_origin < origins.size() && origins[next_origin].t == t;
    if (diff_.empty() && !origin_row) {
      if (next_origin >= origins.size()) break;  // ripple died out
      t = origins[next_origin].t;
      continue;
    }

    std::copy_n(x_.row(t), n, xp_.row(t));
    std::copy_n(bounds_.row(t), n, bp_.row(t));
    row_touched_[t] = 1;
    touched_rows_.push_back(t);

    const std::size_t o_begin = next_origin;
    while (next_origin < origins.size() && origins[next_origin].t == t) ++next_origin;
    const std::size_t o_end = next_origin;

    diff_next_.clear();
    auto note_cell = [&](int j, std::uint8_t nv, const Interval& nb) {
      const Interval ob = bounds_(t, j);
      if (nb.a != ob.a || nb.b != ob.b) {
        bp_(t, j) = nb;
        dmass += nb.complement_mass() - ob.complement_mass();
      }
      if (nv != x_(t, j)) {
        xp_(t, j) = nv;
        diff_next_.push_back(j);
        ++cells_changed;
        dobs += obs_delta(t, j, nv);
      }
    };

    if (t == 0) {
      for (std::size_t k = o_begin; k < o_end; ++k) {
        const int j = origins[k].j;
        const std::uint8_t nv = origins[k].u < fixed_->p0 ? 1 : 0;
        note_cell(j, nv, nv ? Interval{0.0, fixed_->p0} : Interval{fixed_->p0, 1.0});
      }
    } else if (diff_.empty()) {
      // light row: upstream unchanged, only origin cells re-evaluated
      for (std::size_t k = o_begin; k < o_end; ++k) {
        const int j = origins[k].j;
        const std::uint8_t prev = x_(t - 1, j);
        std::uint8_t nv;
        Interval nb;
        if (prev) {
          nv = origins[k].u < p_cu_ ? 0 : 1;
          nb = nv ? Interval{p_cu_, 1.0} : Interval{0.0, p_cu_};
        } else {
          const double p_uc = x_(t, j) ? bounds_(t, j).b : bounds_(t, j).a;
          nv = origins[k].u < p_uc ? 1 : 0;
          nb = nv ? Interval{0.0, p_uc} : Interval{p_uc, 1.0};
        }
        note_cell(j, nv, nb);
      }
    } else {
      // full row: the previous row differs somewhere, pressures may move
      const std::uint8_t* po = x_.row(t - 1);
      const std::uint8_t* pn = row_touched_[t - 1] ? xp_.row(t - 1) : x_.row(t - 1);
      const int* hc_old = counts_.house.row(t - 1);
      std::copy_n(hc_old, pop_->n_households(), hc_new_.data());
      int cnt_new = counts_.colonised[t - 1];
      for (int dj : diff_) {
        const int d = pn[dj] ? 1 : -1;
        cnt_new += d;
        hc_new_[pop_->household(dj)] += d;
      }
      const bool global_changed = cnt_new != counts_.colonised[t - 1];
      const double season = seasonal_modifier(static_cast<double>(t) - 1.0, *fixed_);
      const PressureTerms pt_new = pressure_terms(theta_, season, cnt_new, n);

      auto origin_at = [&](int j, double& u) {
        for (std::size_t k = o_begin; k < o_end; ++k) {
          if (origins[k].j == j) {
            u = origins[k].u;
            return true;
          }
        }
        return false;
      };

      for (int j = 0; j < n; ++j) {
        double u = 0.0;
        const bool orig = origin_at(j, u);
        const std::uint8_t prev_o = po[j];
        const std::uint8_t prev_n = pn[j];
        const std::uint8_t old = x_(t, j);
        const int house = pop_->household(j);
        if (!orig && prev_o == prev_n) {
          if (prev_n) continue;  // de-colonisation threshold never moves
          const int hco = hc_old[house] - prev_o;
          const int hcn = hc_new_[house] - prev_n;
          if (!global_changed && hco == hcn) continue;  // pressure identical
          const double p_new = event_prob(pressure_cell(sus_[j], pt_new, hcn) * dt);
          const double p_old = old ? bounds_(t, j).b : bounds_(t, j).a;
          std::uint8_t nv = old;
          // a draw is needed only when the threshold moved into the cell's
          // interval: upward past a stay-uncolonised draw, or downward past
          // a colonisation draw
          if (old ? p_new < p_old : p_new > p_old) {
            const double uu = rng.uniform(bounds_(t, j).a, bounds_(t, j).b);
            nv = uu < p_new ? 1 : 0;
          }
          if (p_new != p_old || nv != old) {
            note_cell(j, nv, nv ? Interval{0.0, p_new} : Interval{p_new, 1.0});
          }
          continue;
        }
        if (!orig) u = rng.uniform(bounds_(t, j).a, bounds_(t, j).b);
        std::uint8_t nv;
        Interval nb;
        if (prev_n) {
          nv = u < p_cu_ ? 0 : 1;
          nb = nv ? Interval{p_cu_, 1.0} : Interval{0.0, p_cu_};
        } else {
          const int hcn = hc_new_[house] - prev_n;
          const double p_new = event_prob(pressure_cell(sus_[j], pt_new, hcn) * dt);
          nv = u < p_new ? 1 : 0;
          nb = nv ? Interval{0.0, p_new} : Interval{p_new, 1.0};
        }
        note_cell(j, nv, nb);
      }
    }

    diff_.swap(diff_next_);
    ++t;
  }

  const double sum_new = total + dmass;
  if (!(sum_new > 0.0)) throw DegenerateProposal("proposed complement-mass sum is zero");
  const double log_prop = k_elements * (std::log(total) - std::log(sum_new));
  const double log_ratio = dobs + log_prop;
  rec.cells_changed = cells_changed;
  rec.log_acceptance_ratio = log_ratio;

  if (capture_.enabled) {
    capture_.valid = true;
    capture_.log_obs_delta = dobs;
    capture_.log_prop_ratio = log_prop;
    capture_.sum_current = total;
    capture_.sum_proposed = sum_new;
    capture_.x_proposed = x_;
    for (int tr : touched_rows_) {
      std::copy_n(xp_.row(tr), n, capture_.x_proposed.row(tr));
    }
  }

  if (rng.unit() < std::exp(log_ratio)) {
    rec.accepted = true;
    for (int tr : touched_rows_) {
      std::copy_n(xp_.row(tr), n, x_.row(tr));
      std::copy_n(bp_.row(tr), n, bounds_.row(tr));
      int c = 0;
      int* hrow = counts_.house.row(tr);
      std::fill_n(hrow, pop_->n_households(), 0);
      for (int j = 0; j < n; ++j) {
        if (x_(tr, j)) {
          ++c;
          ++hrow[pop_->household(j)];
        }
      }
      counts_.colonised[tr] = c;
      row_mass_[tr] = row_mass_sum(tr);
    }
  }
  for (int tr : touched_rows_) row_touched_[tr] = 0;
  return rec;
}

}  // namespace rippler
