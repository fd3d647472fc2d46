#include "rippler/model.hpp"

#include <algorithm>
#include <cmath>

namespace rippler {

Population::Population(std::vector<int> household_of, std::vector<double> age_centred,
                       std::vector<double> sex_centred)
    : household_of_(std::move(household_of)),
      age_c_(std::move(age_centred)),
      sex_c_(std::move(sex_centred)) {
  int n_h = 0;
  for (int h : household_of_) n_h = std::max(n_h, h + 1);
  members_.resize(n_h);
  for (int j = 0; j < n(); ++j) members_[household_of_[j]].push_back(j);
}

std::vector<double> Population::susceptibility(const ModelParams& theta) const {
  std::vector<double> sus(n());
  for (int j = 0; j < n(); ++j) {
    sus[j] = std::exp(theta.delta_age * age_c_[j] + theta.delta_sex * sex_c_[j]);
  }
  return sus;
}

double seasonal_modifier(double t, const FixedModel& fixed) {
  return 1.0 - std::cos(2.0 * 3.14159265358979323846 * (t + fixed.t_star) / fixed.period);
}

void pressure_row(const ModelParams& theta, const Population& pop, double season,
                  const std::uint8_t* x_prev, const std::vector<double>& sus,
                  const int* house_cnt, int colonised_total, double* out) {
  const PressureTerms pt = pressure_terms(theta, season, colonised_total, pop.n());
  for (int j = 0; j < pop.n(); ++j) {
    const int hc = house_cnt[pop.household(j)] - x_prev[j];
    out[j] = pressure_cell(sus[j], pt, hc);
  }
}

std::vector<double> colonisation_pressure(int t, const std::uint8_t* x_prev,
                                          const ModelParams& theta,
                                          const Population& pop,
                                          const FixedModel& fixed) {
  const std::vector<double> sus = pop.susceptibility(theta);
  std::vector<int> house_cnt(pop.n_households(), 0);
  int total = 0;
  for (int j = 0; j < pop.n(); ++j) {
    if (x_prev[j]) {
      ++house_cnt[pop.household(j)];
      ++total;
    }
  }
  const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
  std::vector<double> out(pop.n());
  pressure_row(theta, pop, season, x_prev, sus, house_cnt.data(), total, out.data());
  return out;
}

StateMatrix simulate(const ModelParams& theta, const Population& pop,
                     const FixedModel& fixed, int n_steps, Rng& rng) {
  const int n = pop.n();
  StateMatrix x(n_steps + 1, n);
  const std::vector<double> sus = pop.susceptibility(theta);
  const double p_cu = fixed.p_cu();

  for (int j = 0; j < n; ++j) x(0, j) = rng.unit() < fixed.p0 ? 1 : 0;

  std::vector<int> house_cnt(pop.n_households());
  std::vector<double> lam(n);
  for (int t = 1; t <= n_steps; ++t) {
    const std::uint8_t* prev = x.row(t - 1);
    std::fill(house_cnt.begin(), house_cnt.end(), 0);
    int total = 0;
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        ++house_cnt[pop.household(j)];
        ++total;
      }
    }
    const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
    pressure_row(theta, pop, season, prev, sus, house_cnt.data(), total, lam.data());
    for (int j = 0; j < n; ++j) {
      const double u = rng.unit();
      if (prev[j]) {
        x(t, j) = u < p_cu ? 0 : 1;
      } else {
        x(t, j) = u < event_prob(lam[j] * fixed.dt) ? 1 : 0;
      }
    }
  }
  return x;
}

StateMatrix realise(const DrawMatrix& u, const ModelParams& theta,
                    const Population& pop, const FixedModel& fixed) {
  const int n = pop.n();
  const int n_steps = u.rows() - 1;
  StateMatrix x(n_steps + 1, n);
  const std::vector<double> sus = pop.susceptibility(theta);
  const double p_cu = fixed.p_cu();

  for (int j = 0; j < n; ++j) x(0, j) = u(0, j) < fixed.p0 ? 1 : 0;

  std::vector<int> house_cnt(pop.n_households());
  std::vector<double> lam(n);
  for (int t = 1; t <= n_steps; ++t) {
    const std::uint8_t* prev = x.row(t - 1);
    std::fill(house_cnt.begin(), house_cnt.end(), 0);
    int total = 0;
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        ++house_cnt[pop.household(j)];
        ++total;
      }
    }
    const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
    pressure_row(theta, pop, season, prev, sus, house_cnt.data(), total, lam.data());
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        x(t, j) = u(t, j) < p_cu ? 0 : 1;
      } else {
        x(t, j) = u(t, j) < event_prob(lam[j] * fixed.dt) ? 1 : 0;
      }
    }
  }
  return x;
}

BoundsLattice proposal_bounds(const StateMatrix& x, const ModelParams& theta,
                              const Population& pop, const FixedModel& fixed) {
  const int n = x.cols();
  const int n_steps = x.rows() - 1;
  BoundsLattice bounds(x.rows(), n);
  const std::vector<double> sus = pop.susceptibility(theta);
  const double p_cu = fixed.p_cu();

  for (int j = 0; j < n; ++j) {
    bounds(0, j) = x(0, j) ? Interval{0.0, fixed.p0} : Interval{fixed.p0, 1.0};
  }

  std::vector<int> house_cnt(pop.n_households());
  std::vector<double> lam(n);
  for (int t = 1; t <= n_steps; ++t) {
    const std::uint8_t* prev = x.row(t - 1);
    std::fill(house_cnt.begin(), house_cnt.end(), 0);
    int total = 0;
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        ++house_cnt[pop.household(j)];
        ++total;
      }
    }
    const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
    pressure_row(theta, pop, season, prev, sus, house_cnt.data(), total, lam.data());
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        bounds(t, j) = x(t, j) ? Interval{p_cu, 1.0} : Interval{0.0, p_cu};
      } else {
        const double p_uc = event_prob(lam[j] * fixed.dt);
        if (x(t, j)) {
          if (!(p_uc > 0.0)) {
            throw InvalidState("colonisation event with zero pressure at t=" +
                               std::to_string(t) + " j=" + std::to_string(j));
          }
          bounds(t, j) = Interval{0.0, p_uc};
        } else {
          bounds(t, j) = Interval{p_uc, 1.0};
        }
      }
    }
  }
  return bounds;
}

double transmission_log_density(const StateMatrix& x, const ModelParams& theta,
                                const Population& pop, const FixedModel& fixed) {
  const int n = x.cols();
  const int n_steps = x.rows() - 1;
  const std::vector<double> sus = pop.susceptibility(theta);
  const double log_p_cu = log_event_prob(fixed.gamma * fixed.dt);
  const double gamma_dt = fixed.gamma * fixed.dt;

  int n0 = 0;
  for (int j = 0; j < n; ++j) n0 += x(0, j);
  double lp = n0 * std::log(fixed.p0) + (n - n0) * std::log1p(-fixed.p0);

  std::vector<int> house_cnt(pop.n_households());
  std::vector<double> lam(n);
  for (int t = 1; t <= n_steps; ++t) {
    const std::uint8_t* prev = x.row(t - 1);
    std::fill(house_cnt.begin(), house_cnt.end(), 0);
    int total = 0;
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        ++house_cnt[pop.household(j)];
        ++total;
      }
    }
    const double season = seasonal_modifier(static_cast<double>(t) - 1.0, fixed);
    pressure_row(theta, pop, season, prev, sus, house_cnt.data(), total, lam.data());
    for (int j = 0; j < n; ++j) {
      if (prev[j]) {
        lp += x(t, j) ? log_stay_prob(gamma_dt) : log_p_cu;
      } else if (x(t, j)) {
        const double le = log_event_prob(lam[j] * fixed.dt);
        if (le == kLogZero) return kLogZero;
        lp += le;
      } else {
        lp += log_stay_prob(lam[j] * fixed.dt);
      }
    }
  }
  return lp;
}

double observation_cell_log_factor(bool positive, bool colonised,
                                   const FixedModel& fixed) {
  if (colonised) {
    return positive ? std::log(fixed.sens) : std::log1p(-fixed.sens);
  }
  return positive ? std::log1p(-fixed.spec) : std::log(fixed.spec);
}

double observation_log_density(const ObservationMatrix& y, const StateMatrix& x,
                               const FixedModel& fixed) {
  double lp = 0.0;
  for (const TestCell& c : y.cells()) {
    lp += observation_cell_log_factor(c.positive, x(c.t, c.j) != 0, fixed);
  }
  return lp;
}

ObservationMatrix simulate_observations(const StateMatrix& x,
                                        const std::vector<std::pair<int, int>>& schedule,
                                        const FixedModel& fixed, Rng& rng) {
  ObservationMatrix y(x.rows(), x.cols());
  for (const auto& [t, j] : schedule) {
    const double p_pos = x(t, j) ? fixed.sens : 1.0 - fixed.spec;
    y.set(t, j, rng.unit() < p_pos);
  }
  return y;
}

void CountCache::rebuild(const StateMatrix& x, const Population& pop) {
  colonised.assign(x.rows(), 0);
  house = Lattice<int>(x.rows(), pop.n_households(), 0);
  for (int t = 0; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j) {
      if (x(t, j)) {
        ++colonised[t];
        ++house(t, pop.household(j));
      }
    }
  }
}

void CountCache::apply_flip(int t, int j, int new_value, const Population& pop) {
  const int d = new_value ? 1 : -1;
  colonised[t] += d;
  house(t, pop.household(j)) += d;
}

}  // namespace rippler
