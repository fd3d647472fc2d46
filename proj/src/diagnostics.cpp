#include "rippler/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rippler {

std::vector<double> msjd_by_time(const std::vector<StateMatrix>& chain) {
  const int rows = chain.front().rows();
  const int cols = chain.front().cols();
  std::vector<double> by_t(rows, 0.0);
  const std::size_t k_steps = chain.size() - 1;
  for (std::size_t k = 1; k < chain.size(); ++k) {
    for (int t = 0; t < rows; ++t) {
      const std::uint8_t* a = chain[k - 1].row(t);
      const std::uint8_t* b = chain[k].row(t);
      int d = 0;
      for (int j = 0; j < cols; ++j) d += a[j] != b[j];
      by_t[t] += d;
    }
  }
  for (double& v : by_t) v /= static_cast<double>(k_steps);
  return by_t;
}

double msjd(const std::vector<StateMatrix>& chain) {
  const std::vector<double> by_t = msjd_by_time(chain);
  return std::accumulate(by_t.begin(), by_t.end(), 0.0);
}

std::vector<double> msjd_by_time_from_jumps(const std::vector<std::vector<int>>& jumps) {
  std::vector<double> by_t(jumps.front().size(), 0.0);
  for (const std::vector<int>& row : jumps) {
    for (std::size_t t = 0; t < row.size(); ++t) by_t[t] += row[t];
  }
  for (double& v : by_t) v /= static_cast<double>(jumps.size());
  return by_t;
}

double msjd_from_jumps(const std::vector<std::vector<int>>& jumps) {
  const std::vector<double> by_t = msjd_by_time_from_jumps(jumps);
  return std::accumulate(by_t.begin(), by_t.end(), 0.0);
}

double quantile(std::vector<double> samples, double q) {
  std::sort(samples.begin(), samples.end());
  const double h = q * static_cast<double>(samples.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= samples.size()) return samples.back();
  const double frac = h - static_cast<double>(lo);
  return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
}

std::pair<double, double> credible_interval(const std::vector<double>& samples, double level) {
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, tail), quantile(samples, 1.0 - tail)};
}

std::vector<int> colonised_count(const StateMatrix& x) {
  std::vector<int> counts(x.rows(), 0);
  for (int t = 0; t < x.rows(); ++t) {
    const std::uint8_t* row = x.row(t);
    int c = 0;
    for (int j = 0; j < x.cols(); ++j) c += row[j];
    counts[t] = c;
  }
  return counts;
}

double risk_ratio_value(const ModelParams& theta, const RiskScenario& scenario,
                        int n_population, const FixedModel& fixed) {
  const double season = seasonal_modifier(static_cast<double>(scenario.t), fixed);
  const double lam_g = theta.beta_g * season *
                       (static_cast<double>(scenario.colonised_global) / n_population);
  if (lam_g == 0.0) {
    throw UndefinedRatio("global pressure is zero in the risk-ratio scenario");
  }
  const double lam_h =
      theta.beta_g * theta.beta_h * static_cast<double>(scenario.colonised_household);
  return (lam_g + lam_h) / lam_g;
}

std::pair<double, double> household_risk_ratio(const std::vector<ModelParams>& samples,
                                               const RiskScenario& scenario, int n_population,
                                               const FixedModel& fixed, double level) {
  std::vector<double> ratios;
  ratios.reserve(samples.size());
  for (const ModelParams& theta : samples) {
    ratios.push_back(risk_ratio_value(theta, scenario, n_population, fixed));
  }
  return credible_interval(ratios, level);
}

std::uint32_t lattice_bitmask(const StateMatrix& x) {
  std::uint32_t mask = 0;
  int bit = 0;
  for (int t = 0; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j, ++bit) {
      if (x(t, j)) mask |= (1u << bit);
    }
  }
  return mask;
}

StateMatrix lattice_from_bitmask(std::uint32_t mask, int rows, int cols) {
  StateMatrix x(rows, cols);
  int bit = 0;
  for (int t = 0; t < rows; ++t) {
    for (int j = 0; j < cols; ++j, ++bit) {
      x(t, j) = (mask >> bit) & 1u;
    }
  }
  return x;
}

ExactDistribution exact_latent_posterior(const ObservationMatrix& y, const ModelParams& theta,
                                         const Population& pop, const FixedModel& fixed,
                                         int n_steps) {
  const int cells = (n_steps + 1) * pop.n();
  if (cells > 20) {
    throw TooLarge("exact enumeration limited to 20 cells, requested " +
                   std::to_string(cells));
  }
  const std::uint32_t n_states = 1u << cells;
  std::vector<double> logw(n_states, kLogZero);
  double max_lw = kLogZero;
  for (std::uint32_t mask = 0; mask < n_states; ++mask) {
    const StateMatrix x = lattice_from_bitmask(mask, n_steps + 1, pop.n());
    const double lt = transmission_log_density(x, theta, pop, fixed);
    if (lt == kLogZero) continue;
    const double lw = lt + observation_log_density(y, x, fixed);
    logw[mask] = lw;
    max_lw = std::max(max_lw, lw);
  }
  ExactDistribution dist;
  dist.n_cells = cells;
  dist.prob.assign(n_states, 0.0);
  double z = 0.0;
  for (std::uint32_t mask = 0; mask < n_states; ++mask) {
    if (logw[mask] != kLogZero) {
      dist.prob[mask] = std::exp(logw[mask] - max_lw);
      z += dist.prob[mask];
    }
  }
  for (double& p : dist.prob) p /= z;
  return dist;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
  return 0.5 * s;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t k = i;
    while (k + 1 < n && v[order[k + 1]] == v[order[i]]) ++k;
    const double r = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t m = i; m <= k; ++m) ranks[order[m]] = r;
    i = k + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const std::size_t n = ra.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace rippler
