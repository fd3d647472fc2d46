#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "rippler/diagnostics.hpp"
#include "rippler/iffbs.hpp"
#include "rippler/model.hpp"

using namespace rippler;
using test::flat_pop;
using test::random_pop;
using test::random_theta;

namespace {

/// Exact conditional over individual j's paths given everyone else, by
/// scoring the full joint for every candidate column.
std::vector<double> brute_conditional(int j, const StateMatrix& x, const ModelParams& theta,
                                      const ObservationMatrix& y, const Population& pop,
                                      const FixedModel& fixed) {
  const int n_steps = x.rows() - 1;
  const int n_paths = 1 << (n_steps + 1);
  std::vector<double> logw(n_paths, kLogZero);
  double mx = kLogZero;
  for (int path = 0; path < n_paths; ++path) {
    StateMatrix x2 = x;
    for (int t = 0; t <= n_steps; ++t) x2(t, j) = (path >> t) & 1;
    const double lt = transmission_log_density(x2, theta, pop, fixed);
    if (lt == kLogZero) continue;
    logw[path] = lt + observation_log_density(y, x2, fixed);
    mx = std::max(mx, logw[path]);
  }
  std::vector<double> p(n_paths, 0.0);
  double z = 0.0;
  for (int path = 0; path < n_paths; ++path) {
    if (logw[path] != kLogZero) {
      p[path] = std::exp(logw[path] - mx);
      z += p[path];
    }
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

TEST_CASE("transition probability table") {
  FixedModel fixed;
  fixed.gamma = 0.5;
  fixed.dt = 1.0;
  CHECK(iffbs_transition_prob(0, 0, 0.0, fixed) == 1.0);
  CHECK(iffbs_transition_prob(0, 1, 0.0, fixed) == 0.0);
  CHECK(iffbs_transition_prob(1, 1, 0.0, fixed) == doctest::Approx(std::exp(-0.5)));
  CHECK(iffbs_transition_prob(1, 0, 7.3, fixed) ==
        doctest::Approx(1.0 - std::exp(-0.5)));
  for (double lam : {0.0, 0.05, 0.4, 2.0}) {
    CHECK(iffbs_transition_prob(0, 0, lam, fixed) + iffbs_transition_prob(0, 1, lam, fixed) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(iffbs_transition_prob(1, 0, lam, fixed) + iffbs_transition_prob(1, 1, lam, fixed) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("lone individual without tests filters to the prior marginals") {
  Population pop = flat_pop({0});
  FixedModel fixed;
  fixed.p0 = 0.35;
  fixed.gamma = 0.6;
  const ModelParams theta = {0.4, 1.0, 0.0, 0.0};
  StateMatrix x(6, 1);
  ObservationMatrix y(6, 1);
  const ForwardTable fwd = iffbs_forward(0, x, theta, y, pop, fixed);
  // lone individual: pressure is zero, so m_t = m_{t-1} e^{-gamma dt}
  double m = fixed.p0;
  CHECK(fwd.p1[0] == doctest::Approx(m).epsilon(1e-12));
  for (int t = 1; t <= 5; ++t) {
    m *= std::exp(-fixed.gamma * fixed.dt);
    CHECK(fwd.p1[t] == doctest::Approx(m).epsilon(1e-10));
  }
}

TEST_CASE("a perfect positive test pins the filtered state") {
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.sens = 1.0;
  fixed.spec = 1.0;
  const ModelParams theta = {0.5, 1.0, 0.0, 0.0};
  StateMatrix x(4, 2);
  x(0, 1) = 1;
  x(1, 1) = 1;
  x(1, 0) = 1;
  x(2, 0) = 1;
  ObservationMatrix y(4, 2);
  y.set(2, 0, true);
  const ForwardTable fwd = iffbs_forward(0, x, theta, y, pop, fixed);
  CHECK(fwd.p1[2] == doctest::Approx(1.0));
}

TEST_CASE("forward-backward conditional matches brute force enumeration") {
  Rng rng(62, 0);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(2));       // N in {2,3}
    const int n_steps = 3 + static_cast<int>(rng.below(2)); // T in {3,4}
    Population pop = random_pop(n, rng);
    FixedModel fixed;
    fixed.t_star = 0.0;
    const ModelParams theta = random_theta(rng);
    const StateMatrix x = simulate(theta, pop, fixed, n_steps, rng);
    ObservationMatrix y(n_steps + 1, n);
    for (int t = 1; t <= n_steps; ++t) {
      for (int j = 0; j < n; ++j) {
        if (rng.unit() < 0.3) y.set(t, j, rng.unit() < 0.5);
      }
    }
    for (int j = 0; j < n; ++j) {
      const std::vector<double> brute = brute_conditional(j, x, theta, y, pop, fixed);
      const ForwardTable slow = iffbs_forward(j, x, theta, y, pop, fixed);
      const std::vector<double> via_slow =
          iffbs_path_distribution(slow, j, x, theta, pop, fixed);
      IffbsChain chain(x, theta, &y, &pop, &fixed);
      const ForwardTable fast = chain.forward_table(j);
      const std::vector<double> via_fast =
          iffbs_path_distribution(fast, j, x, theta, pop, fixed);
      for (std::size_t p = 0; p < brute.size(); ++p) {
        CHECK(std::fabs(via_slow[p] - brute[p]) < 1e-10);
        CHECK(std::fabs(via_fast[p] - brute[p]) < 1e-10);
      }
    }
  }
}

TEST_CASE("optimised and literal forward tables agree at moderate size") {
  Rng rng(63, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 20;
    Population pop = random_pop(n, rng);
    FixedModel fixed;
    const ModelParams theta = random_theta(rng);
    const StateMatrix x = simulate(theta, pop, fixed, 12, rng);
    ObservationMatrix y(13, n);
    for (int t = 1; t <= 12; ++t) {
      for (int j = 0; j < n; ++j) {
        if (rng.unit() < 0.15) y.set(t, j, rng.unit() < 0.5);
      }
    }
    IffbsChain chain(x, theta, &y, &pop, &fixed);
    for (int j = 0; j < n; ++j) {
      const ForwardTable slow = iffbs_forward(j, x, theta, y, pop, fixed);
      const ForwardTable fast = chain.forward_table(j);
      for (int t = 0; t <= 12; ++t) {
        CHECK(std::fabs(slow.p1[t] - fast.p1[t]) < 1e-10);
      }
    }
  }
}

TEST_CASE("perfect weekly tests force the unique consistent path") {
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.sens = 1.0;
  fixed.spec = 1.0;
  const ModelParams theta = {0.8, 1.5, 0.0, 0.0};
  Rng rng(64, 0);
  StateMatrix x(4, 2);
  // colonised individual 1 drives pressure; individual 0 colonises at 2
  for (int t = 0; t < 4; ++t) x(t, 1) = 1;
  x(2, 0) = 1;
  x(3, 0) = 1;
  ObservationMatrix y(4, 2);
  for (int t = 1; t < 4; ++t) y.set(t, 0, x(t, 0) != 0);
  StateMatrix got = iffbs_update(x, theta, y, 0, pop, fixed, rng);
  for (int t = 1; t < 4; ++t) CHECK(got(t, 0) == x(t, 0));
}

TEST_CASE("update touches only the chosen column") {
  Rng rng(65, 0);
  Population pop = random_pop(6, rng);
  FixedModel fixed;
  const ModelParams theta = random_theta(rng);
  const StateMatrix x = simulate(theta, pop, fixed, 8, rng);
  ObservationMatrix y(9, 6);
  y.set(3, 2, true);
  for (int j = 0; j < 6; ++j) {
    const StateMatrix got = iffbs_update(x, theta, y, j, pop, fixed, rng);
    for (int t = 0; t <= 8; ++t) {
      for (int i = 0; i < 6; ++i) {
        if (i != j) CHECK(got(t, i) == x(t, i));
      }
    }
  }
}

TEST_CASE("sampled paths follow the enumerated conditional") {
  Population pop = flat_pop({0});
  FixedModel fixed;
  fixed.p0 = 0.4;
  fixed.gamma = 0.5;
  const ModelParams theta = {0.3, 1.0, 0.0, 0.0};
  StateMatrix x(4, 1);
  x(0, 0) = 1;
  x(1, 0) = 1;
  ObservationMatrix y(4, 1);
  y.set(1, 0, true);
  y.set(2, 0, false);
  const std::vector<double> brute = brute_conditional(0, x, theta, y, pop, fixed);

  Rng rng(66, 0);
  IffbsChain chain(x, theta, &y, &pop, &fixed);
  const int n = 100000;
  std::vector<double> freq(brute.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    chain.update_column(0, rng);
    int path = 0;
    for (int t = 0; t <= 3; ++t) path |= chain.state()(t, 0) << t;
    freq[path] += 1.0;
  }
  for (std::size_t p = 0; p < brute.size(); ++p) {
    const double se = std::sqrt(brute[p] * (1.0 - brute[p]) / n);
    CHECK(std::fabs(freq[p] / n - brute[p]) <= 3.0 * se + 1e-4);
  }
}

TEST_CASE("gibbs chain matches the enumerated posterior") {
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.p0 = 0.3;
  fixed.gamma = 0.5;
  fixed.t_star = 0.0;
  const ModelParams theta = {0.6, 1.3, 0.0, 0.0};
  ObservationMatrix y(3, 2);
  y.set(1, 0, true);
  y.set(2, 1, false);
  const ExactDistribution exact = exact_latent_posterior(y, theta, pop, fixed, 2);

  Rng rng(67, 0);
  StateMatrix x = simulate(theta, pop, fixed, 2, rng);
  IffbsChain chain(x, theta, &y, &pop, &fixed);
  std::vector<double> emp(exact.prob.size(), 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    chain.step(rng);
    emp[lattice_bitmask(chain.state())] += 1.0;
  }
  for (double& v : emp) v /= n;
  CHECK(total_variation(emp, exact.prob) < 0.02);
}
