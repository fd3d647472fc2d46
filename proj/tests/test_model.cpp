#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "rippler/iffbs.hpp"
#include "rippler/model.hpp"
#include "rippler/rippler_sampler.hpp"

using namespace rippler;
using test::flat_pop;
using test::random_pop;
using test::random_theta;

TEST_CASE("seasonal modifier hits the known week-20 value") {
  FixedModel fixed;
  fixed.t_star = 17.0;
  fixed.period = 52.0;
  CHECK(seasonal_modifier(20.0, fixed) == doctest::Approx(1.24).epsilon(0.004));
}

TEST_CASE("seasonal modifier extremes") {
  FixedModel fixed;
  fixed.t_star = 17.0;
  fixed.period = 52.0;
  CHECK(seasonal_modifier(35.0, fixed) == doctest::Approx(0.0).epsilon(1e-12)); // t + t* = 52
  CHECK(seasonal_modifier(9.0, fixed) == doctest::Approx(2.0).epsilon(1e-12));  // t + t* = 26
}

TEST_CASE("seasonal modifier is bounded and periodic") {
  FixedModel fixed;
  for (int t = 0; t < 200; ++t) {
    const double s = seasonal_modifier(t, fixed);
    CHECK(s >= 0.0);
    CHECK(s <= 2.0);
    CHECK(s == doctest::Approx(seasonal_modifier(t + fixed.period, fixed)).epsilon(1e-12));
  }
}

TEST_CASE("pressure is zero with nobody colonised") {
  Population pop = flat_pop({0, 0, 1, 1, 1});
  FixedModel fixed;
  std::vector<std::uint8_t> prev(5, 0);
  const std::vector<double> lam =
      colonisation_pressure(3, prev.data(), {0.4, 1.2, 0.01, 0.1}, pop, fixed);
  for (double v : lam) CHECK(v == 0.0);
}

TEST_CASE("pressure matches the hand-evaluated two-person case") {
  // same household, one colonised; season value 1 at step 14 with t*=0
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.t_star = 0.0;
  fixed.period = 52.0;
  std::vector<std::uint8_t> prev = {1, 0};
  const std::vector<double> lam =
      colonisation_pressure(14, prev.data(), {0.1, 1.5, 0.0, 0.0}, pop, fixed);
  // lambda_2 = 0.1 * 1 * (1/2) + 0.1 * 1.5 * 1 = 0.2
  CHECK(lam[1] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("zero covariate effects leave the pressure at its base value") {
  Rng rng(21, 0);
  Population pop = random_pop(8, rng);
  FixedModel fixed;
  std::vector<std::uint8_t> prev = {1, 0, 1, 0, 0, 1, 0, 0};
  const ModelParams theta = {0.3, 1.1, 0.0, 0.0};
  const std::vector<double> lam = colonisation_pressure(5, prev.data(), theta, pop, fixed);
  // recompute without the covariate multiplier
  const double season = seasonal_modifier(4.0, fixed);
  for (int j = 0; j < 8; ++j) {
    if (prev[j]) continue;
    int hc = 0;
    for (int i = 0; i < 8; ++i) {
      if (i != j && pop.household(i) == pop.household(j) && prev[i]) ++hc;
    }
    const double expect = 0.3 * season * (3.0 / 8.0) + 0.3 * 1.1 * hc;
    CHECK(lam[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("raising the global rate never lowers any pressure") {
  Rng rng(77, 0);
  for (int rep = 0; rep < 20; ++rep) {
    Population pop = random_pop(10, rng);
    FixedModel fixed;
    std::vector<std::uint8_t> prev(10);
    for (auto& v : prev) v = rng.unit() < 0.4 ? 1 : 0;
    ModelParams lo = random_theta(rng);
    ModelParams hi = lo;
    hi.beta_g = lo.beta_g + 0.2;
    const auto lam_lo = colonisation_pressure(4, prev.data(), lo, pop, fixed);
    const auto lam_hi = colonisation_pressure(4, prev.data(), hi, pop, fixed);
    for (int j = 0; j < 10; ++j) CHECK(lam_hi[j] >= lam_lo[j]);
  }
}

TEST_CASE("simulate: absorbing empty state") {
  Population pop = flat_pop({0, 0, 1});
  FixedModel fixed;
  fixed.p0 = 0.0;
  Rng rng(1, 0);
  const StateMatrix x = simulate({0.0, 1.5, 0.0, 0.0}, pop, fixed, 10, rng);
  for (int t = 0; t <= 10; ++t) {
    for (int j = 0; j < 3; ++j) CHECK(x(t, j) == 0);
  }
}

TEST_CASE("simulate: certain de-colonisation empties row 1") {
  Population pop = flat_pop({0, 1});
  FixedModel fixed;
  fixed.p0 = 1.0 - 1e-12;
  fixed.gamma = 1000.0;  // e^{-gamma dt} = 0 to double precision
  Rng rng(2, 0);
  const StateMatrix x = simulate({0.0, 0.0, 0.0, 0.0}, pop, fixed, 1, rng);
  CHECK(x(0, 0) == 1);
  CHECK(x(0, 1) == 1);
  CHECK(x(1, 0) == 0);
  CHECK(x(1, 1) == 0);
}

TEST_CASE("realise: draws above every threshold produce no events") {
  Population pop = flat_pop({0, 0, 0});
  FixedModel fixed;
  DrawMatrix u(6, 3, 0.9999);
  const StateMatrix x = realise(u, {0.2, 1.5, 0.0, 0.0}, pop, fixed);
  for (int t = 0; t <= 5; ++t) {
    for (int j = 0; j < 3; ++j) CHECK(x(t, j) == 0);
  }
}

TEST_CASE("round trip: realise(sample_noncentred(X)) == X") {
  Rng rng(31, 0);
  for (int rep = 0; rep < 100; ++rep) {
    Population pop = random_pop(6, rng);
    const ModelParams theta = random_theta(rng);
    FixedModel fixed;
    StateMatrix x = simulate(theta, pop, fixed, 8, rng);
    const BoundsLattice bounds = proposal_bounds(x, theta, pop, fixed);
    const DrawMatrix u = sample_noncentred(x, bounds, rng);
    const StateMatrix back = realise(u, theta, pop, fixed);
    CHECK(back == x);
  }
}

TEST_CASE("a complement draw at one cell flips exactly that cell first") {
  Rng rng(32, 0);
  Population pop = flat_pop({0, 0, 1, 1});
  const ModelParams theta = {0.3, 1.5, 0.0, 0.0};
  FixedModel fixed;
  StateMatrix x = simulate(theta, pop, fixed, 6, rng);
  const BoundsLattice bounds = proposal_bounds(x, theta, pop, fixed);
  DrawMatrix u = sample_noncentred(x, bounds, rng);
  // choose a cell with positive complement mass and resample it there
  for (int t = 0; t <= 6; ++t) {
    for (int j = 0; j < 4; ++j) {
      const Interval iv = bounds(t, j);
      if (iv.complement_mass() <= 1e-12) continue;
      DrawMatrix u2 = u;
      const double v = rng.uniform(0.0, iv.complement_mass());
      u2(t, j) = v < iv.a ? v : v + iv.width();
      const StateMatrix x2 = realise(u2, theta, pop, fixed);
      CHECK(x2(t, j) == 1 - x(t, j));
      // causality: nothing changes before the perturbed row
      for (int s = 0; s < t; ++s) {
        for (int i = 0; i < 4; ++i) CHECK(x2(s, i) == x(s, i));
      }
    }
  }
}

TEST_CASE("proposal bounds case table") {
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.p0 = 0.3;
  fixed.gamma = 0.5;
  fixed.dt = 1.0;
  StateMatrix x(3, 2);
  x(0, 0) = 1;
  x(1, 0) = 0;  // de-colonisation event
  x(2, 0) = 0;
  x(0, 1) = 0;
  x(1, 1) = 1;  // colonisation event (pressure from j=0 at t=1)
  x(2, 1) = 1;  // stays colonised
  const ModelParams theta = {0.2, 1.0, 0.0, 0.0};
  const BoundsLattice b = proposal_bounds(x, theta, pop, fixed);

  CHECK(b(0, 0).a == 0.0);
  CHECK(b(0, 0).b == doctest::Approx(0.3));
  CHECK(b(0, 1).a == doctest::Approx(0.3));
  CHECK(b(0, 1).b == 1.0);
  // de-colonisation: (0, 1 - e^{-0.5})
  CHECK(b(1, 0).a == 0.0);
  CHECK(b(1, 0).b == doctest::Approx(0.39346934).epsilon(1e-7));
  // stay-colonised at t=2
  CHECK(b(2, 1).a == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
  CHECK(b(2, 1).b == 1.0);
  // colonisation event: (0, p_uc)
  const std::vector<double> lam = colonisation_pressure(1, x.row(0), theta, pop, fixed);
  CHECK(b(1, 1).b == doctest::Approx(event_prob(lam[1] * fixed.dt)).epsilon(1e-15));
}

TEST_CASE("no-colonisation cell with zero pressure has empty complement") {
  Population pop = flat_pop({0});
  FixedModel fixed;
  StateMatrix x(2, 1);  // all uncolonised, lone individual => lambda = 0
  const BoundsLattice b = proposal_bounds(x, {0.5, 1.0, 0.0, 0.0}, pop, fixed);
  CHECK(b(1, 0).a == 0.0);
  CHECK(b(1, 0).b == 1.0);
  CHECK(b(1, 0).complement_mass() == 0.0);
}

TEST_CASE("colonisation event with zero pressure is rejected") {
  Population pop = flat_pop({0});
  FixedModel fixed;
  StateMatrix x(2, 1);
  x(1, 0) = 1;  // impossible: nobody colonised at t=0
  CHECK_THROWS_AS(proposal_bounds(x, {0.5, 1.0, 0.0, 0.0}, pop, fixed), InvalidState);
  CHECK(transmission_log_density(x, {0.5, 1.0, 0.0, 0.0}, pop, fixed) == kLogZero);
}

TEST_CASE("transmission density matches a hand evaluation") {
  // two individuals in different households; j=1 colonised throughout,
  // j=2 uncolonised; lambda_2(1) = 0.4 * season * 1/2
  Population pop = flat_pop({0, 1});
  FixedModel fixed;
  fixed.t_star = 0.0;
  fixed.period = 52.0;
  fixed.p0 = 0.3;
  fixed.gamma = 0.5;
  StateMatrix x(2, 2);
  x(0, 0) = 1;
  x(1, 0) = 1;
  const ModelParams theta = {0.4, 0.0, 0.0, 0.0};
  const double season = seasonal_modifier(0.0, fixed);
  const double lam = 0.4 * season * 0.5;
  const double expect = std::log(0.3) + std::log1p(-0.3)  // initial states
                        + (-0.5)                          // stay colonised
                        + (-lam);                         // no colonisation
  CHECK(transmission_log_density(x, theta, pop, fixed) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("all-zero lattice with beta_g = 0 scores (1-p0)^N") {
  Population pop = flat_pop({0, 0, 1, 2});
  FixedModel fixed;
  fixed.p0 = 0.3;
  StateMatrix x(5, 4);
  CHECK(transmission_log_density(x, {0.0, 1.5, 0.0, 0.0}, pop, fixed) ==
        doctest::Approx(4.0 * std::log1p(-0.3)).epsilon(1e-12));
}

TEST_CASE("transmission density and draw density cancel exactly") {
  Rng rng(55, 0);
  for (int rep = 0; rep < 100; ++rep) {
    Population pop = random_pop(8, rng);
    const ModelParams theta = random_theta(rng);
    FixedModel fixed;
    const StateMatrix x = simulate(theta, pop, fixed, 10, rng);
    const BoundsLattice bounds = proposal_bounds(x, theta, pop, fixed);
    double log_q = 0.0;  // log prod 1/(b-a)
    for (int t = 0; t < bounds.rows(); ++t) {
      for (int j = 0; j < bounds.cols(); ++j) log_q -= std::log(bounds(t, j).width());
    }
    const double lp = transmission_log_density(x, theta, pop, fixed);
    CHECK(std::fabs(lp + log_q) < 1e-9);
  }
}

TEST_CASE("observation density: empty, counts and perfect tests") {
  FixedModel fixed;
  fixed.sens = 0.8;
  fixed.spec = 0.99;

  StateMatrix x(1600, 1);
  ObservationMatrix none(1600, 1);
  CHECK(observation_log_density(none, x, fixed) == 0.0);

  // published counts: 371 TP, 39 FN, 15 FP, 1148 TN
  ObservationMatrix y(1600, 1);
  int t = 0;
  for (int k = 0; k < 371; ++k, ++t) { x(t, 0) = 1; y.set(t, 0, true); }
  for (int k = 0; k < 39; ++k, ++t) { x(t, 0) = 1; y.set(t, 0, false); }
  for (int k = 0; k < 15; ++k, ++t) { y.set(t, 0, true); }
  for (int k = 0; k < 1148; ++k, ++t) { y.set(t, 0, false); }
  const double expect = 371.0 * std::log(0.8) + 39.0 * std::log(0.2) +
                        15.0 * std::log(0.01) + 1148.0 * std::log(0.99);
  const double got = observation_log_density(y, x, fixed);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  CHECK(got == doctest::Approx(-226.2).epsilon(2e-4));

  FixedModel perfect;
  perfect.sens = 1.0;
  perfect.spec = 1.0;
  StateMatrix x2(2, 1);
  x2(1, 0) = 1;
  ObservationMatrix consistent(2, 1);
  consistent.set(1, 0, true);
  CHECK(observation_log_density(consistent, x2, perfect) == 0.0);
  ObservationMatrix wrong(2, 1);
  wrong.set(1, 0, false);
  CHECK(observation_log_density(wrong, x2, perfect) == kLogZero);
}

TEST_CASE("observation density equals the per-cell oracle") {
  Rng rng(66, 0);
  for (int rep = 0; rep < 30; ++rep) {
    Population pop = random_pop(6, rng);
    FixedModel fixed;
    const StateMatrix x = simulate(random_theta(rng), pop, fixed, 7, rng);
    ObservationMatrix y(8, 6);
    for (int t = 1; t <= 7; ++t) {
      for (int j = 0; j < 6; ++j) {
        if (rng.unit() < 0.3) y.set(t, j, rng.unit() < 0.5);
      }
    }
    double oracle = 0.0;
    for (const TestCell& c : y.cells()) {
      const bool col = x(c.t, c.j) != 0;
      if (c.positive) {
        oracle += std::log(col ? fixed.sens : 1.0 - fixed.spec);
      } else {
        oracle += std::log(col ? 1.0 - fixed.sens : fixed.spec);
      }
    }
    CHECK(observation_log_density(y, x, fixed) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("simulated observations: degenerate schedules") {
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  Rng rng(4, 0);
  StateMatrix x = simulate({0.3, 1.0, 0.0, 0.0}, pop, fixed, 5, rng);

  ObservationMatrix empty = simulate_observations(x, {}, fixed, rng);
  CHECK(empty.n_tested() == 0);

  FixedModel perfect = fixed;
  perfect.sens = 1.0;
  perfect.spec = 1.0;
  std::vector<std::pair<int, int>> sched = {{1, 0}, {2, 1}, {5, 0}};
  ObservationMatrix y = simulate_observations(x, sched, perfect, rng);
  CHECK(y.n_tested() == 3);
  for (const TestCell& c : y.cells()) CHECK(c.positive == (x(c.t, c.j) != 0));
}

TEST_CASE("simulated positives match the binomial expectation") {
  Population pop = flat_pop({0, 0, 1, 1, 2, 2});
  FixedModel fixed;
  Rng rng(8, 0);
  const StateMatrix x = simulate({0.4, 1.5, 0.0, 0.0}, pop, fixed, 20, rng);
  std::vector<std::pair<int, int>> sched;
  for (int t = 1; t <= 20; ++t) {
    for (int j = 0; j < 6; ++j) sched.emplace_back(t, j);
  }
  int n_col = 0;
  for (const auto& [t, j] : sched) n_col += x(t, j);
  const int n_unc = static_cast<int>(sched.size()) - n_col;
  const double mean_expect = fixed.sens * n_col + (1.0 - fixed.spec) * n_unc;
  const double var = fixed.sens * (1 - fixed.sens) * n_col +
                     (1.0 - fixed.spec) * fixed.spec * n_unc;

  const int reps = 400;
  double total_pos = 0.0;
  for (int r = 0; r < reps; ++r) {
    const ObservationMatrix y = simulate_observations(x, sched, fixed, rng);
    for (const TestCell& c : y.cells()) total_pos += c.positive ? 1.0 : 0.0;
  }
  const double se = std::sqrt(var / reps);
  CHECK(std::fabs(total_pos / reps - mean_expect) < 3.0 * se + 1e-9);
}

TEST_CASE("path frequencies from simulation match the transmission density") {
  // lone individual: 4 reachable paths over T=2, the rest have zero density
  Population pop = flat_pop({0});
  FixedModel fixed;
  fixed.p0 = 0.4;
  fixed.gamma = 0.7;
  const ModelParams theta = {0.5, 1.0, 0.0, 0.0};
  Rng rng(101, 0);
  const int n = 1000000;
  std::map<int, int> freq;
  for (int i = 0; i < n; ++i) {
    const StateMatrix x = simulate(theta, pop, fixed, 2, rng);
    freq[x(0, 0) | (x(1, 0) << 1) | (x(2, 0) << 2)] += 1;
  }
  for (int mask = 0; mask < 8; ++mask) {
    StateMatrix x(3, 1);
    x(0, 0) = mask & 1;
    x(1, 0) = (mask >> 1) & 1;
    x(2, 0) = (mask >> 2) & 1;
    const double lp = transmission_log_density(x, theta, pop, fixed);
    const double p = lp == kLogZero ? 0.0 : std::exp(lp);
    const double observed = freq.count(mask) ? freq[mask] : 0;
    const double se = std::sqrt(p * (1.0 - p) * n);
    CHECK(std::fabs(observed - p * n) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("count cache tracks flips") {
  Rng rng(9, 0);
  Population pop = random_pop(7, rng);
  FixedModel fixed;
  StateMatrix x = simulate({0.3, 1.2, 0.0, 0.0}, pop, fixed, 6, rng);
  CountCache cache;
  cache.rebuild(x, pop);
  for (int rep = 0; rep < 50; ++rep) {
    const int t = static_cast<int>(rng.below(7));
    const int j = static_cast<int>(rng.below(7));
    const std::uint8_t nv = 1 - x(t, j);
    x(t, j) = nv;
    cache.apply_flip(t, j, nv, pop);
  }
  CountCache fresh;
  fresh.rebuild(x, pop);
  CHECK(fresh.colonised == cache.colonised);
  CHECK(fresh.house == cache.house);
}
