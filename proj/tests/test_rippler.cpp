#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "rippler/diagnostics.hpp"
#include "rippler/model.hpp"
#include "rippler/rippler_sampler.hpp"

using namespace rippler;
using test::flat_pop;
using test::random_pop;
using test::random_theta;

namespace {

ObservationMatrix random_tests(const StateMatrix& x, double density, Rng& rng) {
  ObservationMatrix y(x.rows(), x.cols());
  for (int t = 1; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j) {
      if (rng.unit() < density) y.set(t, j, rng.unit() < 0.5);
    }
  }
  return y;
}

}  // namespace

TEST_CASE("sampled draws land inside their intervals and reproduce x") {
  Rng rng(12, 0);
  Population pop = flat_pop({0, 0, 1});
  FixedModel fixed;
  const ModelParams theta = {0.4, 1.0, 0.0, 0.0};
  const StateMatrix x = simulate(theta, pop, fixed, 6, rng);
  const BoundsLattice bounds = proposal_bounds(x, theta, pop, fixed);
  const DrawMatrix u = sample_noncentred(x, bounds, rng);
  for (int t = 0; t <= 6; ++t) {
    for (int j = 0; j < 3; ++j) {
      CHECK(u(t, j) >= bounds(t, j).a);
      CHECK(u(t, j) < bounds(t, j).b);
    }
  }
  CHECK(realise(u, theta, pop, fixed) == x);
}

TEST_CASE("degenerate bounds lattice gives uniform draws") {
  BoundsLattice bounds(4, 2);  // all (0,1)
  StateMatrix x(4, 2);
  Rng rng(13, 0);
  double mx = 0.0, mn = 1.0, sum = 0.0;
  const int reps = 3000;
  for (int r = 0; r < reps; ++r) {
    const DrawMatrix u = sample_noncentred(x, bounds, rng);
    for (int t = 0; t < 4; ++t) {
      for (int j = 0; j < 2; ++j) {
        mx = std::max(mx, u(t, j));
        mn = std::min(mn, u(t, j));
        sum += u(t, j);
      }
    }
  }
  CHECK(mx > 0.999);
  CHECK(mn < 0.001);
  CHECK(sum / (reps * 8.0) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("selection concentrates on the only perturbable cell") {
  BoundsLattice bounds(2, 2);  // complement mass 0 everywhere ...
  bounds(1, 1) = {0.2, 0.9};   // ... except here (mass 0.3)
  DrawMatrix u(2, 2, 0.5);
  Rng rng(14, 0);
  for (int r = 0; r < 200; ++r) {
    auto [u2, origins] = select_and_perturb(u, bounds, 1, rng);
    REQUIRE(origins.size() == 1);
    CHECK(origins[0].first == 1);
    CHECK(origins[0].second == 1);
    const double v = u2(1, 1);
    CHECK((v < 0.2 || v >= 0.9));
  }
}

TEST_CASE("selection frequencies follow the complement masses") {
  BoundsLattice bounds(3, 3);
  // hand-set masses: complement mass of (a,b) is 1+a-b
  const double masses[3][3] = {{0.1, 0.0, 0.3}, {0.2, 0.05, 0.0}, {0.4, 0.15, 0.8}};
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < 3; ++j) bounds(t, j) = {0.0, 1.0 - masses[t][j]};
  }
  DrawMatrix u(3, 3, 0.1);
  Rng rng(15, 0);
  const int n = 100000;
  std::map<std::pair<int, int>, int> hits;
  for (int r = 0; r < n; ++r) {
    auto [u2, origins] = select_and_perturb(u, bounds, 1, rng);
    hits[origins[0]] += 1;
  }
  double total = 0.0;
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < 3; ++j) total += masses[t][j];
  }
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < 3; ++j) {
      const double p = masses[t][j] / total;
      const double se = std::sqrt(p * (1.0 - p) * n);
      CHECK(std::fabs(hits[{t, j}] - p * n) <= 3.0 * se + 1e-9);
    }
  }
}

TEST_CASE("all-zero complement masses raise NoPerturbableCell") {
  BoundsLattice bounds(2, 2);  // every interval (0,1)
  DrawMatrix u(2, 2, 0.5);
  Rng rng(16, 0);
  CHECK_THROWS_AS(select_and_perturb(u, bounds, 1, rng), NoPerturbableCell);
}

TEST_CASE("proposal ratio identities") {
  BoundsLattice a(1, 2);
  a(0, 0) = {0.0, 0.5};
  a(0, 1) = {0.1, 0.7};
  BoundsLattice same = a;
  CHECK(log_proposal_ratio(a, same, 1) == doctest::Approx(0.0));

  // sums 2.0 and 4.0 need four cells (each mass is at most 1)
  BoundsLattice c2(2, 2), p2(2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      c2(i, j) = {0.0, 0.5};  // mass 0.5 -> sum 2.0
      p2(i, j) = {0.0, 0.0};  // mass 1.0 -> sum 4.0
    }
  }
  CHECK(log_proposal_ratio(c2, p2, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(log_proposal_ratio(c2, p2, 2) ==
        doctest::Approx(2.0 * log_proposal_ratio(c2, p2, 1)).epsilon(1e-12));
}

TEST_CASE("with no tests the acceptance ratio is the proposal ratio alone") {
  Rng rng(17, 0);
  Population pop = flat_pop({0, 0, 1});
  FixedModel fixed;
  const ModelParams theta = {0.4, 1.2, 0.0, 0.0};
  const StateMatrix x = simulate(theta, pop, fixed, 5, rng);
  const ObservationMatrix y(6, 3);
  RipplerChain chain(x, theta, &y, &pop, &fixed);
  chain.enable_capture(true);
  for (int i = 0; i < 200; ++i) {
    chain.step(rng);
    CHECK(chain.capture().log_obs_delta == 0.0);
  }
}

TEST_CASE("chain proposals flip the origin and ripple forward only") {
  Rng rng(18, 0);
  for (int rep = 0; rep < 10; ++rep) {
    Population pop = random_pop(6, rng);
    FixedModel fixed;
    const ModelParams theta = random_theta(rng);
    const StateMatrix x0 = simulate(theta, pop, fixed, 8, rng);
    ObservationMatrix y = random_tests(x0, 0.2, rng);
    RipplerChain chain(x0, theta, &y, &pop, &fixed);
    chain.enable_capture(true);
    for (int i = 0; i < 300; ++i) {
      const StateMatrix before = chain.state();
      const RipplerStepRecord rec = chain.step(rng);
      const StateMatrix& prop = chain.capture().x_proposed;
      REQUIRE(rec.origins.size() == 1);
      const auto [ot, oj] = rec.origins[0];
      // no null move at the origin cell
      CHECK(prop(ot, oj) == 1 - before(ot, oj));
      CHECK(rec.cells_changed >= 1);
      // ripple causality: nothing changes before the origin row
      for (int t = 0; t < ot; ++t) {
        for (int j = 0; j < 6; ++j) CHECK(prop(t, j) == before(t, j));
      }
    }
  }
}

TEST_CASE("chain acceptance components equal the slow path") {
  Rng rng(19, 0);
  int checked = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Population pop = random_pop(7, rng);
    FixedModel fixed;
    const ModelParams theta = random_theta(rng);
    const StateMatrix x0 = simulate(theta, pop, fixed, 9, rng);
    ObservationMatrix y = random_tests(x0, 0.25, rng);
    const int k_elements = 1 + rep % 3;
    RipplerChain chain(x0, theta, &y, &pop, &fixed);
    chain.enable_capture(true);
    for (int i = 0; i < 10; ++i) {
      const StateMatrix before = chain.state();
      chain.step(rng, k_elements);
      const auto& cap = chain.capture();
      const StateMatrix& prop = cap.x_proposed;

      const double slow_obs = observation_log_density(y, prop, fixed) -
                              observation_log_density(y, before, fixed);
      const BoundsLattice b_cur = proposal_bounds(before, theta, pop, fixed);
      const BoundsLattice b_prop = proposal_bounds(prop, theta, pop, fixed);
      const double slow_prop = log_proposal_ratio(b_cur, b_prop, k_elements);

      CHECK(cap.log_obs_delta == doctest::Approx(slow_obs).epsilon(1e-9));
      CHECK(cap.log_prop_ratio == doctest::Approx(slow_prop).epsilon(1e-9));
      CHECK(cap.sum_current ==
            doctest::Approx(bounds_complement_sum(b_cur)).epsilon(1e-9));
      CHECK(cap.sum_proposed ==
            doctest::Approx(bounds_complement_sum(b_prop)).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("accepted states stay reachable and binary") {
  Rng rng(20, 0);
  Population pop = random_pop(8, rng);
  FixedModel fixed;
  const ModelParams theta = random_theta(rng);
  const StateMatrix x0 = simulate(theta, pop, fixed, 10, rng);
  ObservationMatrix y = random_tests(x0, 0.3, rng);
  RipplerChain chain(x0, theta, &y, &pop, &fixed);
  for (int i = 0; i < 2000; ++i) chain.step(rng);
  const StateMatrix& x = chain.state();
  for (int t = 0; t < x.rows(); ++t) {
    for (int j = 0; j < x.cols(); ++j) CHECK((x(t, j) == 0 || x(t, j) == 1));
  }
  CHECK_NOTHROW(proposal_bounds(x, theta, pop, fixed));
  CHECK(transmission_log_density(x, theta, pop, fixed) != kLogZero);
}

TEST_CASE("reference update and chain leave the tiny posterior invariant") {
  // N=2, T=2: compare both implementations' empirical laws to enumeration
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.p0 = 0.35;
  fixed.gamma = 0.6;
  fixed.t_star = 0.0;
  const ModelParams theta = {0.5, 1.4, 0.0, 0.0};
  ObservationMatrix y(3, 2);
  y.set(1, 0, true);
  y.set(2, 1, false);

  const ExactDistribution exact = exact_latent_posterior(y, theta, pop, fixed, 2);

  Rng rng(23, 0);
  StateMatrix x = simulate(theta, pop, fixed, 2, rng);
  RipplerChain chain(x, theta, &y, &pop, &fixed);
  std::vector<double> emp(exact.prob.size(), 0.0);
  const int n = 300000;
  for (int i = 0; i < n; ++i) {
    chain.step(rng);
    emp[lattice_bitmask(chain.state())] += 1.0;
  }
  for (double& v : emp) v /= n;
  CHECK(total_variation(emp, exact.prob) < 0.02);

  // reference implementation, fewer iterations (it rebuilds everything per step)
  RipplerConfig cfg;
  std::vector<double> emp_ref(exact.prob.size(), 0.0);
  const int n_ref = 60000;
  for (int i = 0; i < n_ref; ++i) {
    auto [x2, rec] = rippler_latent_update(x, theta, y, cfg, pop, fixed, rng);
    x = std::move(x2);
    emp_ref[lattice_bitmask(x)] += 1.0;
  }
  for (double& v : emp_ref) v /= n_ref;
  CHECK(total_variation(emp_ref, exact.prob) < 0.04);
}

TEST_CASE("multi-element chain agrees with the reference kernel") {
  // Changing several draw-matrix entries per proposal uses the simplified
  // sequence density 1/sum^k both ways; the fast chain must realise the
  // same kernel as the literal implementation. (Only the single-element
  // update is asserted against exact enumeration.)
  Population pop = flat_pop({0, 0});
  FixedModel fixed;
  fixed.p0 = 0.3;
  fixed.gamma = 0.5;
  fixed.t_star = 0.0;
  const ModelParams theta = {0.6, 1.0, 0.0, 0.0};
  ObservationMatrix y(3, 2);
  y.set(2, 0, true);

  Rng rng(24, 0);
  StateMatrix x0 = simulate(theta, pop, fixed, 2, rng);
  RipplerChain chain(x0, theta, &y, &pop, &fixed);
  std::vector<double> emp_fast(1u << 6, 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    chain.step(rng, 2);
    emp_fast[lattice_bitmask(chain.state())] += 1.0;
  }
  for (double& v : emp_fast) v /= n;

  RipplerConfig cfg;
  cfg.n_elements = 2;
  StateMatrix x = x0;
  std::vector<double> emp_ref(1u << 6, 0.0);
  const int n_ref = 200000;
  for (int i = 0; i < n_ref; ++i) {
    auto [x2, rec] = rippler_latent_update(x, theta, y, cfg, pop, fixed, rng);
    x = std::move(x2);
    emp_ref[lattice_bitmask(x)] += 1.0;
  }
  for (double& v : emp_ref) v /= n_ref;
  CHECK(total_variation(emp_fast, emp_ref) < 0.015);
}
