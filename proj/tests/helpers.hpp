#pragma once

#include <vector>

#include "rippler/model.hpp"
#include "rippler/rng.hpp"

namespace rippler::test {

/// Population with the given household assignment and zero-centred covariates.
inline Population flat_pop(std::vector<int> households) {
  const std::size_t n = households.size();
  return Population(std::move(households), std::vector<double>(n, 0.0),
                    std::vector<double>(n, 0.0));
}

/// Small random population: households of size 1..4, centred covariates.
inline Population random_pop(int n, Rng& rng) {
  std::vector<int> hh(n);
  int house = 0;
  int left = 1 + static_cast<int>(rng.below(4));
  for (int j = 0; j < n; ++j) {
    if (left == 0) {
      ++house;
      left = 1 + static_cast<int>(rng.below(4));
    }
    hh[j] = house;
    --left;
  }
  std::vector<double> age(n), sex(n);
  for (int j = 0; j < n; ++j) {
    age[j] = rng.uniform(-15.0, 15.0);
    sex[j] = rng.unit() < 0.5 ? -0.5 : 0.5;
  }
  return Population(std::move(hh), std::move(age), std::move(sex));
}

inline ModelParams random_theta(Rng& rng) {
  return {rng.uniform(0.05, 0.6), rng.uniform(0.0, 2.5), rng.uniform(-0.02, 0.02),
          rng.uniform(-0.3, 0.3)};
}

inline FixedModel default_fixed() { return FixedModel{}; }

}  // namespace rippler::test
