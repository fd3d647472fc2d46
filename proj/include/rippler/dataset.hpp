#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rippler/model.hpp"

namespace rippler {

/// Study data after ingestion: dense ids, centred covariates, observation
/// lattice and the test schedule.
struct LoadedData {
  Population population;
  ObservationMatrix observations;
  int n_steps = 0;
  std::vector<std::string> ids;             // dense index -> external id
  std::vector<std::string> household_ids;   // dense household -> external id
  std::vector<std::pair<int, int>> schedule;  // (t, j) tested cells
};

/// Read households.tsv / covariates.tsv / tests.tsv from a directory.
/// Covariates are centred around their ingestion-time means. Week indices
/// run 1..T; T comes from n_steps_override or the largest week seen.
LoadedData load_dataset(const std::string& data_dir, int n_steps_override = 0);

/// Same population files plus schedule.tsv (tests without results), for
/// driving the simulator.
LoadedData load_cohort(const std::string& data_dir, int n_steps_override = 0);

/// Write the ingested dataset back out (ids via the mapping); inverse of
/// load_dataset up to row order.
void write_dataset(const LoadedData& data, const std::string& out_dir);

/// Synthetic study population shaped like the real cohort: 478 individuals
/// in 110 households (sizes mostly 2..8, median 4), right-skewed ages,
/// 59.8% female, and a staggered baseline/1/3/6-month test schedule over 62
/// weeks totalling exactly 1659 tests.
struct Cohort {
  std::vector<int> household_of;
  std::vector<double> age_years;
  std::vector<int> sex_male;
  std::vector<std::pair<int, int>> schedule;  // (t, j)
  int n_steps = 62;
};

Cohort make_cohort(std::uint64_t seed);

void write_cohort(const Cohort& cohort, const std::string& dir);

/// Centred-covariate population view of a cohort.
Population cohort_population(const Cohort& cohort);

}  // namespace rippler
