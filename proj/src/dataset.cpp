#include "rippler/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "rippler/io.hpp"
#include "rippler/rng.hpp"

namespace rippler {

namespace {

struct Roster {
  std::vector<std::string> ids;
  std::vector<std::string> household_ids;
  std::vector<int> household_of;
  std::map<std::string, int> index_of;
};

Roster read_households(const std::string& path) {
  const Table table = read_table(path);
  const int c_ind = table.column("individual");
  const int c_house = table.column("household");
  Roster roster;
  std::map<std::string, int> house_index;
  for (const auto& row : table.rows) {
    const std::string& id = row[c_ind];
    if (roster.index_of.count(id)) {
      throw ConsistencyError("individual '" + id + "' listed in more than one household");
    }
    const std::string& house = row[c_house];
    auto [it, fresh] = house_index.try_emplace(house, static_cast<int>(house_index.size()));
    if (fresh) roster.household_ids.push_back(house);
    roster.index_of[id] = static_cast<int>(roster.ids.size());
    roster.ids.push_back(id);
    roster.household_of.push_back(it->second);
  }
  if (roster.ids.empty()) throw ConsistencyError(path + ": no individuals");
  return roster;
}

Population read_covariates(const std::string& path, const Roster& roster) {
  const Table table = read_table(path);
  const int c_ind = table.column("individual");
  const int c_age = table.column("age");
  const int c_sex = table.column("sex");
  const int n = static_cast<int>(roster.ids.size());
  std::vector<double> age(n, 0.0), sex(n, 0.0);
  std::vector<bool> seen(n, false);
  for (const auto& row : table.rows) {
    const auto it = roster.index_of.find(row[c_ind]);
    if (it == roster.index_of.end()) {
      throw ConsistencyError("covariates: individual '" + row[c_ind] +
                             "' missing from households");
    }
    if (seen[it->second]) {
      throw ConsistencyError("covariates: duplicate individual '" + row[c_ind] + "'");
    }
    seen[it->second] = true;
    age[it->second] = parse_double(row[c_age], path);
    if (row[c_sex] == "F" || row[c_sex] == "f") {
      sex[it->second] = 0.0;
    } else if (row[c_sex] == "M" || row[c_sex] == "m") {
      sex[it->second] = 1.0;
    } else {
      throw ParseError(path + ": sex must be F or M, got '" + row[c_sex] + "'");
    }
  }
  for (int j = 0; j < n; ++j) {
    if (!seen[j]) {
      throw ConsistencyError("covariates: individual '" + roster.ids[j] + "' has no row");
    }
  }
  // centre both covariates around their means at ingestion time
  double age_mean = 0.0, sex_mean = 0.0;
  for (int j = 0; j < n; ++j) {
    age_mean += age[j];
    sex_mean += sex[j];
  }
  age_mean /= n;
  sex_mean /= n;
  for (int j = 0; j < n; ++j) {
    age[j] -= age_mean;
    sex[j] -= sex_mean;
  }
  return Population(roster.household_of, std::move(age), std::move(sex));
}

}  // namespace

LoadedData load_dataset(const std::string& data_dir, int n_steps_override) {
  const Roster roster = read_households(data_dir + "/households.tsv");
  Population pop = read_covariates(data_dir + "/covariates.tsv", roster);

  const std::string tests_path = data_dir + "/tests.tsv";
  const Table tests = read_table(tests_path);
  const int c_ind = tests.column("individual");
  const int c_week = tests.column("week");
  const int c_res = tests.column("result");

  int n_steps = n_steps_override;
  struct Row {
    int t, j;
    bool positive;
  };
  std::vector<Row> rows;
  std::set<std::pair<int, int>> dedupe;
  for (const auto& row : tests.rows) {
    const auto it = roster.index_of.find(row[c_ind]);
    if (it == roster.index_of.end()) {
      throw ConsistencyError("tests: individual '" + row[c_ind] +
                             "' missing from households");
    }
    const long week = parse_long(row[c_week], tests_path);
    if (week < 1 || (n_steps_override > 0 && week > n_steps_override)) {
      throw ParseError(tests_path + ": week " + std::to_string(week) + " out of range");
    }
    const long res = parse_long(row[c_res], tests_path);
    if (res != 0 && res != 1) {
      throw ParseError(tests_path + ": result must be 0 or 1");
    }
    if (!dedupe.emplace(static_cast<int>(week), it->second).second) {
      throw ConsistencyError("tests: duplicate row for individual '" + row[c_ind] +
                             "' week " + std::to_string(week));
    }
    rows.push_back({static_cast<int>(week), it->second, res == 1});
    n_steps = std::max(n_steps, static_cast<int>(week));
  }
  if (n_steps < 1) n_steps = 1;

  LoadedData data;
  data.observations = ObservationMatrix(n_steps + 1, pop.n());
  for (const Row& r : rows) {
    data.observations.set(r.t, r.j, r.positive);
    data.schedule.emplace_back(r.t, r.j);
  }
  data.population = std::move(pop);
  data.n_steps = n_steps;
  data.ids = roster.ids;
  data.household_ids = roster.household_ids;
  return data;
}

LoadedData load_cohort(const std::string& data_dir, int n_steps_override) {
  const Roster roster = read_households(data_dir + "/households.tsv");
  Population pop = read_covariates(data_dir + "/covariates.tsv", roster);

  const std::string path = data_dir + "/schedule.tsv";
  const Table sched = read_table(path);
  const int c_ind = sched.column("individual");
  const int c_week = sched.column("week");
  int n_steps = n_steps_override;
  std::vector<std::pair<int, int>> schedule;
  for (const auto& row : sched.rows) {
    const auto it = roster.index_of.find(row[c_ind]);
    if (it == roster.index_of.end()) {
      throw ConsistencyError("schedule: individual '" + row[c_ind] +
                             "' missing from households");
    }
    const long week = parse_long(row[c_week], path);
    if (week < 1) throw ParseError(path + ": week must be >= 1");
    schedule.emplace_back(static_cast<int>(week), it->second);
    n_steps = std::max(n_steps, static_cast<int>(week));
  }

  LoadedData data;
  data.population = std::move(pop);
  data.observations = ObservationMatrix(n_steps + 1, roster.ids.size());
  data.n_steps = n_steps;
  data.ids = roster.ids;
  data.household_ids = roster.household_ids;
  data.schedule = std::move(schedule);
  return data;
}

void write_dataset(const LoadedData& data, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string households = "individual\thousehold\n";
  for (std::size_t j = 0; j < data.ids.size(); ++j) {
    households += data.ids[j] + '\t' +
                  data.household_ids[data.population.household(static_cast<int>(j))] + '\n';
  }
  write_text_file(out_dir + "/households.tsv", households);

  // ages were centred at ingestion; re-centring the export is a no-op, so
  // the reloaded population is identical
  std::string covariates = "individual\tage\tsex\n";
  for (std::size_t j = 0; j < data.ids.size(); ++j) {
    covariates += data.ids[j] + '\t' +
                  format_double(data.population.age_c(static_cast<int>(j))) + '\t' +
                  (data.population.sex_c(static_cast<int>(j)) > 0.0 ? "M" : "F") + '\n';
  }
  write_text_file(out_dir + "/covariates.tsv", covariates);

  std::string tests = "individual\tweek\tresult\n";
  for (const TestCell& c : data.observations.cells()) {
    tests += data.ids[c.j] + '\t' + std::to_string(c.t) + '\t' +
             (c.positive ? "1" : "0") + '\n';
  }
  write_text_file(out_dir + "/tests.tsv", tests);
}

Cohort make_cohort(std::uint64_t seed) {
  Rng rng(seed, 0);
  Cohort cohort;
  const int n_target = 478;
  const int n_houses = 110;

  // household sizes: mostly 2..8, median 4, occasional 1 and up to 11
  const int size_support[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const double size_weight[] = {2, 16, 19, 20, 16, 12, 8, 5, 2, 1, 1};
  double wsum = 0.0;
  for (double w : size_weight) wsum += w;
  std::vector<int> sizes(n_houses);
  int total = 0;
  for (int h = 0; h < n_houses; ++h) {
    double r = rng.uniform(0.0, wsum);
    int pick = 0;
    while (pick < 10 && r >= size_weight[pick]) {
      r -= size_weight[pick];
      ++pick;
    }
    sizes[h] = size_support[pick];
    total += sizes[h];
  }
  while (total != n_target) {
    const int h = static_cast<int>(rng.below(n_houses));
    if (total < n_target && sizes[h] < 11) {
      ++sizes[h];
      ++total;
    } else if (total > n_target && sizes[h] > 1) {
      --sizes[h];
      --total;
    }
  }

  for (int h = 0; h < n_houses; ++h) {
    for (int k = 0; k < sizes[h]; ++k) {
      cohort.household_of.push_back(h);
      // right-skewed ages: exponential with mean ~20 years, capped at 90
      const double age = std::min(90.0, -20.2 * std::log(1.0 - rng.unit()));
      cohort.age_years.push_back(age);
      cohort.sex_male.push_back(rng.unit() < 0.402 ? 1 : 0);
    }
  }

  // staggered sampling: baseline week per household, follow-ups at one,
  // three and six months, some follow-ups missed
  cohort.n_steps = 62;
  const int offsets[] = {0, 4, 13, 26};
  const int n = static_cast<int>(cohort.household_of.size());
  std::vector<int> baseline(n_houses);
  for (int h = 0; h < n_houses; ++h) baseline[h] = 1 + static_cast<int>(rng.below(36));
  const double attend = (1659.0 / n - 1.0) / 3.0;
  std::set<std::pair<int, int>> cells;  // (j, week)
  for (int j = 0; j < n; ++j) {
    const int w0 = baseline[cohort.household_of[j]];
    cells.emplace(j, w0);
    for (int k = 1; k < 4; ++k) {
      if (rng.unit() < attend) cells.emplace(j, w0 + offsets[k]);
    }
  }
  // adjust follow-ups until the test count is exact
  while (static_cast<int>(cells.size()) != 1659) {
    const int j = static_cast<int>(rng.below(n));
    const int w0 = baseline[cohort.household_of[j]];
    const int w = w0 + offsets[1 + rng.below(3)];
    if (static_cast<int>(cells.size()) < 1659) {
      cells.emplace(j, w);
    } else if (cells.count({j, w})) {
      cells.erase({j, w});
    }
  }
  for (const auto& [j, w] : cells) cohort.schedule.emplace_back(w, j);
  std::sort(cohort.schedule.begin(), cohort.schedule.end());
  return cohort;
}

void write_cohort(const Cohort& cohort, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int n = static_cast<int>(cohort.household_of.size());
  auto id_of = [](int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "I%04d", j + 1);
    return std::string(buf);
  };
  auto house_of = [](int h) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "H%03d", h + 1);
    return std::string(buf);
  };
  std::string households = "individual\thousehold\n";
  for (int j = 0; j < n; ++j) {
    households += id_of(j) + '\t' + house_of(cohort.household_of[j]) + '\n';
  }
  write_text_file(dir + "/households.tsv", households);

  std::string covariates = "individual\tage\tsex\n";
  for (int j = 0; j < n; ++j) {
    covariates += id_of(j) + '\t' + format_double(cohort.age_years[j]) + '\t' +
                  (cohort.sex_male[j] ? "M" : "F") + '\n';
  }
  write_text_file(dir + "/covariates.tsv", covariates);

  std::string schedule = "individual\tweek\n";
  for (const auto& [w, j] : cohort.schedule) {
    schedule += id_of(j) + '\t' + std::to_string(w) + '\n';
  }
  write_text_file(dir + "/schedule.tsv", schedule);
}

Population cohort_population(const Cohort& cohort) {
  const int n = static_cast<int>(cohort.household_of.size());
  std::vector<double> age(cohort.age_years);
  std::vector<double> sex(n);
  double age_mean = 0.0, sex_mean = 0.0;
  for (int j = 0; j < n; ++j) {
    sex[j] = cohort.sex_male[j];
    age_mean += age[j];
    sex_mean += sex[j];
  }
  age_mean /= n;
  sex_mean /= n;
  for (int j = 0; j < n; ++j) {
    age[j] -= age_mean;
    sex[j] -= sex_mean;
  }
  return Population(cohort.household_of, std::move(age), std::move(sex));
}

}  // namespace rippler
