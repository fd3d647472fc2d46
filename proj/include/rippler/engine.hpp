#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "rippler/dataset.hpp"
#include "rippler/model.hpp"
#include "rippler/params.hpp"

namespace rippler {

enum class Algorithm { kRippler, kRj, kIffbs };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

/// Everything a run needs; serialisable to/from JSON so the manifest can
/// reproduce the run exactly.
struct RunConfig {
  Algorithm algorithm = Algorithm::kRippler;
  long iterations = 100000;  // outer MCMC sweeps
  int latent_updates = 400;  // latent updates per sweep
  int elements = 1;          // draw entries altered per proposal
  int block_size = 4;        // longest event-time change (weeks)
  long burn_in = 5000;
  long thin = 1;
  std::uint64_t seed = 1;
  int n_chains = 1;
  int n_steps = 0;  // 0: take the horizon from the data
  FixedModel fixed;
  PriorSpec priors;
  AdaptOptions adapt;
  ModelParams theta0 = {0.5, 0.5, 0.0, 0.0};
  ModelParams theta_true = {0.1, 1.5, 0.0, 0.0};  // simulate subcommand
  long checkpoint_every = 0;                      // iterations; 0 = off
  bool record_origin_acceptance = false;
  long stop_after = 0;  // debugging hook: pause the run at this iteration
  std::string data_dir;
  std::string out_dir;
};

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);

/// In-memory copy of what a chain persisted (post burn-in, thinned).
struct ChainResult {
  std::vector<long> retained_iterations;
  std::vector<ModelParams> theta_samples;
  std::vector<double> log_posterior;
  std::vector<std::vector<int>> counts;  // colonised count per time-step
  std::vector<std::vector<int>> jumps;   // per-iteration transition counts
  std::vector<long> origin_attempts;     // per ripple start row (optional)
  std::vector<long> origin_accepts;
  long param_attempts = 0;
  long param_accepts = 0;
  long latent_attempts = 0;
  long latent_accepts = 0;
  std::vector<double> occupancy;  // mean colonisation per cell, row-major
  bool completed = true;
};

struct InferResult {
  std::vector<ChainResult> chains;
  int n_steps = 0;
  int n_individuals = 0;
};

/// Run the configured sampler over the dataset, one worker per chain,
/// writing samples/latent summaries/jump counts/manifest under out_dir.
/// With resume = true each chain continues from its checkpoint.
InferResult run_infer(const RunConfig& config, const LoadedData& data,
                      bool resume = false);

/// Cooperative interruption flag: the engine checkpoints and returns when
/// it sees the flag (set it from a signal handler).
std::atomic<bool>& interrupt_flag();

struct SimulateResult {
  StateMatrix truth;
  ObservationMatrix observations;
  int n_positive = 0;
};

/// Draw a ground-truth epidemic and schedule-driven test results; persists
/// truth, tests (ingestible by run_infer) and a manifest under out_dir.
SimulateResult run_simulate(const RunConfig& config, const LoadedData& cohort);

/// Summarise a finished run directory: parameter medians and credible
/// intervals, MSJD report, colonised-count band, histograms. Reads only
/// persisted output, so rerunning is idempotent.
void run_diagnose(const std::string& run_dir, const std::string& truth_json,
                  const std::string& out_dir, double level = 0.95);

}  // namespace rippler
