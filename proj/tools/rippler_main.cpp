#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <string>

#include "rippler/dataset.hpp"
#include "rippler/engine.hpp"
#include "rippler/io.hpp"

namespace {

void handle_signal(int) { rippler::interrupt_flag().store(true); }

void apply_common_flags(CLI::App* cmd, rippler::RunConfig& config, std::string& algorithm,
                        std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  cmd->add_option("--algorithm", algorithm, "rippler | rj | iffbs");
  cmd->add_option("--iterations", config.iterations, "outer MCMC iterations");
  cmd->add_option("--latent-updates", config.latent_updates, "latent updates per iteration");
  cmd->add_option("--elements", config.elements, "draw entries altered per proposal");
  cmd->add_option("--block-size", config.block_size, "largest event-time change (weeks)");
  cmd->add_option("--burn-in", config.burn_in, "iterations discarded before summaries");
  cmd->add_option("--thin", config.thin, "keep every n-th post burn-in sample");
  cmd->add_option("--seed", config.seed, "64-bit RNG seed");
  cmd->add_option("--chains", config.n_chains, "independent chains (parallel workers)");
  cmd->add_option("--steps", config.n_steps, "time horizon T (default: from data)");
  cmd->add_option("--checkpoint-every", config.checkpoint_every,
                  "write a resumable checkpoint every n iterations");
  cmd->add_option("--data-dir", config.data_dir, "input table directory");
  cmd->add_option("--out-dir", config.out_dir, "output directory");
  cmd->add_option("--gamma", config.fixed.gamma, "de-colonisation rate per week");
  cmd->add_option("--p0", config.fixed.p0, "initial colonisation probability");
  cmd->add_option("--sens", config.fixed.sens, "test sensitivity");
  cmd->add_option("--spec", config.fixed.spec, "test specificity");
  cmd->add_option("--t-star", config.fixed.t_star, "seasonal offset (weeks)");
  cmd->add_option("--period", config.fixed.period, "seasonal period (weeks)");
  cmd->add_option("--prior-rate-g", config.priors.mu_g, "exponential rate for beta_g");
  cmd->add_option("--prior-rate-h", config.priors.mu_h, "exponential rate for beta_h");
  cmd->add_option("--prior-rate-a", config.priors.mu_a, "Laplace rate for delta_age");
  cmd->add_option("--prior-rate-s", config.priors.mu_s, "Laplace rate for delta_sex");
}

rippler::RunConfig merge_config(const std::string& config_path, CLI::App* cmd,
                                const rippler::RunConfig& flag_values) {
  if (config_path.empty()) return flag_values;
  // file first, explicit flags on top
  rippler::RunConfig merged =
      rippler::config_from_json(rippler::read_text_file(config_path));
  auto take = [&](const char* name, auto member) {
    if (cmd->count(name) > 0) merged.*member = flag_values.*member;
  };
  take("--iterations", &rippler::RunConfig::iterations);
  take("--latent-updates", &rippler::RunConfig::latent_updates);
  take("--elements", &rippler::RunConfig::elements);
  take("--block-size", &rippler::RunConfig::block_size);
  take("--burn-in", &rippler::RunConfig::burn_in);
  take("--thin", &rippler::RunConfig::thin);
  take("--seed", &rippler::RunConfig::seed);
  take("--chains", &rippler::RunConfig::n_chains);
  take("--steps", &rippler::RunConfig::n_steps);
  take("--checkpoint-every", &rippler::RunConfig::checkpoint_every);
  if (cmd->count("--data-dir")) merged.data_dir = flag_values.data_dir;
  if (cmd->count("--out-dir")) merged.out_dir = flag_values.out_dir;
  if (cmd->count("--gamma")) merged.fixed.gamma = flag_values.fixed.gamma;
  if (cmd->count("--p0")) merged.fixed.p0 = flag_values.fixed.p0;
  if (cmd->count("--sens")) merged.fixed.sens = flag_values.fixed.sens;
  if (cmd->count("--spec")) merged.fixed.spec = flag_values.fixed.spec;
  if (cmd->count("--t-star")) merged.fixed.t_star = flag_values.fixed.t_star;
  if (cmd->count("--period")) merged.fixed.period = flag_values.fixed.period;
  if (cmd->count("--prior-rate-g")) merged.priors.mu_g = flag_values.priors.mu_g;
  if (cmd->count("--prior-rate-h")) merged.priors.mu_h = flag_values.priors.mu_h;
  if (cmd->count("--prior-rate-a")) merged.priors.mu_a = flag_values.priors.mu_a;
  if (cmd->count("--prior-rate-s")) merged.priors.mu_s = flag_values.priors.mu_s;
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference for individual-based colonisation models"};
  app.require_subcommand(1);

  rippler::RunConfig config;
  std::string algorithm = "rippler";
  std::string config_path;
  bool resume = false;
  std::string truth_path;
  std::string run_dir;
  std::string diag_out;
  std::vector<double> theta_true_flag;

  CLI::App* sim = app.add_subcommand("simulate", "draw a ground-truth epidemic and tests");
  apply_common_flags(sim, config, algorithm, config_path);
  sim->add_option("--theta-true", theta_true_flag,
                  "generating parameters beta_g beta_h delta_age delta_sex")
      ->expected(4);

  CLI::App* infer = app.add_subcommand("infer", "run the MCMC over a dataset");
  apply_common_flags(infer, config, algorithm, config_path);
  infer->add_flag("--resume", resume, "continue from per-chain checkpoints");
  infer->add_flag("--origin-acceptance", config.record_origin_acceptance,
                  "record latent acceptance by ripple start time");

  CLI::App* diag = app.add_subcommand("diagnose", "summarise a finished run");
  diag->add_option("--run-dir", run_dir, "directory written by infer")->required();
  diag->add_option("--truth", truth_path, "truth.json from simulate (optional)");
  diag->add_option("--out-dir", diag_out, "output directory (default <run-dir>/diagnostics)");

  CLI::App* cohort_cmd =
      app.add_subcommand("make-cohort", "write a synthetic study population");
  std::uint64_t cohort_seed = 1;
  std::string cohort_dir = "cohort";
  cohort_cmd->add_option("--seed", cohort_seed, "cohort RNG seed");
  cohort_cmd->add_option("--out-dir", cohort_dir, "directory for the cohort tables");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  try {
    if (cohort_cmd->parsed()) {
      const rippler::Cohort cohort = rippler::make_cohort(cohort_seed);
      rippler::write_cohort(cohort, cohort_dir);
      std::printf("wrote %zu individuals, %d households, %zu scheduled tests to %s\n",
                  cohort.household_of.size(),
                  1 + *std::max_element(cohort.household_of.begin(),
                                        cohort.household_of.end()),
                  cohort.schedule.size(), cohort_dir.c_str());
      return 0;
    }
    if (sim->parsed()) {
      rippler::RunConfig cfg = merge_config(config_path, sim, config);
      if (theta_true_flag.size() == 4) {
        cfg.theta_true = {theta_true_flag[0], theta_true_flag[1], theta_true_flag[2],
                          theta_true_flag[3]};
      }
      const rippler::LoadedData cohort = rippler::load_cohort(cfg.data_dir, cfg.n_steps);
      const rippler::SimulateResult result = rippler::run_simulate(cfg, cohort);
      std::printf("simulated %d steps x %d individuals; %zu tests, %d positive\n",
                  cohort.n_steps, cohort.population.n(),
                  result.observations.n_tested(), result.n_positive);
      return 0;
    }
    if (infer->parsed()) {
      rippler::RunConfig cfg = merge_config(config_path, infer, config);
      cfg.algorithm = rippler::algorithm_from_string(algorithm);
      const rippler::LoadedData data = rippler::load_dataset(cfg.data_dir, cfg.n_steps);
      const rippler::InferResult result = rippler::run_infer(cfg, data, resume);
      bool complete = true;
      for (const auto& chain : result.chains) complete = complete && chain.completed;
      if (!complete) {
        std::printf("interrupted; checkpoints written under %s\n", cfg.out_dir.c_str());
        return 130;
      }
      std::printf("finished %ld iterations x %d chains; outputs under %s\n",
                  cfg.iterations, cfg.n_chains, cfg.out_dir.c_str());
      return 0;
    }
    if (diag->parsed()) {
      if (diag_out.empty()) diag_out = run_dir + "/diagnostics";
      rippler::run_diagnose(run_dir, truth_path, diag_out);
      std::printf("diagnostics written to %s\n", diag_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
