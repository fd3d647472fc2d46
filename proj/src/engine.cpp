#include "rippler/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <thread>

#include "rippler/diagnostics.hpp"
#include "rippler/iffbs.hpp"
#include "rippler/io.hpp"
#include "rippler/rippler_sampler.hpp"
#include "rippler/rj.hpp"
#include "rippler/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rippler {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kRippler: return "rippler";
    case Algorithm::kRj: return "rj";
    case Algorithm::kIffbs: return "iffbs";
  }
  return "rippler";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "rippler") return Algorithm::kRippler;
  if (s == "rj") return Algorithm::kRj;
  if (s == "iffbs") return Algorithm::kIffbs;
  throw ParseError("unknown algorithm '" + s + "' (expected rippler|rj|iffbs)");
}

namespace {

json params_to_json(const ModelParams& p) {
  return json::array({p.beta_g, p.beta_h, p.delta_age, p.delta_sex});
}

ModelParams params_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

json config_json(const RunConfig& c) {
  json j;
  j["algorithm"] = to_string(c.algorithm);
  j["iterations"] = c.iterations;
  j["latent_updates"] = c.latent_updates;
  j["elements"] = c.elements;
  j["block_size"] = c.block_size;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["n_chains"] = c.n_chains;
  j["n_steps"] = c.n_steps;
  j["fixed"] = {{"gamma", c.fixed.gamma},   {"p0", c.fixed.p0},
                {"sens", c.fixed.sens},     {"spec", c.fixed.spec},
                {"dt", c.fixed.dt},         {"t_star", c.fixed.t_star},
                {"period", c.fixed.period}};
  j["priors"] = {{"mu_g", c.priors.mu_g},
                 {"mu_h", c.priors.mu_h},
                 {"mu_a", c.priors.mu_a},
                 {"mu_s", c.priors.mu_s}};
  j["adapt"] = {{"epsilon", c.adapt.epsilon},
                {"kappa0", c.adapt.kappa0},
                {"target_accept", c.adapt.target_accept},
                {"scale_gain", c.adapt.scale_gain},
                {"scale_decay", c.adapt.scale_decay},
                {"shaping_offset", c.adapt.shaping_offset},
                {"shaping_decay", c.adapt.shaping_decay},
                {"sigma0_sd", c.adapt.sigma0_sd},
                {"freeze_after_burnin", c.adapt.freeze_after_burnin}};
  j["theta0"] = params_to_json(c.theta0);
  j["theta_true"] = params_to_json(c.theta_true);
  j["checkpoint_every"] = c.checkpoint_every;
  j["record_origin_acceptance"] = c.record_origin_acceptance;
  j["stop_after"] = c.stop_after;
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  return j;
}

RunConfig config_from(const json& j) {
  RunConfig c;
  if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j["algorithm"]);
  c.iterations = j.value("iterations", c.iterations);
  c.latent_updates = j.value("latent_updates", c.latent_updates);
  c.elements = j.value("elements", c.elements);
  c.block_size = j.value("block_size", c.block_size);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  c.n_chains = j.value("n_chains", c.n_chains);
  c.n_steps = j.value("n_steps", c.n_steps);
  if (j.contains("fixed")) {
    const json& f = j["fixed"];
    c.fixed.gamma = f.value("gamma", c.fixed.gamma);
    c.fixed.p0 = f.value("p0", c.fixed.p0);
    c.fixed.sens = f.value("sens", c.fixed.sens);
    c.fixed.spec = f.value("spec", c.fixed.spec);
    c.fixed.dt = f.value("dt", c.fixed.dt);
    c.fixed.t_star = f.value("t_star", c.fixed.t_star);
    c.fixed.period = f.value("period", c.fixed.period);
  }
  if (j.contains("priors")) {
    const json& p = j["priors"];
    c.priors.mu_g = p.value("mu_g", c.priors.mu_g);
    c.priors.mu_h = p.value("mu_h", c.priors.mu_h);
    c.priors.mu_a = p.value("mu_a", c.priors.mu_a);
    c.priors.mu_s = p.value("mu_s", c.priors.mu_s);
  }
  if (j.contains("adapt")) {
    const json& a = j["adapt"];
    c.adapt.epsilon = a.value("epsilon", c.adapt.epsilon);
    c.adapt.kappa0 = a.value("kappa0", c.adapt.kappa0);
    c.adapt.target_accept = a.value("target_accept", c.adapt.target_accept);
    c.adapt.scale_gain = a.value("scale_gain", c.adapt.scale_gain);
    c.adapt.scale_decay = a.value("scale_decay", c.adapt.scale_decay);
    c.adapt.shaping_offset = a.value("shaping_offset", c.adapt.shaping_offset);
    c.adapt.shaping_decay = a.value("shaping_decay", c.adapt.shaping_decay);
    if (a.contains("sigma0_sd")) {
      for (int i = 0; i < 4; ++i) c.adapt.sigma0_sd[i] = a["sigma0_sd"].at(i);
    }
    c.adapt.freeze_after_burnin = a.value("freeze_after_burnin", c.adapt.freeze_after_burnin);
  }
  if (j.contains("theta0")) c.theta0 = params_from_json(j["theta0"]);
  if (j.contains("theta_true")) c.theta_true = params_from_json(j["theta_true"]);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.record_origin_acceptance = j.value("record_origin_acceptance", c.record_origin_acceptance);
  c.stop_after = j.value("stop_after", c.stop_after);
  c.data_dir = j.value("data_dir", c.data_dir);
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

std::atomic<bool> g_interrupted{false};

/// Uniform latent-update interface over the three samplers.
class LatentSampler {
 public:
  virtual ~LatentSampler() = default;
  virtual const StateMatrix& state() const = 0;
  virtual void set_theta(const ModelParams& theta) = 0;
  virtual void begin_iteration(Rng& rng) = 0;
  virtual bool update(Rng& rng) = 0;  // true when the state changed hands
  virtual int last_origin_row() const { return -1; }
};

class RipplerLatent final : public LatentSampler {
 public:
  RipplerLatent(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
                const Population* pop, const FixedModel* fixed, int elements)
      : chain_(std::move(x), theta, y, pop, fixed), elements_(elements) {}
  const StateMatrix& state() const override { return chain_.state(); }
  void set_theta(const ModelParams& theta) override {
    chain_.set_theta(theta);
    fresh_ = true;
  }
  void begin_iteration(Rng&) override {
    // bulk mass refresh once per sweep keeps Fenwick rounding drift at bay
    if (!fresh_) chain_.refresh_masses();
    fresh_ = false;
  }
  bool update(Rng& rng) override {
    try {
      const RipplerStepRecord rec = chain_.step(rng, elements_);
      origin_ = rec.origins.front().first;
      for (const auto& [t, j] : rec.origins) origin_ = std::min(origin_, t);
      return rec.accepted;
    } catch (const NoPerturbableCell&) {
      origin_ = -1;
      return false;
    }
  }
  int last_origin_row() const override { return origin_; }

 private:
  RipplerChain chain_;
  int elements_;
  int origin_ = -1;
  bool fresh_ = true;
};

class RjLatent final : public LatentSampler {
 public:
  RjLatent(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
           const Population* pop, const FixedModel* fixed, int block)
      : chain_(std::move(x), theta, y, pop, fixed, RjConfig{block}) {}
  const StateMatrix& state() const override { return chain_.state(); }
  void set_theta(const ModelParams& theta) override { chain_.set_theta(theta); }
  void begin_iteration(Rng& rng) override { chain_.initial_step(rng); }
  bool update(Rng& rng) override { return chain_.interior_step(rng); }

 private:
  RjChain chain_;
};

class IffbsLatent final : public LatentSampler {
 public:
  IffbsLatent(StateMatrix x, const ModelParams& theta, const ObservationMatrix* y,
              const Population* pop, const FixedModel* fixed)
      : chain_(std::move(x), theta, y, pop, fixed) {}
  const StateMatrix& state() const override { return chain_.state(); }
  void set_theta(const ModelParams& theta) override { chain_.set_theta(theta); }
  void begin_iteration(Rng&) override {}
  bool update(Rng& rng) override {
    chain_.step(rng);
    return true;  // Gibbs draw
  }

 private:
  IffbsChain chain_;
};

std::unique_ptr<LatentSampler> make_sampler(const RunConfig& config, StateMatrix x,
                                            const ModelParams& theta,
                                            const ObservationMatrix* y,
                                            const Population* pop,
                                            const FixedModel* fixed) {
  switch (config.algorithm) {
    case Algorithm::kRippler:
      return std::make_unique<RipplerLatent>(std::move(x), theta, y, pop, fixed,
                                             config.elements);
    case Algorithm::kRj:
      return std::make_unique<RjLatent>(std::move(x), theta, y, pop, fixed,
                                        config.block_size);
    case Algorithm::kIffbs:
      return std::make_unique<IffbsLatent>(std::move(x), theta, y, pop, fixed);
  }
  throw ParseError("unreachable");
}

std::vector<int> state_cells(const StateMatrix& x) {
  std::vector<int> cells(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) cells[i] = x.data()[i];
  return cells;
}

StateMatrix state_from_cells(const std::vector<int>& cells, int rows, int cols) {
  StateMatrix x(rows, cols);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    x.data()[i] = static_cast<std::uint8_t>(cells[i]);
  }
  return x;
}

json adapt_to_json(const AdaptState& a) {
  json j;
  j["kappa"] = a.kappa;
  std::vector<double> sig;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) sig.push_back(a.sigma[i][k]);
  }
  j["sigma"] = sig;
  j["mean"] = a.mean;
  j["n"] = a.n;
  j["n_accept"] = a.n_accept;
  j["frozen"] = a.frozen;
  return j;
}

void adapt_from_json(const json& j, AdaptState& a) {
  a.kappa = j.at("kappa");
  const std::vector<double> sig = j.at("sigma");
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) a.sigma[i][k] = sig[i * 4 + k];
  }
  for (int i = 0; i < 4; ++i) a.mean[i] = j.at("mean").at(i);
  a.n = j.at("n");
  a.n_accept = j.at("n_accept");
  a.frozen = j.at("frozen");
}

struct ChainFiles {
  std::ofstream samples;
  std::ofstream counts;
  std::ofstream jumps;
};

struct CheckpointData {
  long iteration = 0;
  ModelParams theta;
  std::uint64_t rng_position = 0;
  AdaptState adapt;
  StateMatrix state;
  long samples_bytes = 0, counts_bytes = 0, jumps_bytes = 0;
  std::vector<long> occupancy;
  long retained = 0;
  long param_attempts = 0, param_accepts = 0;
  long latent_attempts = 0, latent_accepts = 0;
  std::vector<long> origin_attempts, origin_accepts;
};

void write_checkpoint(const std::string& dir, const CheckpointData& cp) {
  json j;
  j["iteration"] = cp.iteration;
  j["theta"] = params_to_json(cp.theta);
  j["rng_position"] = cp.rng_position;
  j["adapt"] = adapt_to_json(cp.adapt);
  j["rows"] = cp.state.rows();
  j["cols"] = cp.state.cols();
  j["state_rle"] = rle_encode(state_cells(cp.state));
  j["samples_bytes"] = cp.samples_bytes;
  j["counts_bytes"] = cp.counts_bytes;
  j["jumps_bytes"] = cp.jumps_bytes;
  j["occupancy"] = cp.occupancy;
  j["retained"] = cp.retained;
  j["param_attempts"] = cp.param_attempts;
  j["param_accepts"] = cp.param_accepts;
  j["latent_attempts"] = cp.latent_attempts;
  j["latent_accepts"] = cp.latent_accepts;
  j["origin_attempts"] = cp.origin_attempts;
  j["origin_accepts"] = cp.origin_accepts;
  const std::string tmp = dir + "/checkpoint.json.tmp";
  write_text_file(tmp, j.dump());
  fs::rename(tmp, dir + "/checkpoint.json");
}

CheckpointData read_checkpoint(const std::string& dir) {
  const json j = json::parse(read_text_file(dir + "/checkpoint.json"));
  CheckpointData cp;
  cp.iteration = j.at("iteration");
  cp.theta = params_from_json(j.at("theta"));
  cp.rng_position = j.at("rng_position");
  cp.adapt = AdaptState{};
  adapt_from_json(j.at("adapt"), cp.adapt);
  cp.state = state_from_cells(rle_decode(j.at("state_rle")), j.at("rows"), j.at("cols"));
  cp.samples_bytes = j.at("samples_bytes");
  cp.counts_bytes = j.at("counts_bytes");
  cp.jumps_bytes = j.at("jumps_bytes");
  cp.occupancy = j.at("occupancy").get<std::vector<long>>();
  cp.retained = j.at("retained");
  cp.param_attempts = j.at("param_attempts");
  cp.param_accepts = j.at("param_accepts");
  cp.latent_attempts = j.at("latent_attempts");
  cp.latent_accepts = j.at("latent_accepts");
  cp.origin_attempts = j.at("origin_attempts").get<std::vector<long>>();
  cp.origin_accepts = j.at("origin_accepts").get<std::vector<long>>();
  return cp;
}

constexpr const char* kSamplesHeader =
    "iteration\tbeta_g\tbeta_h\tdelta_age\tdelta_sex\tlog_posterior\tparam_accepted\t"
    "latent_accepted\tlatent_attempted\n";

/// One chain of the Metropolis-within-Gibbs loop, persisting as it goes.
ChainResult run_chain(const RunConfig& config, const LoadedData& data, int chain_index,
                      const std::string& chain_dir, bool resume) {
  const Population& pop = data.population;
  const FixedModel& fixed = config.fixed;
  const int n_steps = data.n_steps;
  const int rows = n_steps + 1;

  fs::create_directories(chain_dir);
  Rng rng(config.seed, 1 + static_cast<std::uint64_t>(chain_index));

  ModelParams theta = config.theta0;
  AdaptState adapt = AdaptState::init(config.adapt, theta);
  long start_iteration = 0;

  ChainResult result;
  result.origin_attempts.assign(config.record_origin_acceptance ? rows : 0, 0);
  result.origin_accepts.assign(config.record_origin_acceptance ? rows : 0, 0);
  std::vector<long> occupancy(static_cast<std::size_t>(rows) * pop.n(), 0);
  long retained = 0;

  std::unique_ptr<LatentSampler> sampler;
  const std::string samples_path = chain_dir + "/samples.tsv";
  const std::string counts_path = chain_dir + "/latent_counts.tsv";
  const std::string jumps_path = chain_dir + "/jumps.tsv";

  ChainFiles files;
  if (resume && fs::exists(chain_dir + "/checkpoint.json")) {
    CheckpointData cp = read_checkpoint(chain_dir);
    theta = cp.theta;
    adapt = AdaptState::init(config.adapt, theta);  // options from config ...
    adapt.kappa = cp.adapt.kappa;                   // ... trajectory from the checkpoint
    adapt.sigma = cp.adapt.sigma;
    adapt.mean = cp.adapt.mean;
    adapt.n = cp.adapt.n;
    adapt.n_accept = cp.adapt.n_accept;
    adapt.frozen = cp.adapt.frozen;
    start_iteration = cp.iteration;
    rng.set_position(cp.rng_position);
    occupancy = std::vector<long>(cp.occupancy.begin(), cp.occupancy.end());
    retained = cp.retained;
    result.param_attempts = cp.param_attempts;
    result.param_accepts = cp.param_accepts;
    result.latent_attempts = cp.latent_attempts;
    result.latent_accepts = cp.latent_accepts;
    if (config.record_origin_acceptance) {
      result.origin_attempts = cp.origin_attempts;
      result.origin_accepts = cp.origin_accepts;
    }
    fs::resize_file(samples_path, cp.samples_bytes);
    fs::resize_file(counts_path, cp.counts_bytes);
    fs::resize_file(jumps_path, cp.jumps_bytes);
    files.samples.open(samples_path, std::ios::binary | std::ios::app);
    files.counts.open(counts_path, std::ios::binary | std::ios::app);
    files.jumps.open(jumps_path, std::ios::binary | std::ios::app);
    sampler = make_sampler(config, std::move(cp.state), theta, &data.observations, &pop,
                           &fixed);
  } else {
    files.samples.open(samples_path, std::ios::binary | std::ios::trunc);
    files.counts.open(counts_path, std::ios::binary | std::ios::trunc);
    files.jumps.open(jumps_path, std::ios::binary | std::ios::trunc);
    files.samples << kSamplesHeader;
    files.counts << "iteration\tcounts_rle\n";
    files.jumps << "iteration\tjumps_rle\n";
    // draw the initial lattice from the transmission model at theta0
    StateMatrix x0 = simulate(theta, pop, fixed, n_steps, rng);
    sampler = make_sampler(config, std::move(x0), theta, &data.observations, &pop, &fixed);
  }

  StateMatrix snapshot = sampler->state();
  auto checkpoint_now = [&](long k) {
    files.samples.flush();
    files.counts.flush();
    files.jumps.flush();
    CheckpointData cp;
    cp.iteration = k;
    cp.theta = theta;
    cp.rng_position = rng.position();
    cp.adapt = adapt;
    cp.state = sampler->state();
    cp.samples_bytes = static_cast<long>(fs::file_size(samples_path));
    cp.counts_bytes = static_cast<long>(fs::file_size(counts_path));
    cp.jumps_bytes = static_cast<long>(fs::file_size(jumps_path));
    cp.occupancy = occupancy;
    cp.retained = retained;
    cp.param_attempts = result.param_attempts;
    cp.param_accepts = result.param_accepts;
    cp.latent_attempts = result.latent_attempts;
    cp.latent_accepts = result.latent_accepts;
    cp.origin_attempts = result.origin_attempts;
    cp.origin_accepts = result.origin_accepts;
    write_checkpoint(chain_dir, cp);
  };

  for (long k = start_iteration + 1; k <= config.iterations; ++k) {
    if (config.adapt.freeze_after_burnin && k > config.burn_in) adapt.frozen = true;

    const RwmResult step = rwm_step(theta, sampler->state(), adapt, config.priors, pop,
                                    fixed, rng);
    result.param_attempts += 1;
    if (step.accepted) {
      result.param_accepts += 1;
      theta = step.theta;
      sampler->set_theta(theta);
    }
    sampler->begin_iteration(rng);

    long accepted_here = 0;
    for (int u = 0; u < config.latent_updates; ++u) {
      const bool accepted = sampler->update(rng);
      accepted_here += accepted;
      if (config.record_origin_acceptance) {
        const int origin = sampler->last_origin_row();
        if (origin >= 0) {
          result.origin_attempts[origin] += 1;
          result.origin_accepts[origin] += accepted;
        }
      }
    }
    result.latent_attempts += config.latent_updates;
    result.latent_accepts += accepted_here;

    // per-iteration squared jumps against the previous sweep's snapshot
    const StateMatrix& x = sampler->state();
    std::vector<int> jump_row(rows, 0);
    for (int t = 0; t < rows; ++t) {
      const std::uint8_t* a = snapshot.row(t);
      const std::uint8_t* b = x.row(t);
      int d = 0;
      for (int j = 0; j < pop.n(); ++j) d += a[j] != b[j];
      jump_row[t] = d;
    }
    snapshot = x;
    files.jumps << k << '\t' << rle_encode(jump_row) << '\n';
    result.jumps.push_back(std::move(jump_row));

    if (k > config.burn_in && (k - config.burn_in - 1) % config.thin == 0) {
      const double log_post = param_log_posterior(theta, x, config.priors, pop, fixed) +
                              observation_log_density(data.observations, x, fixed);
      files.samples << k << '\t' << format_double(theta.beta_g) << '\t'
                    << format_double(theta.beta_h) << '\t'
                    << format_double(theta.delta_age) << '\t'
                    << format_double(theta.delta_sex) << '\t' << format_double(log_post)
                    << '\t' << (step.accepted ? 1 : 0) << '\t' << accepted_here << '\t'
                    << config.latent_updates << '\n';
      std::vector<int> counts_row(rows, 0);
      for (int t = 0; t < rows; ++t) {
        int c = 0;
        for (int j = 0; j < pop.n(); ++j) c += x(t, j);
        counts_row[t] = c;
        for (int j = 0; j < pop.n(); ++j) {
          occupancy[static_cast<std::size_t>(t) * pop.n() + j] += x(t, j);
        }
      }
      files.counts << k << '\t' << rle_encode(counts_row) << '\n';
      result.retained_iterations.push_back(k);
      result.theta_samples.push_back(theta);
      result.log_posterior.push_back(log_post);
      result.counts.push_back(std::move(counts_row));
      retained += 1;
    }

    if (config.checkpoint_every > 0 && k % config.checkpoint_every == 0) {
      checkpoint_now(k);
    }
    if ((config.stop_after > 0 && k >= config.stop_after && k < config.iterations) ||
        g_interrupted.load()) {
      checkpoint_now(k);
      result.completed = false;
      break;
    }
  }

  result.occupancy.assign(occupancy.size(), 0.0);
  if (retained > 0) {
    for (std::size_t i = 0; i < occupancy.size(); ++i) {
      result.occupancy[i] = static_cast<double>(occupancy[i]) / retained;
    }
  }
  if (result.completed) {
    std::string occ;
    occ.reserve(occupancy.size() * 8);
    for (int t = 0; t < rows; ++t) {
      occ += std::to_string(t);
      for (int j = 0; j < pop.n(); ++j) {
        occ += '\t';
        occ += format_double(result.occupancy[static_cast<std::size_t>(t) * pop.n() + j]);
      }
      occ += '\n';
    }
    write_text_file(chain_dir + "/occupancy.tsv", occ);
    if (config.record_origin_acceptance) {
      std::string acc = "origin_t\tattempts\taccepts\n";
      for (int t = 0; t < rows; ++t) {
        acc += std::to_string(t) + '\t' + std::to_string(result.origin_attempts[t]) +
               '\t' + std::to_string(result.origin_accepts[t]) + '\n';
      }
      write_text_file(chain_dir + "/acceptance_by_origin.tsv", acc);
    }
  }
  return result;
}

/// Rebuild the in-memory view of a resumed chain's already-written rows.
void reload_persisted(ChainResult& result, const std::string& chain_dir) {
  const Table samples = read_table(chain_dir + "/samples.tsv");
  const int c_it = samples.column("iteration");
  const int c_bg = samples.column("beta_g");
  const int c_bh = samples.column("beta_h");
  const int c_da = samples.column("delta_age");
  const int c_ds = samples.column("delta_sex");
  const int c_lp = samples.column("log_posterior");
  std::vector<long> iters;
  std::vector<ModelParams> thetas;
  std::vector<double> log_post;
  for (const auto& row : samples.rows) {
    iters.push_back(parse_long(row[c_it], "samples"));
    thetas.push_back({parse_double(row[c_bg], "samples"), parse_double(row[c_bh], "samples"),
                      parse_double(row[c_da], "samples"),
                      parse_double(row[c_ds], "samples")});
    log_post.push_back(parse_double(row[c_lp], "samples"));
  }
  const Table counts = read_table(chain_dir + "/latent_counts.tsv");
  const int cc_rle = counts.column("counts_rle");
  std::vector<std::vector<int>> count_rows;
  for (const auto& row : counts.rows) count_rows.push_back(rle_decode(row[cc_rle]));
  const Table jumps = read_table(chain_dir + "/jumps.tsv");
  const int cj_rle = jumps.column("jumps_rle");
  std::vector<std::vector<int>> jump_rows;
  for (const auto& row : jumps.rows) jump_rows.push_back(rle_decode(row[cj_rle]));

  result.retained_iterations = std::move(iters);
  result.theta_samples = std::move(thetas);
  result.log_posterior = std::move(log_post);
  result.counts = std::move(count_rows);
  result.jumps = std::move(jump_rows);
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig config_from_json(const std::string& text) {
  return config_from(json::parse(text));
}

std::atomic<bool>& interrupt_flag() { return g_interrupted; }

InferResult run_infer(const RunConfig& config, const LoadedData& data, bool resume) {
  if (config.burn_in >= config.iterations) {
    throw ParseError("burn_in must be smaller than iterations");
  }
  if (data.observations.n_tested() == 0) {
    std::fprintf(stderr,
                 "warning: no test results; the posterior over the latent states "
                 "equals the prior\n");
  }
  fs::create_directories(config.out_dir);

  json manifest;
  manifest["tool"] = "rippler";
  manifest["version"] = "0.1.0";
  manifest["kind"] = "infer";
  manifest["rng"] = Rng::kAlgorithm;
  manifest["rng_streams"] = "simulate: 0; chain i: 1+i";
  manifest["n_individuals"] = data.population.n();
  manifest["n_steps"] = data.n_steps;
  manifest["n_tests"] = data.observations.n_tested();
  manifest["config"] = config_json(config);
  write_text_file(config.out_dir + "/manifest.json", manifest.dump(2));

  std::string id_map = "index\tindividual\thousehold\n";
  for (std::size_t j = 0; j < data.ids.size(); ++j) {
    id_map += std::to_string(j) + '\t' + data.ids[j] + '\t' +
              data.household_ids[data.population.household(static_cast<int>(j))] + '\n';
  }
  write_text_file(config.out_dir + "/id_map.tsv", id_map);

  InferResult result;
  result.n_steps = data.n_steps;
  result.n_individuals = data.population.n();
  result.chains.resize(config.n_chains);

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(config.n_chains);
  for (int c = 0; c < config.n_chains; ++c) {
    workers.emplace_back([&, c]() {
      try {
        const std::string chain_dir = config.out_dir + "/chain" + std::to_string(c);
        const bool resuming = resume && fs::exists(chain_dir + "/checkpoint.json");
        result.chains[c] = run_chain(config, data, c, chain_dir, resume);
        if (resuming) {
          ChainResult& r = result.chains[c];
          reload_persisted(r, chain_dir);
        }
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

SimulateResult run_simulate(const RunConfig& config, const LoadedData& cohort) {
  fs::create_directories(config.out_dir);
  Rng rng(config.seed, 0);
  const int n_steps = config.n_steps > 0 ? config.n_steps : cohort.n_steps;

  SimulateResult sim;
  sim.truth = simulate(config.theta_true, cohort.population, config.fixed, n_steps, rng);
  sim.observations = simulate_observations(sim.truth, cohort.schedule, config.fixed, rng);
  for (const TestCell& c : sim.observations.cells()) sim.n_positive += c.positive;

  std::string truth_x;
  truth_x.reserve(sim.truth.size() * 2);
  for (int t = 0; t <= n_steps; ++t) {
    truth_x += std::to_string(t);
    for (int j = 0; j < cohort.population.n(); ++j) {
      truth_x += '\t';
      truth_x += sim.truth(t, j) ? '1' : '0';
    }
    truth_x += '\n';
  }
  write_text_file(config.out_dir + "/truth_x.tsv", truth_x);

  std::string tests = "individual\tweek\tresult\n";
  for (const TestCell& c : sim.observations.cells()) {
    tests += cohort.ids[c.j] + '\t' + std::to_string(c.t) + '\t' +
             (c.positive ? "1" : "0") + '\n';
  }
  write_text_file(config.out_dir + "/tests.tsv", tests);

  // carry the population tables along so the output is a complete dataset
  for (const char* name : {"households.tsv", "covariates.tsv"}) {
    fs::copy_file(config.data_dir + "/" + name, config.out_dir + "/" + std::string(name),
                  fs::copy_options::overwrite_existing);
  }

  int tp = 0, fp = 0, tn = 0, fn = 0;
  for (const TestCell& c : sim.observations.cells()) {
    const bool col = sim.truth(c.t, c.j) != 0;
    tp += c.positive && col;
    fp += c.positive && !col;
    tn += !c.positive && !col;
    fn += !c.positive && col;
  }
  json truth;
  truth["theta_true"] = params_to_json(config.theta_true);
  truth["seed"] = config.seed;
  truth["n_steps"] = n_steps;
  truth["counts"] = colonised_count(sim.truth);
  truth["n_tests"] = sim.observations.n_tested();
  truth["true_positives"] = tp;
  truth["false_positives"] = fp;
  truth["true_negatives"] = tn;
  truth["false_negatives"] = fn;
  write_text_file(config.out_dir + "/truth.json", truth.dump(2));

  json manifest;
  manifest["tool"] = "rippler";
  manifest["version"] = "0.1.0";
  manifest["kind"] = "simulate";
  manifest["rng"] = Rng::kAlgorithm;
  manifest["config"] = config_json(config);
  write_text_file(config.out_dir + "/manifest.json", manifest.dump(2));
  return sim;
}

void run_diagnose(const std::string& run_dir, const std::string& truth_json,
                  const std::string& out_dir, double level) {
  const json manifest = json::parse(read_text_file(run_dir + "/manifest.json"));
  const RunConfig config = config_from(manifest.at("config"));
  fs::create_directories(out_dir);

  std::vector<ModelParams> thetas;
  std::vector<std::vector<int>> counts;
  std::vector<std::vector<int>> jumps;
  double param_accepts = 0.0, param_attempts = 0.0;
  double latent_accepts = 0.0, latent_attempts = 0.0;
  std::vector<long> origin_attempts, origin_accepts;

  for (int c = 0; c < config.n_chains; ++c) {
    const std::string chain_dir = run_dir + "/chain" + std::to_string(c);
    ChainResult r;
    reload_persisted(r, chain_dir);
    const Table samples = read_table(chain_dir + "/samples.tsv");
    const int c_pa = samples.column("param_accepted");
    const int c_la = samples.column("latent_accepted");
    const int c_lt = samples.column("latent_attempted");
    for (const auto& row : samples.rows) {
      param_accepts += parse_long(row[c_pa], "samples");
      param_attempts += 1;
      latent_accepts += parse_long(row[c_la], "samples");
      latent_attempts += parse_long(row[c_lt], "samples");
    }
    thetas.insert(thetas.end(), r.theta_samples.begin(), r.theta_samples.end());
    counts.insert(counts.end(), r.counts.begin(), r.counts.end());
    jumps.insert(jumps.end(), r.jumps.begin(), r.jumps.end());
    const std::string origin_path = chain_dir + "/acceptance_by_origin.tsv";
    if (fs::exists(origin_path)) {
      const Table oa = read_table(origin_path);
      const int c_t = oa.column("origin_t");
      const int c_at = oa.column("attempts");
      const int c_ac = oa.column("accepts");
      if (origin_attempts.empty()) {
        origin_attempts.assign(oa.rows.size(), 0);
        origin_accepts.assign(oa.rows.size(), 0);
      }
      for (const auto& row : oa.rows) {
        const long t = parse_long(row[c_t], origin_path);
        origin_attempts[t] += parse_long(row[c_at], origin_path);
        origin_accepts[t] += parse_long(row[c_ac], origin_path);
      }
    }
  }
  if (thetas.empty()) throw ParseError(run_dir + ": no retained samples");

  json truth;
  bool have_truth = false;
  if (!truth_json.empty()) {
    truth = json::parse(read_text_file(truth_json));
    have_truth = true;
  }

  const char* names[4] = {"beta_g", "beta_h", "delta_age", "delta_sex"};
  std::string summary = "parameter\tmedian\tlo\thi\tmean\ttruth\ttruth_in_interval\n";
  for (int p = 0; p < 4; ++p) {
    std::vector<double> v;
    v.reserve(thetas.size());
    double mean = 0.0;
    for (const ModelParams& th : thetas) {
      const double x = th.as_array()[p];
      v.push_back(x);
      mean += x;
    }
    mean /= v.size();
    const double med = quantile(v, 0.5);
    const auto [lo, hi] = credible_interval(v, level);
    summary += std::string(names[p]) + '\t' + format_double(med) + '\t' +
               format_double(lo) + '\t' + format_double(hi) + '\t' + format_double(mean);
    if (have_truth) {
      const double tv = truth.at("theta_true").at(p).get<double>();
      summary += '\t' + format_double(tv) + '\t' +
                 ((tv >= lo && tv <= hi) ? "1" : "0");
    } else {
      summary += "\tNA\tNA";
    }
    summary += '\n';
  }
  write_text_file(out_dir + "/summary.tsv", summary);

  // histograms over the pooled samples
  for (int p = 0; p < 4; ++p) {
    std::vector<double> v;
    for (const ModelParams& th : thetas) v.push_back(th.as_array()[p]);
    const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
    const double mn = *mn_it, mx = *mx_it;
    const int bins = 40;
    const double width = mx > mn ? (mx - mn) / bins : 1.0;
    std::vector<long> hist(bins, 0);
    for (double x : v) {
      int b = static_cast<int>((x - mn) / width);
      if (b >= bins) b = bins - 1;
      if (b < 0) b = 0;
      ++hist[b];
    }
    std::string out = "bin_lo\tbin_hi\tcount\n";
    for (int b = 0; b < bins; ++b) {
      out += format_double(mn + b * width) + '\t' + format_double(mn + (b + 1) * width) +
             '\t' + std::to_string(hist[b]) + '\n';
    }
    write_text_file(out_dir + "/hist_" + names[p] + ".tsv", out);
  }

  // colonised-count band per time-step
  const int rows = static_cast<int>(counts.front().size());
  std::string band = "t\tlo\tmedian\thi";
  if (have_truth) band += "\ttruth";
  band += '\n';
  int covered = 0;
  for (int t = 0; t < rows; ++t) {
    std::vector<double> v;
    v.reserve(counts.size());
    for (const auto& row : counts) v.push_back(row[t]);
    const auto [lo, hi] = credible_interval(v, level);
    const double med = quantile(v, 0.5);
    band += std::to_string(t) + '\t' + format_double(lo) + '\t' + format_double(med) +
            '\t' + format_double(hi);
    if (have_truth) {
      const int tc = truth.at("counts").at(t).get<int>();
      band += '\t' + std::to_string(tc);
      covered += tc >= lo - 1e-12 && tc <= hi + 1e-12;
    }
    band += '\n';
  }
  write_text_file(out_dir + "/counts_band.tsv", band);

  // jump-distance report
  const double total_msjd = msjd_from_jumps(jumps);
  const std::vector<double> by_t = msjd_by_time_from_jumps(jumps);
  std::string msjd_out = "t\tmsjd\n";
  std::vector<double> t_axis;
  for (int t = 0; t < rows; ++t) {
    msjd_out += std::to_string(t) + '\t' + format_double(by_t[t]) + '\n';
    t_axis.push_back(t);
  }
  write_text_file(out_dir + "/msjd_by_time.tsv", msjd_out);

  std::string stats = "key\tvalue\n";
  stats += "algorithm\t" + to_string(config.algorithm) + '\n';
  stats += "n_retained\t" + std::to_string(thetas.size()) + '\n';
  stats += "msjd\t" + format_double(total_msjd) + '\n';
  stats += "msjd_time_spearman\t" + format_double(spearman_rho(t_axis, by_t)) + '\n';
  stats += "param_accept_rate\t" +
           format_double(param_attempts > 0 ? param_accepts / param_attempts : 0.0) + '\n';
  stats += "latent_accept_rate\t" +
           format_double(latent_attempts > 0 ? latent_accepts / latent_attempts : 0.0) +
           '\n';
  if (have_truth) {
    stats += "counts_band_coverage\t" +
             format_double(static_cast<double>(covered) / rows) + '\n';
  }
  write_text_file(out_dir + "/run_stats.tsv", stats);

  if (!origin_attempts.empty()) {
    std::string acc = "origin_t\tattempts\taccepts\trate\n";
    for (std::size_t t = 0; t < origin_attempts.size(); ++t) {
      const double rate = origin_attempts[t] > 0
                              ? static_cast<double>(origin_accepts[t]) / origin_attempts[t]
                              : 0.0;
      acc += std::to_string(t) + '\t' + std::to_string(origin_attempts[t]) + '\t' +
             std::to_string(origin_accepts[t]) + '\t' + format_double(rate) + '\n';
    }
    write_text_file(out_dir + "/acceptance_by_origin.tsv", acc);
  }
}

}  // namespace rippler
