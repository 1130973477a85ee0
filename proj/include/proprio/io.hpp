#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proprio/collect.hpp"
#include "proprio/planner.hpp"
#include "proprio/preco.hpp"
#include "proprio/probes.hpp"
#include "proprio/trajectory.hpp"

namespace proprio {

// Collection-loop knobs; the model and planner the loop uses live in their
// own config sections.
struct CollectConfig {
  int episodes_total = 150;
  int warmup_episodes = 50;
  int learner_steps_per_episode = 4;
  int snapshot_publish_interval = 10;
  int num_actors = 1;
  std::size_t buffer_capacity = 5000;
  double noise_damping = 0.2;
  double noise_std = 0.2;
  ActiveMode mode = ActiveMode::lockstep;
};

struct EvalConfig {
  int bootstrap = 1000;
  double train_fraction = 0.8;  // probe train/test split of a dataset
  ProbeConfig probe;
};

// Everything a run needs, as written to and read from one config file.
// Model input widths and planner touch rows follow the environment and are
// derived, not stored.
struct RunConfig {
  std::uint64_t seed = 1;
  EnvConfig env;
  PrecoConfig model;
  MpcConfig planner;
  CollectConfig collect;
  EvalConfig eval;

  void finalize();  // derive dependent fields and validate
  ActiveConfig active() const;
};

RunConfig default_run_config();
// `origin` names the source (a path) in error messages: "origin:line: why".
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig read_run_config(const std::string& path);
std::string run_config_text(const RunConfig& cfg);
void write_run_config(const std::string& path, const RunConfig& cfg);

struct Dataset {
  EnvConfig env;
  std::uint64_t env_hash = 0;
  std::vector<Trajectory> episodes;
};

void write_dataset(const std::string& path, const EnvConfig& env,
                   const std::vector<Trajectory>& episodes);
Dataset read_dataset(const std::string& path);
// Refuses parts recorded under different environment configs.
std::vector<Trajectory> merge_datasets(std::vector<Dataset> parts);

struct Checkpoint {
  PrecoConfig model;
  ParamValues params;
  std::uint64_t seed = 0;
};

void write_checkpoint(const std::string& path, const PrecoConfig& model,
                      const ParamValues& params, std::uint64_t seed);
Checkpoint read_checkpoint(const std::string& path);

void write_learner_loss_csv(const std::string& path,
                            const std::vector<double>& losses);
// episode_id,timestep,loss[,angular_error] — one row per held-out episode
// and timestep; losses is episodes x T in episode_ids order.
void write_probe_csv(const std::string& path,
                     const std::vector<std::int64_t>& episode_ids,
                     const Matrix& losses, const Matrix* angular = nullptr);
// timestep,model,statistic,value,ci_lo,ci_hi rows: per-model medians, then
// pairwise win probabilities with their bootstrap bands.
void write_eval_csv(const std::string& path, const EvalReport& report);
// marker,model,quantile,value rows of each marker-step loss distribution.
void write_cdf_csv(const std::string& path, const EvalReport& report);

}  // namespace proprio
