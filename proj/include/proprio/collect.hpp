#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "proprio/env.hpp"
#include "proprio/planner.hpp"
#include "proprio/preco.hpp"
#include "proprio/rng.hpp"
#include "proprio/trajectory.hpp"

namespace proprio {

// First-order autoregressive exploration noise: n' = (1-damping) n + eps,
// eps ~ Normal(0, drive_std^2) per coordinate.
struct OUProcess {
  double damping = 0.2;
  double drive_std = 0.2;
  Vector state;

  explicit OUProcess(int dims, double damping = 0.2, double drive_std = 0.2);
  const Vector& step(Rng& rng);
  double stationary_std() const;
};

enum class RandomKind { ind, cor };
RandomKind parse_random_kind(const std::string& name);

std::vector<Trajectory> collect_passive(const EnvConfig& cfg, int n_episodes,
                                        std::uint64_t seed);

std::vector<Trajectory> collect_random(RandomKind kind, const EnvConfig& cfg,
                                       int n_episodes, std::uint64_t seed);

// Bounded FIFO of complete episodes: pushing at capacity evicts the oldest.
// Thread-safe; sample copies so concurrent eviction cannot invalidate a
// training batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Trajectory traj);
  // k uniform draws with replacement
  std::vector<Episode> sample(int k, Rng& rng) const;
  std::size_t size() const;
  std::uint64_t total_pushed() const;
  std::size_t capacity() const { return capacity_; }

 private:
  mutable std::mutex mu_;
  std::deque<Trajectory> items_;
  std::size_t capacity_;
  std::uint64_t pushed_ = 0;
};

// Copy-on-publish parameter snapshots with strictly increasing versions;
// readers never observe a partial update.
class SnapshotBoard {
 public:
  void publish(ParamValues params);
  std::shared_ptr<const std::pair<int, ParamValues>> latest() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const std::pair<int, ParamValues>> current_;
};

enum class ActiveMode { lockstep, threaded };

struct ActiveConfig {
  PrecoConfig model;
  MpcConfig planner;
  int episodes_total = 150;   // includes the warmup
  int warmup_episodes = 50;   // correlated-noise episodes before learning
  int learner_steps_per_episode = 4;
  int snapshot_publish_interval = 10;  // learner steps between publishes
  int num_actors = 1;
  std::size_t buffer_capacity = 5000;
  double noise_damping = 0.2;
  double noise_std = 0.2;
  ActiveMode mode = ActiveMode::lockstep;

  void validate() const;
};

struct ActiveResult {
  ParamValues params;
  std::vector<Trajectory> dataset;    // production order
  std::vector<double> learner_loss;   // one entry per learner step
  std::vector<int> snapshot_versions; // version at each publish
  // every published parameter set, for checkpointing the run's history
  std::vector<std::pair<int, ParamValues>> snapshots;
};

// Actor-learner loop: actors plan for maximum prediction entropy with
// correlated exploration noise on the latest snapshot; the learner trains on
// buffer samples. Lockstep mode interleaves one actor episode with
// learner_steps_per_episode optimizer steps on the calling thread and is
// bit-reproducible; threaded mode runs num_actors producer threads.
ActiveResult run_active(const EnvConfig& env_cfg, const ActiveConfig& cfg,
                        std::uint64_t seed);

}  // namespace proprio
