#include "proprio/collect.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace proprio {

OUProcess::OUProcess(int dims, double damping_, double drive_std_)
    : damping(damping_), drive_std(drive_std_), state(Vector::Zero(dims)) {
  if (dims < 1) throw std::invalid_argument("noise needs at least one dim");
}

const Vector& OUProcess::step(Rng& rng) {
  for (int i = 0; i < state.size(); ++i) {
    state[i] = (1.0 - damping) * state[i] + rng.normal(0.0, drive_std);
  }
  return state;
}

double OUProcess::stationary_std() const {
  const double r = 1.0 - damping;
  return drive_std / std::sqrt(1.0 - r * r);
}

RandomKind parse_random_kind(const std::string& name) {
  if (name == "ind") return RandomKind::ind;
  if (name == "cor") return RandomKind::cor;
  throw std::invalid_argument("unknown random policy '" + name + "'");
}

namespace {

// one sub-stream per episode so episodes never shift each other
std::uint64_t episode_env_seed(std::uint64_t seed, int episode) {
  return mix_seed(seed, static_cast<std::uint64_t>(2 * episode));
}
std::uint64_t episode_noise_seed(std::uint64_t seed, int episode) {
  return mix_seed(seed, static_cast<std::uint64_t>(2 * episode + 1));
}

Trajectory passive_episode(const EnvConfig& cfg, std::uint64_t seed, int id) {
  GripperEnv env(cfg, episode_env_seed(seed, id));
  Rng script_rng(episode_noise_seed(seed, id));
  GraspScript script = GraspScript::sample(script_rng);
  const int T = cfg.episode_length;

  Trajectory traj;
  traj.episode_id = id;
  traj.seed = episode_env_seed(seed, id);
  traj.label = env.object();
  traj.markers = grasp_markers(T);
  traj.body.actions.resize(T, cfg.num_fingers);
  traj.body.observations.resize(T, cfg.obs_dim());
  for (int t = 0; t < T; ++t) {
    Vector u = script.action(t, env.angles());
    traj.body.actions.row(t) = u.transpose();
    traj.body.observations.row(t) = env.step(u).transpose();
  }
  return traj;
}

Trajectory random_episode(RandomKind kind, const EnvConfig& cfg,
                          std::uint64_t seed, int id) {
  GripperEnv env(cfg, episode_env_seed(seed, id));
  Rng rng(episode_noise_seed(seed, id));
  OUProcess ou(cfg.num_fingers);
  const int T = cfg.episode_length;

  Trajectory traj;
  traj.episode_id = id;
  traj.seed = episode_env_seed(seed, id);
  traj.label = env.object();
  traj.body.actions.resize(T, cfg.num_fingers);
  traj.body.observations.resize(T, cfg.obs_dim());
  for (int t = 0; t < T; ++t) {
    Vector u(cfg.num_fingers);
    if (kind == RandomKind::ind) {
      for (int f = 0; f < cfg.num_fingers; ++f) u[f] = rng.normal(0.0, 0.2);
    } else {
      u = ou.step(rng);
    }
    u = u.cwiseMax(-1.0).cwiseMin(1.0);
    traj.body.actions.row(t) = u.transpose();
    traj.body.observations.row(t) = env.step(u).transpose();
  }
  return traj;
}

}  // namespace

std::vector<Trajectory> collect_passive(const EnvConfig& cfg, int n_episodes,
                                        std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("need at least one episode");
  cfg.validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) out.push_back(passive_episode(cfg, seed, e));
  return out;
}

std::vector<Trajectory> collect_random(RandomKind kind, const EnvConfig& cfg,
                                       int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("need at least one episode");
  cfg.validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) {
    out.push_back(random_episode(kind, cfg, seed, e));
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("zero-capacity buffer");
}

void ReplayBuffer::push(Trajectory traj) {
  std::lock_guard<std::mutex> lock(mu_);
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(traj));
  ++pushed_;
}

std::vector<Episode> ReplayBuffer::sample(int k, Rng& rng) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (items_.empty()) throw std::runtime_error("sampling from an empty buffer");
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int idx = rng.uniform_int(static_cast<int>(items_.size()));
    out.push_back(items_[static_cast<std::size_t>(idx)].body);
  }
  return out;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return items_.size();
}

std::uint64_t ReplayBuffer::total_pushed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pushed_;
}

void SnapshotBoard::publish(ParamValues params) {
  std::lock_guard<std::mutex> lock(mu_);
  const int next = current_ ? current_->first + 1 : 1;
  current_ = std::make_shared<const std::pair<int, ParamValues>>(
      next, std::move(params));
}

std::shared_ptr<const std::pair<int, ParamValues>> SnapshotBoard::latest()
    const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

void ActiveConfig::validate() const {
  if (num_actors < 1) throw std::invalid_argument("need at least one actor");
  if (warmup_episodes < 1 || warmup_episodes >= episodes_total) {
    throw std::invalid_argument("warmup must be in [1, episodes_total)");
  }
  if (learner_steps_per_episode < 1 || snapshot_publish_interval < 1) {
    throw std::invalid_argument("learner step counts must be positive");
  }
  if (buffer_capacity == 0) throw std::invalid_argument("zero-capacity buffer");
}

namespace {

Trajectory actor_episode(const EnvConfig& env_cfg, const ActiveConfig& cfg,
                         const ParamValues& params, std::uint64_t seed,
                         int id) {
  GripperEnv env(env_cfg, episode_env_seed(seed, id));
  Rng noise_rng(episode_noise_seed(seed, id));
  OUProcess ou(env_cfg.num_fingers, cfg.noise_damping, cfg.noise_std);
  auto noise = [&](int) -> Vector { return ou.step(noise_rng); };
  Trajectory traj = mpc_episode(env, cfg.model, params, cfg.planner, noise);
  traj.episode_id = id;
  traj.seed = episode_env_seed(seed, id);
  return traj;
}

}  // namespace

ActiveResult run_active(const EnvConfig& env_cfg, const ActiveConfig& cfg,
                        std::uint64_t seed) {
  env_cfg.validate();
  cfg.validate();

  ReplayBuffer buffer(cfg.buffer_capacity);
  SnapshotBoard board;
  ActiveResult result;
  result.dataset.reserve(static_cast<std::size_t>(cfg.episodes_total));

  PrecoTrainer trainer(cfg.model, env_cfg.episode_length,
                       mix_seed(seed, 0xA11CE));
  auto publish = [&] {
    board.publish(trainer.values());
    const auto latest = board.latest();
    result.snapshot_versions.push_back(latest->first);
    result.snapshots.emplace_back(latest->first, latest->second);
  };
  publish();
  Rng learner_rng(mix_seed(seed, 0x5EED));

  auto learner_step = [&] {
    std::vector<Episode> batch = buffer.sample(cfg.model.batch_size, learner_rng);
    std::vector<const Episode*> ptrs;
    ptrs.reserve(batch.size());
    for (const Episode& ep : batch) ptrs.push_back(&ep);
    result.learner_loss.push_back(trainer.step(ptrs));
    if (trainer.steps_done() % cfg.snapshot_publish_interval == 0) publish();
  };

  if (cfg.mode == ActiveMode::lockstep) {
    for (int e = 0; e < cfg.episodes_total; ++e) {
      if (e < cfg.warmup_episodes) {
        Trajectory traj = random_episode(RandomKind::cor, env_cfg, seed, e);
        result.dataset.push_back(traj);
        buffer.push(std::move(traj));
        continue;
      }
      auto snap = board.latest();
      Trajectory traj = actor_episode(env_cfg, cfg, snap->second, seed, e);
      result.dataset.push_back(traj);
      buffer.push(std::move(traj));
      for (int j = 0; j < cfg.learner_steps_per_episode; ++j) learner_step();
    }
  } else {
    std::atomic<int> next_episode{0};
    std::mutex out_mu;
    auto actor = [&] {
      for (;;) {
        const int e = next_episode.fetch_add(1);
        if (e >= cfg.episodes_total) return;
        Trajectory traj =
            e < cfg.warmup_episodes
                ? random_episode(RandomKind::cor, env_cfg, seed, e)
                : actor_episode(env_cfg, cfg, board.latest()->second, seed, e);
        {
          std::lock_guard<std::mutex> lock(out_mu);
          result.dataset.push_back(traj);
        }
        buffer.push(std::move(traj));
      }
    };
    std::vector<std::thread> actors;
    for (int a = 0; a < cfg.num_actors; ++a) actors.emplace_back(actor);

    const long target_steps =
        static_cast<long>(cfg.episodes_total - cfg.warmup_episodes) *
        cfg.learner_steps_per_episode;
    while (buffer.size() < static_cast<std::size_t>(cfg.warmup_episodes)) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    while (trainer.steps_done() < target_steps) learner_step();
    for (auto& t : actors) t.join();
  }

  result.params = trainer.values();
  return result;
}

}  // namespace proprio
