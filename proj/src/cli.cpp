#include "proprio/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "proprio/collect.hpp"
#include "proprio/entropy.hpp"
#include "proprio/env.hpp"
#include "proprio/io.hpp"
#include "proprio/optim.hpp"
#include "proprio/planner.hpp"
#include "proprio/preco.hpp"
#include "proprio/probes.hpp"
#include "proprio/rng.hpp"

namespace proprio {
namespace {

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? default_run_config() : read_run_config(path);
}

// --seed flag wins over the config file's seed
std::uint64_t pick_seed(const CLI::Option* flag, std::uint64_t flag_value,
                        const RunConfig& rc) {
  return (flag != nullptr && flag->count() > 0) ? flag_value : rc.seed;
}

struct LoadedData {
  EnvConfig env;
  std::vector<Trajectory> episodes;
};

LoadedData load_merged(const std::vector<std::string>& paths) {
  std::vector<Dataset> parts;
  parts.reserve(paths.size());
  for (const auto& p : paths) parts.push_back(read_dataset(p));
  LoadedData out;
  out.env = parts.front().env;
  out.episodes = merge_datasets(std::move(parts));
  return out;
}

std::vector<Episode> bodies_of(const std::vector<Trajectory>& data) {
  std::vector<Episode> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(t.body);
  return out;
}

// Deterministic shuffled split; at least one episode lands on each side.
void split_episodes(const std::vector<Trajectory>& all, double train_fraction,
                    std::uint64_t seed, std::vector<Trajectory>* train,
                    std::vector<Trajectory>* test) {
  const int n = static_cast<int>(all.size());
  if (n < 2) {
    throw std::runtime_error("need at least two episodes to split into "
                             "train and test");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xD1CE));
  for (int i = n - 1; i > 0; --i) {
    const int j =
        static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  const int n_train = std::clamp(
      static_cast<int>(std::llround(train_fraction * n)), 1, n - 1);
  train->clear();
  test->clear();
  for (int i = 0; i < n; ++i) {
    auto& dst = (i < n_train) ? *train : *test;
    dst.push_back(all[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
}

void drop_discs(std::vector<Trajectory>* eps) {
  eps->erase(std::remove_if(eps->begin(), eps->end(),
                            [](const Trajectory& t) {
                              return t.label.shape == Shape::disc;
                            }),
             eps->end());
}

void require_env_match(const Checkpoint& ck, const EnvConfig& env,
                       const std::string& path) {
  if (ck.model.action_dim != env.num_fingers ||
      ck.model.obs_dim != env.obs_dim()) {
    throw std::runtime_error(
        path + ": checkpoint expects " + std::to_string(ck.model.action_dim) +
        " actions / " + std::to_string(ck.model.obs_dim) +
        " observations but the environment provides " +
        std::to_string(env.num_fingers) + " / " +
        std::to_string(env.obs_dim()));
  }
}

std::string strip_extension(const std::string& path) {
  const std::size_t dot = path.find_last_of('.');
  const std::size_t slash = path.find_last_of('/');
  if (dot == std::string::npos) return path;
  if (slash != std::string::npos && dot < slash) return path;
  return path.substr(0, dot);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double mean_touch(const Trajectory& traj, const EnvConfig& env) {
  double total = 0.0;
  for (int t = 0; t < traj.body.length(); ++t) {
    for (int f = 0; f < env.num_fingers; ++f) {
      total += traj.body.observations(t, obs_touch_index(f));
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// verbs

struct CollectOpts {
  std::string config, out, kind;
  int episodes = 200;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_collect_scripted(const CollectOpts& o, bool random) {
  RunConfig rc = load_run_config(o.config);
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);
  std::vector<Trajectory> eps =
      random ? collect_random(parse_random_kind(o.kind), rc.env, o.episodes,
                              seed)
             : collect_passive(rc.env, o.episodes, seed);
  write_dataset(o.out, rc.env, eps);
  std::cout << "wrote " << eps.size() << " episodes of length "
            << rc.env.episode_length << " to " << o.out << "\n";
  return 0;
}

struct TrainOpts {
  std::string config, out, loss_csv;
  std::vector<std::string> data;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_train(const TrainOpts& o) {
  LoadedData data = load_merged(o.data);
  RunConfig rc = load_run_config(o.config);
  rc.env = data.env;  // the recording's env fixes the model dimensions
  rc.finalize();
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);
  const std::vector<Episode> eps = bodies_of(data.episodes);
  std::cout << "training on " << eps.size() << " episodes ("
            << rc.model.train_steps << " steps, batch "
            << rc.model.batch_size << ")\n";
  const int report_every = std::max(1, rc.model.train_steps / 10);
  TrainResult res = train_preco(eps, rc.model, seed,
                                [&](int step, double loss) {
                                  if (step % report_every == 0 ||
                                      step + 1 == rc.model.train_steps) {
                                    std::cout << "step " << step << "  loss "
                                              << loss << "\n";
                                  }
                                });
  write_checkpoint(o.out, rc.model, res.params, seed);
  if (!o.loss_csv.empty()) write_learner_loss_csv(o.loss_csv, res.loss_trace);
  std::cout << "wrote checkpoint " << o.out << "\n";
  return 0;
}

struct ActiveOpts {
  std::string config, out, ckpt;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_collect_active(const ActiveOpts& o) {
  RunConfig rc = load_run_config(o.config);
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);
  const ActiveConfig acfg = rc.active();
  ActiveResult res = run_active(rc.env, acfg, seed);
  write_dataset(o.out, rc.env, res.dataset);
  const std::string prefix = strip_extension(o.out);
  write_learner_loss_csv(prefix + "-loss.csv", res.learner_loss);
  for (const auto& [version, params] : res.snapshots) {
    write_checkpoint(prefix + "-snapshot-" + std::to_string(version) + ".json",
                     acfg.model, params, seed);
  }
  if (!o.ckpt.empty()) write_checkpoint(o.ckpt, acfg.model, res.params, seed);
  std::cout << "collected " << res.dataset.size() << " episodes ("
            << acfg.warmup_episodes << " warmup), " << res.learner_loss.size()
            << " learner steps, " << res.snapshots.size() << " snapshots\n";
  if (!res.learner_loss.empty()) {
    std::cout << "final learner loss " << res.learner_loss.back() << "\n";
  }
  return 0;
}

struct ProbeOpts {
  std::string config, out, ckpt, task, model;
  std::vector<std::string> data;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_probe(const ProbeOpts& o) {
  const ProbeTaskKind task = parse_probe_task(o.task);
  LoadedData data = load_merged(o.data);
  RunConfig rc = load_run_config(o.config);
  rc.env = data.env;
  rc.finalize();
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);

  std::vector<Trajectory> eps = std::move(data.episodes);
  if (task == ProbeTaskKind::orientation) drop_discs(&eps);
  std::vector<Trajectory> train, test;
  split_episodes(eps, rc.eval.train_fraction, seed, &train, &test);

  Matrix losses, angular;
  const bool with_angle = task == ProbeTaskKind::orientation;
  if (o.model == "preco") {
    if (o.ckpt.empty()) {
      throw std::runtime_error("probe --model preco requires --ckpt");
    }
    const Checkpoint ck = read_checkpoint(o.ckpt);
    require_env_match(ck, rc.env, o.ckpt);
    const ProbeModel probe =
        train_diagnostic(ck.model, ck.params, train, task, rc.eval.probe, seed);
    losses = diagnostic_losses(ck.model, ck.params, probe, test);
    if (with_angle) {
      angular = diagnostic_angular_errors(ck.model, ck.params, probe, test);
    }
  } else {
    const BaselineKind kind = parse_baseline_kind(o.model);
    const BaselineModel model =
        train_baseline(kind, train, task, rc.eval.probe, seed);
    losses = baseline_losses(model, test);
    if (with_angle) angular = baseline_angular_errors(model, test);
  }

  std::vector<std::int64_t> ids;
  ids.reserve(test.size());
  for (const auto& t : test) ids.push_back(t.episode_id);
  write_probe_csv(o.out, ids, losses, with_angle ? &angular : nullptr);

  const Vector med = median_per_timestep(losses);
  std::cout << o.model << " probe on " << probe_task_name(task) << ": "
            << train.size() << " train / " << test.size()
            << " test episodes\n";
  std::cout << "median held-out loss at final step "
            << med[med.size() - 1] << "\n";
  return 0;
}

struct EvalOpts {
  std::string config, report, ckpt, task = "shape";
  std::vector<std::string> data;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_eval(const EvalOpts& o) {
  const ProbeTaskKind task = parse_probe_task(o.task);
  LoadedData data = load_merged(o.data);
  RunConfig rc = load_run_config(o.config);
  rc.env = data.env;
  rc.finalize();
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);

  std::vector<Trajectory> eps = std::move(data.episodes);
  if (task == ProbeTaskKind::orientation) drop_discs(&eps);
  std::vector<Trajectory> train, test;
  split_episodes(eps, rc.eval.train_fraction, seed, &train, &test);

  const Checkpoint ck = read_checkpoint(o.ckpt);
  require_env_match(ck, rc.env, o.ckpt);

  const std::vector<std::string> names{"preco", "mlp", "lstm", "randlstm"};
  std::vector<Matrix> losses(names.size());
  const ProbeModel probe =
      train_diagnostic(ck.model, ck.params, train, task, rc.eval.probe, seed);
  losses[0] = diagnostic_losses(ck.model, ck.params, probe, test);
  const BaselineKind kinds[] = {BaselineKind::mlp, BaselineKind::lstm,
                                BaselineKind::randlstm};
  for (std::size_t k = 0; k < 3; ++k) {
    const BaselineModel model =
        train_baseline(kinds[k], train, task, rc.eval.probe, seed);
    losses[k + 1] = baseline_losses(model, test);
  }

  const auto cadence = grasp_markers(rc.env.episode_length);
  std::vector<int> marker_steps;
  marker_steps.reserve(cadence.size());
  for (const auto& [t, open] : cadence) marker_steps.push_back(t);
  const EvalReport rep =
      eval_report(names, losses, marker_steps, rc.eval.bootstrap, seed);
  write_eval_csv(o.report + "-summary.csv", rep);
  write_cdf_csv(o.report + "-cdf.csv", rep);

  // headline numbers: medians averaged over the open-pose markers, and the
  // dynamics-state probe's win probability against the sensor MLP there
  std::vector<int> open_steps;
  for (const auto& [t, open] : cadence) {
    if (open) open_steps.push_back(t);
  }
  std::cout << train.size() << " train / " << test.size()
            << " test episodes, markers at " << marker_steps.size()
            << " steps\n";
  for (std::size_t m = 0; m < names.size(); ++m) {
    double acc = 0.0;
    for (int t : open_steps) acc += rep.medians(static_cast<int>(m), t);
    std::cout << names[m] << " median loss at open markers "
              << acc / static_cast<double>(open_steps.size()) << "\n";
  }
  for (const auto& pair : rep.pairs) {
    if (pair.a == 0 && pair.b == 1) {
      double acc = 0.0;
      for (int t : open_steps) acc += pair.curve.p[t];
      std::cout << "preco-vs-mlp win probability at open markers "
                << acc / static_cast<double>(open_steps.size()) << "\n";
    }
  }
  std::cout << "wrote " << o.report << "-summary.csv and " << o.report
            << "-cdf.csv\n";
  return 0;
}

struct PlanOpts {
  std::string config, out, ckpt, cost;
  int episodes = 20;
  std::uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
};

int cmd_plan(const PlanOpts& o) {
  RunConfig rc = load_run_config(o.config);
  rc.planner.cost.kind = parse_cost_kind(o.cost);
  rc.finalize();  // touch_max needs the touch observation dimensions
  const std::uint64_t seed = pick_seed(o.seed_flag, o.seed, rc);
  const Checkpoint ck = read_checkpoint(o.ckpt);
  require_env_match(ck, rc.env, o.ckpt);

  std::vector<Trajectory> eps;
  eps.reserve(static_cast<std::size_t>(o.episodes));
  double total = 0.0;
  for (int e = 0; e < o.episodes; ++e) {
    const std::uint64_t env_seed =
        mix_seed(seed, static_cast<std::uint64_t>(2 * e));
    GripperEnv env(rc.env, env_seed);
    Trajectory traj = mpc_episode(env, ck.model, ck.params, rc.planner);
    traj.episode_id = e;
    traj.seed = env_seed;
    total += mean_touch(traj, rc.env);
    eps.push_back(std::move(traj));
  }
  if (!o.out.empty()) write_dataset(o.out, rc.env, eps);
  std::cout << cost_kind_name(rc.planner.cost.kind)
            << " planning: mean cumulative touch over " << o.episodes
            << " episodes = " << total / std::max(1, o.episodes) << "\n";
  return 0;
}

struct EntropyCheckOpts {
  int mixtures = 1000;
  std::uint64_t seed = 1;
  double tol = 1e-6;
};

int cmd_entropy_check(const EntropyCheckOpts& o) {
  Rng rng(o.seed);
  double worst = 0.0;
  for (int k = 0; k < o.mixtures; ++k) {
    const int m = 1 + static_cast<int>(rng.uniform_int(3));
    Mixture1D mix;
    mix.alpha.resize(m);
    mix.mu.resize(m);
    mix.sigma.resize(m);
    for (int i = 0; i < m; ++i) mix.alpha[i] = rng.uniform(0.05, 1.0);
    mix.alpha /= mix.alpha.sum();
    for (int i = 0; i < m; ++i) mix.mu[i] = rng.uniform(-3.0, 3.0);
    for (int i = 0; i < m; ++i) mix.sigma[i] = rng.uniform(0.1, 2.0);
    const double d = std::abs(renyi2(mix) - renyi2_quadrature_oracle(mix));
    worst = std::max(worst, d);
  }
  std::cout << "max closed-form vs quadrature discrepancy over " << o.mixtures
            << " mixtures: " << sci(worst) << "\n";
  if (!(worst <= o.tol)) {
    std::cerr << "entropy-check: discrepancy exceeds " << o.tol << "\n";
    return 1;
  }
  return 0;
}

PrecoConfig gradcheck_config() {
  PrecoConfig cfg;
  cfg.action_dim = 2;
  cfg.obs_dim = 4;
  cfg.control_embed_hidden = 8;
  cfg.control_embed_out = 8;
  cfg.sensor_embed_hidden = 8;
  cfg.sensor_embed_out = 8;
  cfg.core_hidden_size = 8;
  cfg.head_hidden = 8;
  cfg.num_components = 2;
  cfg.overshoot_length = 2;
  return cfg;
}

// fan-in init leaves some gradients near the finite-difference floor, so
// checks run at parameters resampled uniformly away from it
ParamValues resampled_params(const PrecoConfig& cfg, std::uint64_t init_seed,
                             std::uint64_t resample_seed) {
  ParamValues vals = init_preco_params(cfg, init_seed);
  Rng rng(resample_seed);
  for (auto& [name, m] : vals) {
    for (int j = 0; j < m.cols(); ++j) {
      for (int i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-0.8, 0.8);
    }
  }
  return vals;
}

int cmd_gradcheck() {
  const PrecoConfig cfg = gradcheck_config();
  double overall = 0.0;

  {
    const ParamValues vals = resampled_params(cfg, 1, 1001);
    Rng rng(37);
    Episode ep;
    ep.actions.resize(3, cfg.action_dim);
    ep.observations.resize(3, cfg.obs_dim);
    for (int t = 0; t < 3; ++t) {
      for (int i = 0; i < cfg.action_dim; ++i) {
        ep.actions(t, i) = rng.uniform(-1.0, 1.0);
      }
      for (int d = 0; d < cfg.obs_dim; ++d) {
        ep.observations(t, d) = rng.uniform(-1.0, 1.0);
      }
    }
    OvershootGraph g(cfg, vals, 3, 1, true);
    g.bind_episodes({&ep});
    std::vector<Var> inputs;
    for (const auto& e : g.net().params().entries()) inputs.push_back(e.var);
    const double worst = grad_check(g.tape(), g.loss(), inputs);
    overall = std::max(overall, worst);
    std::cout << "overshoot loss vs all parameters: " << sci(worst) << "\n";
  }

  const ParamValues vals = resampled_params(cfg, 2, 1002);
  for (const CostSpec& spec :
       {CostSpec{CostKind::entropy_max, {}}, CostSpec{CostKind::entropy_min, {}},
        CostSpec{CostKind::touch_max, {0, 2}}}) {
    Tape t;
    PrecoNet net(t, cfg, vals, false);
    Var h = t.input("h", cfg.core_hidden_size, 1, true);
    Var cost = step_cost_expr(net, h, spec);
    Rng rng(8);
    Matrix hv(cfg.core_hidden_size, 1);
    for (int i = 0; i < hv.rows(); ++i) hv(i, 0) = rng.uniform(-1.0, 1.0);
    t.set_input(h, hv);
    const double worst_state = grad_check(t, cost, {h});

    PlanGraph g(cfg, vals, spec, 3);
    Rng rng9(9);
    Vector h0(cfg.core_hidden_size), c0(cfg.core_hidden_size);
    for (int i = 0; i < h0.size(); ++i) h0[i] = rng9.uniform(-0.5, 0.5);
    for (int i = 0; i < c0.size(); ++i) c0[i] = rng9.uniform(-0.5, 0.5);
    g.tape().set_input(g.state_input_h(), h0);
    g.tape().set_input(g.state_input_c(), c0);
    for (Var u : g.control_inputs()) {
      Matrix uv(cfg.action_dim, 1);
      for (int i = 0; i < uv.rows(); ++i) uv(i, 0) = rng9.uniform(-0.1, 0.1);
      g.tape().set_input(u, uv);
    }
    const double worst_rollout =
        grad_check(g.tape(), g.objective(), g.control_inputs());

    overall = std::max(overall, std::max(worst_state, worst_rollout));
    std::cout << cost_kind_name(spec.kind) << " cost: state "
              << sci(worst_state) << ", rollout controls "
              << sci(worst_rollout) << "\n";
  }

  std::cout << "worst relative gradient error: " << sci(overall) << "\n";
  if (!(overall < 1e-4)) {
    std::cerr << "gradcheck: relative error reached 1e-4\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"proprioceptive dynamics workbench: scripted and planned data "
               "collection, dynamics-model training, entropy-seeking control, "
               "and diagnostic probes"};
  app.require_subcommand(1);
  int code = 0;

  CollectOpts passive;
  {
    CLI::App* sub = app.add_subcommand(
        "collect-passive", "record scripted grasp episodes");
    sub->add_option("--config", passive.config, "run-config file");
    passive.seed_flag =
        sub->add_option("--seed", passive.seed, "base seed (default: config)");
    sub->add_option("--episodes", passive.episodes, "episode count")
        ->capture_default_str();
    sub->add_option("--out", passive.out, "output dataset path")->required();
    sub->callback([&] { code = cmd_collect_scripted(passive, false); });
  }

  CollectOpts random;
  {
    CLI::App* sub = app.add_subcommand(
        "collect-random", "record random-policy episodes");
    sub->add_option("--kind", random.kind,
                    "ind: fresh uniform action each step; cor: correlated "
                    "noise around the current pose")
        ->required()
        ->check(CLI::IsMember({"ind", "cor"}));
    sub->add_option("--config", random.config, "run-config file");
    random.seed_flag =
        sub->add_option("--seed", random.seed, "base seed (default: config)");
    sub->add_option("--episodes", random.episodes, "episode count")
        ->capture_default_str();
    sub->add_option("--out", random.out, "output dataset path")->required();
    sub->callback([&] { code = cmd_collect_scripted(random, true); });
  }

  TrainOpts train;
  {
    CLI::App* sub = app.add_subcommand(
        "train", "fit the dynamics model on recorded episodes");
    sub->add_option("--data", train.data, "dataset file (repeatable)")
        ->required();
    sub->add_option("--out", train.out, "checkpoint path")->required();
    sub->add_option("--config", train.config, "run-config file");
    train.seed_flag =
        sub->add_option("--seed", train.seed, "base seed (default: config)");
    sub->add_option("--loss-csv", train.loss_csv,
                    "also write the per-step training loss");
    sub->callback([&] { code = cmd_train(train); });
  }

  ActiveOpts active;
  {
    CLI::App* sub = app.add_subcommand(
        "collect-active",
        "actor-learner loop: plan for maximum prediction entropy while "
        "training on the growing buffer");
    sub->add_option("--out", active.out, "output dataset path")->required();
    sub->add_option("--ckpt", active.ckpt, "write the final parameters here");
    sub->add_option("--config", active.config, "run-config file");
    active.seed_flag =
        sub->add_option("--seed", active.seed, "base seed (default: config)");
    sub->callback([&] { code = cmd_collect_active(active); });
  }

  ProbeOpts probe;
  {
    CLI::App* sub = app.add_subcommand(
        "probe", "train one diagnostic readout and write held-out losses");
    sub->add_option("--task", probe.task, "prediction target")
        ->required()
        ->check(CLI::IsMember({"shape", "orientation"}));
    sub->add_option("--model", probe.model, "information source")
        ->required()
        ->check(CLI::IsMember({"preco", "mlp", "lstm", "randlstm"}));
    sub->add_option("--data", probe.data, "dataset file (repeatable)")
        ->required();
    sub->add_option("--ckpt", probe.ckpt,
                    "dynamics checkpoint (required for --model preco)");
    sub->add_option("--out", probe.out, "per-episode loss csv")->required();
    sub->add_option("--config", probe.config, "run-config file");
    probe.seed_flag =
        sub->add_option("--seed", probe.seed, "base seed (default: config)");
    sub->callback([&] { code = cmd_probe(probe); });
  }

  EvalOpts eval;
  {
    CLI::App* sub = app.add_subcommand(
        "eval",
        "compare the dynamics-state probe against all sensor baselines");
    sub->add_option("--report", eval.report, "output path prefix")->required();
    sub->add_option("--data", eval.data, "dataset file (repeatable)")
        ->required();
    sub->add_option("--ckpt", eval.ckpt, "dynamics checkpoint")->required();
    sub->add_option("--task", eval.task, "prediction target")
        ->check(CLI::IsMember({"shape", "orientation"}))
        ->capture_default_str();
    sub->add_option("--config", eval.config, "run-config file");
    eval.seed_flag =
        sub->add_option("--seed", eval.seed, "base seed (default: config)");
    sub->callback([&] { code = cmd_eval(eval); });
  }

  PlanOpts plan;
  {
    CLI::App* sub = app.add_subcommand(
        "plan", "run receding-horizon episodes under a planning cost");
    sub->add_option("--cost", plan.cost, "planning objective")
        ->required()
        ->check(CLI::IsMember({"entropy_max", "entropy_min", "touch_max"}));
    sub->add_option("--ckpt", plan.ckpt, "dynamics checkpoint")->required();
    sub->add_option("--episodes", plan.episodes, "episode count")
        ->capture_default_str();
    sub->add_option("--out", plan.out, "optionally record the episodes here");
    sub->add_option("--config", plan.config, "run-config file");
    plan.seed_flag =
        sub->add_option("--seed", plan.seed, "base seed (default: config)");
    sub->callback([&] { code = cmd_plan(plan); });
  }

  EntropyCheckOpts entropy;
  {
    CLI::App* sub = app.add_subcommand(
        "entropy-check",
        "compare the closed-form mixture entropy against quadrature");
    sub->add_option("--mixtures", entropy.mixtures, "random mixtures to test")
        ->capture_default_str();
    sub->add_option("--seed", entropy.seed, "mixture seed")
        ->capture_default_str();
    sub->add_option("--tol", entropy.tol, "failure threshold")
        ->capture_default_str();
    sub->callback([&] { code = cmd_entropy_check(entropy); });
  }

  {
    CLI::App* sub = app.add_subcommand(
        "gradcheck",
        "finite-difference checks of the training loss and planner costs");
    sub->callback([&] { code = cmd_gradcheck(); });
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("proprio");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int parse_code = app.exit(e);  // prints help or the usage error
    return parse_code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}

}  // namespace proprio
