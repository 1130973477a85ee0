#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "proprio/cli.hpp"
#include "proprio/env.hpp"
#include "proprio/io.hpp"

using namespace proprio;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int lines_of(const std::string& text) {
  int n = 0;
  for (char c : text) n += (c == '\n');
  return n;
}

bool starts_with(const std::string& text, const std::string& prefix) {
  return text.rfind(prefix, 0) == 0;
}

RunConfig tiny_run_config() {
  RunConfig rc = default_run_config();
  rc.seed = 7;
  rc.model.control_embed_hidden = rc.model.control_embed_out = 12;
  rc.model.sensor_embed_hidden = rc.model.sensor_embed_out = 12;
  rc.model.core_hidden_size = 16;
  rc.model.head_hidden = 16;
  rc.model.overshoot_length = 5;
  rc.model.train_steps = 30;
  rc.model.batch_size = 8;
  rc.model.learning_rate = 1e-3;
  rc.planner.horizon = 6;
  rc.planner.iterations = 5;
  rc.collect.episodes_total = 10;
  rc.collect.warmup_episodes = 5;
  rc.collect.learner_steps_per_episode = 2;
  rc.collect.snapshot_publish_interval = 4;
  rc.collect.buffer_capacity = 64;
  rc.eval.bootstrap = 100;
  rc.eval.probe.hidden = 16;
  rc.eval.probe.lstm_hidden = 16;
  rc.eval.probe.train_steps = 60;
  rc.eval.probe.batch_episodes = 8;
  rc.finalize();
  return rc;
}

}  // namespace

TEST_CASE("usage surface") {
  CHECK(run_command({"--help"}) == 0);
  CHECK(run_command({}) == 2);                      // a verb is required
  CHECK(run_command({"--bogus"}) == 2);
  CHECK(run_command({"frobnicate"}) == 2);
  CHECK(run_command({"collect-passive"}) == 2);     // --out missing
  CHECK(run_command({"collect-random", "--kind", "weird", "--out",
                     "never.ndjson"}) == 2);
  CHECK(run_command({"probe", "--task", "size", "--model", "mlp", "--data",
                     "x", "--out", "y"}) == 2);
  CHECK(run_command({"plan", "--cost", "fun_max", "--ckpt", "x"}) == 2);
}

TEST_CASE("runtime failures exit 1") {
  CHECK(run_command({"train", "--data", "cli_no_such_file.ndjson", "--out",
                     "cli_never.json"}) == 1);
  CHECK(run_command({"plan", "--cost", "touch_max", "--ckpt",
                     "cli_no_such_ckpt.json"}) == 1);
}

TEST_CASE("entropy check verb") {
  CHECK(run_command({"entropy-check", "--mixtures", "60", "--seed", "3"}) == 0);
  // an impossible tolerance must flip the exit code, not throw
  CHECK(run_command({"entropy-check", "--mixtures", "10", "--tol", "0"}) == 1);
}

TEST_CASE("gradient check verb") {
  CHECK(run_command({"gradcheck"}) == 0);
}

TEST_CASE("pipeline over files") {
  const RunConfig rc = tiny_run_config();
  write_run_config("cli_cfg.ini", rc);

  SUBCASE("scripted collection") {
    REQUIRE(run_command({"collect-passive", "--config", "cli_cfg.ini",
                         "--episodes", "14", "--out", "cli_d.ndjson"}) == 0);
    const Dataset ds = read_dataset("cli_d.ndjson");
    CHECK(ds.episodes.size() == 14);
    CHECK(ds.env.hash() == rc.env.hash());
    CHECK(lines_of(slurp("cli_d.ndjson")) == 15);  // header + one per episode

    REQUIRE(run_command({"collect-passive", "--config", "cli_cfg.ini",
                         "--episodes", "14", "--out", "cli_d2.ndjson"}) == 0);
    CHECK(slurp("cli_d.ndjson") == slurp("cli_d2.ndjson"));

    // recorded episodes replay exactly: same env seed + same actions
    for (const Trajectory& traj : ds.episodes) {
      GripperEnv env(ds.env, traj.seed);
      for (int t = 0; t < traj.body.length(); ++t) {
        Vector x = env.step(traj.body.actions.row(t).transpose());
        REQUIRE(x == traj.body.observations.row(t).transpose());
      }
    }
    std::remove("cli_d2.ndjson");
  }

  SUBCASE("random collection kinds differ") {
    REQUIRE(run_command({"collect-random", "--kind", "ind", "--config",
                         "cli_cfg.ini", "--episodes", "6", "--out",
                         "cli_ri.ndjson"}) == 0);
    REQUIRE(run_command({"collect-random", "--kind", "cor", "--config",
                         "cli_cfg.ini", "--episodes", "6", "--out",
                         "cli_rc.ndjson"}) == 0);
    CHECK(slurp("cli_ri.ndjson") != slurp("cli_rc.ndjson"));
    std::remove("cli_ri.ndjson");
    std::remove("cli_rc.ndjson");
  }

  SUBCASE("train, plan, probe, eval") {
    REQUIRE(run_command({"collect-passive", "--config", "cli_cfg.ini",
                         "--episodes", "20", "--out", "cli_d.ndjson"}) == 0);
    REQUIRE(run_command({"train", "--config", "cli_cfg.ini", "--data",
                         "cli_d.ndjson", "--out", "cli_m.json", "--loss-csv",
                         "cli_m_loss.csv"}) == 0);
    const Checkpoint ck = read_checkpoint("cli_m.json");
    CHECK(ck.model.core_hidden_size == rc.model.core_hidden_size);
    CHECK(ck.seed == rc.seed);
    CHECK(starts_with(slurp("cli_m_loss.csv"), "step,loss\n0,"));
    CHECK(lines_of(slurp("cli_m_loss.csv")) == rc.model.train_steps + 1);

    REQUIRE(run_command({"train", "--config", "cli_cfg.ini", "--data",
                         "cli_d.ndjson", "--out", "cli_m2.json"}) == 0);
    CHECK(slurp("cli_m.json") == slurp("cli_m2.json"));

    REQUIRE(run_command({"plan", "--config", "cli_cfg.ini", "--cost",
                         "touch_max", "--ckpt", "cli_m.json", "--episodes",
                         "2", "--out", "cli_p.ndjson"}) == 0);
    const Dataset planned = read_dataset("cli_p.ndjson");
    REQUIRE(planned.episodes.size() == 2);
    for (const Trajectory& traj : planned.episodes) {
      CHECK(traj.body.length() == rc.env.episode_length);
      CHECK(traj.body.actions.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
      for (int t = 1; t < traj.body.length(); ++t) {
        const double slew = (traj.body.actions.row(t) -
                             traj.body.actions.row(t - 1))
                                .cwiseAbs()
                                .maxCoeff();
        CHECK(slew <= rc.planner.slew_limit + 1e-9);
      }
    }

    REQUIRE(run_command({"probe", "--config", "cli_cfg.ini", "--task", "shape",
                         "--model", "preco", "--data", "cli_d.ndjson",
                         "--ckpt", "cli_m.json", "--out", "cli_probe.csv"}) ==
            0);
    CHECK(starts_with(slurp("cli_probe.csv"), "episode_id,timestep,loss\n"));

    REQUIRE(run_command({"probe", "--config", "cli_cfg.ini", "--task",
                         "orientation", "--model", "mlp", "--data",
                         "cli_d.ndjson", "--out", "cli_probe_o.csv"}) == 0);
    CHECK(starts_with(slurp("cli_probe_o.csv"),
                      "episode_id,timestep,loss,angular_error\n"));

    // preco probes need the dynamics checkpoint
    CHECK(run_command({"probe", "--config", "cli_cfg.ini", "--task", "shape",
                       "--model", "preco", "--data", "cli_d.ndjson", "--out",
                       "cli_probe2.csv"}) == 1);

    REQUIRE(run_command({"eval", "--config", "cli_cfg.ini", "--report",
                         "cli_rep", "--data", "cli_d.ndjson", "--ckpt",
                         "cli_m.json"}) == 0);
    CHECK(starts_with(slurp("cli_rep-summary.csv"),
                      "timestep,model,statistic,value,ci_lo,ci_hi\n"));
    CHECK(starts_with(slurp("cli_rep-cdf.csv"), "marker,model,quantile,value\n"));
    CHECK(slurp("cli_rep-summary.csv").find("win_vs:mlp") != std::string::npos);

    // a checkpoint trained on this env is refused under a different one
    RunConfig other = rc;
    other.env.num_fingers = 3;
    other.finalize();
    write_run_config("cli_cfg3.ini", other);
    CHECK(run_command({"plan", "--config", "cli_cfg3.ini", "--cost",
                       "entropy_max", "--ckpt", "cli_m.json"}) == 1);

    for (const char* f :
         {"cli_d.ndjson", "cli_m.json", "cli_m2.json", "cli_m_loss.csv",
          "cli_p.ndjson", "cli_probe.csv", "cli_probe_o.csv", "cli_rep-summary.csv",
          "cli_rep-cdf.csv", "cli_cfg3.ini"}) {
      std::remove(f);
    }
  }

  SUBCASE("active collection artifacts") {
    REQUIRE(run_command({"collect-active", "--config", "cli_cfg.ini", "--out",
                         "cli_a.ndjson", "--ckpt", "cli_a_final.json"}) == 0);
    const Dataset ds = read_dataset("cli_a.ndjson");
    CHECK(ds.episodes.size() ==
          static_cast<std::size_t>(rc.collect.episodes_total));
    const std::string loss = slurp("cli_a-loss.csv");
    CHECK(starts_with(loss, "step,loss\n"));
    const int learner_steps =
        (rc.collect.episodes_total - rc.collect.warmup_episodes) *
        rc.collect.learner_steps_per_episode;
    CHECK(lines_of(loss) == learner_steps + 1);
    const Checkpoint final = read_checkpoint("cli_a_final.json");
    CHECK(final.model.core_hidden_size == rc.model.core_hidden_size);
    // the first snapshot is published before any learner step
    const Checkpoint snap = read_checkpoint("cli_a-snapshot-1.json");
    CHECK(snap.params.size() == final.params.size());

    REQUIRE(run_command({"collect-active", "--config", "cli_cfg.ini", "--out",
                         "cli_a2.ndjson"}) == 0);
    CHECK(slurp("cli_a.ndjson") == slurp("cli_a2.ndjson"));

    for (const char* f : {"cli_a.ndjson", "cli_a2.ndjson", "cli_a-loss.csv",
                          "cli_a2-loss.csv", "cli_a_final.json"}) {
      std::remove(f);
    }
    for (int v = 1; v < 20; ++v) {
      std::remove(("cli_a-snapshot-" + std::to_string(v) + ".json").c_str());
      std::remove(("cli_a2-snapshot-" + std::to_string(v) + ".json").c_str());
    }
  }

  std::remove("cli_cfg.ini");
  std::remove("cli_d.ndjson");
}
