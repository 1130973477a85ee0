#include "proprio/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace proprio {
namespace {

using nlohmann::json;

[[noreturn]] void fail_at(const std::string& origin, int line,
                          const std::string& why) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + why);
}

// shortest decimal that parses back to the same bits
std::string number_text(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& v, const std::string& origin, int line) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail_at(origin, line, "expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& origin, int line) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail_at(origin, line, "expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& origin,
                        int line) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail_at(origin, line, "expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail_at(origin, line, "expected true or false, got '" + v + "'");
}

const char* mode_name(ActiveMode m) {
  return m == ActiveMode::lockstep ? "lockstep" : "threaded";
}

ActiveMode parse_mode(const std::string& v, const std::string& origin,
                      int line) {
  if (v == "lockstep") return ActiveMode::lockstep;
  if (v == "threaded") return ActiveMode::threaded;
  fail_at(origin, line, "expected lockstep or threaded, got '" + v + "'");
}

void apply_env_key(EnvConfig& env, const std::string& key,
                   const std::string& v, const std::string& origin, int line) {
  if (key == "num_fingers") env.num_fingers = parse_int(v, origin, line);
  else if (key == "base_radius") env.base_radius = parse_double(v, origin, line);
  else if (key == "finger_length") env.finger_length = parse_double(v, origin, line);
  else if (key == "omega_max") env.omega_max = parse_double(v, origin, line);
  else if (key == "angle_min") env.angle_min = parse_double(v, origin, line);
  else if (key == "angle_max") env.angle_max = parse_double(v, origin, line);
  else if (key == "contact_stiffness") env.contact_stiffness = parse_double(v, origin, line);
  else if (key == "episode_length") env.episode_length = parse_int(v, origin, line);
  else if (key == "half_extent_min") env.half_extent_min = parse_double(v, origin, line);
  else if (key == "half_extent_max") env.half_extent_max = parse_double(v, origin, line);
  else if (key == "obs_noise_std") env.obs_noise_std = parse_double(v, origin, line);
  else if (key == "bisection_iters") env.bisection_iters = parse_int(v, origin, line);
  else fail_at(origin, line, "unknown key '" + key + "' in section [env]");
}

void apply_model_key(PrecoConfig& m, const std::string& key,
                     const std::string& v, const std::string& origin,
                     int line) {
  if (key == "control_embed_depth") m.control_embed_depth = parse_int(v, origin, line);
  else if (key == "control_embed_hidden") m.control_embed_hidden = parse_int(v, origin, line);
  else if (key == "control_embed_out") m.control_embed_out = parse_int(v, origin, line);
  else if (key == "sensor_embed_depth") m.sensor_embed_depth = parse_int(v, origin, line);
  else if (key == "sensor_embed_hidden") m.sensor_embed_hidden = parse_int(v, origin, line);
  else if (key == "sensor_embed_out") m.sensor_embed_out = parse_int(v, origin, line);
  else if (key == "core_hidden_size") m.core_hidden_size = parse_int(v, origin, line);
  else if (key == "head_depth") m.head_depth = parse_int(v, origin, line);
  else if (key == "head_hidden") m.head_hidden = parse_int(v, origin, line);
  else if (key == "num_components") m.num_components = parse_int(v, origin, line);
  else if (key == "overshoot_length") m.overshoot_length = parse_int(v, origin, line);
  else if (key == "learning_rate") m.learning_rate = parse_double(v, origin, line);
  else if (key == "batch_size") m.batch_size = parse_int(v, origin, line);
  else if (key == "train_steps") m.train_steps = parse_int(v, origin, line);
  else if (key == "grad_clip") m.grad_clip = parse_double(v, origin, line);
  else if (key == "stddev_floor") m.stddev_floor = parse_double(v, origin, line);
  else if (key == "train_corrector_decode") m.train_corrector_decode = parse_bool(v, origin, line);
  else fail_at(origin, line, "unknown key '" + key + "' in section [model]");
}

void apply_planner_key(MpcConfig& p, const std::string& key,
                       const std::string& v, const std::string& origin,
                       int line) {
  if (key == "horizon") p.horizon = parse_int(v, origin, line);
  else if (key == "iterations") p.iterations = parse_int(v, origin, line);
  else if (key == "step_size") p.step_size = parse_double(v, origin, line);
  else if (key == "box_limit") p.box_limit = parse_double(v, origin, line);
  else if (key == "slew_limit") p.slew_limit = parse_double(v, origin, line);
  else if (key == "cost") {
    try {
      p.cost.kind = parse_cost_kind(v);
    } catch (const std::exception& e) {
      fail_at(origin, line, e.what());
    }
  } else {
    fail_at(origin, line, "unknown key '" + key + "' in section [planner]");
  }
}

void apply_collect_key(CollectConfig& c, const std::string& key,
                       const std::string& v, const std::string& origin,
                       int line) {
  if (key == "episodes_total") c.episodes_total = parse_int(v, origin, line);
  else if (key == "warmup_episodes") c.warmup_episodes = parse_int(v, origin, line);
  else if (key == "learner_steps_per_episode") c.learner_steps_per_episode = parse_int(v, origin, line);
  else if (key == "snapshot_publish_interval") c.snapshot_publish_interval = parse_int(v, origin, line);
  else if (key == "num_actors") c.num_actors = parse_int(v, origin, line);
  else if (key == "buffer_capacity") c.buffer_capacity = parse_u64(v, origin, line);
  else if (key == "noise_damping") c.noise_damping = parse_double(v, origin, line);
  else if (key == "noise_std") c.noise_std = parse_double(v, origin, line);
  else if (key == "mode") c.mode = parse_mode(v, origin, line);
  else fail_at(origin, line, "unknown key '" + key + "' in section [collect]");
}

void apply_eval_key(EvalConfig& e, const std::string& key,
                    const std::string& v, const std::string& origin,
                    int line) {
  if (key == "bootstrap") e.bootstrap = parse_int(v, origin, line);
  else if (key == "train_fraction") e.train_fraction = parse_double(v, origin, line);
  else if (key == "probe_hidden") e.probe.hidden = parse_int(v, origin, line);
  else if (key == "probe_lstm_hidden") e.probe.lstm_hidden = parse_int(v, origin, line);
  else if (key == "probe_train_steps") e.probe.train_steps = parse_int(v, origin, line);
  else if (key == "probe_batch_episodes") e.probe.batch_episodes = parse_int(v, origin, line);
  else if (key == "probe_learning_rate") e.probe.learning_rate = parse_double(v, origin, line);
  else if (key == "probe_clip_norm") e.probe.clip_norm = parse_double(v, origin, line);
  else fail_at(origin, line, "unknown key '" + key + "' in section [eval]");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw std::runtime_error(what + " must be a non-empty array of rows");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) {
      throw std::runtime_error(what + " rows have uneven lengths");
    }
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json env_to_json(const EnvConfig& env) {
  return json{{"num_fingers", env.num_fingers},
              {"base_radius", env.base_radius},
              {"finger_length", env.finger_length},
              {"omega_max", env.omega_max},
              {"angle_min", env.angle_min},
              {"angle_max", env.angle_max},
              {"contact_stiffness", env.contact_stiffness},
              {"episode_length", env.episode_length},
              {"half_extent_min", env.half_extent_min},
              {"half_extent_max", env.half_extent_max},
              {"obs_noise_std", env.obs_noise_std},
              {"bisection_iters", env.bisection_iters}};
}

EnvConfig env_from_json(const json& j) {
  EnvConfig env;
  const json reference = env_to_json(env);
  for (const auto& item : j.items()) {
    if (!reference.contains(item.key())) {
      throw std::runtime_error("unknown environment field '" + item.key() + "'");
    }
  }
  for (const auto& item : reference.items()) {
    if (!j.contains(item.key())) {
      throw std::runtime_error("missing environment field '" + item.key() + "'");
    }
  }
  env.num_fingers = j["num_fingers"].get<int>();
  env.base_radius = j["base_radius"].get<double>();
  env.finger_length = j["finger_length"].get<double>();
  env.omega_max = j["omega_max"].get<double>();
  env.angle_min = j["angle_min"].get<double>();
  env.angle_max = j["angle_max"].get<double>();
  env.contact_stiffness = j["contact_stiffness"].get<double>();
  env.episode_length = j["episode_length"].get<int>();
  env.half_extent_min = j["half_extent_min"].get<double>();
  env.half_extent_max = j["half_extent_max"].get<double>();
  env.obs_noise_std = j["obs_noise_std"].get<double>();
  env.bisection_iters = j["bisection_iters"].get<int>();
  return env;
}

json model_to_json(const PrecoConfig& m) {
  return json{{"action_dim", m.action_dim},
              {"obs_dim", m.obs_dim},
              {"control_embed_depth", m.control_embed_depth},
              {"control_embed_hidden", m.control_embed_hidden},
              {"control_embed_out", m.control_embed_out},
              {"sensor_embed_depth", m.sensor_embed_depth},
              {"sensor_embed_hidden", m.sensor_embed_hidden},
              {"sensor_embed_out", m.sensor_embed_out},
              {"core_hidden_size", m.core_hidden_size},
              {"head_depth", m.head_depth},
              {"head_hidden", m.head_hidden},
              {"num_components", m.num_components},
              {"overshoot_length", m.overshoot_length},
              {"learning_rate", m.learning_rate},
              {"batch_size", m.batch_size},
              {"train_steps", m.train_steps},
              {"grad_clip", m.grad_clip},
              {"stddev_floor", m.stddev_floor},
              {"train_corrector_decode", m.train_corrector_decode}};
}

PrecoConfig model_from_json(const json& j) {
  PrecoConfig m;
  const json reference = model_to_json(m);
  for (const auto& item : j.items()) {
    if (!reference.contains(item.key())) {
      throw std::runtime_error("unknown model field '" + item.key() + "'");
    }
  }
  for (const auto& item : reference.items()) {
    if (!j.contains(item.key())) {
      throw std::runtime_error("missing model field '" + item.key() + "'");
    }
  }
  m.action_dim = j["action_dim"].get<int>();
  m.obs_dim = j["obs_dim"].get<int>();
  m.control_embed_depth = j["control_embed_depth"].get<int>();
  m.control_embed_hidden = j["control_embed_hidden"].get<int>();
  m.control_embed_out = j["control_embed_out"].get<int>();
  m.sensor_embed_depth = j["sensor_embed_depth"].get<int>();
  m.sensor_embed_hidden = j["sensor_embed_hidden"].get<int>();
  m.sensor_embed_out = j["sensor_embed_out"].get<int>();
  m.core_hidden_size = j["core_hidden_size"].get<int>();
  m.head_depth = j["head_depth"].get<int>();
  m.head_hidden = j["head_hidden"].get<int>();
  m.num_components = j["num_components"].get<int>();
  m.overshoot_length = j["overshoot_length"].get<int>();
  m.learning_rate = j["learning_rate"].get<double>();
  m.batch_size = j["batch_size"].get<int>();
  m.train_steps = j["train_steps"].get<int>();
  m.grad_clip = j["grad_clip"].get<double>();
  m.stddev_floor = j["stddev_floor"].get<double>();
  m.train_corrector_decode = j["train_corrector_decode"].get<bool>();
  return m;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

void RunConfig::finalize() {
  env.validate();
  model.action_dim = env.num_fingers;
  model.obs_dim = env.obs_dim();
  model.validate();
  planner.cost.touch_dims.clear();
  if (planner.cost.kind == CostKind::touch_max) {
    for (int f = 0; f < env.num_fingers; ++f) {
      planner.cost.touch_dims.push_back(obs_touch_index(f));
    }
  }
  if (planner.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (planner.iterations < 0) throw std::invalid_argument("negative iterations");
  if (planner.step_size <= 0.0) throw std::invalid_argument("step_size must be > 0");
  PlanConstraints pc;
  pc.box_limit = planner.box_limit;
  pc.slew_limit = planner.slew_limit;
  pc.reference_previous_action = Vector::Zero(env.num_fingers);
  pc.validate();
  active().validate();
  if (eval.bootstrap < 0) throw std::invalid_argument("negative bootstrap count");
  if (eval.train_fraction <= 0.0 || eval.train_fraction >= 1.0) {
    throw std::invalid_argument("train_fraction must lie inside (0, 1)");
  }
  if (eval.probe.hidden < 1 || eval.probe.lstm_hidden < 1 ||
      eval.probe.train_steps < 0 || eval.probe.batch_episodes < 1 ||
      eval.probe.learning_rate <= 0.0 || eval.probe.clip_norm < 0.0) {
    throw std::invalid_argument("bad probe settings");
  }
}

ActiveConfig RunConfig::active() const {
  ActiveConfig a;
  a.model = model;
  a.planner = planner;
  a.episodes_total = collect.episodes_total;
  a.warmup_episodes = collect.warmup_episodes;
  a.learner_steps_per_episode = collect.learner_steps_per_episode;
  a.snapshot_publish_interval = collect.snapshot_publish_interval;
  a.num_actors = collect.num_actors;
  a.buffer_capacity = collect.buffer_capacity;
  a.noise_damping = collect.noise_damping;
  a.noise_std = collect.noise_std;
  a.mode = collect.mode;
  return a;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.finalize();
  return cfg;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    const std::size_t hash = s.find('#');
    if (hash != std::string::npos) s.erase(hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail_at(origin, line, "unterminated section header");
      section = s.substr(1, s.size() - 2);
      if (section != "env" && section != "model" && section != "planner" &&
          section != "collect" && section != "eval") {
        fail_at(origin, line, "unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail_at(origin, line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail_at(origin, line, "expected 'key = value'");
    }
    if (section.empty()) {
      if (key == "seed") cfg.seed = parse_u64(value, origin, line);
      else fail_at(origin, line, "unknown top-level key '" + key + "'");
    } else if (section == "env") {
      apply_env_key(cfg.env, key, value, origin, line);
    } else if (section == "model") {
      apply_model_key(cfg.model, key, value, origin, line);
    } else if (section == "planner") {
      apply_planner_key(cfg.planner, key, value, origin, line);
    } else if (section == "collect") {
      apply_collect_key(cfg.collect, key, value, origin, line);
    } else {
      apply_eval_key(cfg.eval, key, value, origin, line);
    }
  }
  try {
    cfg.finalize();
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string run_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  const auto d = [](double v) { return number_text(v); };
  out << "# every stage derives its random streams from this one seed\n";
  out << "seed = " << cfg.seed << "\n\n";

  out << "[env]\n";
  out << "num_fingers = " << cfg.env.num_fingers << "\n";
  out << "base_radius = " << d(cfg.env.base_radius) << "\n";
  out << "finger_length = " << d(cfg.env.finger_length) << "\n";
  out << "omega_max = " << d(cfg.env.omega_max) << "\n";
  out << "angle_min = " << d(cfg.env.angle_min) << "\n";
  out << "angle_max = " << d(cfg.env.angle_max) << "\n";
  out << "contact_stiffness = " << d(cfg.env.contact_stiffness) << "\n";
  out << "episode_length = " << cfg.env.episode_length << "\n";
  out << "half_extent_min = " << d(cfg.env.half_extent_min) << "\n";
  out << "half_extent_max = " << d(cfg.env.half_extent_max) << "\n";
  out << "obs_noise_std = " << d(cfg.env.obs_noise_std) << "\n";
  out << "bisection_iters = " << cfg.env.bisection_iters << "\n\n";

  out << "[model]\n";
  out << "# input widths follow [env]; desk-sized widths here. Full-scale\n";
  out << "# reference: embeds 128/128, core 128, heads 128, 2 components,\n";
  out << "# overshoot 30, lr 2.5e-4 passive / 4.36490726736e-4 active.\n";
  out << "control_embed_depth = " << cfg.model.control_embed_depth << "\n";
  out << "control_embed_hidden = " << cfg.model.control_embed_hidden << "\n";
  out << "control_embed_out = " << cfg.model.control_embed_out << "\n";
  out << "sensor_embed_depth = " << cfg.model.sensor_embed_depth << "\n";
  out << "sensor_embed_hidden = " << cfg.model.sensor_embed_hidden << "\n";
  out << "sensor_embed_out = " << cfg.model.sensor_embed_out << "\n";
  out << "core_hidden_size = " << cfg.model.core_hidden_size << "\n";
  out << "head_depth = " << cfg.model.head_depth << "\n";
  out << "head_hidden = " << cfg.model.head_hidden << "\n";
  out << "num_components = " << cfg.model.num_components << "\n";
  out << "overshoot_length = " << cfg.model.overshoot_length << "\n";
  out << "learning_rate = " << d(cfg.model.learning_rate) << "\n";
  out << "batch_size = " << cfg.model.batch_size << "\n";
  out << "train_steps = " << cfg.model.train_steps << "\n";
  out << "grad_clip = " << d(cfg.model.grad_clip) << "\n";
  out << "stddev_floor = " << d(cfg.model.stddev_floor) << "\n";
  out << "train_corrector_decode = "
      << (cfg.model.train_corrector_decode ? "true" : "false") << "\n\n";

  out << "[planner]\n";
  out << "horizon = " << cfg.planner.horizon << "\n";
  out << "iterations = " << cfg.planner.iterations << "\n";
  out << "step_size = " << d(cfg.planner.step_size) << "\n";
  out << "box_limit = " << d(cfg.planner.box_limit) << "\n";
  out << "slew_limit = " << d(cfg.planner.slew_limit) << "\n";
  out << "cost = " << cost_kind_name(cfg.planner.cost.kind) << "\n\n";

  out << "[collect]\n";
  out << "episodes_total = " << cfg.collect.episodes_total << "\n";
  out << "warmup_episodes = " << cfg.collect.warmup_episodes << "\n";
  out << "learner_steps_per_episode = " << cfg.collect.learner_steps_per_episode << "\n";
  out << "snapshot_publish_interval = " << cfg.collect.snapshot_publish_interval << "\n";
  out << "num_actors = " << cfg.collect.num_actors << "\n";
  out << "buffer_capacity = " << cfg.collect.buffer_capacity << "\n";
  out << "noise_damping = " << d(cfg.collect.noise_damping) << "\n";
  out << "noise_std = " << d(cfg.collect.noise_std) << "\n";
  out << "mode = " << mode_name(cfg.collect.mode) << "\n\n";

  out << "[eval]\n";
  out << "bootstrap = " << cfg.eval.bootstrap << "\n";
  out << "train_fraction = " << d(cfg.eval.train_fraction) << "\n";
  out << "probe_hidden = " << cfg.eval.probe.hidden << "\n";
  out << "probe_lstm_hidden = " << cfg.eval.probe.lstm_hidden << "\n";
  out << "probe_train_steps = " << cfg.eval.probe.train_steps << "\n";
  out << "probe_batch_episodes = " << cfg.eval.probe.batch_episodes << "\n";
  out << "probe_learning_rate = " << d(cfg.eval.probe.learning_rate) << "\n";
  out << "probe_clip_norm = " << d(cfg.eval.probe.clip_norm) << "\n";
  return out.str();
}

void write_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out = open_for_write(path);
  out << run_config_text(cfg);
  finish_write(out, path);
}

void write_dataset(const std::string& path, const EnvConfig& env,
                   const std::vector<Trajectory>& episodes) {
  env.validate();
  std::ofstream out = open_for_write(path);
  json header{{"format", "proprio-dataset"},
              {"version", 1},
              {"env_hash", hex16(env.hash())},
              {"env", env_to_json(env)},
              {"obs_layout", observation_layout(env)}};
  out << header.dump() << "\n";
  for (const Trajectory& traj : episodes) {
    json markers = json::array();
    for (const auto& [t, open] : traj.markers) markers.push_back({t, open});
    json e{{"episode_id", traj.episode_id},
           {"seed", traj.seed},
           {"actions", matrix_to_json(traj.body.actions)},
           {"observations", matrix_to_json(traj.body.observations)},
           {"label",
            {{"shape", shape_name(traj.label.shape)},
             {"half_extents", {traj.label.a, traj.label.b}},
             {"angle", traj.label.phi}}},
           {"markers", std::move(markers)}};
    out << e.dump() << "\n";
  }
  finish_write(out, path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  Dataset ds;
  std::string raw;
  int line = 0;
  if (!std::getline(in, raw) || trim(raw).empty()) {
    fail_at(path, 1, "missing dataset header");
  }
  ++line;
  try {
    const json h = json::parse(raw);
    if (h.value("format", "") != "proprio-dataset") {
      throw std::runtime_error("not a dataset file (bad 'format')");
    }
    if (h.value("version", 0) != 1) {
      throw std::runtime_error("unsupported dataset version");
    }
    ds.env = env_from_json(h.at("env"));
    ds.env.validate();
    ds.env_hash = std::strtoull(h.at("env_hash").get<std::string>().c_str(),
                                nullptr, 16);
    if (ds.env_hash != ds.env.hash()) {
      throw std::runtime_error("env hash does not match the env settings");
    }
  } catch (const std::exception& e) {
    fail_at(path, line, e.what());
  }

  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      fail_at(path, line, "blank line inside the episode list");
    }
    try {
      const json j = json::parse(raw);
      Trajectory traj;
      traj.episode_id = j.at("episode_id").get<std::int64_t>();
      traj.seed = j.at("seed").get<std::uint64_t>();
      traj.body.actions = matrix_from_json(j.at("actions"), "actions");
      traj.body.observations =
          matrix_from_json(j.at("observations"), "observations");
      const json& label = j.at("label");
      traj.label.shape = shape_from_name(label.at("shape").get<std::string>());
      traj.label.a = label.at("half_extents").at(0).get<double>();
      traj.label.b = label.at("half_extents").at(1).get<double>();
      traj.label.phi = label.at("angle").get<double>();
      for (const json& m : j.at("markers")) {
        traj.markers.emplace_back(m.at(0).get<int>(), m.at(1).get<bool>());
      }
      if (traj.body.actions.rows() != traj.body.observations.rows()) {
        throw std::runtime_error("actions and observations disagree on length");
      }
      if (traj.body.actions.cols() != ds.env.num_fingers) {
        throw std::runtime_error("wrong action width for the env header");
      }
      if (traj.body.observations.cols() != ds.env.obs_dim()) {
        throw std::runtime_error("wrong observation width for the env header");
      }
      ds.episodes.push_back(std::move(traj));
    } catch (const std::exception& e) {
      fail_at(path, line, e.what());
    }
  }
  return ds;
}

std::vector<Trajectory> merge_datasets(std::vector<Dataset> parts) {
  if (parts.empty()) throw std::invalid_argument("no datasets to merge");
  std::vector<Trajectory> merged;
  for (auto& part : parts) {
    if (part.env_hash != parts.front().env_hash) {
      throw std::runtime_error(
          "refusing to merge datasets recorded under different env configs");
    }
    for (auto& traj : part.episodes) merged.push_back(std::move(traj));
  }
  return merged;
}

void write_checkpoint(const std::string& path, const PrecoConfig& model,
                      const ParamValues& params, std::uint64_t seed) {
  json arrays = json::array();
  for (const auto& [name, value] : params) {
    json flat = json::array();
    for (int i = 0; i < value.rows(); ++i) {
      for (int j = 0; j < value.cols(); ++j) flat.push_back(value(i, j));
    }
    arrays.push_back({{"name", name},
                      {"rows", value.rows()},
                      {"cols", value.cols()},
                      {"data", std::move(flat)}});
  }
  json ckpt{{"format", "proprio-checkpoint"},
            {"version", 1},
            {"seed", seed},
            {"model", model_to_json(model)},
            {"params", std::move(arrays)}};
  std::ofstream out = open_for_write(path);
  out << ckpt.dump(1) << "\n";
  finish_write(out, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Checkpoint ck;
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "proprio-checkpoint") {
      throw std::runtime_error("not a checkpoint file (bad 'format')");
    }
    if (j.value("version", 0) != 1) {
      throw std::runtime_error("unsupported checkpoint version");
    }
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.model = model_from_json(j.at("model"));
    ck.model.validate();
    for (const json& a : j.at("params")) {
      const int rows = a.at("rows").get<int>();
      const int cols = a.at("cols").get<int>();
      const json& data = a.at("data");
      if (static_cast<int>(data.size()) != rows * cols) {
        throw std::runtime_error("array '" + a.at("name").get<std::string>() +
                                 "' does not match its declared shape");
      }
      Matrix m(rows, cols);
      int k = 0;
      for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
      }
      ck.params.emplace_back(a.at("name").get<std::string>(), std::move(m));
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return ck;
}

void write_learner_loss_csv(const std::string& path,
                            const std::vector<double>& losses) {
  std::ofstream out = open_for_write(path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << i << "," << number_text(losses[i]) << "\n";
  }
  finish_write(out, path);
}

void write_probe_csv(const std::string& path,
                     const std::vector<std::int64_t>& episode_ids,
                     const Matrix& losses, const Matrix* angular) {
  if (static_cast<std::size_t>(losses.rows()) != episode_ids.size()) {
    throw std::invalid_argument("probe csv: one id per loss row required");
  }
  if (angular != nullptr && (angular->rows() != losses.rows() ||
                             angular->cols() != losses.cols())) {
    throw std::invalid_argument("probe csv: angular table shape mismatch");
  }
  std::ofstream out = open_for_write(path);
  out << "episode_id,timestep,loss";
  if (angular != nullptr) out << ",angular_error";
  out << "\n";
  for (int e = 0; e < losses.rows(); ++e) {
    for (int t = 0; t < losses.cols(); ++t) {
      out << episode_ids[static_cast<std::size_t>(e)] << "," << t << ","
          << number_text(losses(e, t));
      if (angular != nullptr) out << "," << number_text((*angular)(e, t));
      out << "\n";
    }
  }
  finish_write(out, path);
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out = open_for_write(path);
  out << "timestep,model,statistic,value,ci_lo,ci_hi\n";
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    for (int t = 0; t < report.medians.cols(); ++t) {
      out << t << "," << report.models[m] << ",median,"
          << number_text(report.medians(static_cast<int>(m), t)) << ",,\n";
    }
  }
  for (const auto& pair : report.pairs) {
    const std::string stat = "win_vs:" + report.models[pair.b];
    for (int t = 0; t < pair.curve.p.size(); ++t) {
      out << t << "," << report.models[pair.a] << "," << stat << ","
          << number_text(pair.curve.p[t]) << ","
          << number_text(pair.curve.lo[t]) << ","
          << number_text(pair.curve.hi[t]) << "\n";
    }
  }
  finish_write(out, path);
}

void write_cdf_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out = open_for_write(path);
  out << "marker,model,quantile,value\n";
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    for (std::size_t k = 0; k < report.markers.size(); ++k) {
      const std::vector<double>& cdf = report.cdfs[m][k];
      for (std::size_t i = 0; i < cdf.size(); ++i) {
        const double q = (static_cast<double>(i) + 0.5) /
                         static_cast<double>(cdf.size());
        out << report.markers[k] << "," << report.models[m] << ","
            << number_text(q) << "," << number_text(cdf[i]) << "\n";
      }
    }
  }
  finish_write(out, path);
}

}  // namespace proprio
