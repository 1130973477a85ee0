#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "proprio/episode.hpp"
#include "proprio/optim.hpp"
#include "proprio/rng.hpp"
#include "proprio/tape.hpp"

namespace proprio {

struct PrecoConfig {
  int action_dim = 4;
  int obs_dim = 16;
  int control_embed_depth = 1;
  int control_embed_hidden = 32;
  int control_embed_out = 32;
  int sensor_embed_depth = 1;
  int sensor_embed_hidden = 32;
  int sensor_embed_out = 32;
  int core_hidden_size = 64;
  int head_depth = 1;
  int head_hidden = 64;
  int num_components = 2;   // mixture components per observation dimension
  int overshoot_length = 15;
  double learning_rate = 2.5e-4;
  int batch_size = 16;
  int train_steps = 600;
  double grad_clip = 5.0;
  double stddev_floor = 1e-3;
  bool train_corrector_decode = true;

  void validate() const;
};

using ParamValues = std::vector<std::pair<std::string, Matrix>>;

ParamValues init_preco_params(const PrecoConfig& cfg, std::uint64_t seed);

// Declares every model parameter on one tape and builds the network pieces
// as graph fragments. One PrecoNet per tape; the tape must outlive it.
class PrecoNet {
 public:
  struct State {
    Var h;  // output part
    Var c;  // memory part
  };
  struct Decoded {
    std::vector<Var> log_alpha;  // per component, D x B
    std::vector<Var> mu;
    std::vector<Var> sigma;
  };

  PrecoNet(Tape& tape, const PrecoConfig& cfg, const ParamValues& init,
           bool trainable);

  const PrecoConfig& config() const { return cfg_; }

  Var control_embed(Var u) const;
  Var sensor_embed(Var x) const;
  State predictor_step(const State& s, Var control_embedding) const;
  State corrector_step(const State& s, Var sensor_embedding) const;
  Decoded decode(Var h) const;
  // Sum over observation dimensions of the per-dimension mixture negative
  // log density, elementwise over the batch: D x B in, D x B out rows
  // already collapsed per dimension (returns D x B of per-dim nll terms).
  Var nll_matrix(const Decoded& d, Var x) const;
  State zero_state(int batch) const;

  ParamSet& params() { return params_; }
  void set_values(const ParamValues& vals);
  ParamValues values() const;
  void bind() { params_.bind(); }

 private:
  Var param(const std::string& name) const;
  Var mlp(const std::string& prefix, int layers, Var x, bool activate_last) const;

  Tape* tape_;
  PrecoConfig cfg_;
  ParamSet params_;
};

// The unrolled training graph: teacher-forced corrector chain with
// overshooting predictor rollouts launched from every timestep, all decoded
// against the recorded observations. Fixed (T, batch, K); rebind and re-run.
class OvershootGraph {
 public:
  OvershootGraph(const PrecoConfig& cfg, const ParamValues& init, int T,
                 int batch, bool trainable);
  OvershootGraph(const OvershootGraph&) = delete;
  OvershootGraph& operator=(const OvershootGraph&) = delete;

  void bind_episodes(const std::vector<const Episode*>& batch);

  Tape& tape() { return tape_; }
  PrecoNet& net() { return net_; }
  Var loss() const { return loss_; }
  int term_count() const { return term_count_; }
  int horizon() const { return T_; }
  int batch() const { return batch_; }

  // Decoded-against-truth nll handles for evaluation (values readable after
  // forward): corrector posterior and the one-step-ahead predictor.
  const std::vector<Var>& corrector_nll() const { return corrector_nll_; }
  const std::vector<Var>& predictor_nll() const { return predictor0_nll_; }
  const std::vector<PrecoNet::State>& corrector_states() const {
    return corrector_states_;
  }

 private:
  Tape tape_;
  PrecoNet net_;
  int T_;
  int batch_;
  int term_count_ = 0;
  Var loss_;
  std::vector<Var> u_inputs_, x_inputs_;
  std::vector<Var> corrector_nll_, predictor0_nll_;
  std::vector<PrecoNet::State> corrector_states_;
  Matrix u_buf_, x_buf_;
};

// Single predict+correct transition for receding-horizon use: rebind the
// previous state, the executed action, and the fresh observation.
class FilterStep {
 public:
  FilterStep(const PrecoConfig& cfg, const ParamValues& vals);
  FilterStep(const FilterStep&) = delete;
  FilterStep& operator=(const FilterStep&) = delete;

  void set_values(const ParamValues& vals) { net_.set_values(vals); }
  // (h, c) -> (h', c') under action u and observation x
  std::pair<Vector, Vector> advance(const Vector& h, const Vector& c,
                                    const Vector& u, const Vector& x);

 private:
  Tape tape_;
  PrecoNet net_;
  Var h_in_, c_in_, u_in_, x_in_;
  PrecoNet::State out_;
};

// Plain decoder output for one state: per-dimension mixtures as D x M values.
struct DecodedValues {
  Matrix alpha;
  Matrix mu;
  Matrix sigma;
};

class DecodeGraph {
 public:
  DecodeGraph(const PrecoConfig& cfg, const ParamValues& vals);
  DecodeGraph(const DecodeGraph&) = delete;
  DecodeGraph& operator=(const DecodeGraph&) = delete;

  DecodedValues eval(const Vector& h);

 private:
  Tape tape_;
  PrecoNet net_;
  Var h_in_;
  PrecoNet::Decoded decoded_;
};

struct TrainResult {
  ParamValues params;
  std::vector<double> loss_trace;
};

// One optimizer step at a time so callers can interleave other work
// (the active-collection learner does).
class PrecoTrainer {
 public:
  PrecoTrainer(const PrecoConfig& cfg, int T, std::uint64_t seed);
  PrecoTrainer(const PrecoConfig& cfg, int T, const ParamValues& init);

  double step(const std::vector<const Episode*>& batch);
  ParamValues values() const { return graph_->net().values(); }
  long steps_done() const { return adam_.steps_taken(); }
  OvershootGraph& graph() { return *graph_; }

 private:
  PrecoConfig cfg_;
  std::unique_ptr<OvershootGraph> graph_;
  Adam adam_;
};

TrainResult train_preco(const std::vector<Episode>& dataset,
                        const PrecoConfig& cfg, std::uint64_t seed,
                        const std::function<void(int, double)>& on_step = {});

// Per-dimension constant Gaussian fit on training observations; the
// reference point every trained model must beat per held-out step.
struct GaussianBaseline {
  Vector mean;
  Vector stddev;
  static GaussianBaseline fit(const std::vector<Episode>& dataset,
                              double stddev_floor = 1e-3);
  double step_nll(const Vector& x) const;
};

// Teacher-forced per-step one-step-ahead nll for a set of episodes,
// evaluated through a K=1 graph; result[e][t].
std::vector<std::vector<double>> heldout_step_nll(
    const PrecoConfig& cfg, const ParamValues& vals,
    const std::vector<Episode>& episodes);

// Teacher-forced corrector state sequence (output ++ memory, 2H per step).
std::vector<Matrix> extract_states(const PrecoConfig& cfg,
                                   const ParamValues& vals,
                                   const std::vector<Episode>& episodes);

}  // namespace proprio
