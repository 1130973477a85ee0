#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proprio/preco.hpp"
#include "proprio/trajectory.hpp"

namespace proprio {

// What a diagnostic readout predicts from its input vector. Orientation is
// encoded as (sin 2phi, cos 2phi) since the shapes repeat under a half-turn;
// discs carry no orientation and are excluded from that task.
enum class ProbeTaskKind { shape_class, orientation };

ProbeTaskKind parse_probe_task(const std::string& name);
std::string probe_task_name(ProbeTaskKind k);
int probe_target_dim(ProbeTaskKind k);  // 3 logits or 2 regression targets

enum class BaselineKind { mlp, lstm, randlstm };
BaselineKind parse_baseline_kind(const std::string& name);
std::string baseline_kind_name(BaselineKind k);

struct ProbeConfig {
  int hidden = 64;        // readout hidden width
  int lstm_hidden = 64;   // recurrent baseline width
  int train_steps = 2000;
  int batch_episodes = 16;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
};

// One tanh hidden layer and a linear output; the input source varies
// (dynamics states, raw sensors, or baseline-LSTM states).
struct ReadoutWeights {
  Matrix w1, b1, w2, b2;
  Matrix forward(const Matrix& input) const;  // targets x columns
};

// Readout over frozen dynamics states ([output; memory], 2H per step).
struct ProbeModel {
  ProbeTaskKind task = ProbeTaskKind::shape_class;
  ReadoutWeights readout;
};

struct BaselineModel {
  BaselineKind kind = BaselineKind::mlp;
  ProbeTaskKind task = ProbeTaskKind::shape_class;
  ReadoutWeights readout;
  // recurrent kinds only
  Matrix lstm_w, lstm_b;
  int lstm_hidden = 0;

  // hidden-state sequence of the recurrent kinds, one T x H matrix per
  // episode; identity source for mlp is the raw sensor rows
  std::vector<Matrix> lstm_states(const std::vector<Trajectory>& data) const;
};

int shape_label(const Trajectory& traj);
// Direction of the longer half-extent, in [0, pi). The (a, b, phi) and
// (b, a, phi + pi/2) descriptions draw the same shape, so the raw phi field
// is not a function of the object; the major axis is.
double major_axis_angle(const ObjectSpec& obj);
// (sin 2phi, cos 2phi) of the major-axis angle
Vector orientation_target(const Trajectory& traj);
double decoded_angle(double s, double c);           // in [0, pi)
// |a - b| under the half-turn symmetry, in [0, pi/2]
double angular_distance(double a, double b);

bool no_contact_step(const Episode& ep, int t, int num_fingers);

// The dynamics parameters are read-only here: the diagnostic loss never
// reaches them.
ProbeModel train_diagnostic(const PrecoConfig& model_cfg,
                            const ParamValues& frozen_params,
                            const std::vector<Trajectory>& data,
                            ProbeTaskKind task, const ProbeConfig& cfg,
                            std::uint64_t seed);

BaselineModel train_baseline(BaselineKind kind,
                             const std::vector<Trajectory>& data,
                             ProbeTaskKind task, const ProbeConfig& cfg,
                             std::uint64_t seed);

// Per-(episode, timestep) evaluation losses: cross-entropy for shape,
// squared error for orientation. Rows follow `test` order.
Matrix diagnostic_losses(const PrecoConfig& model_cfg,
                         const ParamValues& frozen_params,
                         const ProbeModel& probe,
                         const std::vector<Trajectory>& test);
Matrix baseline_losses(const BaselineModel& model,
                       const std::vector<Trajectory>& test);

// Orientation tasks only: per-(episode, timestep) angular error of the
// decoded angle against the true object angle.
Matrix diagnostic_angular_errors(const PrecoConfig& model_cfg,
                                 const ParamValues& frozen_params,
                                 const ProbeModel& probe,
                                 const std::vector<Trajectory>& test);
Matrix baseline_angular_errors(const BaselineModel& model,
                               const std::vector<Trajectory>& test);

// shape-task predictions as argmax labels, episodes x T
Eigen::MatrixXi diagnostic_predictions(const PrecoConfig& model_cfg,
                                       const ParamValues& frozen_params,
                                       const ProbeModel& probe,
                                       const std::vector<Trajectory>& test);

Vector median_per_timestep(const Matrix& losses);

// P(loss_a < loss_b) per timestep with ties counted half, and a bootstrap
// band over episodes.
struct WinCurve {
  Vector p, lo, hi;
};
WinCurve win_probability(const Matrix& loss_a, const Matrix& loss_b,
                         int bootstrap_n, std::uint64_t seed);

std::vector<double> loss_cdf(const Matrix& losses, int t);  // sorted column

struct EvalReport {
  std::vector<std::string> models;
  std::vector<Matrix> losses;  // per model, episodes x T
  Matrix medians;              // models x T
  std::vector<int> markers;
  // cdfs[model][marker] = sorted losses at that timestep
  std::vector<std::vector<std::vector<double>>> cdfs;
  struct PairStat {
    int a, b;
    WinCurve curve;
  };
  std::vector<PairStat> pairs;  // every ordered pair a < b
};

EvalReport eval_report(const std::vector<std::string>& names,
                       const std::vector<Matrix>& losses,
                       const std::vector<int>& markers, int bootstrap_n,
                       std::uint64_t seed);

}  // namespace proprio
