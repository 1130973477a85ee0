#include "proprio/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "proprio/optim.hpp"
#include "proprio/rng.hpp"
#include "proprio/tape.hpp"

namespace proprio {
namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix uniform_weights(Rng& rng, int rows, int cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

ReadoutWeights init_readout(Rng& rng, int in_dim, int hidden, int out_dim) {
  ReadoutWeights r;
  r.w1 = uniform_weights(rng, hidden, in_dim);
  r.b1 = Matrix::Zero(hidden, 1);
  r.w2 = uniform_weights(rng, out_dim, hidden);
  r.b2 = Matrix::Zero(out_dim, 1);
  return r;
}

struct ReadoutVars {
  Var w1, b1, w2, b2;
};

ReadoutVars declare_readout(Tape& tape, ParamSet& params,
                            const ReadoutWeights& init) {
  ReadoutVars v;
  v.w1 = params.declare(tape, "readout.w1", init.w1);
  v.b1 = params.declare(tape, "readout.b1", init.b1);
  v.w2 = params.declare(tape, "readout.w2", init.w2);
  v.b2 = params.declare(tape, "readout.b2", init.b2);
  return v;
}

Var readout_expr(const ReadoutVars& r, Var x) {
  return bias_add(matmul(r.w2, tanh(bias_add(matmul(r.w1, x), r.b1))), r.b2);
}

// Cross-entropy summed over columns: logsumexp of the logit rows minus the
// logit picked out by the one-hot targets.
Var class_loss_sum(Var logits, Var onehot, int classes) {
  std::vector<Var> rows;
  rows.reserve(classes);
  for (int k = 0; k < classes; ++k) rows.push_back(slice(logits, k, 1));
  return sub(sum(logsumexp(rows)), sum(mul(onehot, logits)));
}

Var squared_loss_sum(Var pred, Var target) {
  Var diff = sub(pred, target);
  return sum(mul(diff, diff));
}

Var task_loss_sum(ProbeTaskKind task, Var pred, Var target) {
  if (task == ProbeTaskKind::shape_class) {
    return class_loss_sum(pred, target, probe_target_dim(task));
  }
  return squared_loss_sum(pred, target);
}

double plain_class_loss(const Vector& logits, int label) {
  const double top = logits.maxCoeff();
  double acc = 0.0;
  for (int k = 0; k < logits.size(); ++k) acc += std::exp(logits[k] - top);
  return top + std::log(acc) - logits[label];
}

double plain_task_loss(ProbeTaskKind task, const Vector& pred,
                       const Trajectory& traj) {
  if (task == ProbeTaskKind::shape_class) {
    return plain_class_loss(pred, shape_label(traj));
  }
  return (pred - orientation_target(traj)).squaredNorm();
}

ReadoutWeights extract_readout(const ParamSet& params) {
  ReadoutWeights r;
  r.w1 = params.value("readout.w1");
  r.b1 = params.value("readout.b1");
  r.w2 = params.value("readout.w2");
  r.b2 = params.value("readout.b2");
  return r;
}

Matrix target_column(ProbeTaskKind task, const Trajectory& traj) {
  if (task == ProbeTaskKind::shape_class) {
    Matrix y = Matrix::Zero(3, 1);
    y(shape_label(traj), 0) = 1.0;
    return y;
  }
  return orientation_target(traj);
}

std::vector<Trajectory> task_subset(ProbeTaskKind task,
                                    const std::vector<Trajectory>& data) {
  if (task == ProbeTaskKind::shape_class) return data;
  std::vector<Trajectory> kept;
  for (const auto& t : data) {
    if (t.label.shape != Shape::disc) kept.push_back(t);
  }
  if (kept.empty()) {
    throw std::invalid_argument(
        "orientation task needs rect or ellipse episodes; got only discs");
  }
  return kept;
}

int common_length(const std::vector<Trajectory>& data) {
  if (data.empty()) throw std::invalid_argument("no episodes given");
  const int T = data.front().body.length();
  for (const auto& t : data) {
    if (t.body.length() != T) {
      throw std::invalid_argument("episodes have mixed lengths");
    }
  }
  if (T < 1) throw std::invalid_argument("empty episodes");
  return T;
}

// One input column per (episode, timestep); episode feature rows in
// `sources` (T x in_dim each, matching `data` order).
ReadoutWeights train_readout_on_rows(const std::vector<Matrix>& sources,
                                     const std::vector<Trajectory>& data,
                                     ProbeTaskKind task,
                                     const ProbeConfig& cfg,
                                     std::uint64_t seed) {
  const int T = common_length(data);
  const int in_dim = static_cast<int>(sources.front().cols());
  const int out_dim = probe_target_dim(task);
  const int B = std::min<int>(cfg.batch_episodes, static_cast<int>(data.size()));
  const int N = B * T;

  // Cell-memory rows are unbounded and can dwarf the tanh layer, so train on
  // standardized inputs and fold the affine map back into the weights below;
  // forward() keeps taking raw rows.
  Vector mu = Vector::Zero(in_dim), sd = Vector::Ones(in_dim);
  {
    Vector sum = Vector::Zero(in_dim), sq = Vector::Zero(in_dim);
    double n = 0.0;
    for (const Matrix& m : sources) {
      sum += m.colwise().sum().transpose();
      sq += m.array().square().matrix().colwise().sum().transpose();
      n += static_cast<double>(m.rows());
    }
    mu = sum / n;
    const Vector var = (sq / n - mu.cwiseAbs2()).cwiseMax(0.0);
    for (int i = 0; i < in_dim; ++i) {
      sd[i] = var[i] > 1e-12 ? std::sqrt(var[i]) : 1.0;
    }
  }

  Rng init_rng(mix_seed(seed, 1));
  Rng batch_rng(mix_seed(seed, 2));

  Tape tape;
  tape.check_finite = false;
  ParamSet params;
  ReadoutVars rv = declare_readout(tape, params, init_readout(init_rng, in_dim,
                                                              cfg.hidden, out_dim));
  Var x_in = tape.input("x", in_dim, N, false);
  Var y_in = tape.input("y", out_dim, N, false);
  Var loss = mul(task_loss_sum(task, readout_expr(rv, x_in), y_in),
                 tape.scalar(1.0 / N));

  Adam adam(AdamConfig{.lr = cfg.learning_rate});
  Matrix xb(in_dim, N), yb(out_dim, N);
  for (int step = 0; step < cfg.train_steps; ++step) {
    for (int b = 0; b < B; ++b) {
      const int e = batch_rng.uniform_int(static_cast<int>(data.size()));
      const Matrix y = target_column(task, data[e]);
      for (int t = 0; t < T; ++t) {
        xb.col(b * T + t) =
            (sources[e].row(t).transpose() - mu).cwiseQuotient(sd);
        yb.col(b * T + t) = y;
      }
    }
    params.bind();
    tape.set_input(x_in, xb);
    tape.set_input(y_in, yb);
    tape.forward();
    tape.backward(loss);
    adam.step(params, cfg.clip_norm);
  }
  ReadoutWeights w = extract_readout(params);
  w.w1 = (w.w1 * sd.cwiseInverse().asDiagonal()).eval();
  w.b1 -= w.w1 * mu;
  return w;
}

std::vector<Matrix> observation_rows(const std::vector<Trajectory>& data) {
  std::vector<Matrix> rows;
  rows.reserve(data.size());
  for (const auto& t : data) rows.push_back(t.body.observations);
  return rows;
}

std::vector<Episode> bodies_of(const std::vector<Trajectory>& data) {
  std::vector<Episode> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(t.body);
  return out;
}

Matrix losses_over_rows(const std::vector<Matrix>& sources,
                        const std::vector<Trajectory>& data,
                        ProbeTaskKind task, const ReadoutWeights& readout) {
  const int T = common_length(data);
  Matrix out(static_cast<int>(data.size()), T);
  for (std::size_t e = 0; e < data.size(); ++e) {
    const Matrix pred = readout.forward(sources[e].transpose());  // out x T
    for (int t = 0; t < T; ++t) {
      out(static_cast<int>(e), t) = plain_task_loss(task, pred.col(t), data[e]);
    }
  }
  return out;
}

Matrix angular_errors_over_rows(const std::vector<Matrix>& sources,
                                const std::vector<Trajectory>& data,
                                ProbeTaskKind task,
                                const ReadoutWeights& readout) {
  if (task != ProbeTaskKind::orientation) {
    throw std::invalid_argument("angular errors need an orientation readout");
  }
  const int T = common_length(data);
  Matrix out(static_cast<int>(data.size()), T);
  for (std::size_t e = 0; e < data.size(); ++e) {
    const Matrix pred = readout.forward(sources[e].transpose());
    const double truth = major_axis_angle(data[e].label);
    for (int t = 0; t < T; ++t) {
      const double angle = decoded_angle(pred(0, t), pred(1, t));
      out(static_cast<int>(e), t) = angular_distance(angle, truth);
    }
  }
  return out;
}

struct LstmVars {
  Var w, b;
  int hidden = 0;
};

PrecoNet::State lstm_step(const LstmVars& cell, const PrecoNet::State& s,
                          Var x) {
  const int H = cell.hidden;
  Var z = bias_add(matmul(cell.w, concat({x, s.h})), cell.b);
  Var i = sigmoid(slice(z, 0, H));
  Var f = sigmoid(slice(z, H, H));
  Var g = tanh(slice(z, 2 * H, H));
  Var o = sigmoid(slice(z, 3 * H, H));
  Var c = add(mul(f, s.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

BaselineModel train_recurrent_baseline(BaselineKind kind,
                                       const std::vector<Trajectory>& data,
                                       ProbeTaskKind task,
                                       const ProbeConfig& cfg,
                                       std::uint64_t seed) {
  const int T = common_length(data);
  const int D = static_cast<int>(data.front().body.observations.cols());
  const int H = cfg.lstm_hidden;
  const int out_dim = probe_target_dim(task);
  const int B = std::min<int>(cfg.batch_episodes, static_cast<int>(data.size()));
  const bool train_cell = (kind == BaselineKind::lstm);

  Rng init_rng(mix_seed(seed, 1));
  Rng batch_rng(mix_seed(seed, 2));

  Tape tape;
  tape.check_finite = false;
  tape.reserve(static_cast<std::size_t>(T) * 16 + 32);
  ParamSet params;
  LstmVars cell;
  cell.hidden = H;
  Matrix b0 = Matrix::Zero(4 * H, 1);
  b0.middleRows(H, H).setOnes();  // forget gate starts remembering
  cell.w = params.declare(tape, "cell.w", uniform_weights(init_rng, 4 * H, D + H),
                          train_cell);
  cell.b = params.declare(tape, "cell.b", b0, train_cell);
  ReadoutVars rv = declare_readout(tape, params,
                                   init_readout(init_rng, H, cfg.hidden, out_dim));

  std::vector<Var> x_inputs;
  x_inputs.reserve(T);
  Var y_in = tape.input("y", out_dim, B, false);
  PrecoNet::State s{tape.constant(Matrix::Zero(H, B), "h0"),
                    tape.constant(Matrix::Zero(H, B), "c0")};
  Var loss_acc = tape.scalar(0.0);
  for (int t = 0; t < T; ++t) {
    Var x = tape.input("x" + std::to_string(t), D, B, false);
    x_inputs.push_back(x);
    s = lstm_step(cell, s, x);
    loss_acc = add(loss_acc, task_loss_sum(task, readout_expr(rv, s.h), y_in));
  }
  Var loss = mul(loss_acc, tape.scalar(1.0 / (B * T)));

  Adam adam(AdamConfig{.lr = cfg.learning_rate});
  Matrix yb(out_dim, B);
  std::vector<Matrix> xb(T, Matrix(D, B));
  for (int step = 0; step < cfg.train_steps; ++step) {
    for (int b = 0; b < B; ++b) {
      const int e = batch_rng.uniform_int(static_cast<int>(data.size()));
      yb.col(b) = target_column(task, data[e]);
      for (int t = 0; t < T; ++t) {
        xb[t].col(b) = data[e].body.observations.row(t).transpose();
      }
    }
    params.bind();
    tape.set_input(y_in, yb);
    for (int t = 0; t < T; ++t) tape.set_input(x_inputs[t], xb[t]);
    tape.forward();
    tape.backward(loss);
    adam.step(params, cfg.clip_norm);
  }

  BaselineModel model;
  model.kind = kind;
  model.task = task;
  model.readout = extract_readout(params);
  model.lstm_w = params.value("cell.w");
  model.lstm_b = params.value("cell.b");
  model.lstm_hidden = H;
  return model;
}

double percentile(std::vector<double>& sorted_values, double q) {
  const std::size_t n = sorted_values.size();
  std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  return sorted_values[idx];
}

}  // namespace

ProbeTaskKind parse_probe_task(const std::string& name) {
  if (name == "shape") return ProbeTaskKind::shape_class;
  if (name == "orientation") return ProbeTaskKind::orientation;
  throw std::invalid_argument("unknown probe task '" + name + "'");
}

std::string probe_task_name(ProbeTaskKind k) {
  return k == ProbeTaskKind::shape_class ? "shape" : "orientation";
}

int probe_target_dim(ProbeTaskKind k) {
  return k == ProbeTaskKind::shape_class ? 3 : 2;
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "mlp") return BaselineKind::mlp;
  if (name == "lstm") return BaselineKind::lstm;
  if (name == "randlstm") return BaselineKind::randlstm;
  throw std::invalid_argument("unknown baseline kind '" + name + "'");
}

std::string baseline_kind_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::mlp: return "mlp";
    case BaselineKind::lstm: return "lstm";
    default: return "randlstm";
  }
}

Matrix ReadoutWeights::forward(const Matrix& input) const {
  Matrix h = (w1 * input).colwise() + Vector(b1.col(0));
  h = h.array().tanh().matrix();
  return ((w2 * h).colwise() + Vector(b2.col(0))).eval();
}

int shape_label(const Trajectory& traj) {
  return static_cast<int>(traj.label.shape);
}

double major_axis_angle(const ObjectSpec& obj) {
  double phi = obj.phi + (obj.a < obj.b ? 0.5 * kPi : 0.0);
  phi = std::fmod(phi, kPi);
  if (phi < 0.0) phi += kPi;
  return phi;
}

Vector orientation_target(const Trajectory& traj) {
  const double phi = major_axis_angle(traj.label);
  Vector y(2);
  y << std::sin(2.0 * phi), std::cos(2.0 * phi);
  return y;
}

double decoded_angle(double s, double c) {
  double a = 0.5 * std::atan2(s, c);
  if (a < 0.0) a += kPi;
  return a;
}

double angular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

bool no_contact_step(const Episode& ep, int t, int num_fingers) {
  for (int f = 0; f < num_fingers; ++f) {
    if (ep.observations(t, obs_touch_index(f)) != 0.0) return false;
  }
  return true;
}

ProbeModel train_diagnostic(const PrecoConfig& model_cfg,
                            const ParamValues& frozen_params,
                            const std::vector<Trajectory>& data,
                            ProbeTaskKind task, const ProbeConfig& cfg,
                            std::uint64_t seed) {
  const std::vector<Trajectory> kept = task_subset(task, data);
  const std::vector<Matrix> states =
      extract_states(model_cfg, frozen_params, bodies_of(kept));
  ProbeModel probe;
  probe.task = task;
  probe.readout = train_readout_on_rows(states, kept, task, cfg, seed);
  return probe;
}

BaselineModel train_baseline(BaselineKind kind,
                             const std::vector<Trajectory>& data,
                             ProbeTaskKind task, const ProbeConfig& cfg,
                             std::uint64_t seed) {
  const std::vector<Trajectory> kept = task_subset(task, data);
  if (kind == BaselineKind::mlp) {
    BaselineModel model;
    model.kind = kind;
    model.task = task;
    model.readout =
        train_readout_on_rows(observation_rows(kept), kept, task, cfg, seed);
    return model;
  }
  return train_recurrent_baseline(kind, kept, task, cfg, seed);
}

std::vector<Matrix> BaselineModel::lstm_states(
    const std::vector<Trajectory>& data) const {
  if (kind == BaselineKind::mlp) {
    throw std::invalid_argument("mlp baseline has no recurrent states");
  }
  const int H = lstm_hidden;
  std::vector<Matrix> out;
  out.reserve(data.size());
  for (const auto& traj : data) {
    const int T = traj.body.length();
    Matrix states(T, H);
    Vector h = Vector::Zero(H), c = Vector::Zero(H);
    Vector xh(lstm_w.cols());
    for (int t = 0; t < T; ++t) {
      xh.head(traj.body.observations.cols()) =
          traj.body.observations.row(t).transpose();
      xh.tail(H) = h;
      Vector z = lstm_w * xh + lstm_b.col(0);
      for (int k = 0; k < 2 * H; ++k) z[k] = 1.0 / (1.0 + std::exp(-z[k]));
      for (int k = 2 * H; k < 3 * H; ++k) z[k] = std::tanh(z[k]);
      for (int k = 3 * H; k < 4 * H; ++k) z[k] = 1.0 / (1.0 + std::exp(-z[k]));
      c = z.segment(H, H).cwiseProduct(c) +
          z.head(H).cwiseProduct(z.segment(2 * H, H));
      h = z.tail(H).cwiseProduct(c.array().tanh().matrix());
      states.row(t) = h.transpose();
    }
    out.push_back(std::move(states));
  }
  return out;
}

Matrix diagnostic_losses(const PrecoConfig& model_cfg,
                         const ParamValues& frozen_params,
                         const ProbeModel& probe,
                         const std::vector<Trajectory>& test) {
  const std::vector<Matrix> states =
      extract_states(model_cfg, frozen_params, bodies_of(test));
  return losses_over_rows(states, test, probe.task, probe.readout);
}

Matrix baseline_losses(const BaselineModel& model,
                       const std::vector<Trajectory>& test) {
  if (model.kind == BaselineKind::mlp) {
    return losses_over_rows(observation_rows(test), test, model.task,
                            model.readout);
  }
  return losses_over_rows(model.lstm_states(test), test, model.task,
                          model.readout);
}

Matrix diagnostic_angular_errors(const PrecoConfig& model_cfg,
                                 const ParamValues& frozen_params,
                                 const ProbeModel& probe,
                                 const std::vector<Trajectory>& test) {
  const std::vector<Matrix> states =
      extract_states(model_cfg, frozen_params, bodies_of(test));
  return angular_errors_over_rows(states, test, probe.task, probe.readout);
}

Matrix baseline_angular_errors(const BaselineModel& model,
                               const std::vector<Trajectory>& test) {
  if (model.kind == BaselineKind::mlp) {
    return angular_errors_over_rows(observation_rows(test), test, model.task,
                                    model.readout);
  }
  return angular_errors_over_rows(model.lstm_states(test), test, model.task,
                                  model.readout);
}

Eigen::MatrixXi diagnostic_predictions(const PrecoConfig& model_cfg,
                                       const ParamValues& frozen_params,
                                       const ProbeModel& probe,
                                       const std::vector<Trajectory>& test) {
  if (probe.task != ProbeTaskKind::shape_class) {
    throw std::invalid_argument("class predictions need a shape readout");
  }
  const std::vector<Matrix> states =
      extract_states(model_cfg, frozen_params, bodies_of(test));
  const int T = common_length(test);
  Eigen::MatrixXi out(static_cast<int>(test.size()), T);
  for (std::size_t e = 0; e < test.size(); ++e) {
    const Matrix pred = probe.readout.forward(states[e].transpose());
    for (int t = 0; t < T; ++t) {
      int best = 0;
      pred.col(t).maxCoeff(&best);
      out(static_cast<int>(e), t) = best;
    }
  }
  return out;
}

Vector median_per_timestep(const Matrix& losses) {
  if (losses.rows() < 1) throw std::invalid_argument("no rows to summarize");
  const int E = static_cast<int>(losses.rows());
  Vector med(losses.cols());
  std::vector<double> col(E);
  for (int t = 0; t < losses.cols(); ++t) {
    for (int e = 0; e < E; ++e) col[e] = losses(e, t);
    std::sort(col.begin(), col.end());
    med[t] = (E % 2 == 1) ? col[E / 2] : 0.5 * (col[E / 2 - 1] + col[E / 2]);
  }
  return med;
}

WinCurve win_probability(const Matrix& loss_a, const Matrix& loss_b,
                         int bootstrap_n, std::uint64_t seed) {
  if (loss_a.rows() != loss_b.rows() || loss_a.cols() != loss_b.cols()) {
    throw std::invalid_argument("loss tables must have matching shapes");
  }
  const int E = static_cast<int>(loss_a.rows());
  const int T = static_cast<int>(loss_a.cols());
  if (E < 1) throw std::invalid_argument("no episodes to compare");

  auto win_at = [&](const std::vector<int>& idx, int t) {
    double wins = 0.0;
    for (int e : idx) {
      if (loss_a(e, t) < loss_b(e, t)) {
        wins += 1.0;
      } else if (loss_a(e, t) == loss_b(e, t)) {
        wins += 0.5;
      }
    }
    return wins / static_cast<double>(idx.size());
  };

  std::vector<int> all(E);
  std::iota(all.begin(), all.end(), 0);
  WinCurve curve;
  curve.p.resize(T);
  curve.lo.resize(T);
  curve.hi.resize(T);
  for (int t = 0; t < T; ++t) curve.p[t] = win_at(all, t);

  if (bootstrap_n < 1) {
    curve.lo = curve.p;
    curve.hi = curve.p;
    return curve;
  }

  // Episodes are resampled once per replicate so the band is coherent
  // across timesteps.
  Rng rng(seed);
  Matrix reps(bootstrap_n, T);
  std::vector<int> idx(E);
  for (int r = 0; r < bootstrap_n; ++r) {
    for (int e = 0; e < E; ++e) idx[e] = rng.uniform_int(E);
    for (int t = 0; t < T; ++t) reps(r, t) = win_at(idx, t);
  }
  std::vector<double> col(bootstrap_n);
  for (int t = 0; t < T; ++t) {
    for (int r = 0; r < bootstrap_n; ++r) col[r] = reps(r, t);
    std::sort(col.begin(), col.end());
    curve.lo[t] = percentile(col, 0.025);
    curve.hi[t] = percentile(col, 0.975);
  }
  return curve;
}

std::vector<double> loss_cdf(const Matrix& losses, int t) {
  if (t < 0 || t >= losses.cols()) {
    throw std::invalid_argument("timestep out of range");
  }
  std::vector<double> col(losses.rows());
  for (int e = 0; e < losses.rows(); ++e) col[e] = losses(e, t);
  std::sort(col.begin(), col.end());
  return col;
}

EvalReport eval_report(const std::vector<std::string>& names,
                       const std::vector<Matrix>& losses,
                       const std::vector<int>& markers, int bootstrap_n,
                       std::uint64_t seed) {
  if (names.size() != losses.size()) {
    throw std::invalid_argument("one name per loss table required");
  }
  if (losses.empty()) throw std::invalid_argument("no loss tables");
  const int T = static_cast<int>(losses.front().cols());
  for (const auto& m : losses) {
    if (m.cols() != T || m.rows() != losses.front().rows()) {
      throw std::invalid_argument("loss tables must have matching shapes");
    }
  }

  EvalReport rep;
  rep.models = names;
  rep.losses = losses;
  rep.markers = markers;
  rep.medians.resize(static_cast<int>(losses.size()), T);
  for (std::size_t m = 0; m < losses.size(); ++m) {
    rep.medians.row(static_cast<int>(m)) =
        median_per_timestep(losses[m]).transpose();
  }
  rep.cdfs.resize(losses.size());
  for (std::size_t m = 0; m < losses.size(); ++m) {
    for (int t : markers) rep.cdfs[m].push_back(loss_cdf(losses[m], t));
  }
  for (std::size_t a = 0; a < losses.size(); ++a) {
    for (std::size_t b = a + 1; b < losses.size(); ++b) {
      EvalReport::PairStat ps;
      ps.a = static_cast<int>(a);
      ps.b = static_cast<int>(b);
      ps.curve = win_probability(losses[a], losses[b], bootstrap_n,
                                 mix_seed(seed, (a << 16) | b));
      rep.pairs.push_back(std::move(ps));
    }
  }
  return rep;
}

}  // namespace proprio
