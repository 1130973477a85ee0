#include "proprio/preco.hpp"

#include <cmath>
#include <stdexcept>

namespace proprio {

void PrecoConfig::validate() const {
  if (action_dim < 1 || obs_dim < 1) throw std::invalid_argument("bad data dims");
  if (control_embed_depth < 1 || sensor_embed_depth < 1 || head_depth < 1) {
    throw std::invalid_argument("depths must be >= 1");
  }
  if (control_embed_hidden < 1 || control_embed_out < 1 ||
      sensor_embed_hidden < 1 || sensor_embed_out < 1 || head_hidden < 1 ||
      core_hidden_size < 1) {
    throw std::invalid_argument("layer sizes must be >= 1");
  }
  if (num_components < 1) throw std::invalid_argument("need >= 1 mixture component");
  if (overshoot_length < 1) throw std::invalid_argument("overshoot_length must be >= 1");
  if (stddev_floor <= 0.0) throw std::invalid_argument("stddev_floor must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
  if (train_steps < 0) throw std::invalid_argument("negative train_steps");
  if (grad_clip < 0.0) throw std::invalid_argument("negative grad_clip");
}

namespace {

Matrix uniform_weights(Rng& rng, int rows, int cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

void push_mlp(ParamValues& out, Rng& rng, const std::string& prefix, int in,
              int hidden, int out_dim, int depth) {
  int cur = in;
  for (int k = 0; k <= depth; ++k) {
    const int next = (k == depth) ? out_dim : hidden;
    out.emplace_back(prefix + ".w" + std::to_string(k),
                     uniform_weights(rng, next, cur));
    out.emplace_back(prefix + ".b" + std::to_string(k), Matrix::Zero(next, 1));
    cur = next;
  }
}

void push_cell(ParamValues& out, Rng& rng, const std::string& prefix, int in,
               int hidden) {
  out.emplace_back(prefix + ".w", uniform_weights(rng, 4 * hidden, in + hidden));
  Matrix b = Matrix::Zero(4 * hidden, 1);
  b.middleRows(hidden, hidden).setOnes();  // forget gate starts remembering
  out.emplace_back(prefix + ".b", std::move(b));
}

}  // namespace

ParamValues init_preco_params(const PrecoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamValues vals;
  push_mlp(vals, rng, "control_embed", cfg.action_dim, cfg.control_embed_hidden,
           cfg.control_embed_out, cfg.control_embed_depth);
  push_mlp(vals, rng, "sensor_embed", cfg.obs_dim, cfg.sensor_embed_hidden,
           cfg.sensor_embed_out, cfg.sensor_embed_depth);
  push_cell(vals, rng, "predictor", cfg.control_embed_out, cfg.core_hidden_size);
  push_cell(vals, rng, "corrector", cfg.sensor_embed_out, cfg.core_hidden_size);
  const int mixture_rows = cfg.obs_dim * cfg.num_components;
  push_mlp(vals, rng, "mean_head", cfg.core_hidden_size, cfg.head_hidden,
           mixture_rows, cfg.head_depth);
  push_mlp(vals, rng, "stddev_head", cfg.core_hidden_size, cfg.head_hidden,
           mixture_rows, cfg.head_depth);
  push_mlp(vals, rng, "weight_head", cfg.core_hidden_size, cfg.head_hidden,
           mixture_rows, cfg.head_depth);
  return vals;
}

PrecoNet::PrecoNet(Tape& tape, const PrecoConfig& cfg, const ParamValues& init,
                   bool trainable)
    : tape_(&tape), cfg_(cfg) {
  cfg_.validate();
  for (const auto& [name, value] : init) {
    params_.declare(tape, name, value, trainable);
  }
  params_.bind();
}

Var PrecoNet::param(const std::string& name) const {
  for (const auto& e : params_.entries()) {
    if (e.name == name) return e.var;
  }
  throw std::invalid_argument("model has no parameter '" + name + "'");
}

Var PrecoNet::mlp(const std::string& prefix, int layers, Var x,
                  bool activate_last) const {
  for (int k = 0; k < layers; ++k) {
    const std::string idx = std::to_string(k);
    x = bias_add(matmul(param(prefix + ".w" + idx), x),
                 param(prefix + ".b" + idx));
    if (k + 1 < layers || activate_last) x = proprio::tanh(x);
  }
  return x;
}

Var PrecoNet::control_embed(Var u) const {
  return mlp("control_embed", cfg_.control_embed_depth + 1, u, true);
}

Var PrecoNet::sensor_embed(Var x) const {
  return mlp("sensor_embed", cfg_.sensor_embed_depth + 1, x, true);
}

namespace {

PrecoNet::State lstm_cell(Var w, Var b, const PrecoNet::State& s, Var input,
                          int hidden) {
  Var pre = bias_add(matmul(w, concat({input, s.h})), b);
  Var i = sigmoid(slice(pre, 0, hidden));
  Var f = sigmoid(slice(pre, hidden, hidden));
  Var g = proprio::tanh(slice(pre, 2 * hidden, hidden));
  Var o = sigmoid(slice(pre, 3 * hidden, hidden));
  Var c = add(mul(f, s.c), mul(i, g));
  Var h = mul(o, proprio::tanh(c));
  return {h, c};
}

}  // namespace

PrecoNet::State PrecoNet::predictor_step(const State& s, Var control_embedding) const {
  return lstm_cell(param("predictor.w"), param("predictor.b"), s,
                   control_embedding, cfg_.core_hidden_size);
}

PrecoNet::State PrecoNet::corrector_step(const State& s, Var sensor_embedding) const {
  return lstm_cell(param("corrector.w"), param("corrector.b"), s,
                   sensor_embedding, cfg_.core_hidden_size);
}

PrecoNet::Decoded PrecoNet::decode(Var h) const {
  const int D = cfg_.obs_dim;
  const int M = cfg_.num_components;
  Var mean_out = mlp("mean_head", cfg_.head_depth + 1, h, false);
  Var std_out = mlp("stddev_head", cfg_.head_depth + 1, h, false);
  Var w_out = mlp("weight_head", cfg_.head_depth + 1, h, false);
  Var floor = tape_->scalar(cfg_.stddev_floor);

  Decoded d;
  std::vector<Var> logits;
  for (int i = 0; i < M; ++i) {
    d.mu.push_back(slice(mean_out, i * D, D));
    d.sigma.push_back(add(softplus(slice(std_out, i * D, D)), floor));
    logits.push_back(slice(w_out, i * D, D));
  }
  Var lse = logsumexp(logits);
  for (int i = 0; i < M; ++i) d.log_alpha.push_back(sub(logits[i], lse));
  return d;
}

Var PrecoNet::nll_matrix(const Decoded& d, Var x) const {
  Var half = tape_->scalar(0.5);
  Var half_log_2pi = tape_->scalar(0.5 * std::log(2.0 * M_PI));
  std::vector<Var> terms;
  for (std::size_t i = 0; i < d.mu.size(); ++i) {
    Var log_sigma = log(d.sigma[i]);
    Var z = mul(sub(x, d.mu[i]), exp(neg(log_sigma)));
    Var log_n = neg(add(log_sigma, add(half_log_2pi, mul(half, mul(z, z)))));
    terms.push_back(add(d.log_alpha[i], log_n));
  }
  return neg(logsumexp(terms));
}

PrecoNet::State PrecoNet::zero_state(int batch) const {
  Var h = tape_->constant(Matrix::Zero(cfg_.core_hidden_size, batch));
  Var c = tape_->constant(Matrix::Zero(cfg_.core_hidden_size, batch));
  return {h, c};
}

void PrecoNet::set_values(const ParamValues& vals) {
  if (vals.size() != params_.entries().size()) {
    throw std::invalid_argument("parameter list does not match the model");
  }
  for (const auto& [name, value] : vals) {
    params_.value(name) = value;
  }
  params_.bind();
}

ParamValues PrecoNet::values() const {
  ParamValues out;
  out.reserve(params_.entries().size());
  for (const auto& e : params_.entries()) out.emplace_back(e.name, e.value);
  return out;
}

OvershootGraph::OvershootGraph(const PrecoConfig& cfg, const ParamValues& init,
                               int T, int batch, bool trainable)
    : net_((tape_.reserve(static_cast<std::size_t>(T) *
                          (cfg.overshoot_length + 2) * 70 + 4096),
            tape_),
           cfg, init, trainable),
      T_(T),
      batch_(batch) {
  if (T < 1) throw std::invalid_argument("episode length must be >= 1");
  const int K = cfg.overshoot_length;
  u_buf_.resize(cfg.action_dim, batch);
  x_buf_.resize(cfg.obs_dim, batch);

  std::vector<Var> eu, ex;
  for (int t = 1; t <= T; ++t) {
    u_inputs_.push_back(
        tape_.input("u_" + std::to_string(t), cfg.action_dim, batch, false));
    x_inputs_.push_back(
        tape_.input("x_" + std::to_string(t), cfg.obs_dim, batch, false));
  }
  for (int t = 0; t < T; ++t) {
    eu.push_back(net_.control_embed(u_inputs_[t]));
    ex.push_back(net_.sensor_embed(x_inputs_[t]));
  }

  std::vector<Var> nll_terms;
  int predictor_terms = 0;
  PrecoNet::State hc = net_.zero_state(batch);
  for (int t = 1; t <= T; ++t) {
    PrecoNet::State hp = net_.predictor_step(hc, eu[t - 1]);
    PrecoNet::State s = hp;
    for (int k = 0; k < K && t + k <= T; ++k) {
      if (k > 0) s = net_.predictor_step(s, eu[t + k - 1]);
      Var nll = net_.nll_matrix(net_.decode(s.h), x_inputs_[t + k - 1]);
      if (k == 0) predictor0_nll_.push_back(nll);
      nll_terms.push_back(nll);
      ++predictor_terms;
    }
    hc = net_.corrector_step(hp, ex[t - 1]);
    corrector_states_.push_back(hc);
    Var cnll = net_.nll_matrix(net_.decode(hc.h), x_inputs_[t - 1]);
    corrector_nll_.push_back(cnll);
    if (cfg.train_corrector_decode) nll_terms.push_back(cnll);
  }
  term_count_ = predictor_terms + (cfg.train_corrector_decode ? T : 0);

  Var acc = nll_terms[0];
  for (std::size_t k = 1; k < nll_terms.size(); ++k) acc = add(acc, nll_terms[k]);
  loss_ = mul(sum(acc), tape_.scalar(1.0 / (static_cast<double>(batch) * term_count_)));
}

void OvershootGraph::bind_episodes(const std::vector<const Episode*>& batch) {
  if (static_cast<int>(batch.size()) != batch_) {
    throw std::invalid_argument("batch size does not match the unrolled graph");
  }
  for (const Episode* ep : batch) {
    if (ep->length() != T_) {
      throw std::invalid_argument("episode length does not match the unrolled graph");
    }
  }
  for (int t = 0; t < T_; ++t) {
    for (int b = 0; b < batch_; ++b) {
      u_buf_.col(b) = batch[b]->actions.row(t).transpose();
      x_buf_.col(b) = batch[b]->observations.row(t).transpose();
    }
    tape_.set_input(u_inputs_[t], u_buf_);
    tape_.set_input(x_inputs_[t], x_buf_);
  }
}

FilterStep::FilterStep(const PrecoConfig& cfg, const ParamValues& vals)
    : net_(tape_, cfg, vals, false) {
  const int H = cfg.core_hidden_size;
  h_in_ = tape_.input("h", H, 1, false);
  c_in_ = tape_.input("c", H, 1, false);
  u_in_ = tape_.input("u", cfg.action_dim, 1, false);
  x_in_ = tape_.input("x", cfg.obs_dim, 1, false);
  PrecoNet::State hp =
      net_.predictor_step({h_in_, c_in_}, net_.control_embed(u_in_));
  out_ = net_.corrector_step(hp, net_.sensor_embed(x_in_));
}

std::pair<Vector, Vector> FilterStep::advance(const Vector& h, const Vector& c,
                                              const Vector& u, const Vector& x) {
  tape_.set_input(h_in_, h);
  tape_.set_input(c_in_, c);
  tape_.set_input(u_in_, u);
  tape_.set_input(x_in_, x);
  tape_.forward();
  return {tape_.value(out_.h), tape_.value(out_.c)};
}

DecodeGraph::DecodeGraph(const PrecoConfig& cfg, const ParamValues& vals)
    : net_(tape_, cfg, vals, false) {
  h_in_ = tape_.input("h", cfg.core_hidden_size, 1, false);
  decoded_ = net_.decode(h_in_);
}

DecodedValues DecodeGraph::eval(const Vector& h) {
  tape_.set_input(h_in_, h);
  tape_.forward();
  const int D = net_.config().obs_dim;
  const int M = net_.config().num_components;
  DecodedValues out;
  out.alpha.resize(D, M);
  out.mu.resize(D, M);
  out.sigma.resize(D, M);
  for (int i = 0; i < M; ++i) {
    out.alpha.col(i) = tape_.value(decoded_.log_alpha[i]).array().exp();
    out.mu.col(i) = tape_.value(decoded_.mu[i]);
    out.sigma.col(i) = tape_.value(decoded_.sigma[i]);
  }
  return out;
}

PrecoTrainer::PrecoTrainer(const PrecoConfig& cfg, int T, std::uint64_t seed)
    : PrecoTrainer(cfg, T, init_preco_params(cfg, seed)) {}

PrecoTrainer::PrecoTrainer(const PrecoConfig& cfg, int T, const ParamValues& init)
    : cfg_(cfg),
      graph_(std::make_unique<OvershootGraph>(cfg, init, T, cfg.batch_size, true)),
      adam_(AdamConfig{.lr = cfg.learning_rate}) {
  graph_->tape().check_finite = false;
}

double PrecoTrainer::step(const std::vector<const Episode*>& batch) {
  Tape& tape = graph_->tape();
  graph_->net().bind();
  graph_->bind_episodes(batch);
  tape.forward();
  const double loss = tape.value(graph_->loss())(0, 0);
  if (!std::isfinite(loss)) {
    tape.check_finite = true;
    tape.forward();  // throws naming the first non-finite node
    throw std::runtime_error("training loss went non-finite");
  }
  tape.backward(graph_->loss());
  adam_.step(graph_->net().params(), cfg_.grad_clip);
  return loss;
}

TrainResult train_preco(const std::vector<Episode>& dataset,
                        const PrecoConfig& cfg, std::uint64_t seed,
                        const std::function<void(int, double)>& on_step) {
  if (dataset.empty()) throw std::invalid_argument("empty training dataset");
  const int T = dataset.front().length();
  for (const Episode& ep : dataset) {
    if (ep.length() != T) {
      throw std::invalid_argument("training episodes must share one length");
    }
  }
  PrecoTrainer trainer(cfg, T, mix_seed(seed, 0x696e6974));
  Rng batch_rng(mix_seed(seed, 0x62617463686573ull));
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.train_steps));
  std::vector<const Episode*> batch(static_cast<std::size_t>(cfg.batch_size));
  for (int step = 0; step < cfg.train_steps; ++step) {
    for (auto& slot : batch) {
      slot = &dataset[static_cast<std::size_t>(
          batch_rng.uniform_int(static_cast<int>(dataset.size())))];
    }
    const double loss = trainer.step(batch);
    result.loss_trace.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  result.params = trainer.values();
  return result;
}

GaussianBaseline GaussianBaseline::fit(const std::vector<Episode>& dataset,
                                       double stddev_floor) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  const int D = static_cast<int>(dataset.front().observations.cols());
  Vector sum = Vector::Zero(D), sq = Vector::Zero(D);
  long n = 0;
  for (const Episode& ep : dataset) {
    for (int t = 0; t < ep.length(); ++t) {
      sum += ep.observations.row(t).transpose();
      sq += ep.observations.row(t).transpose().cwiseAbs2();
      ++n;
    }
  }
  GaussianBaseline b;
  b.mean = sum / static_cast<double>(n);
  Vector var = sq / static_cast<double>(n) - b.mean.cwiseAbs2();
  b.stddev = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(stddev_floor);
  return b;
}

double GaussianBaseline::step_nll(const Vector& x) const {
  double total = 0.0;
  for (int d = 0; d < x.size(); ++d) {
    const double z = (x[d] - mean[d]) / stddev[d];
    total += 0.5 * std::log(2.0 * M_PI) + std::log(stddev[d]) + 0.5 * z * z;
  }
  return total;
}

namespace {

// Shared chunked teacher-forced pass: K=1 graph over groups of episodes,
// padding the tail chunk with repeats (ignored on read-out).
template <typename PerEpisode>
void filter_pass(const PrecoConfig& cfg, const ParamValues& vals,
                 const std::vector<Episode>& episodes, PerEpisode&& consume) {
  if (episodes.empty()) return;
  PrecoConfig fcfg = cfg;
  fcfg.overshoot_length = 1;
  const int T = episodes.front().length();
  const int chunk = std::min<int>(16, static_cast<int>(episodes.size()));
  OvershootGraph graph(fcfg, vals, T, chunk, false);
  std::vector<const Episode*> batch(static_cast<std::size_t>(chunk));
  for (std::size_t base = 0; base < episodes.size();
       base += static_cast<std::size_t>(chunk)) {
    for (int b = 0; b < chunk; ++b) {
      const std::size_t idx = std::min(base + static_cast<std::size_t>(b),
                                       episodes.size() - 1);
      batch[static_cast<std::size_t>(b)] = &episodes[idx];
    }
    graph.bind_episodes(batch);
    graph.tape().forward();
    const std::size_t live =
        std::min(static_cast<std::size_t>(chunk), episodes.size() - base);
    for (std::size_t b = 0; b < live; ++b) {
      consume(base + b, graph, static_cast<int>(b));
    }
  }
}

}  // namespace

std::vector<std::vector<double>> heldout_step_nll(
    const PrecoConfig& cfg, const ParamValues& vals,
    const std::vector<Episode>& episodes) {
  std::vector<std::vector<double>> out(episodes.size());
  filter_pass(cfg, vals, episodes,
              [&](std::size_t e, OvershootGraph& g, int col) {
                auto& row = out[e];
                row.resize(static_cast<std::size_t>(g.horizon()));
                for (int t = 0; t < g.horizon(); ++t) {
                  row[static_cast<std::size_t>(t)] =
                      g.tape()
                          .value(g.predictor_nll()[static_cast<std::size_t>(t)])
                          .col(col)
                          .sum();
                }
              });
  return out;
}

std::vector<Matrix> extract_states(const PrecoConfig& cfg,
                                   const ParamValues& vals,
                                   const std::vector<Episode>& episodes) {
  const int H = cfg.core_hidden_size;
  std::vector<Matrix> out(episodes.size());
  filter_pass(cfg, vals, episodes,
              [&](std::size_t e, OvershootGraph& g, int col) {
                Matrix states(g.horizon(), 2 * H);
                for (int t = 0; t < g.horizon(); ++t) {
                  const auto& s =
                      g.corrector_states()[static_cast<std::size_t>(t)];
                  states.row(t).head(H) = g.tape().value(s.h).col(col).transpose();
                  states.row(t).tail(H) = g.tape().value(s.c).col(col).transpose();
                }
                out[e] = std::move(states);
              });
  return out;
}

}  // namespace proprio
