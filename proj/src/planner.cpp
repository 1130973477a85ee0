#include "proprio/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "proprio/entropy.hpp"
#include "proprio/env.hpp"
#include "proprio/trajectory.hpp"

namespace proprio {

void PlanConstraints::validate() const {
  if (!(box_limit > 0.0)) throw std::invalid_argument("box_limit must be > 0");
  if (!(slew_limit > 0.0)) throw std::invalid_argument("slew_limit must be > 0");
}

CostKind parse_cost_kind(const std::string& name) {
  if (name == "entropy_max") return CostKind::entropy_max;
  if (name == "entropy_min") return CostKind::entropy_min;
  if (name == "touch_max") return CostKind::touch_max;
  throw std::invalid_argument("unknown cost kind '" + name + "'");
}

std::string cost_kind_name(CostKind k) {
  switch (k) {
    case CostKind::entropy_max: return "entropy_max";
    case CostKind::entropy_min: return "entropy_min";
    case CostKind::touch_max: return "touch_max";
  }
  throw std::invalid_argument("unknown cost kind");
}

Matrix project_controls(const Matrix& u, const PlanConstraints& c) {
  c.validate();
  const int F = static_cast<int>(u.cols());
  Vector prev;
  if (c.reference_previous_action.size() == 0) {
    prev = Vector::Zero(F);
  } else if (c.reference_previous_action.size() == F) {
    prev = c.reference_previous_action;
  } else {
    throw std::invalid_argument("reference action has the wrong length");
  }
  Matrix out = u.cwiseMax(-c.box_limit).cwiseMin(c.box_limit);
  for (int t = 0; t < out.rows(); ++t) {
    for (int f = 0; f < F; ++f) {
      out(t, f) = std::clamp(out(t, f), prev[f] - c.slew_limit,
                             prev[f] + c.slew_limit);
    }
    prev = out.row(t).transpose();
  }
  return out;
}

bool controls_feasible(const Matrix& u, const PlanConstraints& c, double tol) {
  if (u.cwiseAbs().maxCoeff() > c.box_limit + tol) return false;
  Vector prev = c.reference_previous_action.size() == 0
                    ? Vector::Zero(u.cols())
                    : c.reference_previous_action;
  for (int t = 0; t < u.rows(); ++t) {
    if ((u.row(t).transpose() - prev).cwiseAbs().maxCoeff() >
        c.slew_limit + tol) {
      return false;
    }
    prev = u.row(t).transpose();
  }
  return true;
}

Var step_cost_expr(const PrecoNet& net, Var h, const CostSpec& cost) {
  switch (cost.kind) {
    case CostKind::entropy_max:
      return neg(prediction_entropy(net, h));
    case CostKind::entropy_min:
      return prediction_entropy(net, h);
    case CostKind::touch_max: {
      if (cost.touch_dims.empty()) {
        throw std::invalid_argument("touch_max needs touch dimensions");
      }
      PrecoNet::Decoded d = net.decode(h);
      Tape& t = *h.tape;
      const int D = static_cast<int>(t.node(d.mu.front().id).rows);
      Matrix sel = Matrix::Zero(1, D);
      for (int dim : cost.touch_dims) {
        if (dim < 0 || dim >= D) {
          throw std::invalid_argument("touch dimension out of range");
        }
        sel(0, dim) = 1.0;
      }
      Var selector = t.constant(sel);
      Var acc;
      for (std::size_t i = 0; i < d.mu.size(); ++i) {
        Var weighted = mul(exp(d.log_alpha[i]), d.mu[i]);
        Var touch = matmul(selector, weighted);
        acc = i == 0 ? touch : add(acc, touch);
      }
      return neg(sum(acc));
    }
  }
  throw std::invalid_argument("unknown cost kind");
}

SolveResult optimize_controls(Tape& tape, Var objective,
                              const std::vector<Var>& controls,
                              const PlanConstraints& c, int iterations,
                              double step_size, const Matrix& init) {
  c.validate();
  const int T = static_cast<int>(controls.size());
  if (init.rows() != T) throw std::invalid_argument("bad warm-start length");
  if (iterations < 0) throw std::invalid_argument("negative iteration count");
  const int F = static_cast<int>(init.cols());

  Matrix u = project_controls(init, c);
  auto bind = [&](const Matrix& seq) {
    for (int t = 0; t < T; ++t) {
      tape.set_input(controls[static_cast<std::size_t>(t)],
                     seq.row(t).transpose());
    }
  };
  auto eval = [&]() {
    tape.forward();
    return tape.value(objective)(0, 0);
  };

  SolveResult res;
  bind(u);
  double obj = eval();
  res.trace.push_back(obj);
  res.controls = u;
  double best = obj;

  Matrix m = Matrix::Zero(T, F), v = Matrix::Zero(T, F);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int k = 1; k <= iterations; ++k) {
    tape.backward(objective);
    Matrix g(T, F);
    for (int t = 0; t < T; ++t) {
      g.row(t) = tape.grad(controls[static_cast<std::size_t>(t)]).transpose();
    }
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, k), c2 = 1.0 - std::pow(b2, k);
    u -= step_size *
         ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    u = project_controls(u, c);
    bind(u);
    obj = eval();
    res.trace.push_back(obj);
    if (obj < best) {
      best = obj;
      res.controls = u;
    }
  }
  res.iterations = iterations;
  // leave the tape bound to the winner
  bind(res.controls);
  return res;
}

PlanGraph::PlanGraph(const PrecoConfig& cfg, const ParamValues& params,
                     const CostSpec& cost, int horizon)
    : net_((tape_.reserve(static_cast<std::size_t>(horizon) * 160 + 64), tape_),
           cfg, params, false),
      horizon_(horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int H = cfg.core_hidden_size;
  h0_ = tape_.input("h_init", H, 1, false);
  c0_ = tape_.input("c_init", H, 1, false);
  PrecoNet::State s{h0_, c0_};
  Var total;
  for (int t = 0; t < horizon; ++t) {
    Var u = tape_.input("u_" + std::to_string(t), cfg.action_dim, 1, true);
    controls_.push_back(u);
    s = net_.predictor_step(s, net_.control_embed(u));
    states_.push_back(s);
    Var ct = step_cost_expr(net_, s.h, cost);
    total = t == 0 ? ct : add(total, ct);
  }
  objective_ = total;
}

PlanResult PlanGraph::plan(const Vector& h_init, const Vector& c_init,
                           const PlanConstraints& constraints, int iterations,
                           double step_size, const Matrix& warm_start) {
  tape_.set_input(h0_, h_init);
  tape_.set_input(c0_, c_init);
  SolveResult s = optimize_controls(tape_, objective_, controls_, constraints,
                                    iterations, step_size, warm_start);
  PlanResult res;
  res.controls = s.controls;
  res.trace = std::move(s.trace);
  res.iterations = s.iterations;
  // tape is already bound to the winning controls and evaluated
  tape_.forward();
  res.rollout_h.resize(horizon_, h_init.size());
  for (int t = 0; t < horizon_; ++t) {
    res.rollout_h.row(t) =
        tape_.value(states_[static_cast<std::size_t>(t)].h).col(0).transpose();
  }
  return res;
}

Trajectory mpc_episode(GripperEnv& env, const PrecoConfig& model_cfg,
                       const ParamValues& params, const MpcConfig& mpc,
                       const std::function<Vector(int)>& noise) {
  const EnvConfig& ecfg = env.config();
  const int T = ecfg.episode_length;
  const int F = ecfg.num_fingers;

  PlanGraph graph(model_cfg, params, mpc.cost, mpc.horizon);
  FilterStep filter(model_cfg, params);

  Trajectory traj;
  traj.label = env.object();
  traj.body.actions.resize(T, F);
  traj.body.observations.resize(T, ecfg.obs_dim());

  Vector h = Vector::Zero(model_cfg.core_hidden_size);
  Vector c = Vector::Zero(model_cfg.core_hidden_size);
  Vector prev_u = Vector::Zero(F);
  Matrix warm = Matrix::Zero(mpc.horizon, F);

  for (int t = 0; t < T; ++t) {
    PlanConstraints constraints;
    constraints.box_limit = mpc.box_limit;
    constraints.slew_limit = mpc.slew_limit;
    constraints.reference_previous_action = prev_u;
    PlanResult plan = graph.plan(h, c, constraints, mpc.iterations,
                                 mpc.step_size, warm);

    Vector u = plan.controls.row(0).transpose();
    if (noise) {
      Matrix noisy = (u + noise(t)).transpose();
      u = project_controls(noisy, constraints).row(0).transpose();
    }
    Vector x = env.step(u);
    traj.body.actions.row(t) = u.transpose();
    traj.body.observations.row(t) = x.transpose();

    auto next = filter.advance(h, c, u, x);
    h = next.first;
    c = next.second;
    prev_u = u;
    warm.topRows(mpc.horizon - 1) = plan.controls.bottomRows(mpc.horizon - 1);
    warm.row(mpc.horizon - 1) = plan.controls.row(mpc.horizon - 1);
  }
  return traj;
}

}  // namespace proprio
