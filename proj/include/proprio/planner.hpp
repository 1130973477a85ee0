#pragma once

#include <functional>
#include <string>
#include <vector>

#include "proprio/preco.hpp"
#include "proprio/tape.hpp"

namespace proprio {

class GripperEnv;
struct Trajectory;

struct PlanConstraints {
  double box_limit = 1.0;
  double slew_limit = 0.1;
  // executed action before the first planned step; anchors the t=1 slew clamp
  Vector reference_previous_action;

  void validate() const;
};

enum class CostKind { entropy_max, entropy_min, touch_max };

CostKind parse_cost_kind(const std::string& name);
std::string cost_kind_name(CostKind k);

struct CostSpec {
  CostKind kind = CostKind::entropy_max;
  // observation dimensions carrying touch readings; required for touch_max
  std::vector<int> touch_dims;
};

// Box clip, then a forward pass clamping each step into the slew window of
// its (already clamped) predecessor. Always feasible; not the Euclidean
// projection onto the joint set, but cheap and anchored at the last executed
// action.
Matrix project_controls(const Matrix& u, const PlanConstraints& c);

bool controls_feasible(const Matrix& u, const PlanConstraints& c,
                       double tol = 0.0);

// Per-step planning cost on a decoded predictor state (lower is better):
//   entropy_max  -> negated summed prediction entropy
//   entropy_min  -> summed prediction entropy
//   touch_max    -> negated predicted mean touch, summed over touch dims
Var step_cost_expr(const PrecoNet& net, Var h, const CostSpec& cost);

struct SolveResult {
  Matrix controls;              // T x F, feasible
  std::vector<double> trace;    // objective of every evaluated iterate
  int iterations = 0;
};

// Adam ascent on an arbitrary differentiable objective of per-step control
// inputs, projecting after every step and returning the best feasible
// iterate. The graph is the caller's; `controls[t]` must be F x 1 inputs of
// `tape` and `objective` a scalar to minimize.
SolveResult optimize_controls(Tape& tape, Var objective,
                              const std::vector<Var>& controls,
                              const PlanConstraints& c, int iterations,
                              double step_size, const Matrix& init);

struct PlanResult {
  Matrix controls;            // T x F, feasible
  Matrix rollout_h;           // T x H predictor states under `controls`
  std::vector<double> trace;  // objective per evaluated iterate
  int iterations = 0;
};

// Shooting MPC graph: predictor rollout from a corrector state with one cost
// node per step. Built once per (model, cost, horizon); rebind and re-solve
// every receding-horizon step.
class PlanGraph {
 public:
  PlanGraph(const PrecoConfig& cfg, const ParamValues& params,
            const CostSpec& cost, int horizon);
  PlanGraph(const PlanGraph&) = delete;
  PlanGraph& operator=(const PlanGraph&) = delete;

  PlanResult plan(const Vector& h_init, const Vector& c_init,
                  const PlanConstraints& constraints, int iterations,
                  double step_size, const Matrix& warm_start);

  int horizon() const { return horizon_; }
  Tape& tape() { return tape_; }
  Var objective() const { return objective_; }
  const std::vector<Var>& control_inputs() const { return controls_; }
  Var state_input_h() const { return h0_; }
  Var state_input_c() const { return c0_; }

 private:
  Tape tape_;
  PrecoNet net_;
  int horizon_;
  Var h0_, c0_;
  std::vector<Var> controls_;
  std::vector<PrecoNet::State> states_;
  Var objective_;
};

struct MpcConfig {
  int horizon = 30;
  int iterations = 25;
  double step_size = 0.05;
  double box_limit = 1.0;
  double slew_limit = 0.1;
  CostSpec cost;
};

// Receding-horizon episode: correct with the latest observation, plan, add
// optional exploration noise to the first control, project, execute, then
// warm-start the next solve with the time-shifted solution.
Trajectory mpc_episode(GripperEnv& env, const PrecoConfig& model_cfg,
                       const ParamValues& params, const MpcConfig& mpc,
                       const std::function<Vector(int)>& noise = nullptr);

}  // namespace proprio
