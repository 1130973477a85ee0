#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace proprio {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

// Handle to a node on a tape. Cheap to copy; free functions below combine
// handles into new nodes.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

enum class Op : std::uint8_t {
  input,
  constant,
  matmul,
  bias_add,
  add,
  sub,
  mul,
  tanh,
  sigmoid,
  softplus,
  exp,
  log,
  neg,
  concat,
  slice,
  sum,
  mean,
  softmax,
  logsumexp,
};

const char* op_name(Op op);

// A recorded computation graph over dense 64-bit arrays with one reverse
// sweep per backward() call. Shapes are fixed when nodes are recorded, so a
// tape can be built once and re-evaluated many times against fresh input
// bindings. Single-threaded; independent tapes may live on separate threads.
class Tape {
 public:
  struct Node {
    Op op;
    std::vector<int> in;
    int rows = 0;
    int cols = 0;
    int aux0 = 0;  // slice: first row
    int aux1 = 0;  // slice: row count
    bool requires_grad = false;
    std::string name;  // inputs/constants only
    Matrix value;
    Matrix grad;
    std::int64_t bind_epoch = -1;  // inputs: last binding
    std::int64_t grad_epoch = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Declares a named leaf of fixed shape. requires_grad marks it as a
  // differentiation target for backward().
  Var input(const std::string& name, int rows, int cols, bool requires_grad = true);
  Var constant(Matrix value, const std::string& name = "");
  Var scalar(double v);

  void set_input(Var v, const Matrix& value);
  void set_input(const std::string& name, const Matrix& value);
  Var find_input(const std::string& name) const;

  // Evaluates every node in recorded order. All named inputs must be bound.
  void forward();
  // Accumulates gradients of a scalar node into every reachable leaf with
  // requires_grad. forward() must have run since the last binding change.
  void backward(Var output);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool has_grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // When set, forward() verifies every node is finite and reports the first
  // offender by name. Heavy inner loops may disable it and re-run a checked
  // forward pass only when the loss goes non-finite.
  bool check_finite = true;

  Var emit(Op op, std::vector<int> in, int aux0 = 0, int aux1 = 0);
  const Node& node(int id) const { return nodes_[id]; }

 private:
  std::string describe(int id) const;
  void eval_node(int id);
  void backprop_node(int id);

  // First gradient contribution per backward pass assigns, later ones add.
  Matrix& grad_target(int id, bool& fresh);
  void accum_full(int id, const Matrix& g);

  std::vector<Node> nodes_;
  std::vector<int> input_ids_;
  std::int64_t forward_epoch_ = -1;
  std::int64_t bind_counter_ = 0;
  std::int64_t backward_epoch_ = -1;
};

// Graph-building free functions. All shapes are validated when recorded and
// mismatches throw std::invalid_argument naming the offending node.
Var matmul(Var a, Var b);
// (m x n) + (m x 1) column bias broadcast across columns
Var bias_add(Var a, Var bias);
// elementwise; either side may be a 1x1 scalar broadcast
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var neg(Var a);
// stack row blocks (equal column counts)
Var concat(const std::vector<Var>& parts);
Var slice(Var a, int first_row, int num_rows);
Var sum(Var a);
Var mean(Var a);
// column vector -> column vector on the simplex
Var softmax(Var a);
// single argument: reduce all entries to a 1x1 scalar (max-shifted)
Var logsumexp(Var a);
// multiple arguments of one shape: elementwise log-sum-exp across the list
Var logsumexp(const std::vector<Var>& parts);

}  // namespace proprio
