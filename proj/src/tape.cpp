#include "proprio/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace proprio {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::bias_add: return "bias_add";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::softplus: return "softplus";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::neg: return "neg";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::softmax: return "softmax";
    case Op::logsumexp: return "logsumexp";
  }
  return "?";
}

std::string Tape::describe(int id) const {
  const Node& n = nodes_[id];
  std::string s = "node #" + std::to_string(id) + " (" + op_name(n.op);
  if (!n.name.empty()) s += " '" + n.name + "'";
  s += ", " + std::to_string(n.rows) + "x" + std::to_string(n.cols) + ")";
  return s;
}

Var Tape::input(const std::string& name, int rows, int cols, bool requires_grad) {
  if (name.empty()) throw std::invalid_argument("tape input needs a name");
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("tape input '" + name + "' needs positive extents");
  }
  for (int id : input_ids_) {
    if (nodes_[id].name == name) {
      throw std::invalid_argument("tape input '" + name + "' declared twice");
    }
  }
  Node n;
  n.op = Op::input;
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = requires_grad;
  n.name = name;
  n.value.setZero(rows, cols);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  input_ids_.push_back(id);
  return Var{this, id};
}

Var Tape::constant(Matrix value, const std::string& name) {
  if (value.size() == 0) throw std::invalid_argument("tape constant must be nonempty");
  Node n;
  n.op = Op::constant;
  n.rows = static_cast<int>(value.rows());
  n.cols = static_cast<int>(value.cols());
  n.name = name;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

void Tape::set_input(Var v, const Matrix& value) {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("set_input: handle does not belong to this tape");
  }
  Node& n = nodes_[v.id];
  if (n.op != Op::input) {
    throw std::invalid_argument("set_input: " + describe(v.id) + " is not an input");
  }
  if (value.rows() != n.rows || value.cols() != n.cols) {
    throw std::invalid_argument(
        "set_input: shape mismatch for " + describe(v.id) + ": got " +
        std::to_string(value.rows()) + "x" + std::to_string(value.cols()));
  }
  n.value = value;
  n.bind_epoch = ++bind_counter_;
}

void Tape::set_input(const std::string& name, const Matrix& value) {
  set_input(find_input(name), value);
}

Var Tape::find_input(const std::string& name) const {
  for (int id : input_ids_) {
    if (nodes_[id].name == name) return Var{const_cast<Tape*>(this), id};
  }
  throw std::invalid_argument("tape has no input named '" + name + "'");
}

Var Tape::emit(Op op, std::vector<int> in, int aux0, int aux1) {
  for (int id : in) {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("emit: input id out of range");
    }
  }
  auto shape_err = [&](const std::string& msg) {
    std::string s = "cannot record " + std::string(op_name(op)) + "(";
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (i) s += ", ";
      s += describe(in[i]);
    }
    s += "): " + msg;
    return std::invalid_argument(s);
  };

  int rows = 0;
  int cols = 0;
  const auto r = [&](int i) { return nodes_[in[i]].rows; };
  const auto c = [&](int i) { return nodes_[in[i]].cols; };

  switch (op) {
    case Op::input:
    case Op::constant:
      throw std::invalid_argument("emit: leaves are created via input()/constant()");
    case Op::matmul:
      if (in.size() != 2) throw shape_err("needs 2 inputs");
      if (c(0) != r(1)) throw shape_err("inner extents differ");
      rows = r(0);
      cols = c(1);
      break;
    case Op::bias_add:
      if (in.size() != 2) throw shape_err("needs 2 inputs");
      if (c(1) != 1 || r(1) != r(0)) throw shape_err("bias must be a matching column");
      rows = r(0);
      cols = c(0);
      break;
    case Op::add:
    case Op::sub:
    case Op::mul: {
      if (in.size() != 2) throw shape_err("needs 2 inputs");
      const bool a_scalar = r(0) == 1 && c(0) == 1;
      const bool b_scalar = r(1) == 1 && c(1) == 1;
      if (r(0) == r(1) && c(0) == c(1)) {
        rows = r(0);
        cols = c(0);
      } else if (a_scalar) {
        rows = r(1);
        cols = c(1);
      } else if (b_scalar) {
        rows = r(0);
        cols = c(0);
      } else {
        throw shape_err("shapes must match (or one side be 1x1)");
      }
      break;
    }
    case Op::tanh:
    case Op::sigmoid:
    case Op::softplus:
    case Op::exp:
    case Op::log:
    case Op::neg:
      if (in.size() != 1) throw shape_err("needs 1 input");
      rows = r(0);
      cols = c(0);
      break;
    case Op::concat: {
      if (in.empty()) throw shape_err("needs at least 1 input");
      cols = c(0);
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (c(i) != cols) throw shape_err("column counts differ");
        rows += r(i);
      }
      break;
    }
    case Op::slice:
      if (in.size() != 1) throw shape_err("needs 1 input");
      if (aux0 < 0 || aux1 <= 0 || aux0 + aux1 > r(0)) {
        throw shape_err("row range [" + std::to_string(aux0) + ", " +
                        std::to_string(aux0 + aux1) + ") out of bounds");
      }
      rows = aux1;
      cols = c(0);
      break;
    case Op::sum:
    case Op::mean:
      if (in.size() != 1) throw shape_err("needs 1 input");
      rows = 1;
      cols = 1;
      break;
    case Op::softmax:
      if (in.size() != 1) throw shape_err("needs 1 input");
      if (c(0) != 1) throw shape_err("softmax expects a column vector");
      rows = r(0);
      cols = 1;
      break;
    case Op::logsumexp:
      if (in.empty()) throw shape_err("needs at least 1 input");
      if (in.size() == 1) {
        rows = 1;
        cols = 1;
      } else {
        rows = r(0);
        cols = c(0);
        for (std::size_t i = 1; i < in.size(); ++i) {
          if (r(i) != rows || c(i) != cols) throw shape_err("list entries must share a shape");
        }
      }
      break;
  }

  Node n;
  n.op = op;
  n.in = std::move(in);
  n.rows = rows;
  n.cols = cols;
  n.aux0 = aux0;
  n.aux1 = aux1;
  for (int id : n.in) {
    if (nodes_[id].requires_grad) n.requires_grad = true;
  }
  n.value.setZero(rows, cols);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::eval_node(int id) {
  Node& n = nodes_[id];
  const auto in = [&](int i) -> const Matrix& { return nodes_[n.in[i]].value; };
  switch (n.op) {
    case Op::input:
      if (n.bind_epoch < 0) {
        throw std::runtime_error("forward: " + describe(id) + " was never bound");
      }
      break;
    case Op::constant:
      break;
    case Op::matmul:
      n.value.noalias() = in(0) * in(1);
      break;
    case Op::bias_add:
      n.value = in(0).colwise() + in(1).col(0);
      break;
    case Op::add: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      if (a.rows() == n.rows && a.cols() == n.cols) {
        if (b.size() == 1 && n.rows * n.cols != 1) {
          n.value = a.array() + b(0, 0);
        } else {
          n.value = a + b;
        }
      } else {
        n.value = b.array() + a(0, 0);
      }
      break;
    }
    case Op::sub: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      if (a.rows() == n.rows && a.cols() == n.cols) {
        if (b.size() == 1 && n.rows * n.cols != 1) {
          n.value = a.array() - b(0, 0);
        } else {
          n.value = a - b;
        }
      } else {
        n.value = a(0, 0) - b.array();
      }
      break;
    }
    case Op::mul: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      if (a.rows() == n.rows && a.cols() == n.cols) {
        if (b.size() == 1 && n.rows * n.cols != 1) {
          n.value = a.array() * b(0, 0);
        } else {
          n.value = a.array() * b.array();
        }
      } else {
        n.value = b.array() * a(0, 0);
      }
      break;
    }
    case Op::tanh:
      n.value = in(0).array().tanh();
      break;
    case Op::sigmoid:
      n.value = in(0).unaryExpr([](double x) { return stable_sigmoid(x); });
      break;
    case Op::softplus:
      n.value = in(0).unaryExpr([](double x) { return stable_softplus(x); });
      break;
    case Op::exp:
      n.value = in(0).array().exp();
      break;
    case Op::log:
      n.value = in(0).array().log();
      break;
    case Op::neg:
      n.value = -in(0);
      break;
    case Op::concat: {
      int off = 0;
      for (std::size_t i = 0; i < n.in.size(); ++i) {
        const Matrix& part = nodes_[n.in[i]].value;
        n.value.middleRows(off, part.rows()) = part;
        off += static_cast<int>(part.rows());
      }
      break;
    }
    case Op::slice:
      n.value = in(0).middleRows(n.aux0, n.aux1);
      break;
    case Op::sum:
      n.value(0, 0) = in(0).sum();
      break;
    case Op::mean:
      n.value(0, 0) = in(0).mean();
      break;
    case Op::softmax: {
      const Matrix& x = in(0);
      const double m = x.maxCoeff();
      Eigen::ArrayXd e = (x.col(0).array() - m).exp();
      n.value.col(0) = e / e.sum();
      break;
    }
    case Op::logsumexp: {
      if (n.in.size() == 1) {
        const Matrix& x = in(0);
        const double m = x.maxCoeff();
        n.value(0, 0) = m + std::log((x.array() - m).exp().sum());
      } else {
        Matrix m = in(0);
        for (std::size_t i = 1; i < n.in.size(); ++i) {
          m = m.cwiseMax(in(i));
        }
        Matrix acc = Matrix::Zero(n.rows, n.cols);
        for (std::size_t i = 0; i < n.in.size(); ++i) {
          acc.array() += (in(i) - m).array().exp();
        }
        n.value = m.array() + acc.array().log();
      }
      break;
    }
  }
}

void Tape::forward() {
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    eval_node(id);
    if (check_finite && !nodes_[id].value.allFinite()) {
      throw std::runtime_error("forward: non-finite value in " + describe(id));
    }
  }
  forward_epoch_ = bind_counter_;
}

Matrix& Tape::grad_target(int id, bool& fresh) {
  Node& n = nodes_[id];
  fresh = n.grad_epoch != backward_epoch_;
  if (fresh) {
    if (n.grad.rows() != n.rows || n.grad.cols() != n.cols) {
      n.grad.resize(n.rows, n.cols);
    }
    n.grad_epoch = backward_epoch_;
  }
  return n.grad;
}

void Tape::accum_full(int id, const Matrix& g) {
  bool fresh = false;
  Matrix& dst = grad_target(id, fresh);
  if (fresh) {
    dst = g;
  } else {
    dst += g;
  }
}

void Tape::backprop_node(int id) {
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  const auto inv = [&](int i) -> const Matrix& { return nodes_[n.in[i]].value; };
  const auto wants = [&](int i) { return nodes_[n.in[i]].requires_grad; };

  switch (n.op) {
    case Op::input:
    case Op::constant:
      break;
    case Op::matmul:
      if (wants(0)) accum_full(n.in[0], g * inv(1).transpose());
      if (wants(1)) accum_full(n.in[1], inv(0).transpose() * g);
      break;
    case Op::bias_add:
      if (wants(0)) accum_full(n.in[0], g);
      if (wants(1)) accum_full(n.in[1], g.rowwise().sum());
      break;
    case Op::add: {
      for (int i = 0; i < 2; ++i) {
        if (!wants(i)) continue;
        const Node& src = nodes_[n.in[i]];
        if (src.rows == n.rows && src.cols == n.cols) {
          accum_full(n.in[i], g);
        } else {
          accum_full(n.in[i], Matrix::Constant(1, 1, g.sum()));
        }
      }
      break;
    }
    case Op::sub: {
      if (wants(0)) {
        const Node& src = nodes_[n.in[0]];
        if (src.rows == n.rows && src.cols == n.cols) {
          accum_full(n.in[0], g);
        } else {
          accum_full(n.in[0], Matrix::Constant(1, 1, g.sum()));
        }
      }
      if (wants(1)) {
        const Node& src = nodes_[n.in[1]];
        if (src.rows == n.rows && src.cols == n.cols) {
          accum_full(n.in[1], -g);
        } else {
          accum_full(n.in[1], Matrix::Constant(1, 1, -g.sum()));
        }
      }
      break;
    }
    case Op::mul: {
      for (int i = 0; i < 2; ++i) {
        if (!wants(i)) continue;
        const Matrix& other = inv(1 - i);
        const Node& src = nodes_[n.in[i]];
        const bool src_scalar = src.rows == 1 && src.cols == 1 && n.rows * n.cols != 1;
        const bool other_scalar =
            other.rows() == 1 && other.cols() == 1 && n.rows * n.cols != 1;
        if (src_scalar) {
          accum_full(n.in[i], Matrix::Constant(1, 1, (g.array() * other.array()).sum()));
        } else if (other_scalar) {
          accum_full(n.in[i], g * other(0, 0));
        } else {
          accum_full(n.in[i], g.cwiseProduct(other));
        }
      }
      break;
    }
    case Op::tanh:
      if (wants(0)) accum_full(n.in[0], (g.array() * (1.0 - n.value.array().square())).matrix());
      break;
    case Op::sigmoid:
      if (wants(0)) {
        accum_full(n.in[0],
                   (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
      }
      break;
    case Op::softplus:
      if (wants(0)) {
        Matrix s = inv(0).unaryExpr([](double x) { return stable_sigmoid(x); });
        accum_full(n.in[0], g.cwiseProduct(s));
      }
      break;
    case Op::exp:
      if (wants(0)) accum_full(n.in[0], g.cwiseProduct(n.value));
      break;
    case Op::log:
      if (wants(0)) accum_full(n.in[0], (g.array() / inv(0).array()).matrix());
      break;
    case Op::neg:
      if (wants(0)) accum_full(n.in[0], -g);
      break;
    case Op::concat: {
      int off = 0;
      for (std::size_t i = 0; i < n.in.size(); ++i) {
        const int nr = nodes_[n.in[i]].rows;
        if (wants(static_cast<int>(i))) accum_full(n.in[i], g.middleRows(off, nr));
        off += nr;
      }
      break;
    }
    case Op::slice: {
      if (wants(0)) {
        bool fresh = false;
        Matrix& dst = grad_target(n.in[0], fresh);
        if (fresh) dst.setZero();
        dst.middleRows(n.aux0, n.aux1) += g;
      }
      break;
    }
    case Op::sum:
      if (wants(0)) {
        const Node& src = nodes_[n.in[0]];
        accum_full(n.in[0], Matrix::Constant(src.rows, src.cols, g(0, 0)));
      }
      break;
    case Op::mean:
      if (wants(0)) {
        const Node& src = nodes_[n.in[0]];
        const double scale = g(0, 0) / static_cast<double>(src.rows * src.cols);
        accum_full(n.in[0], Matrix::Constant(src.rows, src.cols, scale));
      }
      break;
    case Op::softmax:
      if (wants(0)) {
        const double s = (n.value.array() * g.array()).sum();
        accum_full(n.in[0], (n.value.array() * (g.array() - s)).matrix());
      }
      break;
    case Op::logsumexp: {
      if (n.in.size() == 1) {
        if (wants(0)) {
          accum_full(n.in[0],
                     ((inv(0).array() - n.value(0, 0)).exp() * g(0, 0)).matrix());
        }
      } else {
        for (std::size_t i = 0; i < n.in.size(); ++i) {
          if (!wants(static_cast<int>(i))) continue;
          accum_full(n.in[i],
                     (g.array() * (inv(i) - n.value).array().exp()).matrix());
        }
      }
      break;
    }
  }
}

void Tape::backward(Var output) {
  if (output.tape != this || output.id < 0 ||
      output.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("backward: handle does not belong to this tape");
  }
  if (forward_epoch_ < 0) {
    throw std::runtime_error("backward: forward() has not been run");
  }
  if (forward_epoch_ != bind_counter_) {
    throw std::runtime_error("backward: inputs were rebound after the last forward()");
  }
  const Node& out = nodes_[output.id];
  if (out.rows != 1 || out.cols != 1) {
    throw std::invalid_argument("backward: " + describe(output.id) + " is not a scalar");
  }
  ++backward_epoch_;
  {
    bool fresh = false;
    Matrix& seed = grad_target(output.id, fresh);
    seed(0, 0) = 1.0;
  }
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad_epoch != backward_epoch_ || !n.requires_grad) continue;
    backprop_node(id);
  }
}

const Matrix& Tape::value(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("value: handle does not belong to this tape");
  }
  return nodes_[v.id].value;
}

bool Tape::has_grad(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) return false;
  return nodes_[v.id].grad_epoch == backward_epoch_ && backward_epoch_ >= 0;
}

const Matrix& Tape::grad(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("grad: handle does not belong to this tape");
  }
  const Node& n = nodes_[v.id];
  if (n.grad_epoch != backward_epoch_ || backward_epoch_ < 0) {
    throw std::runtime_error("grad: no gradient recorded for " + describe(v.id) +
                             " (not reachable from the output, or backward not run)");
  }
  return n.grad;
}

namespace {

Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (v.tape == nullptr) throw std::invalid_argument("null Var handle");
    if (t == nullptr) t = v.tape;
    if (v.tape != t) throw std::invalid_argument("Vars belong to different tapes");
  }
  return *t;
}

}  // namespace

Var matmul(Var a, Var b) { return same_tape({a, b}).emit(Op::matmul, {a.id, b.id}); }
Var bias_add(Var a, Var bias) {
  return same_tape({a, bias}).emit(Op::bias_add, {a.id, bias.id});
}
Var add(Var a, Var b) { return same_tape({a, b}).emit(Op::add, {a.id, b.id}); }
Var sub(Var a, Var b) { return same_tape({a, b}).emit(Op::sub, {a.id, b.id}); }
Var mul(Var a, Var b) { return same_tape({a, b}).emit(Op::mul, {a.id, b.id}); }
Var tanh(Var a) { return same_tape({a}).emit(Op::tanh, {a.id}); }
Var sigmoid(Var a) { return same_tape({a}).emit(Op::sigmoid, {a.id}); }
Var softplus(Var a) { return same_tape({a}).emit(Op::softplus, {a.id}); }
Var exp(Var a) { return same_tape({a}).emit(Op::exp, {a.id}); }
Var log(Var a) { return same_tape({a}).emit(Op::log, {a.id}); }
Var neg(Var a) { return same_tape({a}).emit(Op::neg, {a.id}); }

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of an empty list");
  Tape& t = *parts.front().tape;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& v : parts) {
    if (v.tape != &t) throw std::invalid_argument("Vars belong to different tapes");
    ids.push_back(v.id);
  }
  return t.emit(Op::concat, std::move(ids));
}

Var slice(Var a, int first_row, int num_rows) {
  return same_tape({a}).emit(Op::slice, {a.id}, first_row, num_rows);
}
Var sum(Var a) { return same_tape({a}).emit(Op::sum, {a.id}); }
Var mean(Var a) { return same_tape({a}).emit(Op::mean, {a.id}); }
Var softmax(Var a) { return same_tape({a}).emit(Op::softmax, {a.id}); }
Var logsumexp(Var a) { return same_tape({a}).emit(Op::logsumexp, {a.id}); }

Var logsumexp(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("logsumexp of an empty list");
  // lse of a single entry is the entry itself; emitting it would collide with
  // the reduce-to-scalar form, which also has one operand
  if (parts.size() == 1) return parts.front();
  Tape& t = *parts.front().tape;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& v : parts) {
    if (v.tape != &t) throw std::invalid_argument("Vars belong to different tapes");
    ids.push_back(v.id);
  }
  return t.emit(Op::logsumexp, std::move(ids));
}

}  // namespace proprio
