#pragma once

#include <string>
#include <vector>

#include "proprio/tape.hpp"

namespace proprio {

// Named trainable leaves of one tape. The set owns the master values;
// bind() pushes them onto the tape before each forward pass.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Var var;
    Matrix value;
  };

  Var declare(Tape& tape, const std::string& name, Matrix init,
              bool requires_grad = true);

  void bind() const;

  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  bool has(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t count() const;  // total scalar count

 private:
  std::vector<Entry> entries_;
};

// Scales the set so its joint two-norm is at most max_norm. Returns the
// norm before clipping. max_norm <= 0 leaves the gradients untouched.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. State buffers are laid out to match the
// ParamSet passed to the first step() call.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Pulls gradients off the params' tape (missing ones count as zero),
  // clips their joint norm, and applies one update to the master values.
  // Returns the pre-clip gradient norm. Caller rebinds before the next
  // forward pass.
  double step(ParamSet& params, double clip_norm = 0.0);

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// Central-difference check of every entry of the given inputs against the
// recorded backward pass. Returns the worst relative error
// |a - n| / max(1e-8, |a| + |n|). Restores the tape before returning.
double grad_check(Tape& tape, Var output, const std::vector<Var>& inputs,
                  double h = 1e-5);

}  // namespace proprio
