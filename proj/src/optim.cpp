#include "proprio/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace proprio {

Var ParamSet::declare(Tape& tape, const std::string& name, Matrix init,
                      bool requires_grad) {
  Var v = tape.input(name, static_cast<int>(init.rows()),
                     static_cast<int>(init.cols()), requires_grad);
  entries_.push_back(Entry{name, v, std::move(init)});
  return v;
}

void ParamSet::bind() const {
  for (const Entry& e : entries_) {
    e.var.tape->set_input(e.var, e.value);
  }
}

Matrix& ParamSet::value(const std::string& name) {
  for (Entry& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw std::invalid_argument("no parameter named '" + name + "'");
}

const Matrix& ParamSet::value(const std::string& name) const {
  return const_cast<ParamSet*>(this)->value(name);
}

bool ParamSet::has(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix& g : grads) g *= scale;
  }
  return norm;
}

double Adam::step(ParamSet& params, double clip_norm) {
  auto& entries = params.entries();
  if (m_.empty()) {
    m_.reserve(entries.size());
    v_.reserve(entries.size());
    for (const auto& e : entries) {
      m_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
      v_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    }
  }
  if (m_.size() != entries.size()) {
    throw std::invalid_argument("Adam state does not match this parameter set");
  }

  std::vector<Matrix> grads;
  grads.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.var.tape->has_grad(e.var)) {
      grads.push_back(e.var.tape->grad(e.var));
    } else {
      grads.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    }
  }
  const double norm = clip_global_norm(grads, clip_norm);

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Matrix& g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    entries[i].value.array() -=
        cfg_.lr * (m_[i].array() / bc1) /
        ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
  return norm;
}

double grad_check(Tape& tape, Var output, const std::vector<Var>& inputs,
                  double h) {
  tape.forward();
  tape.backward(output);

  std::vector<Matrix> analytic;
  std::vector<Matrix> saved;
  analytic.reserve(inputs.size());
  saved.reserve(inputs.size());
  for (Var v : inputs) {
    saved.push_back(tape.value(v));
    analytic.push_back(tape.has_grad(v)
                           ? tape.grad(v)
                           : Matrix::Zero(saved.back().rows(), saved.back().cols()));
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix probe = saved[k];
    for (int j = 0; j < probe.cols(); ++j) {
      for (int i = 0; i < probe.rows(); ++i) {
        const double orig = probe(i, j);
        probe(i, j) = orig + h;
        tape.set_input(inputs[k], probe);
        tape.forward();
        const double up = tape.value(output)(0, 0);
        probe(i, j) = orig - h;
        tape.set_input(inputs[k], probe);
        tape.forward();
        const double dn = tape.value(output)(0, 0);
        probe(i, j) = orig;
        const double numeric = (up - dn) / (2.0 * h);
        const double a = analytic[k](i, j);
        const double err =
            std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, err);
      }
    }
    tape.set_input(inputs[k], saved[k]);
  }
  tape.forward();
  return worst;
}

}  // namespace proprio
