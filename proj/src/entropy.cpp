#include "proprio/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace proprio {

void Mixture1D::validate() const {
  const auto M = alpha.size();
  if (M == 0) throw std::invalid_argument("mixture has no components");
  if (mu.size() != M || sigma.size() != M) {
    throw std::invalid_argument("mixture field lengths disagree");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (!(alpha[i] >= 0.0)) throw std::invalid_argument("negative mixture weight");
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("nonpositive stddev");
    total += alpha[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("mixture weights do not sum to one");
  }
}

double pair_integral(double mu_i, double s_i, double mu_j, double s_j) {
  if (!(s_i > 0.0) || !(s_j > 0.0)) {
    throw std::invalid_argument("nonpositive stddev");
  }
  const double v = s_i * s_i + s_j * s_j;
  const double d = mu_i - mu_j;
  return std::exp(-d * d / (2.0 * v)) / std::sqrt(2.0 * M_PI * v);
}

double renyi2(const Mixture1D& m) {
  m.validate();
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.alpha.size(); ++i) {
    for (Eigen::Index j = 0; j < m.alpha.size(); ++j) {
      s += m.alpha[i] * m.alpha[j] *
           pair_integral(m.mu[i], m.sigma[i], m.mu[j], m.sigma[j]);
    }
  }
  return -std::log(s);
}

namespace {

double simpson_slice(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

// mandatory levels are refined regardless of the error estimate: a narrow
// peak between the sample points would otherwise make both estimates agree
// on zero and terminate early
double adapt(const std::function<double(double)>& f, double a, double fa,
             double b, double fb, double m, double fm, double whole,
             double tol, int depth, int mandatory) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_slice(a, fa, flm, m, fm);
  const double right = simpson_slice(m, fm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || (mandatory <= 0 && std::abs(delta) <= 15.0 * tol)) {
    return left + right + delta / 15.0;
  }
  return adapt(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1,
               mandatory - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1,
               mandatory - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  return adapt(f, a, fa, b, fb, m, fm, simpson_slice(a, fa, fm, b, fb), tol,
               48, 6);
}

}  // namespace

double renyi2_quadrature_oracle(const Mixture1D& m, double tol) {
  m.validate();
  auto density = [&](double x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < m.alpha.size(); ++i) {
      const double z = (x - m.mu[i]) / m.sigma[i];
      f += m.alpha[i] * std::exp(-0.5 * z * z) /
           (m.sigma[i] * std::sqrt(2.0 * M_PI));
    }
    return f * f;
  };
  const double smax = m.sigma.maxCoeff();
  // split at the component means so every peak sits on a panel edge where
  // the sampler cannot miss it
  std::vector<double> knots{m.mu.minCoeff() - 10.0 * smax};
  std::vector<double> mus(m.mu.data(), m.mu.data() + m.mu.size());
  std::sort(mus.begin(), mus.end());
  for (double v : mus) {
    if (v > knots.back()) knots.push_back(v);
  }
  knots.push_back(m.mu.maxCoeff() + 10.0 * smax);
  double total = 0.0;
  const double piece_tol = tol / static_cast<double>(knots.size() - 1);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    total += adaptive_simpson(density, knots[k], knots[k + 1], piece_tol);
  }
  return -std::log(total);
}

Var mixture_entropy_sum(const PrecoNet::Decoded& d) {
  if (d.mu.empty()) throw std::invalid_argument("empty decode");
  Tape& t = *d.mu.front().tape;
  Var half = t.scalar(0.5);
  Var log_2pi = t.scalar(std::log(2.0 * M_PI));
  const std::size_t M = d.mu.size();
  Var acc;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      Var s2 = add(mul(d.sigma[i], d.sigma[i]), mul(d.sigma[j], d.sigma[j]));
      Var dm = sub(d.mu[i], d.mu[j]);
      // log ∫ N_i N_j = −½ ((μi−μj)²/s2 + log 2π + log s2)
      Var log_pair = neg(mul(
          half, add(mul(mul(dm, dm), exp(neg(log(s2)))), add(log_2pi, log(s2)))));
      Var term = exp(add(d.log_alpha[i], add(d.log_alpha[j], log_pair)));
      acc = (i == 0 && j == 0) ? term : add(acc, term);
    }
  }
  return sum(neg(log(acc)));
}

Var prediction_entropy(const PrecoNet& net, Var h) {
  return mixture_entropy_sum(net.decode(h));
}

}  // namespace proprio
