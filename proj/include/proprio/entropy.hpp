#pragma once

#include <Eigen/Dense>

#include "proprio/preco.hpp"
#include "proprio/tape.hpp"

namespace proprio {

// One observation dimension's predictive distribution: a mixture of M
// univariate Gaussians.
struct Mixture1D {
  Eigen::VectorXd alpha;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;

  void validate() const;  // throws std::invalid_argument
};

// ∫ N(x; mu_i, s_i) N(x; mu_j, s_j) dx, the Gaussian collision integral.
double pair_integral(double mu_i, double s_i, double mu_j, double s_j);

// Collision (Rényi order-2) entropy −log ∫ f², in closed form via the
// pairwise integrals.
double renyi2(const Mixture1D& m);

// Same quantity by adaptive Simpson quadrature of f² over
// [min mu − 10 max sigma, max mu + 10 max sigma]; the independent check
// for the closed form.
double renyi2_quadrature_oracle(const Mixture1D& m, double tol = 1e-12);

// Graph forms, for costs the planner differentiates.
//
// Per-entry collision entropy of the decoded mixture, summed over every
// entry (all observation dimensions, and all batch columns if any).
Var mixture_entropy_sum(const PrecoNet::Decoded& d);

// decode(h) then sum the per-dimension entropies.
Var prediction_entropy(const PrecoNet& net, Var h);

}  // namespace proprio
