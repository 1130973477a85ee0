#include <cmath>
#include <vector>

#include "doctest.h"
#include "proprio/optim.hpp"
#include "proprio/rng.hpp"
#include "proprio/tape.hpp"

using namespace proprio;

TEST_CASE("clip_global_norm") {
  SUBCASE("norm above the cap halves every entry") {
    std::vector<Matrix> g;
    g.push_back(Matrix::Constant(2, 1, 6.0));  // norm sqrt(72)
    g.push_back(Matrix::Constant(1, 1, 2.0));  // joint norm sqrt(76)
    // scale to joint norm exactly 10 first
    const double n0 = std::sqrt(76.0);
    for (auto& m : g) m *= 10.0 / n0;
    const double pre = clip_global_norm(g, 5.0);
    CHECK(pre == doctest::Approx(10.0).epsilon(1e-12));
    double sq = 0.0;
    for (const auto& m : g) sq += m.squaredNorm();
    CHECK(std::sqrt(sq) <= 5.0 + 1e-12);
    CHECK(g[0](0, 0) == doctest::Approx(0.5 * 6.0 * 10.0 / n0).epsilon(1e-12));
  }
  SUBCASE("norm below the cap is untouched") {
    std::vector<Matrix> g{Matrix::Constant(3, 1, 1.0)};  // norm sqrt(3) < 5
    Matrix before = g[0];
    const double pre = clip_global_norm(g, 5.0);
    CHECK(pre == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(g[0] == before);
  }
  SUBCASE("all-zero stays all-zero") {
    std::vector<Matrix> g{Matrix::Zero(2, 2)};
    CHECK(clip_global_norm(g, 5.0) == 0.0);
    CHECK(g[0].isZero(0.0));
  }
}

TEST_CASE("adam: first step moves each coordinate by about lr") {
  Tape t;
  ParamSet params;
  Var x = params.declare(t, "x", Matrix::Constant(2, 1, 1.0));
  Var y = sum(mul(x, x));
  params.bind();
  t.forward();
  t.backward(y);
  Adam opt(AdamConfig{.lr = 0.01});
  Matrix before = params.value("x");
  opt.step(params);
  Matrix delta = params.value("x") - before;
  // m-hat/sqrt(v-hat) = g/|g| up to epsilon, so |delta| is lr to ~1e-8/|g|
  CHECK(std::abs(std::abs(delta(0, 0)) - 0.01) < 1e-8);
  CHECK(delta(0, 0) < 0.0);  // descent: gradient at x=1 is +2
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tape t;
  ParamSet params;
  Var x = params.declare(t, "x", Matrix::Constant(2, 1, 0.7));
  Var c = t.input("c", 2, 1, /*requires_grad=*/false);
  Var y = sum(mul(c, x));
  params.bind();
  t.set_input(c, Matrix::Zero(2, 1));
  t.forward();
  t.backward(y);
  Matrix before = params.value("x");
  Adam opt;
  opt.step(params);
  CHECK(params.value("x") == before);
}

TEST_CASE("adam: 200 steps on (x-3)^2 converge") {
  Tape t;
  ParamSet params;
  Var x = params.declare(t, "x", Matrix::Zero(1, 1));
  Var d = sub(x, t.scalar(3.0));
  Var y = sum(mul(d, d));
  Adam opt(AdamConfig{.lr = 0.1});
  for (int i = 0; i < 200; ++i) {
    params.bind();
    t.forward();
    t.backward(y);
    opt.step(params);
  }
  CHECK(std::abs(params.value("x")(0, 0) - 3.0) < 0.05);
}

TEST_CASE("adam: clipping bounds the applied step") {
  Tape t;
  ParamSet params;
  Var x = params.declare(t, "x", Matrix::Constant(1, 1, 100.0));
  Var y = sum(mul(x, x));
  params.bind();
  t.forward();
  t.backward(y);
  Adam opt;
  const double pre = opt.step(params, 5.0);
  CHECK(pre == doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("grad_check oracle cases") {
  SUBCASE("x^2 at 3") {
    Tape t;
    Var x = t.input("x", 1, 1);
    Var y = sum(mul(x, x));
    t.set_input(x, Matrix::Constant(1, 1, 3.0));
    CHECK(grad_check(t, y, {x}) < 1e-8);
  }
  SUBCASE("constant function has zero error") {
    Tape t;
    Var x = t.input("x", 2, 1);
    Var y = sum(t.constant(Matrix::Ones(2, 2)));
    t.set_input(x, Matrix::Zero(2, 1));
    CHECK(grad_check(t, y, {x}) == 0.0);
  }
  SUBCASE("restores bindings afterwards") {
    Tape t;
    Var x = t.input("x", 2, 1);
    Var y = sum(mul(x, x));
    Matrix v(2, 1);
    v << 0.5, -0.25;
    t.set_input(x, v);
    grad_check(t, y, {x});
    CHECK(t.value(x) == v);
    t.forward();
    CHECK(t.value(y)(0, 0) == doctest::Approx(0.3125).epsilon(1e-15));
  }
}

TEST_CASE("rng: deterministic and splittable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(mix_seed(42, 1)), d(mix_seed(42, 2));
  CHECK(c.uniform() != d.uniform());
  Rng e(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += e.normal();
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
  Rng f(7);
  int lo = 0;
  for (int i = 0; i < n; ++i) {
    if (f.uniform_int(10) < 5) ++lo;
  }
  CHECK(std::abs(lo / double(n) - 0.5) < 0.05);
}
