#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "proprio/optim.hpp"
#include "proprio/rng.hpp"
#include "proprio/tape.hpp"

using namespace proprio;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -2.0, double hi = 2.0) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

}  // namespace

TEST_CASE("forward: identity matmul reproduces the vector") {
  Tape t;
  Var I = t.constant(Matrix::Identity(3, 3));
  Var v = t.input("v", 3, 1);
  Var y = matmul(I, v);
  Matrix vv(3, 1);
  vv << 0.3, -1.7, 2.0;
  t.set_input(v, vv);
  t.forward();
  CHECK(t.value(y) == vv);
}

TEST_CASE("forward: activations at zero") {
  Tape t;
  Var x = t.input("x", 2, 2);
  Var th = tanh(x);
  Var sg = sigmoid(x);
  Var sp = softplus(x);
  t.set_input(x, Matrix::Zero(2, 2));
  t.forward();
  CHECK(t.value(th).isZero(0.0));
  CHECK(t.value(sg).isApproxToConstant(0.5, 1e-15));
  CHECK(t.value(sp).isApproxToConstant(std::log(2.0), 1e-15));
}

TEST_CASE("forward: softmax of a constant vector is uniform") {
  Tape t;
  Var x = t.input("x", 3, 1);
  Var y = softmax(x);
  t.set_input(x, Matrix::Zero(3, 1));
  t.forward();
  CHECK(t.value(y).isApproxToConstant(1.0 / 3.0, 1e-15));
}

TEST_CASE("logsumexp values") {
  Tape t;
  Var x2 = t.input("x2", 2, 1);
  Var y2 = logsumexp(x2);
  Matrix v(2, 1);

  v << 0.0, 0.0;
  t.set_input(x2, v);
  t.forward();
  CHECK(t.value(y2)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  v << 0.0, 1.0;
  t.set_input(x2, v);
  t.forward();
  // high-precision direct evaluation of log(1 + e)
  CHECK(t.value(y2)(0, 0) == doctest::Approx(1.3132616875182228).epsilon(1e-14));

  v << 1000.0, 1000.0;
  t.set_input(x2, v);
  t.forward();
  CHECK(std::isfinite(t.value(y2)(0, 0)));
  CHECK(t.value(y2)(0, 0) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("logsumexp shift invariance") {
  Rng rng(11);
  Tape t;
  Var x = t.input("x", 5, 1);
  Var y = logsumexp(x);
  Matrix base = random_matrix(rng, 5, 1);
  t.set_input(x, base);
  t.forward();
  const double unshifted = t.value(y)(0, 0);

  // a singleton collapses to the identity, which shifts exactly
  Tape t1;
  Var x1 = t1.input("x", 1, 1);
  Var y1 = logsumexp(x1);
  t1.set_input(x1, Matrix::Constant(1, 1, 0.37));
  t1.forward();
  CHECK(t1.value(y1)(0, 0) == 0.37);
  t1.set_input(x1, Matrix::Constant(1, 1, 0.37 + 1e6));
  t1.forward();
  CHECK(t1.value(y1)(0, 0) == 0.37 + 1e6);

  for (double c : {0.5, 1.0, 10.0, 100.0, 1000.0}) {
    t.set_input(x, base.array() + c);
    t.forward();
    CHECK(std::abs(t.value(y)(0, 0) - (unshifted + c)) < 1e-12);
  }
  // beyond ~1e3 the representable grid itself is coarser than 1e-12, so the
  // bound scales with the ulp of the shifted magnitude
  const double eps = std::numeric_limits<double>::epsilon();
  for (double c : {1e4, 1e5, 1e6}) {
    t.set_input(x, base.array() + c);
    t.forward();
    CHECK(std::abs(t.value(y)(0, 0) - (unshifted + c)) < 1e-12 + 4.0 * eps * c);
  }
}

TEST_CASE("logsumexp over a list matches stacking") {
  Rng rng(5);
  Tape t;
  Var a = t.input("a", 2, 3);
  Var b = t.input("b", 2, 3);
  Var c = t.input("c", 2, 3);
  Var y = logsumexp({a, b, c});
  Matrix ma = random_matrix(rng, 2, 3), mb = random_matrix(rng, 2, 3),
         mc = random_matrix(rng, 2, 3);
  t.set_input(a, ma);
  t.set_input(b, mb);
  t.set_input(c, mc);
  t.forward();
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 2; ++i) {
      Tape s;
      Var xi = s.input("x", 3, 1);
      Var yi = logsumexp(xi);
      Matrix col(3, 1);
      col << ma(i, j), mb(i, j), mc(i, j);
      s.set_input(xi, col);
      s.forward();
      CHECK(t.value(y)(i, j) == doctest::Approx(s.value(yi)(0, 0)).epsilon(1e-14));
    }
  }

  // a one-entry list stays elementwise (log exp x = x), it must not collapse
  // to the reduce-to-scalar form
  Var single = logsumexp(std::vector<Var>{a});
  CHECK(single.id == a.id);
}

TEST_CASE("backward: linear and quadratic analytic gradients") {
  Tape t;
  Var x = t.input("x", 2, 1);
  Var s = sum(x);
  Var q = sum(mul(x, x));
  Matrix v(2, 1);
  v << 1.0, 2.0;
  t.set_input(x, v);
  t.forward();
  t.backward(s);
  CHECK(t.grad(x).isApproxToConstant(1.0, 0.0));
  t.backward(q);
  CHECK(t.grad(x)(0, 0) == 2.0);
  CHECK(t.grad(x)(1, 0) == 4.0);
}

TEST_CASE("backward: gradient of sum(W*v) matches finite differences") {
  Rng rng(17);
  Tape t;
  Var W = t.input("W", 3, 4);
  Var v = t.input("v", 4, 1);
  Var y = sum(matmul(W, v));
  t.set_input(W, random_matrix(rng, 3, 4));
  t.set_input(v, random_matrix(rng, 4, 1));
  CHECK(grad_check(t, y, {W, v}) < 1e-6);
}

TEST_CASE("backward: every primitive matches central differences") {
  Rng rng(23);
  const double tol = 1e-6;

  SUBCASE("matmul / bias_add") {
    Tape t;
    Var A = t.input("A", 3, 4);
    Var B = t.input("B", 4, 2);
    Var b = t.input("b", 3, 1);
    Var y = sum(tanh(bias_add(matmul(A, B), b)));
    t.set_input(A, random_matrix(rng, 3, 4));
    t.set_input(B, random_matrix(rng, 4, 2));
    t.set_input(b, random_matrix(rng, 3, 1));
    CHECK(grad_check(t, y, {A, B, b}) < tol);
  }

  SUBCASE("add / sub / mul, full shape") {
    Tape t;
    Var a = t.input("a", 2, 3);
    Var b = t.input("b", 2, 3);
    Var y = sum(mul(add(a, b), sub(a, b)));
    t.set_input(a, random_matrix(rng, 2, 3));
    t.set_input(b, random_matrix(rng, 2, 3));
    CHECK(grad_check(t, y, {a, b}) < tol);
  }

  SUBCASE("add / sub / mul, scalar broadcast") {
    Tape t;
    Var a = t.input("a", 2, 3);
    Var s = t.input("s", 1, 1);
    Var y = sum(add(mul(a, s), sub(s, a)));
    t.set_input(a, random_matrix(rng, 2, 3));
    t.set_input(s, random_matrix(rng, 1, 1));
    CHECK(grad_check(t, y, {a, s}) < tol);
  }

  SUBCASE("tanh / sigmoid / softplus / exp / neg") {
    Tape t;
    Var x = t.input("x", 3, 2);
    Var y = sum(add(add(tanh(x), sigmoid(x)), add(softplus(x), exp(neg(x)))));
    t.set_input(x, random_matrix(rng, 3, 2));
    CHECK(grad_check(t, y, {x}) < tol);
  }

  SUBCASE("log on positive inputs") {
    Tape t;
    Var x = t.input("x", 3, 2);
    Var y = sum(log(x));
    t.set_input(x, random_matrix(rng, 3, 2, 0.1, 2.0));
    CHECK(grad_check(t, y, {x}) < tol);
  }

  SUBCASE("concat / slice") {
    Tape t;
    Var a = t.input("a", 2, 3);
    Var b = t.input("b", 3, 3);
    Var cat = concat({a, b});
    Var y = sum(mul(slice(cat, 1, 3), slice(cat, 2, 3)));
    t.set_input(a, random_matrix(rng, 2, 3));
    t.set_input(b, random_matrix(rng, 3, 3));
    CHECK(grad_check(t, y, {a, b}) < tol);
  }

  SUBCASE("mean") {
    Tape t;
    Var x = t.input("x", 4, 2);
    Var y = mean(mul(x, x));
    t.set_input(x, random_matrix(rng, 4, 2));
    CHECK(grad_check(t, y, {x}) < tol);
  }

  SUBCASE("softmax") {
    Tape t;
    Var x = t.input("x", 4, 1);
    Var w = t.constant(random_matrix(rng, 4, 1));
    Var y = sum(mul(softmax(x), w));
    t.set_input(x, random_matrix(rng, 4, 1));
    CHECK(grad_check(t, y, {x}) < tol);
  }

  SUBCASE("logsumexp, single and list") {
    Tape t;
    Var x = t.input("x", 5, 1);
    Var a = t.input("a", 2, 2);
    Var b = t.input("b", 2, 2);
    Var y = add(logsumexp(x), sum(logsumexp({a, b})));
    t.set_input(x, random_matrix(rng, 5, 1));
    t.set_input(a, random_matrix(rng, 2, 2));
    t.set_input(b, random_matrix(rng, 2, 2));
    CHECK(grad_check(t, y, {x, a, b}) < tol);
  }
}

TEST_CASE("backward: slice leaves untouched rows at zero") {
  Tape t;
  Var x = t.input("x", 4, 1);
  Var y = sum(slice(x, 0, 2));
  t.set_input(x, Matrix::Ones(4, 1));
  t.forward();
  t.backward(y);
  Matrix g = t.grad(x);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 1.0);
  CHECK(g(2, 0) == 0.0);
  CHECK(g(3, 0) == 0.0);
}

TEST_CASE("backward: fan-out accumulates over both paths") {
  Tape t;
  Var x = t.input("x", 1, 1);
  Var y = add(mul(x, x), x);  // d/dx = 2x + 1
  t.set_input(x, Matrix::Constant(1, 1, 1.5));
  t.forward();
  t.backward(y);
  CHECK(t.grad(x)(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("backward: repeated sweeps do not accumulate across calls") {
  Tape t;
  Var x = t.input("x", 2, 2);
  Var y = sum(mul(x, x));
  t.set_input(x, Matrix::Ones(2, 2));
  t.forward();
  t.backward(y);
  Matrix first = t.grad(x);
  t.backward(y);
  CHECK(t.grad(x) == first);
}

TEST_CASE("rebinding inputs re-evaluates the same graph") {
  Tape t;
  Var x = t.input("x", 3, 1);
  Var y = sum(mul(x, x));
  t.set_input(x, Matrix::Ones(3, 1));
  t.forward();
  CHECK(t.value(y)(0, 0) == 3.0);
  t.set_input(x, Matrix::Constant(3, 1, 2.0));
  t.forward();
  CHECK(t.value(y)(0, 0) == 12.0);
}

TEST_CASE("determinism: the same build gives bit-identical results") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tape t;
    Var W = t.input("W", 4, 4);
    Var x = t.input("x", 4, 1);
    Var y = logsumexp(tanh(matmul(W, x)));
    t.set_input(W, random_matrix(rng, 4, 4));
    t.set_input(x, random_matrix(rng, 4, 1));
    t.forward();
    t.backward(y);
    return std::pair<double, Matrix>(t.value(y)(0, 0), t.grad(W));
  };
  auto [v1, g1] = run(99);
  auto [v2, g2] = run(99);
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("inputs without requires_grad receive no gradient") {
  Tape t;
  Var x = t.input("x", 2, 1);
  Var d = t.input("data", 2, 1, /*requires_grad=*/false);
  Var y = sum(mul(x, d));
  t.set_input(x, Matrix::Ones(2, 1));
  t.set_input(d, Matrix::Constant(2, 1, 3.0));
  t.forward();
  t.backward(y);
  CHECK(t.grad(x).isApproxToConstant(3.0, 0.0));
  CHECK(!t.has_grad(d));
}

TEST_CASE("error reporting") {
  SUBCASE("shape mismatch names the node") {
    Tape t;
    Var a = t.input("a", 2, 3);
    Var b = t.input("b", 2, 3);
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         doctest::Contains("matmul"), std::invalid_argument);
  }
  SUBCASE("backward on a non-scalar") {
    Tape t;
    Var x = t.input("x", 2, 2);
    Var y = tanh(x);
    t.set_input(x, Matrix::Zero(2, 2));
    t.forward();
    CHECK_THROWS_AS(t.backward(y), std::invalid_argument);
  }
  SUBCASE("backward before forward") {
    Tape t;
    Var x = t.input("x", 1, 1);
    Var y = sum(x);
    t.set_input(x, Matrix::Zero(1, 1));
    CHECK_THROWS_AS(t.backward(y), std::runtime_error);
  }
  SUBCASE("unbound input") {
    Tape t;
    Var x = t.input("x", 1, 1);
    Var y = sum(x);
    (void)y;
    CHECK_THROWS_WITH_AS(t.forward(), doctest::Contains("never bound"),
                         std::runtime_error);
  }
  SUBCASE("set_input shape mismatch") {
    Tape t;
    Var x = t.input("x", 2, 2);
    CHECK_THROWS_AS(t.set_input(x, Matrix::Zero(3, 2)), std::invalid_argument);
  }
  SUBCASE("non-finite intermediate is reported by node") {
    Tape t;
    Var x = t.input("x", 1, 1);
    Var y = log(x);
    (void)y;
    t.set_input(x, Matrix::Constant(1, 1, -1.0));
    CHECK_THROWS_WITH_AS(t.forward(), doctest::Contains("log"),
                         std::runtime_error);
  }
  SUBCASE("rebinding after forward invalidates backward") {
    Tape t;
    Var x = t.input("x", 1, 1);
    Var y = sum(x);
    t.set_input(x, Matrix::Zero(1, 1));
    t.forward();
    t.set_input(x, Matrix::Ones(1, 1));
    CHECK_THROWS_AS(t.backward(y), std::runtime_error);
  }
  SUBCASE("slice outside the parent") {
    Tape t;
    Var x = t.input("x", 3, 1);
    CHECK_THROWS_AS(slice(x, 2, 2), std::invalid_argument);
  }
  SUBCASE("duplicate input name") {
    Tape t;
    t.input("x", 1, 1);
    CHECK_THROWS_AS(t.input("x", 2, 2), std::invalid_argument);
  }
}
