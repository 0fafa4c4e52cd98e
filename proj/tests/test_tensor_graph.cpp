#include <cmath>
#include <cstring>

#include "doctest.h"
#include "dpc/adam.hpp"
#include "dpc/errors.hpp"
#include "dpc/grad_check.hpp"
#include "dpc/graph.hpp"
#include "oracles/test_util.hpp"

using namespace dpc;
using dpc_test::fd_grad;
using dpc_test::random_tensor;
using dpc_test::rel_err;

namespace {

Var graph_sum(Graph& g, Var v) {
  const Tensor& t = g.value(v);
  return g.affine(g.mean(v), static_cast<double>(t.size()), 0.0);
}

}  // namespace

TEST_SUITE("tensor_graph") {

TEST_CASE("tensor construction and validation") {
  Tensor t = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(t.rows() == 2);
  CHECK(t(1, 0) == 3.0);
  CHECK_THROWS_AS(Tensor(0, 3), DimensionError);
  CHECK_THROWS_AS(t.at(2, 0), IndexError);
  CHECK_THROWS_AS(matmul(Tensor(2, 3), Tensor(2, 3)), DimensionError);
  try {
    matmul(Tensor(2, 3), Tensor(2, 3));
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul values") {
  Graph g;
  Var id = g.constant(Tensor::identity(2));
  Var v = g.constant(Tensor::from_rows({{3}, {4}}));
  CHECK(max_abs_diff(g.value(g.matmul(id, v)), Tensor::from_rows({{3}, {4}})) == 0.0);

  Var a = g.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  Var ones = g.constant(Tensor::from_rows({{1}, {1}}));
  CHECK(max_abs_diff(g.value(g.matmul(a, ones)), Tensor::from_rows({{3}, {7}})) == 0.0);
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(42);
  Param a{"a", random_tensor(3, 2, rng)};
  Param b{"b", random_tensor(2, 4, rng)};
  const auto build = [&](Graph& g) { return graph_sum(g, g.matmul(g.param(a), g.param(b))); };

  Graph g;
  GradientMap grads = g.backward(build(g));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(rel_err(grads.at(a)(r, c), fd_grad(build, a, r, c)) < 1e-6);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(rel_err(grads.at(b)(r, c), fd_grad(build, b, r, c)) < 1e-6);
}

TEST_CASE("elementwise ops and identities") {
  Graph g;
  Var a = g.constant(Tensor::from_rows({{1, 2}}));
  CHECK(max_abs_diff(g.value(g.add(a, g.constant(Tensor(1, 2, 0.0)))), g.value(a)) == 0.0);
  CHECK(max_abs(g.value(g.sub(a, a))) == 0.0);
  CHECK_THROWS_AS(g.add(a, g.constant(Tensor(3, 2))), DimensionError);
}

TEST_CASE("hadamard gradient matches central differences") {
  Rng rng(7);
  Param a{"a", random_tensor(4, 3, rng)};
  Param b{"b", random_tensor(4, 3, rng)};
  const auto build = [&](Graph& g) {
    return g.sum_squares(g.hadamard(g.param(a), g.param(b)));
  };
  Graph g;
  GradientMap grads = g.backward(build(g));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) {
      CHECK(rel_err(grads.at(a)(r, c), fd_grad(build, a, r, c)) < 1e-6);
      CHECK(rel_err(grads.at(b)(r, c), fd_grad(build, b, r, c)) < 1e-6);
    }
}

TEST_CASE("column broadcast adds bias across batch and sums adjoints") {
  Rng rng(3);
  Param w{"w", random_tensor(2, 5, rng)};
  Param bias{"b", random_tensor(2, 1, rng)};
  const auto build = [&](Graph& g) { return graph_sum(g, g.add(g.param(w), g.param(bias))); };
  Graph g;
  GradientMap grads = g.backward(build(g));
  // d(sum)/d(bias_i) accumulates one unit per batch column
  CHECK(grads.at(bias)(0, 0) == doctest::Approx(5.0));
  CHECK(grads.at(bias)(1, 0) == doctest::Approx(5.0));
  for (int r = 0; r < 2; ++r) CHECK(rel_err(grads.at(bias)(r, 0), fd_grad(build, bias, r, 0)) < 1e-6);
}

TEST_CASE("concat and slice round trip values and adjoints") {
  Graph g;
  Var one = g.constant(Tensor::from_rows({{1}}));
  Var two = g.constant(Tensor::from_rows({{2}}));
  Var both = g.concat_rows(std::vector<Var>{one, two});
  CHECK(max_abs_diff(g.value(both), Tensor::from_rows({{1}, {2}})) == 0.0);

  Var single = g.concat_rows(std::vector<Var>{one});
  CHECK(max_abs_diff(g.value(single), g.value(one)) == 0.0);

  Rng rng(11);
  Param t{"t", random_tensor(6, 2, rng)};
  // split then concat reproduces the tensor bitwise, and the adjoint of any
  // loss through the round trip equals the direct adjoint
  const auto direct = [&](Graph& gg) { return gg.sum_squares(gg.param(t)); };
  const auto routed = [&](Graph& gg) {
    Var v = gg.param(t);
    Var top = gg.slice_rows(v, 0, 2);
    Var rest = gg.slice_rows(v, 2, 4);
    return gg.sum_squares(gg.concat_rows(std::vector<Var>{top, rest}));
  };
  Graph g1, g2;
  Var l1 = direct(g1);
  Var l2 = routed(g2);
  CHECK(g1.value(l1).item() == g2.value(l2).item());
  GradientMap gm1 = g1.backward(l1);
  GradientMap gm2 = g2.backward(l2);
  CHECK(std::memcmp(gm1.at(t).data(), gm2.at(t).data(), sizeof(double) * 12) == 0);
}

TEST_CASE("slice examples and adjoint scatter") {
  Graph g;
  Var t = g.constant(Tensor::from_rows({{1}, {2}, {3}}));
  CHECK(max_abs_diff(g.value(g.slice_rows(t, 0, 1)), Tensor::from_rows({{1}})) == 0.0);
  CHECK(max_abs_diff(g.value(g.slice_rows(t, 0, 3)), g.value(t)) == 0.0);
  CHECK_THROWS_AS(g.slice_rows(t, 2, 2), IndexError);

  Param p{"p", Tensor::from_rows({{1}, {2}, {3}})};
  Graph g2;
  Var loss = graph_sum(g2, g2.slice_rows(g2.param(p), 1, 2));
  GradientMap grads = g2.backward(loss);
  CHECK(grads.at(p)(0, 0) == 0.0);
  CHECK(grads.at(p)(1, 0) == 1.0);
  CHECK(grads.at(p)(2, 0) == 1.0);
}

TEST_CASE("activation values") {
  Graph g;
  Var x = g.constant(Tensor::from_rows({{-1, 2}}));
  const Tensor& r = g.value(g.relu(x));
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 2.0);

  Var zero = g.constant(Tensor::scalar(0.0));
  CHECK(g.value(g.gelu(zero)).item() == 0.0);

  // high-precision oracle: exact gelu(x) = x * Phi(x) via erfc
  const double exact = 1.0 * 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
  CHECK(exact == doctest::Approx(0.841345).epsilon(1e-5));
  Var one = g.constant(Tensor::scalar(1.0));
  const double approx = g.value(g.gelu(one)).item();
  CHECK(std::fabs(approx - 0.84119) < 1e-4);
  CHECK(std::fabs(approx - exact) < 1e-3);

  Var s = g.sigmoid(g.constant(Tensor::scalar(0.0)));
  CHECK(g.value(s).item() == 0.5);

  Tensor bad(1, 1, std::nan(""));
  CHECK_THROWS_AS(g.relu(g.constant(bad)), ContractError);
}

TEST_CASE("reductions") {
  Graph g;
  CHECK(g.value(g.sum_squares(g.constant(Tensor::from_rows({{3, 4}})))).item() == 25.0);
  CHECK(g.value(g.mean(g.constant(Tensor(2, 2, 2.0)))).item() == 2.0);

  Param p{"p", Tensor::from_rows({{1, -2}})};
  Graph g2;
  GradientMap grads = g2.backward(g2.sum_squares(g2.param(p)));
  CHECK(grads.at(p)(0, 0) == 2.0);
  CHECK(grads.at(p)(0, 1) == -4.0);
}

TEST_CASE("backward contract") {
  Param w{"w", Tensor::scalar(1.0)};
  Graph g;
  GradientMap grads = g.backward(g.sum_squares(g.param(w)));
  CHECK(grads.at(w).item() == 2.0);

  // a registered parameter the loss never touches gets a zero gradient
  Param unused{"unused", Tensor(2, 3, 5.0)};
  Graph g2;
  Var loss = g2.sum_squares(g2.param(w));
  g2.param(unused);
  GradientMap grads2 = g2.backward(loss);
  CHECK(grads2.at(unused).same_shape(unused.value));
  CHECK(max_abs(grads2.at(unused)) == 0.0);

  Graph g3;
  Var vec = g3.param(w);
  Var mat = g3.concat_rows(std::vector<Var>{vec, vec});
  CHECK_THROWS_AS(g3.backward(mat), ContractError);
}

TEST_CASE("linear loss gives the exact coefficient") {
  Rng rng(5);
  Param w{"w", random_tensor(3, 2, rng)};
  Tensor coef = random_tensor(3, 2, rng);
  Graph g;
  Var loss = graph_sum(g, g.hadamard(g.param(w), g.constant(coef)));
  GradientMap grads = g.backward(loss);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) CHECK(std::fabs(grads.at(w)(r, c) - coef(r, c)) < 1e-12);
}

TEST_CASE("softmax rows sums to one and matches finite differences") {
  Rng rng(9);
  Param m{"m", random_tensor(3, 3, rng, -2.0, 2.0)};
  Graph g;
  Var s = g.softmax_rows(g.param(m));
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) acc += g.value(s)(r, c);
    CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor weights = random_tensor(3, 3, rng);
  const auto build = [&](Graph& gg) {
    return gg.sum_squares(gg.hadamard(gg.softmax_rows(gg.param(m)), gg.constant(weights)));
  };
  Graph g2;
  GradientMap grads = g2.backward(build(g2));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(rel_err(grads.at(m)(r, c), fd_grad(build, m, r, c)) < 1e-5);
}

TEST_CASE("every recorded op passes the finite-difference sweep") {
  Rng rng(123);
  Param a{"a", random_tensor(4, 3, rng)};
  Param b{"b", random_tensor(4, 3, rng)};
  Param w{"w", random_tensor(3, 4, rng)};
  Param bias{"bias", random_tensor(4, 1, rng)};
  std::vector<Param*> params{&a, &b, &w, &bias};

  const std::vector<std::pair<const char*, std::function<Var(Graph&)>>> cases{
      {"matmul", [&](Graph& g) { return g.sum_squares(g.matmul(g.param(w), g.param(a))); }},
      {"add", [&](Graph& g) { return g.sum_squares(g.add(g.param(a), g.param(b))); }},
      {"add_broadcast", [&](Graph& g) { return g.sum_squares(g.add(g.param(a), g.param(bias))); }},
      {"sub", [&](Graph& g) { return g.sum_squares(g.sub(g.param(a), g.param(b))); }},
      {"sub_broadcast", [&](Graph& g) { return g.sum_squares(g.sub(g.param(a), g.param(bias))); }},
      {"hadamard", [&](Graph& g) { return g.sum_squares(g.hadamard(g.param(a), g.param(b))); }},
      {"hadamard_broadcast",
       [&](Graph& g) { return g.sum_squares(g.hadamard(g.param(a), g.param(bias))); }},
      {"concat_slice",
       [&](Graph& g) {
         Var v = g.param(a);
         Var c = g.concat_rows(std::vector<Var>{g.slice_rows(v, 0, 2), g.slice_rows(v, 1, 3)});
         return g.sum_squares(c);
       }},
      {"relu", [&](Graph& g) { return g.sum_squares(g.relu(g.param(a))); }},
      {"gelu", [&](Graph& g) { return g.sum_squares(g.gelu(g.param(a))); }},
      {"sigmoid", [&](Graph& g) { return g.sum_squares(g.sigmoid(g.param(a))); }},
      {"softplus", [&](Graph& g) { return g.sum_squares(g.softplus(g.param(a))); }},
      {"softmax_rows", [&](Graph& g) { return g.sum_squares(g.softmax_rows(g.param(a))); }},
      {"affine", [&](Graph& g) { return g.sum_squares(g.affine(g.param(a), 2.5, -0.5)); }},
      {"mean", [&](Graph& g) { return g.mean(g.hadamard(g.param(a), g.param(a))); }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    GradCheckConfig cfg;
    cfg.tol = 1e-5;
    GradCheckReport rep = grad_check(build, params, cfg);
    CHECK_MESSAGE(rep.pass, name, ": max rel err ", rep.max_rel_error, " at ", rep.worst.param);
  }
}

TEST_CASE("graph evaluation is deterministic") {
  Rng rng(77);
  Param w{"w", random_tensor(8, 8, rng)};
  Param bias{"b", random_tensor(8, 1, rng)};
  Tensor x = random_tensor(8, 16, rng);
  const auto build = [&](Graph& g) {
    Var h = g.gelu(g.add(g.matmul(g.param(w), g.constant(x)), g.param(bias)));
    return g.sum_squares(h);
  };
  Graph g1, g2;
  Var l1 = build(g1), l2 = build(g2);
  const double a = g1.value(l1).item(), b = g2.value(l2).item();
  CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
  GradientMap m1 = g1.backward(l1), m2 = g2.backward(l2);
  CHECK(std::memcmp(m1.at(w).data(), m2.at(w).data(), sizeof(double) * 64) == 0);
}

TEST_CASE("adam fixed point and closed forms") {
  Param w{"w", Tensor::scalar(3.0)};
  std::vector<Param*> params{&w};

  SUBCASE("zero gradients leave parameters unchanged") {
    AdamOptimizer opt;
    for (int i = 0; i < 5; ++i) {
      Graph g;
      Var loss = g.mean(g.hadamard(g.param(w), g.constant(Tensor::scalar(0.0))));
      opt.step(params, g.backward(loss));
    }
    CHECK(w.value.item() == 3.0);
  }

  SUBCASE("first step with unit gradient moves by about -lr") {
    // m_hat = v_hat = 1 after bias correction, so the step is lr/(1+eps)
    w.value = Tensor::scalar(0.0);
    AdamOptimizer opt;
    Graph g;
    Var loss = g.mean(g.param(w));  // gradient exactly 1
    opt.step(params, g.backward(loss));
    CHECK(std::fabs(w.value.item() - (-0.001 / (1.0 + 1e-8))) < 1e-9);
    CHECK(std::fabs(w.value.item() + 0.001) < 1e-9);
  }

  SUBCASE("two steps with constant gradient match the hand-unrolled recurrence") {
    w.value = Tensor::scalar(1.0);
    AdamOptimizer opt;
    for (int i = 0; i < 2; ++i) {
      Graph g;
      Var loss = g.affine(g.mean(g.param(w)), 2.0, 0.0);  // gradient exactly 2
      opt.step(params, g.backward(loss));
    }
    // hand recurrence with g=2, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8
    double m = 0, v = 0, x = 1.0;
    for (int t = 1; t <= 2; ++t) {
      m = 0.9 * m + 0.1 * 2.0;
      v = 0.999 * v + 0.001 * 4.0;
      const double mh = m / (1 - std::pow(0.9, t));
      const double vh = v / (1 - std::pow(0.999, t));
      x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::fabs(w.value.item() - x) < 1e-12);
  }

  SUBCASE("shape mismatch is rejected") {
    AdamOptimizer opt;
    Param other{"other", Tensor(2, 2, 1.0)};
    Graph g;
    Var loss = g.sum_squares(g.param(other));
    GradientMap grads = g.backward(loss);
    std::vector<Param*> wrong{&w};
    CHECK_THROWS_AS(opt.step(wrong, grads), ContractError);
  }
}

TEST_CASE("grad_check behaviour") {
  Param w{"w", Tensor::scalar(3.0)};
  std::vector<Param*> params{&w};
  const auto quad = [&](Graph& g) { return g.sum_squares(g.param(w)); };

  GradCheckReport rep = grad_check(quad, params);
  CHECK(rep.pass);
  CHECK(rep.worst.analytic == doctest::Approx(6.0));
  CHECK(rep.worst.numeric == doctest::Approx(6.0).epsilon(1e-7));

  // zero tolerance cannot pass on a nonlinear function
  GradCheckConfig strict;
  strict.tol = 0.0;
  CHECK_FALSE(grad_check(quad, params, strict).pass);

  // non-deterministic closures are detected by double evaluation
  int calls = 0;
  const auto flaky = [&](Graph& g) {
    ++calls;
    return g.affine(g.sum_squares(g.param(w)), 1.0, calls * 0.1);
  };
  CHECK_THROWS_AS(grad_check(flaky, params), ContractError);
}

}  // TEST_SUITE
