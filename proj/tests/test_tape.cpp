// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "sinflow/errors.hpp"
#include "sinflow/tape.hpp"
#include "support/oracles.hpp"

using namespace sinflow;

TEST_SUITE_BEGIN("tape");

TEST_CASE("forward values of basic ops") {
  Tape t;
  const Tape::Id half_pi = t.input(Tensor::scalar(M_PI / 2.0));
  CHECK(evaluate(t, t.sin(half_pi))[0] == doctest::Approx(1.0).epsilon(1e-15));

  // x + tanh(0) * sin(x) at x = 1
  const Tape::Id x = t.input(Tensor::scalar(1.0));
  const Tape::Id zero = t.input(Tensor::scalar(0.0));
  const Tape::Id y = t.add(x, t.mul(t.tanh(zero), t.sin(x)));
  CHECK(evaluate(t, y)[0] == 1.0);

  const Tape::Id a = t.input(Tensor({2, 2}, {1, 2, 3, 4}));
  const Tape::Id b = t.input(Tensor({2, 1}, {1, 1}));
  const Tensor& c = evaluate(t, t.matmul(a, b));
  CHECK(c.shape() == std::vector<std::size_t>{2, 1});
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
}

TEST_CASE("shape and domain errors carry op names and shapes") {
  Tape t;
  const Tape::Id a = t.input(Tensor({2, 3}));
  const Tape::Id b = t.input(Tensor({3, 2}));
  CHECK_THROWS_WITH_AS(t.add(a, b), "add: shape mismatch [2,3] vs [3,2]", std::invalid_argument);
  CHECK_THROWS_WITH_AS(t.matmul(a, a), "matmul: inner dimensions disagree, [2,3] vs [2,3]",
                       std::invalid_argument);
  CHECK_THROWS_AS(t.log(t.input(Tensor::scalar(-0.5))), std::domain_error);
  CHECK_THROWS_AS(t.log(t.input(Tensor::scalar(0.0))), std::domain_error);
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);  // non-scalar loss
}

TEST_CASE("evaluate is deterministic") {
  CounterRng rng(7, 0);
  Tensor x({4, 3});
  oracles::fill_normal(x, rng);

  const auto run = [&]() {
    Tape t;
    const Tape::Id xi = t.input(x);
    const Tape::Id y = t.softmax_last(t.tanh(t.mul_scalar(xi, 1.7)));
    return t.value(t.sum(t.mul(y, t.exp(t.neg(xi)))));
  };
  const Tensor r1 = run();
  const Tensor r2 = run();
  CHECK(std::memcmp(r1.data(), r2.data(), sizeof(double) * r1.size()) == 0);
}

namespace {

// Gradient property harness: loss = sum(graph(params)); analytic vs central
// differences within 1e-6 relative error (spec tolerance for every op).
void check_gradients(const std::function<Tape::Id(Tape&, ParamStore&)>& graph, ParamStore& store,
                     double tolerance = 1e-6) {
  const double err = grad_check(
      [&](Tape& t) -> Tape::Id { return graph(t, store); }, store, 1e-5);
  CHECK(err < tolerance);
}

}  // namespace

TEST_CASE("per-op gradients match central finite differences") {
  CounterRng rng(11, 0);

  SUBCASE("elementwise binary ops") {
    ParamStore s;
    Parameter& a = s.add("a", Tensor({2, 3}));
    Parameter& b = s.add("b", Tensor({2, 3}));
    oracles::fill_normal(a.value, rng);
    oracles::fill_uniform(b.value, rng, 0.5, 2.0);  // keep div well-conditioned
    check_gradients([&](Tape& t, ParamStore&) {
      const Tape::Id ai = t.param(a);
      const Tape::Id bi = t.param(b);
      Tape::Id acc = t.add(ai, bi);
      acc = t.add(acc, t.sub(ai, bi));
      acc = t.add(acc, t.mul(ai, bi));
      acc = t.add(acc, t.div(ai, bi));
      return t.sum(acc);
    }, s);
  }

  SUBCASE("unary ops") {
    ParamStore s;
    Parameter& a = s.add("a", Tensor({3, 2}));
    oracles::fill_uniform(a.value, rng, 0.2, 1.8);  // positive domain for log
    check_gradients([&](Tape& t, ParamStore&) {
      const Tape::Id ai = t.param(a);
      Tape::Id acc = t.sin(ai);
      acc = t.add(acc, t.cos(ai));
      acc = t.add(acc, t.tanh(ai));
      acc = t.add(acc, t.exp(t.neg(ai)));
      acc = t.add(acc, t.log(ai));
      acc = t.add(acc, t.softplus(ai));
      acc = t.add(acc, t.square(ai));
      acc = t.add(acc, t.mul_scalar(t.add_scalar(ai, 0.3), -1.25));
      return t.mean(acc);
    }, s);
  }

  SUBCASE("matmul") {
    ParamStore s;
    Parameter& a = s.add("a", Tensor({3, 4}));
    Parameter& b = s.add("b", Tensor({4, 2}));
    oracles::fill_normal(a.value, rng);
    oracles::fill_normal(b.value, rng);
    check_gradients([&](Tape& t, ParamStore&) {
      return t.sum(t.square(t.matmul(t.param(a), t.param(b))));
    }, s);
  }

  SUBCASE("softmax over the last axis") {
    ParamStore s;
    Parameter& a = s.add("a", Tensor({3, 4}));
    Tensor probe({3, 4});
    oracles::fill_normal(a.value, rng);
    oracles::fill_normal(probe, rng);
    check_gradients([&](Tape& t, ParamStore&) {
      return t.sum(t.mul(t.softmax_last(t.param(a)), t.input(probe)));
    }, s);
  }

  SUBCASE("reductions and broadcasts") {
    ParamStore s;
    Parameter& x = s.add("x", Tensor({2, 3, 4}));
    Parameter& row = s.add("row", Tensor({3, 4}));
    Parameter& base = s.add("base", Tensor({2, 3}));
    oracles::fill_normal(x.value, rng);
    oracles::fill_normal(row.value, rng);
    oracles::fill_normal(base.value, rng);
    check_gradients([&](Tape& t, ParamStore&) {
      const Tape::Id bc = t.broadcast_mul(t.broadcast_add(t.param(x), t.param(row)), t.param(row));
      const Tape::Id reduced = t.sum_last(bc);                      // [2,3]
      const Tape::Id expanded = t.expand_last(t.param(base), 4);    // [2,3,4]
      return t.add(t.sum(t.sum_last(expanded)), t.mean(reduced));
    }, s);
  }

  SUBCASE("mask multiply and concat") {
    ParamStore s;
    Parameter& a = s.add("a", Tensor({2, 3}));
    Parameter& b = s.add("b", Tensor({2, 2}));
    oracles::fill_normal(a.value, rng);
    oracles::fill_normal(b.value, rng);
    const Tensor mask({2, 3}, {1, 0, 1, 0, 1, 0});
    check_gradients([&](Tape& t, ParamStore&) {
      const Tape::Id joined = t.concat_last(t.mask_mul(t.param(a), mask), t.param(b));
      return t.sum(t.square(joined));
    }, s);
  }
}

TEST_CASE("backward is additive across calls until zeroed") {
  ParamStore s;
  Parameter& w = s.add("w", Tensor({3}, {1.0, -2.0, 0.5}));

  const auto run_backward = [&]() {
    Tape t;
    t.backward(t.sum(t.square(t.param(w))));
  };
  s.zero_grads();
  run_backward();
  const Tensor once = w.grad;
  run_backward();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad[i] == 2.0 * once[i]);
  s.zero_grads();
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(w.grad[i] == 0.0);
    CHECK(w.value[i] != 0.0);  // zeroing must not touch values
  }
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  CounterRng rng(3, 0);
  ParamStore s;
  Parameter& w = s.add("w", Tensor({4}));
  oracles::fill_normal(w.value, rng);

  s.zero_grads();
  {
    Tape t;
    const Tape::Id wi = t.param(w);
    t.backward(t.add(t.sum(t.square(wi)), t.sum(t.sin(wi))));
  }
  const Tensor combined = w.grad;

  s.zero_grads();
  {
    Tape t;
    t.backward(t.sum(t.square(t.param(w))));
  }
  {
    Tape t;
    t.backward(t.sum(t.sin(t.param(w))));
  }
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(combined[i] == doctest::Approx(w.grad[i]).epsilon(1e-12));
  }
}

TEST_CASE("simple derivative anchors") {
  // d sin(z)/dz at z = 0 is cos(0) = 1
  ParamStore s;
  Parameter& z = s.add("z", Tensor::scalar(0.0));
  {
    Tape t;
    t.backward(t.sin(t.param(z)));
  }
  CHECK(z.grad[0] == 1.0);

  // loss = sum x_i^2, x = [1,2,3] -> grad [2,4,6]
  Parameter& x = s.add("x", Tensor({3}, {1, 2, 3}));
  {
    Tape t;
    t.backward(t.sum(t.square(t.param(x))));
  }
  CHECK(x.grad[0] == 2.0);
  CHECK(x.grad[1] == 4.0);
  CHECK(x.grad[2] == 6.0);
}

TEST_CASE("grad_check on f(w) = w^2 and on an injected wrong gradient") {
  ParamStore s;
  Parameter& w = s.add("w", Tensor::scalar(3.0));
  const auto loss = [&](Tape& t) -> Tape::Id { return t.square(t.param(w)); };

  CHECK(grad_check(loss, s, 1e-5) < 1e-8);

  // doubling the analytic gradient must read as a 0.5 relative error
  std::vector<Tensor> doubled = {Tensor::scalar(12.0)};  // true gradient is 6
  CHECK(grad_check_against(loss, s, doubled, 1e-5) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("grad_check propagates non-finite losses") {
  ParamStore s;
  Parameter& w = s.add("w", Tensor::scalar(800.0));
  const auto loss = [&](Tape& t) -> Tape::Id { return t.exp(t.param(w)); };  // overflows
  CHECK_THROWS_AS(grad_check(loss, s, 1e-5), NumericError);
}

TEST_SUITE_END();
