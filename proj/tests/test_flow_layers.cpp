// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "sinflow/ldu.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace sinflow;

TEST_SUITE_BEGIN("flow_layers");

TEST_CASE("sinusoidal forward anchors") {
  SUBCASE("identity when alpha, b and d are zero") {
    auto f = builders::make_layer_constrained(2, 3, 1.3, 0.0, 1.0 / 3.0, 0.0, 0.0);
    Tensor z({4, 2});
    CounterRng rng(1, 0);
    oracles::fill_normal(z, rng, 2.0);
    const RawFlow out = f.layer->raw_forward(z);
    CHECK(oracles::max_abs_diff(out.y, z) == 0.0);
    for (double v : out.logdet.vec()) CHECK(v == 0.0);
  }

  SUBCASE("sin(pi) kills the oscillatory term even at alpha near 1") {
    auto f = builders::make_layer_constrained(1, 1, 1.0, 0.0, 1.0, 0.999, 0.0);
    Tensor z({1, 1});
    z[0] = M_PI / 2.0;
    const RawFlow out = f.layer->raw_forward(z);
    CHECK(std::abs(out.y[0] - M_PI / 2.0) < 1e-15);
  }

  SUBCASE("alpha = 0.5 at z = pi/4, against trapezoid quadrature of the integrand") {
    auto f = builders::make_layer_constrained(1, 1, 1.0, 0.0, 1.0, 0.5, 0.0);
    Tensor z({1, 1});
    z[0] = M_PI / 4.0;
    const RawFlow out = f.layer->raw_forward(z);
    CHECK(out.y[0] == doctest::Approx(M_PI / 4.0 - 0.25).epsilon(1e-12));

    // integral of sum_k w_k [1 - alpha cos(2(a t + b))] from 0 to z
    const double oracle = oracles::trapezoid(
        [](double t) { return 1.0 - 0.5 * std::cos(2.0 * t); }, 0.0, M_PI / 4.0, 1000000);
    CHECK(out.y[0] == doctest::Approx(oracle).epsilon(1e-10));
  }

  SUBCASE("log-determinant at z = 0 is log(1/2), matching a derivative oracle") {
    auto f = builders::make_layer_constrained(1, 1, 1.0, 0.0, 1.0, 0.5, 0.0);
    Tensor z({1, 1});
    z[0] = 0.0;
    const RawFlow out = f.layer->raw_forward(z);
    CHECK(out.logdet[0] == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    const double fd = oracles::central_difference(
        [&](double v) {
          Tensor p({1, 1});
          p[0] = v;
          return f.layer->raw_forward(p).y[0];
        },
        0.0, 1e-6);
    CHECK(std::exp(out.logdet[0]) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("sinusoidal derivative") {
  SUBCASE("all ones at alpha = 0") {
    auto f = builders::make_layer_constrained(3, 2, 0.9, 0.4, 0.5, 0.0, 0.1);
    Tensor z({2, 3});
    CounterRng rng(2, 0);
    oracles::fill_normal(z, rng);
    const Tensor d = f.layer->raw_derivative(z);
    for (double v : d.vec()) CHECK(v == 1.0);
  }

  SUBCASE("cos(0) anchor") {
    auto f = builders::make_layer_constrained(1, 1, 1.0, 0.0, 1.0, 0.5, 0.0);
    Tensor z({1, 1});
    z[0] = 0.0;
    CHECK(f.layer->raw_derivative(z)[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("random parameters match finite differences and stay in (0, 2)") {
    auto f = builders::make_layer(2, 4, 17, /*randomize=*/true);
    CounterRng rng(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor z({1, 2});
      oracles::fill_normal(z, rng, 2.0);
      const Tensor d = f.layer->raw_derivative(z);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(d.at(0, i) > 0.0);
        CHECK(d.at(0, i) < 2.0);
        const double fd = oracles::central_difference(
            [&](double v) {
              Tensor p = z;
              p.at(0, i) = v;
              return f.layer->raw_forward(p).y.at(0, i);
            },
            z.at(0, i), 1e-6);
        CHECK(std::abs(d.at(0, i) - fd) < 1e-8);
      }
    }
  }
}

TEST_CASE("sinusoidal forward is strictly increasing per dimension") {
  auto f = builders::make_layer(1, 4, 23, /*randomize=*/true);
  CounterRng rng(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    double u = rng.normal() * 3.0;
    double v = rng.normal() * 3.0;
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    Tensor zu({1, 1}), zv({1, 1});
    zu[0] = u;
    zv[0] = v;
    CHECK(f.layer->raw_forward(zu).y[0] < f.layer->raw_forward(zv).y[0]);
  }
}

TEST_CASE("vector contraction bound on the residual") {
  auto f = builders::make_layer(4, 3, 29, /*randomize=*/true);
  const double max_alpha = f.layer->contraction_bound();
  CHECK(max_alpha < 1.0);
  CounterRng rng(7, 0);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor u({1, 4}), v({1, 4});
    oracles::fill_normal(u, rng, 3.0);
    oracles::fill_normal(v, rng, 3.0);
    const Tensor gu = f.layer->raw_forward(u).y;
    const Tensor gv = f.layer->raw_forward(v).y;
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      // g(z) = forward(z) - z
      lhs += std::abs((gu[i] - u[i]) - (gv[i] - v[i]));
      rhs += std::abs(u[i] - v[i]);
    }
    CHECK(lhs <= max_alpha * rhs + 1e-12);
  }
}

TEST_CASE("sinusoidal fixed-point inversion") {
  SUBCASE("identity parameters invert in one check") {
    auto f = builders::make_layer_constrained(2, 2, 1.0, 0.0, 0.5, 0.0, 0.0);
    Tensor y({3, 2});
    CounterRng rng(11, 0);
    oracles::fill_normal(y, rng, 2.0);
    const InverseResult res = f.layer->raw_inverse(y, 1e-12, 50);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(oracles::max_abs_diff(res.z, y) == 0.0);
  }

  SUBCASE("inverse of 0 is 0 for the odd layer") {
    auto f = builders::make_layer_constrained(1, 1, 1.0, 0.0, 1.0, 0.5, 0.0);
    Tensor y({1, 1});
    y[0] = 0.0;
    const InverseResult res = f.layer->raw_inverse(y, 1e-13, 100);
    CHECK(res.converged);
    CHECK(std::abs(res.z[0]) < 1e-13);
  }

  SUBCASE("round trip recovers random inputs") {
    auto f = builders::make_layer(3, 4, 31, /*randomize=*/true);
    Tensor z({20, 3});
    CounterRng rng(13, 0);
    oracles::fill_normal(z, rng, 2.5);
    const RawFlow fwd = f.layer->raw_forward(z);
    const InverseResult res = f.layer->raw_inverse(fwd.y, 1e-12, 200);
    CHECK(res.converged);
    CHECK(oracles::max_abs_diff(res.z, z) < 1e-10);
  }

  SUBCASE("error sequence contracts at rate max alpha") {
    auto f = builders::make_layer(2, 3, 37, /*randomize=*/true);
    const double rate = f.layer->contraction_bound();
    Tensor z({8, 2});
    CounterRng rng(17, 0);
    oracles::fill_normal(z, rng, 2.0);
    const Tensor y = f.layer->raw_forward(z).y;
    const Tensor z_star = f.layer->raw_inverse(y, 1e-15, 400).z;

    // z_j for increasing caps replays the same deterministic iteration
    double prev_err = -1.0;
    for (std::size_t j = 1; j <= 25; ++j) {
      const Tensor zj = f.layer->raw_inverse(y, 1e-300, j).z;
      const double err = oracles::max_abs_diff(zj, z_star);
      if (prev_err >= 0.0 && prev_err > 1e-12) {
        CHECK(err <= rate * prev_err + 1e-12);
      }
      prev_err = err;
    }
  }

  SUBCASE("convergence is independent of the starting point") {
    auto f = builders::make_layer(2, 4, 41, /*randomize=*/true);
    Tensor y({5, 2});
    CounterRng rng(19, 0);
    oracles::fill_normal(y, rng, 2.0);
    const Tensor from_y = f.layer->raw_inverse_from(y, y, 1e-12, 500).z;
    Tensor zeros(y.shape());
    const Tensor from_zero = f.layer->raw_inverse_from(y, zeros, 1e-12, 500).z;
    Tensor shifted = y;
    for (double& v : shifted.vec()) v += 10.0;
    const Tensor from_far = f.layer->raw_inverse_from(y, shifted, 1e-12, 500).z;
    CHECK(oracles::max_abs_diff(from_y, from_zero) < 1e-8);
    CHECK(oracles::max_abs_diff(from_y, from_far) < 1e-8);
  }

  SUBCASE("contract violations are rejected") {
    auto f = builders::make_layer(1, 1);
    const Tensor y({1, 1});
    CHECK_THROWS_AS(f.layer->raw_inverse(y, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(f.layer->raw_inverse(y, 1e-6, 0), std::invalid_argument);
  }
}

TEST_CASE("tape and raw sinusoidal paths agree") {
  auto f = builders::make_layer(3, 4, 43, /*randomize=*/true);
  Tensor z({6, 3});
  CounterRng rng(23, 0);
  oracles::fill_normal(z, rng, 1.5);
  Tape t;
  const TapeFlow tf = f.layer->tape_forward(t, t.input(z));
  const RawFlow rf = f.layer->raw_forward(z);
  CHECK(oracles::max_abs_diff(t.value(tf.y), rf.y) < 1e-14);
  CHECK(oracles::max_abs_diff(t.value(tf.logdet), rf.logdet) < 1e-13);
}

TEST_CASE("sinusoidal layer gradients pass grad_check") {
  auto f = builders::make_layer(2, 3, 47, /*randomize=*/true);
  Tensor z({5, 2});
  CounterRng rng(29, 0);
  oracles::fill_normal(z, rng);
  const double err = grad_check(
      [&](Tape& t) {
        const TapeFlow out = f.layer->tape_forward(t, t.input(z));
        return t.add(t.mean(t.square(out.y)), t.mean(out.logdet));
      },
      f.store, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("affine layer") {
  ParamStore store;
  AffineLayer layer(store, "a", 2);

  SUBCASE("identity at initialisation") {
    Tensor z({3, 2});
    CounterRng rng(31, 0);
    oracles::fill_normal(z, rng);
    const RawFlow out = layer.raw_forward(z);
    CHECK(oracles::max_abs_diff(out.y, z) == 0.0);
    for (double v : out.logdet.vec()) CHECK(v == 0.0);
  }

  SUBCASE("scale and shift with exact log-determinant and inverse") {
    store.at("a.log_scale").value = Tensor({2}, {std::log(2.0), std::log(0.5)});
    store.at("a.shift").value = Tensor({2}, {1.0, -3.0});
    Tensor z({1, 2}, {2.0, 4.0});
    const RawFlow out = layer.raw_forward(z);
    CHECK(out.y.at(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(out.y.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(out.logdet[0] == doctest::Approx(0.0).epsilon(1e-15));  // log 2 + log 0.5

    const InverseResult inv = layer.raw_inverse(out.y, 1e-12, 10);
    CHECK(inv.converged);
    CHECK(oracles::max_abs_diff(inv.z, z) < 1e-14);

    Tape t;
    const TapeFlow tf = layer.tape_forward(t, t.input(z));
    CHECK(oracles::max_abs_diff(t.value(tf.y), out.y) == 0.0);
    CHECK(oracles::max_abs_diff(t.value(tf.logdet), out.logdet) < 1e-15);
  }
}

TEST_CASE("shift layer forward and Jacobians") {
  CounterRng rng(37, 0);

  SUBCASE("zero-initialised conditioner is the identity") {
    ParamStore store;
    const ShiftLayer shift(store, "l", 3, {8}, Ordering::kForward, rng);
    Tensor z({4, 3});
    oracles::fill_normal(z, rng);
    CHECK(oracles::max_abs_diff(shift.raw_forward(z), z) == 0.0);
  }

  SUBCASE("first component of an L shift moves by an input-independent constant") {
    ParamStore store;
    const ShiftLayer shift(store, "l", 3, {8}, Ordering::kForward, rng);
    builders::randomize_store(store, 53);
    Tensor z({5, 3});
    oracles::fill_normal(z, rng, 2.0);
    const Tensor y = shift.raw_forward(z);
    const double delta = y.at(0, 0) - z.at(0, 0);
    for (std::size_t r = 1; r < 5; ++r) {
      CHECK(y.at(r, 0) - z.at(r, 0) == doctest::Approx(delta).epsilon(1e-15));
    }
  }

  SUBCASE("finite-difference Jacobians are unit triangular, D=4") {
    for (const Ordering ord : {Ordering::kForward, Ordering::kReverse}) {
      ParamStore store;
      const ShiftLayer shift(store, "s", 4, {10}, ord, rng);
      builders::randomize_store(store, 59 + static_cast<int>(ord));
      Tensor z({1, 4});
      oracles::fill_normal(z, rng);
      const Tensor jac = oracles::fd_jacobian(
          [&](const Tensor& x) { return shift.raw_forward(x); }, z, 1e-5);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          if (i == j) {
            CHECK(std::abs(jac.at(i, j) - 1.0) < 1e-8);
          } else if ((ord == Ordering::kForward && j > i) ||
                     (ord == Ordering::kReverse && j < i)) {
            CHECK(std::abs(jac.at(i, j)) < 1e-8);
          }
        }
      }
    }
  }
}

TEST_CASE("shift inversion") {
  CounterRng rng(61, 0);

  SUBCASE("zero conditioner inverts immediately") {
    ParamStore store;
    const ShiftLayer shift(store, "l", 3, {8}, Ordering::kForward, rng);
    Tensor y({4, 3});
    oracles::fill_normal(y, rng);
    const FixedPointResult res = shift.inverse_fixed_point(y, 1e-10, 100);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(oracles::max_abs_diff(res.z, y) == 0.0);
  }

  SUBCASE("sequential inversion is exact: D=1 constant and D=5 random") {
    {
      ParamStore store;
      const ShiftLayer shift(store, "l", 1, {6}, Ordering::kForward, rng);
      builders::randomize_store(store, 67);
      Tensor y({3, 1});
      oracles::fill_normal(y, rng);
      const Tensor z = shift.inverse_sequential(y);
      // with D=1 the shift is a constant, z = y - c
      CHECK(oracles::max_abs_diff(shift.raw_forward(z), y) < 1e-15);
    }
    for (const Ordering ord : {Ordering::kForward, Ordering::kReverse}) {
      ParamStore store;
      const ShiftLayer shift(store, "s", 5, {12}, ord, rng);
      builders::randomize_store(store, 71 + static_cast<int>(ord));
      Tensor y({10, 5});
      oracles::fill_normal(y, rng, 2.0);
      const Tensor z = shift.inverse_sequential(y);
      CHECK(oracles::max_abs_diff(shift.raw_forward(z), y) < 1e-12);
    }
  }

  SUBCASE("fixed point converges for mild conditioners") {
    ParamStore store;
    const ShiftLayer shift(store, "l", 4, {10}, Ordering::kForward, rng);
    builders::randomize_store(store, 73, 0.4);
    Tensor z({6, 4});
    oracles::fill_normal(z, rng);
    const Tensor y = shift.raw_forward(z);
    const FixedPointResult res = shift.inverse_fixed_point(y, 1e-10, 100);
    CHECK(res.converged);
    CHECK(oracles::max_abs_diff(res.z, z) < 1e-9);
  }

  SUBCASE("adversarial conditioner: fixed point flags failure, sequential rescues") {
    ParamStore store;
    const ShiftLayer shift(store, "l", 6, {16}, Ordering::kForward, rng);
    builders::randomize_store(store, 79, 30.0);  // Lipschitz far above 1
    Tensor z({4, 6});
    oracles::fill_normal(z, rng);
    const Tensor y = shift.raw_forward(z);
    // too few iterations for the D-pass settling argument to finish
    const FixedPointResult res = shift.inverse_fixed_point(y, 1e-10, 3);
    CHECK_FALSE(res.converged);
    const Tensor z_seq = shift.inverse_sequential(y);
    CHECK(oracles::max_abs_diff(shift.raw_forward(z_seq), y) < 1e-9);
  }
}

TEST_CASE("ldu block") {
  SUBCASE("identity at initialisation") {
    LduBlockConfig cfg;
    cfg.dim = 3;
    cfg.d_scales = 2;
    cfg.embed = 4;
    cfg.hidden_sizes = {16};
    auto f = builders::make_block(cfg, 83);
    Tensor z({5, 3});
    CounterRng rng(43, 0);
    oracles::fill_normal(z, rng);
    const RawFlow out = f.block->raw_forward(z);
    CHECK(oracles::max_abs_diff(out.y, z) == 0.0);
    for (double v : out.logdet.vec()) CHECK(v == 0.0);
    CHECK(oracles::max_abs_diff(f.block->raw_inverse(z, 1e-10, 50), z) == 0.0);
  }

  SUBCASE("a shift-free block equals the chained transformers") {
    LduBlockConfig cfg;
    cfg.dim = 2;
    cfg.d_scales = 3;
    cfg.embed = 2;
    cfg.use_shifts = false;
    auto f = builders::make_block(cfg, 89, 0.7);
    Tensor z({4, 2});
    CounterRng rng(47, 0);
    oracles::fill_normal(z, rng);

    Tensor manual = z;
    Tensor manual_logdet({4});
    for (const DLayer& layer : f.block->chain()) {
      RawFlow step = d_layer_raw_forward(layer, manual);
      manual = std::move(step.y);
      for (std::size_t r = 0; r < 4; ++r) manual_logdet[r] += step.logdet[r];
    }
    const RawFlow out = f.block->raw_forward(z);
    CHECK(oracles::max_abs_diff(out.y, manual) == 0.0);
    CHECK(oracles::max_abs_diff(out.logdet, manual_logdet) == 0.0);

    // inverse equals chaining the member inversions in reverse
    Tensor back = out.y;
    for (auto it = f.block->chain().rbegin(); it != f.block->chain().rend(); ++it) {
      back = d_layer_raw_inverse(*it, back, 1e-12, 200).z;
    }
    CHECK(oracles::max_abs_diff(back, f.block->raw_inverse(out.y, 1e-12, 200)) == 0.0);
  }

  SUBCASE("exp(logdet) matches a dense finite-difference Jacobian determinant") {
    LduBlockConfig cfg;
    cfg.dim = 3;
    cfg.d_scales = 2;
    cfg.embed = 3;
    cfg.hidden_sizes = {10};
    auto f = builders::make_block(cfg, 97, 0.6);
    CounterRng rng(53, 0);
    for (int trial = 0; trial < 5; ++trial) {
      Tensor z({1, 3});
      oracles::fill_normal(z, rng);
      const RawFlow out = f.block->raw_forward(z);
      const Tensor jac = oracles::fd_jacobian(
          [&](const Tensor& x) { return f.block->raw_forward(x).y; }, z, 1e-5);
      const double det = std::abs(oracles::det_lu(jac));
      CHECK(std::exp(out.logdet[0]) == doctest::Approx(det).epsilon(1e-5));
    }
  }

  SUBCASE("round trip through a full random block") {
    LduBlockConfig cfg;
    cfg.dim = 3;
    cfg.d_scales = 2;
    cfg.embed = 3;
    cfg.hidden_sizes = {12};
    auto f = builders::make_block(cfg, 101, 0.5);
    Tensor z({16, 3});
    CounterRng rng(59, 0);
    oracles::fill_normal(z, rng);
    const RawFlow out = f.block->raw_forward(z);
    BlockStats stats;
    const Tensor back = f.block->raw_inverse(out.y, 1e-10, 200, &stats);
    CHECK(oracles::max_abs_diff(back, z) < 1e-8);
    CHECK(stats.d_scale.calls == 2);
    CHECK(stats.d_scale.converged == 2);
  }

  SUBCASE("tape and raw block forward agree") {
    LduBlockConfig cfg;
    cfg.dim = 2;
    cfg.d_scales = 2;
    cfg.embed = 3;
    cfg.hidden_sizes = {8};
    auto f = builders::make_block(cfg, 103, 0.6);
    Tensor z({7, 2});
    CounterRng rng(61, 0);
    oracles::fill_normal(z, rng);
    Tape t;
    const TapeFlow tf = f.block->tape_forward(t, t.input(z));
    const RawFlow rf = f.block->raw_forward(z);
    CHECK(oracles::max_abs_diff(t.value(tf.y), rf.y) < 1e-13);
    CHECK(oracles::max_abs_diff(t.value(tf.logdet), rf.logdet) < 1e-12);
  }
}

TEST_SUITE_END();
