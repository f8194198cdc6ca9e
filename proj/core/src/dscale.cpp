// SPDX-License-Identifier: Apache-2.0
#include "sinflow/dscale.hpp"

#include <cmath>
#include <stdexcept>

namespace sinflow {

double softplus_inverse(double y) {
  if (y <= 0.0) throw std::invalid_argument("softplus_inverse: argument must be > 0");
  if (y > 30.0) return y;  // expm1 indistinguishable from exp at this scale
  return std::log(std::expm1(y));
}

SinusoidalLayer::SinusoidalLayer(ParamStore& store, const std::string& prefix, std::size_t dim,
                                 std::size_t embed, PhaseInit phase, CounterRng& rng)
    : dim_(dim), embed_(embed) {
  if (dim == 0 || embed == 0) {
    throw std::invalid_argument("SinusoidalLayer: dim and embed must be >= 1");
  }
  Tensor a0 = Tensor::full({dim, embed}, softplus_inverse(1.0));
  Tensor b0({dim, embed});
  Tensor d0({dim});
  if (phase == PhaseInit::kRandom) {
    // Distinct phases and log-spaced frequencies break the gradient symmetry
    // between the K sinusoidals and give the stack staircase periods at
    // several scales; the shift below keeps the layer an exact identity.
    for (double& v : b0.vec()) v = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
    for (double& v : a0.vec()) {
      v = softplus_inverse(std::exp(rng.uniform(std::log(0.5), std::log(12.0))));
    }
  }
  a_raw_ = &store.add(prefix + ".a_raw", std::move(a0));
  b_ = &store.add(prefix + ".b", std::move(b0));
  w_raw_ = &store.add(prefix + ".w_raw", Tensor({dim, embed}));
  alpha_raw_ = &store.add(prefix + ".alpha_raw", Tensor({dim}));
  if (phase == PhaseInit::kRandom) {
    // Compensating shift d = -sum_k (w/2a) sin(2b), built with the same tape
    // ops as tape_forward so the cancellation at initialisation is exact.
    Tape t;
    const Tape::Id a = t.add_scalar(t.softplus(t.param(*a_raw_)), kMinCoefficient);
    const Tape::Id w = t.softmax_last(t.param(*w_raw_));
    const Tape::Id coef = t.div(w, t.mul_scalar(a, 2.0));
    const Tape::Id cterm = t.sum_last(t.mul(coef, t.sin(t.mul_scalar(t.param(*b_), 2.0))));
    const Tensor& ct = t.value(cterm);
    for (std::size_t i = 0; i < dim; ++i) d0[i] = -ct[i];
  }
  d_ = &store.add(prefix + ".d", std::move(d0));
}

ConstrainedIds SinusoidalLayer::constrain(Tape& tape) const {
  ConstrainedIds ids;
  ids.a = tape.add_scalar(tape.softplus(tape.param(*a_raw_)), kMinCoefficient);
  ids.b = tape.param(*b_);
  ids.w = tape.softmax_last(tape.param(*w_raw_));
  ids.alpha = tape.mul_scalar(tape.tanh(tape.param(*alpha_raw_)), kAlphaScale);
  ids.d = tape.param(*d_);
  return ids;
}

ConstrainedValues SinusoidalLayer::constrained_values() const {
  // Route through a scratch tape so raw and differentiable paths share one
  // definition of the constraints.
  Tape t;
  const ConstrainedIds ids = constrain(t);
  ConstrainedValues cv;
  cv.a = t.value(ids.a);
  cv.b = t.value(ids.b);
  cv.w = t.value(ids.w);
  cv.alpha = t.value(ids.alpha);
  cv.d = t.value(ids.d);
  return cv;
}

void SinusoidalLayer::set_from_constrained(const ConstrainedValues& cv) {
  if (!cv.a.same_shape(a_raw_->value) || !cv.w.same_shape(w_raw_->value) ||
      !cv.alpha.same_shape(alpha_raw_->value)) {
    throw std::invalid_argument("SinusoidalLayer: constrained value shapes do not match layer");
  }
  for (std::size_t i = 0; i < cv.a.size(); ++i) {
    a_raw_->value[i] = softplus_inverse(cv.a[i] - kMinCoefficient);
  }
  b_->value = cv.b;
  for (std::size_t i = 0; i < cv.w.size(); ++i) {
    if (cv.w[i] <= 0.0) throw std::invalid_argument("SinusoidalLayer: weights must be positive");
    w_raw_->value[i] = std::log(cv.w[i]);
  }
  for (std::size_t i = 0; i < cv.alpha.size(); ++i) {
    if (std::abs(cv.alpha[i]) >= kAlphaScale) {
      throw std::invalid_argument("SinusoidalLayer: |alpha| must be < 1");
    }
    alpha_raw_->value[i] = std::atanh(cv.alpha[i] / kAlphaScale);
  }
  d_->value = cv.d;
}

TapeFlow SinusoidalLayer::tape_forward(Tape& t, Tape::Id z) const {
  const ConstrainedIds c = constrain(t);
  const Tape::Id a2 = t.mul_scalar(c.a, 2.0);
  const Tape::Id b2 = t.mul_scalar(c.b, 2.0);
  const Tape::Id coef = t.div(c.w, a2);                        // w / 2a
  const Tape::Id arg = t.broadcast_add(t.broadcast_mul(t.expand_last(z, embed_), a2), b2);
  const Tape::Id sterm = t.sum_last(t.broadcast_mul(t.sin(arg), coef));
  const Tape::Id cterm = t.sum_last(t.mul(coef, t.sin(b2)));   // [dim]
  const Tape::Id shift = t.add(cterm, c.d);
  TapeFlow out;
  out.y = t.broadcast_add(t.sub(z, t.broadcast_mul(sterm, c.alpha)), shift);
  const Tape::Id wcos = t.sum_last(t.broadcast_mul(t.cos(arg), c.w));
  const Tape::Id one_plus = t.add_scalar(t.neg(t.broadcast_mul(wcos, c.alpha)), 1.0);
  out.logdet = t.sum_last(t.log(one_plus));
  return out;
}

namespace {

void check_batch(const Tensor& z, std::size_t dim, const char* what) {
  if (z.rank() != 2 || z.extent(1) != dim) {
    throw std::invalid_argument(std::string(what) + ": input " + shape_str(z.shape()) +
                                " does not match layer dimension " + std::to_string(dim));
  }
}

}  // namespace

RawFlow SinusoidalLayer::raw_forward(const Tensor& z) const {
  check_batch(z, dim_, "sinusoidal_forward");
  const ConstrainedValues cv = constrained_values();
  const std::size_t batch = z.extent(0);
  RawFlow out;
  out.y = Tensor({batch, dim_});
  out.logdet = Tensor({batch});
  for (std::size_t r = 0; r < batch; ++r) {
    double ld = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double zi = z.at(r, i);
      const double alpha = cv.alpha[i];
      double sterm = 0.0, cterm = 0.0, wcos = 0.0;
      for (std::size_t k = 0; k < embed_; ++k) {
        const double a2 = 2.0 * cv.a.at(i, k);
        const double b2 = 2.0 * cv.b.at(i, k);
        const double coef = cv.w.at(i, k) / a2;
        const double arg = zi * a2 + b2;
        sterm += std::sin(arg) * coef;
        cterm += coef * std::sin(b2);
        wcos += std::cos(arg) * cv.w.at(i, k);
      }
      out.y.at(r, i) = (zi - sterm * alpha) + (cterm + cv.d[i]);
      ld += std::log(-(wcos * alpha) + 1.0);
    }
    out.logdet[r] = ld;
  }
  return out;
}

Tensor SinusoidalLayer::raw_derivative(const Tensor& z) const {
  check_batch(z, dim_, "sinusoidal_derivative");
  const ConstrainedValues cv = constrained_values();
  Tensor out(z.shape());
  for (std::size_t r = 0; r < z.extent(0); ++r) {
    for (std::size_t i = 0; i < dim_; ++i) {
      const double zi = z.at(r, i);
      double wcos = 0.0;
      for (std::size_t k = 0; k < embed_; ++k) {
        wcos += std::cos(zi * (2.0 * cv.a.at(i, k)) + 2.0 * cv.b.at(i, k)) * cv.w.at(i, k);
      }
      out.at(r, i) = -(wcos * cv.alpha[i]) + 1.0;
    }
  }
  return out;
}

InverseResult SinusoidalLayer::raw_inverse(const Tensor& y, double tol,
                                           std::size_t max_iter) const {
  return raw_inverse_from(y, y, tol, max_iter);
}

InverseResult SinusoidalLayer::raw_inverse_from(const Tensor& y, const Tensor& start, double tol,
                                                std::size_t max_iter) const {
  check_batch(y, dim_, "sinusoidal_inverse");
  if (tol <= 0.0) throw std::invalid_argument("sinusoidal_inverse: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("sinusoidal_inverse: max_iter must be >= 1");
  if (!start.same_shape(y)) {
    throw std::invalid_argument("sinusoidal_inverse: starting point shape mismatch");
  }

  const ConstrainedValues cv = constrained_values();
  const std::size_t batch = y.extent(0);

  InverseResult res;
  res.z = start;
  Tensor next(y.shape());
  for (std::size_t j = 0; j < max_iter; ++j) {
    double diff = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t i = 0; i < dim_; ++i) {
        const double zi = res.z.at(r, i);
        double sterm = 0.0, cterm = 0.0;
        for (std::size_t k = 0; k < embed_; ++k) {
          const double a2 = 2.0 * cv.a.at(i, k);
          const double b2 = 2.0 * cv.b.at(i, k);
          const double coef = cv.w.at(i, k) / a2;
          sterm += std::sin(zi * a2 + b2) * coef;
          cterm += coef * std::sin(b2);
        }
        const double g = -(sterm * cv.alpha[i]) + (cterm + cv.d[i]);
        const double zn = y.at(r, i) - g;
        diff = std::max(diff, std::abs(zn - zi));
        next.at(r, i) = zn;
      }
    }
    std::swap(res.z, next);
    res.iterations = j + 1;
    if (diff < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double SinusoidalLayer::contraction_bound() const {
  double m = 0.0;
  for (double v : alpha_raw_->value.vec()) m = std::max(m, std::abs(std::tanh(v)) * kAlphaScale);
  return m;
}

AffineLayer::AffineLayer(ParamStore& store, const std::string& prefix, std::size_t dim)
    : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("AffineLayer: dim must be >= 1");
  log_scale_ = &store.add(prefix + ".log_scale", Tensor({dim}));
  shift_ = &store.add(prefix + ".shift", Tensor({dim}));
}

TapeFlow AffineLayer::tape_forward(Tape& t, Tape::Id z) const {
  check_batch(t.value(z), dim_, "affine_forward");
  const std::size_t batch = t.value(z).extent(0);  // node storage moves as ops append
  const Tape::Id ls = t.param(*log_scale_);
  TapeFlow out;
  out.y = t.broadcast_add(t.broadcast_mul(z, t.exp(ls)), t.param(*shift_));
  out.logdet = t.broadcast_add(t.input(Tensor::zeros({batch})), t.sum(ls));
  return out;
}

RawFlow AffineLayer::raw_forward(const Tensor& z) const {
  check_batch(z, dim_, "affine_forward");
  const std::size_t batch = z.extent(0);
  double ld = 0.0;
  for (double v : log_scale_->value.vec()) ld += v;
  RawFlow out;
  out.y = Tensor(z.shape());
  out.logdet = Tensor::full({batch}, ld);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t i = 0; i < dim_; ++i) {
      out.y.at(r, i) = z.at(r, i) * std::exp(log_scale_->value[i]) + shift_->value[i];
    }
  }
  return out;
}

Tensor AffineLayer::raw_derivative(const Tensor& z) const {
  check_batch(z, dim_, "affine_derivative");
  Tensor out(z.shape());
  for (std::size_t r = 0; r < z.extent(0); ++r) {
    for (std::size_t i = 0; i < dim_; ++i) out.at(r, i) = std::exp(log_scale_->value[i]);
  }
  return out;
}

InverseResult AffineLayer::raw_inverse(const Tensor& y, double tol, std::size_t max_iter) const {
  check_batch(y, dim_, "affine_inverse");
  if (tol <= 0.0 || max_iter < 1) {
    throw std::invalid_argument("affine_inverse: tol must be > 0 and max_iter >= 1");
  }
  InverseResult res;
  res.z = Tensor(y.shape());
  for (std::size_t r = 0; r < y.extent(0); ++r) {
    for (std::size_t i = 0; i < dim_; ++i) {
      res.z.at(r, i) = (y.at(r, i) - shift_->value[i]) / std::exp(log_scale_->value[i]);
    }
  }
  res.iterations = 1;
  res.converged = true;
  return res;
}

TapeFlow d_layer_tape_forward(const DLayer& layer, Tape& tape, Tape::Id z) {
  return std::visit([&](const auto& l) { return l.tape_forward(tape, z); }, layer);
}

RawFlow d_layer_raw_forward(const DLayer& layer, const Tensor& z) {
  return std::visit([&](const auto& l) { return l.raw_forward(z); }, layer);
}

InverseResult d_layer_raw_inverse(const DLayer& layer, const Tensor& y, double tol,
                                  std::size_t max_iter) {
  return std::visit([&](const auto& l) { return l.raw_inverse(y, tol, max_iter); }, layer);
}

}  // namespace sinflow
