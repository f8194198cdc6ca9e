// SPDX-License-Identifier: Apache-2.0
#include "sinflow/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace sinflow {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

double StandardNormal::logpdf_row(const double* x) const {
  double q = 0.0;
  for (std::size_t j = 0; j < dim; ++j) q += x[j] * x[j];
  return -0.5 * static_cast<double>(dim) * kLog2Pi - 0.5 * q;
}

Tensor StandardNormal::logpdf(const Tensor& x) const {
  Tensor out({x.extent(0)});
  for (std::size_t r = 0; r < x.extent(0); ++r) out[r] = logpdf_row(x.data() + r * dim);
  return out;
}

InversionStats ModelInversionStats::total() const {
  InversionStats t;
  for (const BlockStats& b : blocks) t.merge(b.total());
  return t;
}

std::size_t ModelInversionStats::fallbacks() const {
  std::size_t n = 0;
  for (const BlockStats& b : blocks) n += b.l_shift.fallbacks + b.u_shift.fallbacks;
  return n;
}

FlowModel FlowModel::build(const ModelConfig& config, std::uint64_t seed) {
  if (config.dim == 0 || config.blocks == 0 || config.d_scales == 0 ||
      config.embedding_dim == 0) {
    throw std::invalid_argument("FlowModel: dim, blocks, d_scales and embedding_dim must be >= 1");
  }
  FlowModel m;
  m.config_ = config;
  m.seed_ = seed;
  CounterRng rng(seed, stream_id(streams::kInit, 0));
  LduBlockConfig bc;
  bc.dim = config.dim;
  bc.d_scales = config.d_scales;
  bc.embed = config.embedding_dim;
  bc.hidden_sizes = config.hidden_sizes;
  bc.use_shifts = config.use_shifts;
  bc.d_kind = config.d_kind;
  bc.phase_init = config.phase_init;
  m.blocks_.reserve(config.blocks);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    m.blocks_.emplace_back(m.store_, "block" + std::to_string(b), bc, rng);
  }
  return m;
}

FlowModel FlowModel::clone() const {
  FlowModel copy = build(config_, seed_);
  copy.store_.set_values(store_.values());
  copy.standardizer = standardizer;
  return copy;
}

TapeFlow FlowModel::tape_forward_to_base(Tape& tape, Tape::Id x) const {
  const std::size_t batch = tape.value(x).extent(0);
  Tape::Id cur = x;
  Tape::Id logdet = tape.input(Tensor::zeros({batch}));
  for (const LduBlock& block : blocks_) {
    const TapeFlow step = block.tape_forward(tape, cur);
    cur = step.y;
    logdet = tape.add(logdet, step.logdet);
  }
  return {cur, logdet};
}

Tape::Id FlowModel::tape_log_prob(Tape& tape, const Tensor& x) const {
  if (x.rank() != 2 || x.extent(1) != config_.dim) {
    throw std::invalid_argument("log_prob: input " + shape_str(x.shape()) +
                                " does not match model dimension " + std::to_string(config_.dim));
  }
  const TapeFlow f = tape_forward_to_base(tape, tape.input(x));
  const Tape::Id q = tape.sum_last(tape.square(f.y));
  const Tape::Id base = tape.add_scalar(
      tape.mul_scalar(q, -0.5), -0.5 * static_cast<double>(config_.dim) * kLog2Pi);
  return tape.add(base, f.logdet);
}

RawFlow FlowModel::forward_to_base(const Tensor& x) const {
  if (x.rank() != 2 || x.extent(1) != config_.dim) {
    throw std::invalid_argument("forward_to_base: input " + shape_str(x.shape()) +
                                " does not match model dimension " + std::to_string(config_.dim));
  }
  RawFlow out;
  out.y = x;
  out.logdet = Tensor::zeros({x.extent(0)});
  for (const LduBlock& block : blocks_) {
    RawFlow step = block.raw_forward(out.y);
    out.y = std::move(step.y);
    for (std::size_t r = 0; r < out.logdet.size(); ++r) out.logdet[r] += step.logdet[r];
  }
  return out;
}

Tensor FlowModel::log_prob(const Tensor& x) const {
  const RawFlow f = forward_to_base(x);
  const StandardNormal base{config_.dim};
  Tensor lp = base.logpdf(f.y);
  for (std::size_t r = 0; r < lp.size(); ++r) lp[r] += f.logdet[r];
  return lp;
}

Tensor FlowModel::inverse_to_data(const Tensor& z, double tol, std::size_t max_iter,
                                  ModelInversionStats* stats) const {
  if (z.rank() != 2 || z.extent(1) != config_.dim) {
    throw std::invalid_argument("inverse_to_data: input " + shape_str(z.shape()) +
                                " does not match model dimension " + std::to_string(config_.dim));
  }
  if (stats && stats->blocks.size() != blocks_.size()) stats->blocks.resize(blocks_.size());
  Tensor cur = z;
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    cur = blocks_[b].raw_inverse(cur, tol, max_iter, stats ? &stats->blocks[b] : nullptr);
  }
  return cur;
}

Tensor FlowModel::sample_base(std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  Tensor z({n, config_.dim});
  for (std::size_t r = 0; r < n; ++r) {
    CounterRng rng(seed, stream_id(streams::kSample, r));
    for (std::size_t j = 0; j < config_.dim; ++j) z.at(r, j) = rng.normal();
  }
  return z;
}

Tensor FlowModel::sample(std::size_t n, std::uint64_t seed, double tol, std::size_t max_iter,
                         ModelInversionStats* stats) const {
  return inverse_to_data(sample_base(n, seed), tol, max_iter, stats);
}

ReconResult FlowModel::reconstruct(const Tensor& x, std::size_t max_iter, double tol,
                                   ModelInversionStats* stats) const {
  if (max_iter < 1) throw std::invalid_argument("reconstruct: max_iter must be >= 1");
  const RawFlow f = forward_to_base(x);
  ReconResult res;
  res.x_hat = inverse_to_data(f.y, tol, max_iter, stats);
  double acc = 0.0;
  for (std::size_t r = 0; r < x.extent(0); ++r) {
    double q = 0.0;
    for (std::size_t j = 0; j < config_.dim; ++j) {
      const double d = x.at(r, j) - res.x_hat.at(r, j);
      q += d * d;
    }
    acc += std::sqrt(q);
  }
  res.l2_error = acc / static_cast<double>(x.extent(0));
  return res;
}

double FlowModel::contraction_bound() const {
  double m = 0.0;
  for (const LduBlock& b : blocks_) m = std::max(m, b.contraction_bound());
  return m;
}

}  // namespace sinflow
