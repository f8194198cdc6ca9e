// SPDX-License-Identifier: Apache-2.0
#include "sinflow/ldu.hpp"

#include <stdexcept>

namespace sinflow {

void InversionStats::record(std::size_t iters, bool ok) {
  calls += 1;
  iterations += iters;
  max_iterations = std::max(max_iterations, iters);
  if (!ok) return;
  converged += 1;
  if (histogram.size() <= iters) histogram.resize(iters + 1, 0);
  histogram[iters] += 1;
}

void InversionStats::merge(const InversionStats& other) {
  calls += other.calls;
  converged += other.converged;
  fallbacks += other.fallbacks;
  iterations += other.iterations;
  max_iterations = std::max(max_iterations, other.max_iterations);
  if (histogram.size() < other.histogram.size()) histogram.resize(other.histogram.size(), 0);
  for (std::size_t i = 0; i < other.histogram.size(); ++i) histogram[i] += other.histogram[i];
}

double InversionStats::mean_iterations() const {
  return calls ? static_cast<double>(iterations) / static_cast<double>(calls) : 0.0;
}

double InversionStats::frac_converged_within(std::size_t cap) const {
  if (calls == 0) return 1.0;
  std::size_t ok = 0;
  const std::size_t top = std::min(cap + 1, histogram.size());
  for (std::size_t i = 0; i < top; ++i) ok += histogram[i];
  return static_cast<double>(ok) / static_cast<double>(calls);
}

InversionStats BlockStats::total() const {
  InversionStats t = l_shift;
  t.merge(u_shift);
  t.merge(d_scale);
  return t;
}

LduBlock::LduBlock(ParamStore& store, const std::string& prefix, const LduBlockConfig& config,
                   CounterRng& rng)
    : dim_(config.dim) {
  if (config.dim == 0) throw std::invalid_argument("LduBlock: dim must be >= 1");
  if (config.d_scales == 0) throw std::invalid_argument("LduBlock: chain needs >= 1 transformer");
  if (config.use_shifts) {
    u_shift_.emplace(store, prefix + ".u", config.dim, config.hidden_sizes, Ordering::kReverse,
                     rng);
  }
  for (std::size_t s = 0; s < config.d_scales; ++s) {
    const std::string dp = prefix + ".d" + std::to_string(s);
    if (config.d_kind == DLayerKind::kSinusoidal) {
      chain_.emplace_back(
          SinusoidalLayer(store, dp, config.dim, config.embed, config.phase_init, rng));
    } else {
      chain_.emplace_back(AffineLayer(store, dp, config.dim));
    }
  }
  if (config.use_shifts) {
    l_shift_.emplace(store, prefix + ".l", config.dim, config.hidden_sizes, Ordering::kForward,
                     rng);
  }
}

TapeFlow LduBlock::tape_forward(Tape& tape, Tape::Id z) const {
  const std::size_t batch = tape.value(z).extent(0);
  Tape::Id cur = z;
  if (u_shift_) cur = u_shift_->tape_forward(tape, cur);
  Tape::Id logdet = tape.input(Tensor::zeros({batch}));
  for (const DLayer& layer : chain_) {
    const TapeFlow step = d_layer_tape_forward(layer, tape, cur);
    cur = step.y;
    logdet = tape.add(logdet, step.logdet);
  }
  if (l_shift_) cur = l_shift_->tape_forward(tape, cur);
  return {cur, logdet};
}

RawFlow LduBlock::raw_forward(const Tensor& z) const {
  RawFlow out;
  out.y = u_shift_ ? u_shift_->raw_forward(z) : z;
  out.logdet = Tensor::zeros({z.extent(0)});
  for (const DLayer& layer : chain_) {
    RawFlow step = d_layer_raw_forward(layer, out.y);
    out.y = std::move(step.y);
    for (std::size_t r = 0; r < out.logdet.size(); ++r) out.logdet[r] += step.logdet[r];
  }
  if (l_shift_) out.y = l_shift_->raw_forward(out.y);
  return out;
}

namespace {

Tensor invert_shift(const ShiftLayer& shift, const Tensor& y, double tol, std::size_t max_iter,
                    InversionStats* stats) {
  FixedPointResult fp = shift.inverse_fixed_point(y, tol, max_iter);
  if (stats) stats->record(fp.iterations, fp.converged);
  if (fp.converged) return std::move(fp.z);
  if (stats) stats->fallbacks += 1;
  return shift.inverse_sequential(y);
}

}  // namespace

Tensor LduBlock::raw_inverse(const Tensor& y, double tol, std::size_t max_iter,
                             BlockStats* stats) const {
  Tensor z = y;
  if (l_shift_) {
    z = invert_shift(*l_shift_, z, tol, max_iter, stats ? &stats->l_shift : nullptr);
  }
  for (auto it = chain_.rbegin(); it != chain_.rend(); ++it) {
    InverseResult inv = d_layer_raw_inverse(*it, z, tol, max_iter);
    if (stats) stats->d_scale.record(inv.iterations, inv.converged);
    z = std::move(inv.z);
  }
  if (u_shift_) {
    z = invert_shift(*u_shift_, z, tol, max_iter, stats ? &stats->u_shift : nullptr);
  }
  return z;
}

double LduBlock::contraction_bound() const {
  double m = 0.0;
  for (const DLayer& layer : chain_) {
    if (const auto* sin_layer = std::get_if<SinusoidalLayer>(&layer)) {
      m = std::max(m, sin_layer->contraction_bound());
    }
  }
  return m;
}

}  // namespace sinflow
