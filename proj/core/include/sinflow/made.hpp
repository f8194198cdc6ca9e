// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "sinflow/rng.hpp"
#include "sinflow/tape.hpp"
#include "sinflow/tensor.hpp"

namespace sinflow {

enum class Ordering : std::uint8_t {
  kForward,  // output i depends on inputs j < i
  kReverse,  // output i depends on inputs j > i
};

/// Per-layer 0/1 connectivity masks in MADE style. Masks are [in x out] so
/// they apply directly to weight matrices used as matmul right operands.
struct MaskSet {
  std::vector<Tensor> masks;
  Ordering ordering = Ordering::kForward;
};

/// Deterministic MADE masks: inputs get degrees 1..D, hidden unit h gets
/// degree 1 + (h mod (D-1)) when D > 1, and the output layer applies the
/// strict inequality so output i never sees input i.
MaskSet build_made_masks(std::size_t dim, const std::vector<std::size_t>& hidden_sizes,
                         Ordering ordering);

/// Boolean end-to-end connectivity implied by a mask set (output of the
/// product of the masks); entry (j, i) is true when output i can see input j.
Tensor mask_connectivity(const MaskSet& set);

/// Masked feed-forward conditioner producing one shift per input component.
/// Hidden activations are tanh; the final layer starts at zero so the shift is
/// identically zero at initialisation.
class MaskedConditioner {
 public:
  MaskedConditioner() = default;
  /// Registers weights/biases under `prefix` in the store.
  MaskedConditioner(ParamStore& store, const std::string& prefix, std::size_t dim,
                    const std::vector<std::size_t>& hidden_sizes, Ordering ordering,
                    CounterRng& rng);

  std::size_t dim() const { return dim_; }
  Ordering ordering() const { return mask_set_.ordering; }

  /// Differentiable shifts for a [batch x dim] input.
  Tape::Id forward(Tape& tape, Tape::Id z) const;
  /// Same map without the tape, for inversion loops.
  Tensor forward_raw(const Tensor& z) const;

 private:
  void check_width(const Tensor& z) const;

  std::size_t dim_ = 0;
  MaskSet mask_set_;
  std::vector<Parameter*> weights_;
  std::vector<Parameter*> biases_;
};

}  // namespace sinflow
