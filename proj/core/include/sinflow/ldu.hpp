// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "sinflow/dscale.hpp"
#include "sinflow/shift.hpp"

namespace sinflow {

/// Iteration bookkeeping for one family of inversions.
struct InversionStats {
  std::size_t calls = 0;
  std::size_t converged = 0;
  std::size_t fallbacks = 0;  // sequential rescues of a shift inversion
  std::size_t iterations = 0;
  std::size_t max_iterations = 0;
  std::vector<std::size_t> histogram;  // histogram[j] = calls finishing after j iterations

  void record(std::size_t iters, bool ok);
  void merge(const InversionStats& other);
  double mean_iterations() const;
  /// Fraction of calls that converged within `cap` iterations.
  double frac_converged_within(std::size_t cap) const;
};

struct BlockStats {
  InversionStats l_shift;
  InversionStats u_shift;
  InversionStats d_scale;

  InversionStats total() const;
};

struct LduBlockConfig {
  std::size_t dim = 2;
  std::size_t d_scales = 4;       // chain length S
  std::size_t embed = 4;          // K sinusoidals per transformer
  std::vector<std::size_t> hidden_sizes = {100};
  bool use_shifts = true;
  DLayerKind d_kind = DLayerKind::kSinusoidal;
  PhaseInit phase_init = PhaseInit::kZero;
};

/// One constituent transformation T^-1 = L . D . U: an upper shift, a chain of
/// diagonal transformers, then a lower shift. Only the chain contributes to
/// the log-determinant.
class LduBlock {
 public:
  LduBlock() = default;
  LduBlock(ParamStore& store, const std::string& prefix, const LduBlockConfig& config,
           CounterRng& rng);

  std::size_t dim() const { return dim_; }
  const std::vector<DLayer>& chain() const { return chain_; }
  bool has_shifts() const { return u_shift_.has_value(); }

  TapeFlow tape_forward(Tape& tape, Tape::Id z) const;
  RawFlow raw_forward(const Tensor& z) const;

  /// Inverts L, then the chain in reverse order, then U. Shift inversions fall
  /// back to the exact sequential pass when the fixed point does not settle.
  Tensor raw_inverse(const Tensor& y, double tol, std::size_t max_iter,
                     BlockStats* stats = nullptr) const;

  /// Largest residual Lipschitz bound across the chain (sinusoidal members).
  double contraction_bound() const;

 private:
  std::size_t dim_ = 0;
  std::optional<ShiftLayer> u_shift_;
  std::optional<ShiftLayer> l_shift_;
  std::vector<DLayer> chain_;
};

}  // namespace sinflow
