// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sinflow/made.hpp"

namespace sinflow {

struct FixedPointResult {
  Tensor z;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Autoregressive shift y = z + c(z) with unitriangular Jacobian (lower for
/// forward ordering, upper for reverse); the log-determinant is identically 0.
class ShiftLayer {
 public:
  ShiftLayer() = default;
  ShiftLayer(ParamStore& store, const std::string& prefix, std::size_t dim,
             const std::vector<std::size_t>& hidden_sizes, Ordering ordering, CounterRng& rng);

  std::size_t dim() const { return cond_.dim(); }
  Ordering ordering() const { return cond_.ordering(); }
  const MaskedConditioner& conditioner() const { return cond_; }

  Tape::Id tape_forward(Tape& tape, Tape::Id z) const;
  Tensor raw_forward(const Tensor& z) const;

  /// Fixed-point attempt at inverting the shift. Shift conditioners carry no
  /// contraction guarantee, so the converged flag must be honoured.
  FixedPointResult inverse_fixed_point(const Tensor& y, double tol, std::size_t max_iter) const;
  /// Exact inversion in dim() conditioner passes, vectorised over the batch.
  Tensor inverse_sequential(const Tensor& y) const;

 private:
  MaskedConditioner cond_;
};

}  // namespace sinflow
