// SPDX-License-Identifier: Apache-2.0
#include "sinflow/shift.hpp"

#include <cmath>
#include <stdexcept>

namespace sinflow {

ShiftLayer::ShiftLayer(ParamStore& store, const std::string& prefix, std::size_t dim,
                       const std::vector<std::size_t>& hidden_sizes, Ordering ordering,
                       CounterRng& rng)
    : cond_(store, prefix, dim, hidden_sizes, ordering, rng) {}

Tape::Id ShiftLayer::tape_forward(Tape& tape, Tape::Id z) const {
  return tape.add(z, cond_.forward(tape, z));
}

Tensor ShiftLayer::raw_forward(const Tensor& z) const {
  Tensor shifts = cond_.forward_raw(z);
  Tensor y = z;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += shifts[i];
  return y;
}

FixedPointResult ShiftLayer::inverse_fixed_point(const Tensor& y, double tol,
                                                 std::size_t max_iter) const {
  if (tol <= 0.0) throw std::invalid_argument("shift_inverse_fixed_point: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("shift_inverse_fixed_point: max_iter must be >= 1");

  FixedPointResult res;
  res.z = y;
  for (std::size_t j = 0; j < max_iter; ++j) {
    const Tensor shifts = cond_.forward_raw(res.z);
    double diff = 0.0;
    for (std::size_t i = 0; i < res.z.size(); ++i) {
      const double zn = y[i] - shifts[i];
      diff = std::max(diff, std::abs(zn - res.z[i]));
      res.z[i] = zn;
    }
    res.iterations = j + 1;
    if (diff < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Tensor ShiftLayer::inverse_sequential(const Tensor& y) const {
  const std::size_t dim = cond_.dim();
  const std::size_t batch = y.extent(0);
  Tensor z = y;
  // Column i of the conditioner output only reads already-recovered columns,
  // so dim passes settle every component exactly.
  for (std::size_t pass = 0; pass < dim; ++pass) {
    const std::size_t i = ordering() == Ordering::kForward ? pass : dim - 1 - pass;
    const Tensor shifts = cond_.forward_raw(z);
    for (std::size_t r = 0; r < batch; ++r) {
      z.at(r, i) = y.at(r, i) - shifts.at(r, i);
    }
  }
  return z;
}

}  // namespace sinflow
