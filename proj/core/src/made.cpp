// SPDX-License-Identifier: Apache-2.0
#include "sinflow/made.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sinflow {
namespace {

// Input/output degrees under the given ordering. Reverse ordering mirrors the
// assignment so the strict output rule yields upper-triangular connectivity.
std::vector<std::size_t> io_degrees(std::size_t dim, Ordering ordering) {
  std::vector<std::size_t> deg(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    deg[j] = ordering == Ordering::kForward ? j + 1 : dim - j;
  }
  return deg;
}

std::vector<std::size_t> hidden_degrees(std::size_t dim, std::size_t width) {
  std::vector<std::size_t> deg(width);
  for (std::size_t h = 0; h < width; ++h) {
    deg[h] = dim > 1 ? 1 + (h % (dim - 1)) : 1;
  }
  return deg;
}

Tensor mask_from_degrees(const std::vector<std::size_t>& in_deg,
                         const std::vector<std::size_t>& out_deg, bool strict) {
  Tensor m({in_deg.size(), out_deg.size()});
  for (std::size_t i = 0; i < in_deg.size(); ++i) {
    for (std::size_t o = 0; o < out_deg.size(); ++o) {
      const bool connected = strict ? out_deg[o] > in_deg[i] : out_deg[o] >= in_deg[i];
      m.at(i, o) = connected ? 1.0 : 0.0;
    }
  }
  return m;
}

}  // namespace

MaskSet build_made_masks(std::size_t dim, const std::vector<std::size_t>& hidden_sizes,
                         Ordering ordering) {
  if (dim == 0) throw std::invalid_argument("build_made_masks: dimension must be >= 1");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw std::invalid_argument("build_made_masks: hidden sizes must be >= 1");
  }

  MaskSet set;
  set.ordering = ordering;
  const std::vector<std::size_t> io = io_degrees(dim, ordering);
  std::vector<std::size_t> prev = io;
  for (std::size_t w : hidden_sizes) {
    std::vector<std::size_t> cur = hidden_degrees(dim, w);
    set.masks.push_back(mask_from_degrees(prev, cur, /*strict=*/false));
    prev = std::move(cur);
  }
  set.masks.push_back(mask_from_degrees(prev, io, /*strict=*/true));
  return set;
}

Tensor mask_connectivity(const MaskSet& set) {
  Tensor acc = set.masks.front();
  for (std::size_t l = 1; l < set.masks.size(); ++l) {
    const Tensor& m = set.masks[l];
    Tensor next({acc.extent(0), m.extent(1)});
    for (std::size_t i = 0; i < acc.extent(0); ++i) {
      for (std::size_t o = 0; o < m.extent(1); ++o) {
        double any = 0.0;
        for (std::size_t h = 0; h < m.extent(0); ++h) {
          if (acc.at(i, h) != 0.0 && m.at(h, o) != 0.0) {
            any = 1.0;
            break;
          }
        }
        next.at(i, o) = any;
      }
    }
    acc = std::move(next);
  }
  return acc;
}

MaskedConditioner::MaskedConditioner(ParamStore& store, const std::string& prefix,
                                     std::size_t dim,
                                     const std::vector<std::size_t>& hidden_sizes,
                                     Ordering ordering, CounterRng& rng)
    : dim_(dim), mask_set_(build_made_masks(dim, hidden_sizes, ordering)) {
  const std::size_t layers = mask_set_.masks.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = mask_set_.masks[l].extent(0);
    const std::size_t fan_out = mask_set_.masks[l].extent(1);
    Tensor w({fan_in, fan_out});
    if (l + 1 < layers) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : w.vec()) v = rng.uniform(-bound, bound);
    }
    // last layer stays zero: identity shift at initialisation
    weights_.push_back(&store.add(prefix + ".w" + std::to_string(l), std::move(w)));
    biases_.push_back(&store.add(prefix + ".b" + std::to_string(l), Tensor({fan_out})));
  }
}

void MaskedConditioner::check_width(const Tensor& z) const {
  if (z.rank() != 2 || z.extent(1) != dim_) {
    throw std::invalid_argument("masked_forward: input " + shape_str(z.shape()) +
                                " does not match conditioner width " + std::to_string(dim_));
  }
}

Tape::Id MaskedConditioner::forward(Tape& tape, Tape::Id z) const {
  check_width(tape.value(z));
  Tape::Id h = z;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Tape::Id w = tape.mask_mul(tape.param(*weights_[l]), mask_set_.masks[l]);
    h = tape.broadcast_add(tape.matmul(h, w), tape.param(*biases_[l]));
    if (l + 1 < weights_.size()) h = tape.tanh(h);
  }
  return h;
}

Tensor MaskedConditioner::forward_raw(const Tensor& z) const {
  check_width(z);
  Tensor h = z;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Tensor& w = weights_[l]->value;
    const Tensor& m = mask_set_.masks[l];
    const Tensor& b = biases_[l]->value;
    const std::size_t rows = h.extent(0), in = w.extent(0), out = w.extent(1);
    Tensor next({rows, out});
    for (std::size_t r = 0; r < rows; ++r) {
      double* orow = next.data() + r * out;
      for (std::size_t j = 0; j < out; ++j) orow[j] = b[j];
      const double* irow = h.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double hv = irow[i];
        if (hv == 0.0) continue;
        const double* wrow = w.data() + i * out;
        const double* mrow = m.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) orow[j] += hv * wrow[j] * mrow[j];
      }
    }
    if (l + 1 < weights_.size()) {
      for (double& v : next.vec()) v = std::tanh(v);
    }
    h = std::move(next);
  }
  return h;
}

}  // namespace sinflow
