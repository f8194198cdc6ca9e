// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sinflow/tensor.hpp"

namespace sinflow {

/// Per-column affine normalisation fitted on training data, using the
/// population (divide-by-n) standard deviation. apply() then invert() is the
/// identity to machine precision; the Jacobian correction is constant.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> stddev);

  /// Fits on an [n x d] sample matrix; rejects constant columns by index.
  static Standardizer fit(const Tensor& data);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }

  Tensor apply(const Tensor& raw) const;
  Tensor invert(const Tensor& standardized) const;

  /// Sum of log sigma_j: NLL_raw = NLL_standardized + log_sigma_sum().
  double log_sigma_sum() const;

  /// Identity transform of the given width.
  static Standardizer identity(std::size_t dim);

 private:
  void check(const Tensor& x) const;

  std::vector<double> mean_;
  std::vector<double> stddev_;
};

}  // namespace sinflow
