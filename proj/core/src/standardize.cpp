// SPDX-License-Identifier: Apache-2.0
#include "sinflow/standardize.hpp"

#include <cmath>
#include <string>

#include "sinflow/errors.hpp"

namespace sinflow {

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) {
    throw DataError("standardizer: mean/std width mismatch");
  }
  for (std::size_t j = 0; j < stddev_.size(); ++j) {
    if (!(stddev_[j] > 0.0)) {
      throw DataError("standardizer: non-positive std in column " + std::to_string(j));
    }
  }
}

Standardizer Standardizer::fit(const Tensor& data) {
  if (data.rank() != 2 || data.extent(0) < 2) {
    throw DataError("standardizer: need an [n x d] matrix with n >= 2, got " +
                    shape_str(data.shape()));
  }
  const std::size_t n = data.extent(0), d = data.extent(1);
  std::vector<double> mean(d, 0.0), stddev(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += data.at(r, j);
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data.at(r, j) - mean[j];
      stddev[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    stddev[j] = std::sqrt(stddev[j] / static_cast<double>(n));
    if (!(stddev[j] > 0.0)) {
      throw DataError("standardizer: column " + std::to_string(j) + " is constant");
    }
  }
  return Standardizer(std::move(mean), std::move(stddev));
}

void Standardizer::check(const Tensor& x) const {
  if (x.rank() != 2 || x.extent(1) != dim()) {
    throw DataError("standardizer: input " + shape_str(x.shape()) + " does not match width " +
                    std::to_string(dim()));
  }
}

Tensor Standardizer::apply(const Tensor& raw) const {
  check(raw);
  Tensor out = raw;
  for (std::size_t r = 0; r < out.extent(0); ++r) {
    for (std::size_t j = 0; j < dim(); ++j) {
      out.at(r, j) = (out.at(r, j) - mean_[j]) / stddev_[j];
    }
  }
  return out;
}

Tensor Standardizer::invert(const Tensor& standardized) const {
  check(standardized);
  Tensor out = standardized;
  for (std::size_t r = 0; r < out.extent(0); ++r) {
    for (std::size_t j = 0; j < dim(); ++j) {
      out.at(r, j) = out.at(r, j) * stddev_[j] + mean_[j];
    }
  }
  return out;
}

double Standardizer::log_sigma_sum() const {
  double s = 0.0;
  for (double v : stddev_) s += std::log(v);
  return s;
}

Standardizer Standardizer::identity(std::size_t dim) {
  return Standardizer(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
}

}  // namespace sinflow
