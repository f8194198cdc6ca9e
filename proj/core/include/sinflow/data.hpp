// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sinflow/standardize.hpp"
#include "sinflow/tensor.hpp"

namespace sinflow {

/// Sample matrix with an optional exact log-density (synthetic sources only).
struct Dataset {
  Tensor samples;  // [n x d]
  std::function<double(const double*, std::size_t)> logpdf;  // null when unknown
  std::string provenance;

  std::size_t size() const { return samples.rank() == 2 ? samples.extent(0) : 0; }
  std::size_t dim() const { return samples.rank() == 2 ? samples.extent(1) : 0; }
};

/// Uniform 1D Gaussian mixture with shared spread.
struct MixtureSpec {
  std::vector<double> means = {-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0};
  double stddev = 0.5;

  double logpdf(double x) const;  // stable log-sum-exp
};

enum class ToyName { kCheckerboard, kRings, kTwoMoons, kEightGaussians, kTwoSpirals };

ToyName toy_name_from_string(const std::string& name);
std::string to_string(ToyName name);

// Construction constants; the acceptance checks rely on the same geometry the
// generators use.
namespace toy {
inline constexpr double kRingInnerRadius = 1.0;
inline constexpr double kRingOuterRadius = 2.5;
inline constexpr double kRingSigma = 0.08;      // radial noise, truncated at 3 sigma
inline constexpr double kCheckerHalfWidth = 4.0;  // cells tile [-4,4]^2, 2x2 each
inline constexpr double kMoonSigma = 0.1;
inline constexpr double kEightGaussRadius = 2.0;
inline constexpr double kEightGaussSigma = 0.2;
inline constexpr double kSpiralSigma = 0.1;

bool checkerboard_cell_is_black(int ci, int cj);
bool in_checkerboard_support(double x, double y);
bool in_rings_support(double x, double y, double margin_sigmas = 3.0);
}  // namespace toy

Dataset gen_toy2d(ToyName name, std::size_t n, std::uint64_t seed);
Dataset gen_toy2d(const std::string& name, std::size_t n, std::uint64_t seed);

Dataset gen_mixture1d(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// Comma-separated doubles, '.' decimal, optional single header row, LF or
/// CRLF. Malformed cells are reported with line and column numbers.
Dataset load_csv(const std::string& path, bool has_header);

struct DataSplits {
  Dataset train, val, test;
};

/// Seed-deterministic permutation split; floor sizes with the remainder going
/// to train. Empty resulting splits are rejected.
DataSplits split(const Dataset& data, double train_frac, double val_frac, double test_frac,
                 std::uint64_t seed);

/// Fits on the training split and standardizes it in one step.
std::pair<Standardizer, Dataset> standardize_fit_apply(const Dataset& train);

}  // namespace sinflow
