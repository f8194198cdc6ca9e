// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace sinflow {

/// Counter-based pseudo-random stream (SplitMix64 core).
///
/// A stream is addressed by (seed, stream id); draws within a stream advance a
/// counter, so any stream can be regenerated independently of all others. This
/// is what makes datasets, parameter init and sampling reproducible regardless
/// of batch partitioning.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform draw in (0, 1].
  double uniform();
  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (pairs cached).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& idx);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Well-mixed stream id from a purpose tag and an index.
std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t index);

}  // namespace sinflow
