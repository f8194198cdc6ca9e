// SPDX-License-Identifier: Apache-2.0
#include "sinflow/rng.hpp"

#include <cmath>

namespace sinflow {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ (stream * 0xDA942042E4DD58B5ULL + 1))) {}

std::uint64_t CounterRng::next_u64() {
  counter_ += kGolden;
  return mix64(counter_ ^ key_);
}

double CounterRng::uniform() {
  // 53-bit mantissa, mapped to (0, 1] so log() stays finite.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t CounterRng::below(std::uint64_t n) { return n ? next_u64() % n : 0; }

void CounterRng::shuffle(std::vector<std::size_t>& idx) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t index) {
  return mix64(purpose * 0xD6E8FEB86659FD93ULL + index);
}

}  // namespace sinflow
