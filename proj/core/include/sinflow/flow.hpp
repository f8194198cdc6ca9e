// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "sinflow/ldu.hpp"
#include "sinflow/standardize.hpp"

namespace sinflow {

namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kSample = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kSplit = 5;
}  // namespace streams

struct ModelConfig {
  std::size_t dim = 2;
  std::size_t blocks = 16;
  std::size_t d_scales = 4;
  std::size_t embedding_dim = 4;
  std::vector<std::size_t> hidden_sizes = {100};
  bool use_shifts = true;
  DLayerKind d_kind = DLayerKind::kSinusoidal;
  PhaseInit phase_init = PhaseInit::kRandom;
};

/// N(0, I) base density.
struct StandardNormal {
  std::size_t dim = 0;
  double logpdf_row(const double* x) const;
  Tensor logpdf(const Tensor& x) const;  // [batch x dim] -> [batch]
};

struct ModelInversionStats {
  std::vector<BlockStats> blocks;
  InversionStats total() const;
  std::size_t fallbacks() const;
};

struct ReconResult {
  Tensor x_hat;
  double l2_error = 0.0;
};

/// Full flow T^-1 = T_L^-1 o ... o T_1^-1 over LDU blocks, with a standard
/// normal base. Works in standardized coordinates; the fitted standardizer is
/// carried along for raw-coordinate reporting.
class FlowModel {
 public:
  FlowModel() = default;
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;
  FlowModel(FlowModel&&) = default;
  FlowModel& operator=(FlowModel&&) = default;

  static FlowModel build(const ModelConfig& config, std::uint64_t seed);
  FlowModel clone() const;

  const ModelConfig& config() const { return config_; }
  std::uint64_t init_seed() const { return seed_; }
  std::size_t dim() const { return config_.dim; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const std::vector<LduBlock>& blocks() const { return blocks_; }

  std::optional<Standardizer> standardizer;

  // Differentiable path (training).
  TapeFlow tape_forward_to_base(Tape& tape, Tape::Id x) const;
  Tape::Id tape_log_prob(Tape& tape, const Tensor& x) const;

  // Raw path (evaluation, inversion, sampling).
  RawFlow forward_to_base(const Tensor& x) const;
  Tensor log_prob(const Tensor& x) const;
  Tensor inverse_to_data(const Tensor& z, double tol, std::size_t max_iter,
                         ModelInversionStats* stats = nullptr) const;

  /// Base draws z_j from per-sample counter streams; independent of batching.
  Tensor sample_base(std::size_t n, std::uint64_t seed) const;
  /// Draws from the base and inverts the flow (standardized coordinates).
  Tensor sample(std::size_t n, std::uint64_t seed, double tol, std::size_t max_iter,
                ModelInversionStats* stats = nullptr) const;

  ReconResult reconstruct(const Tensor& x, std::size_t max_iter, double tol,
                          ModelInversionStats* stats = nullptr) const;

  double contraction_bound() const;

 private:
  ModelConfig config_;
  std::uint64_t seed_ = 0;
  ParamStore store_;
  std::vector<LduBlock> blocks_;
};

}  // namespace sinflow
