// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "sinflow/config.hpp"

namespace sinflow {

/// Serializable snapshot of a run: config echo, standardizer, parameters in
/// registration order, and training progress. JSON on disk, written
/// atomically; floats survive save/load round trips bit-exactly.
struct Checkpoint {
  int version = 1;
  RunConfig config;
  Standardizer standardizer;
  std::vector<std::pair<std::string, Tensor>> params;
  std::size_t step = 0;
  double best_val_nll = 0.0;
};

Checkpoint make_checkpoint(const RunConfig& config, const FlowModel& model, std::size_t step,
                           double best_val_nll);

void checkpoint_save(const Checkpoint& ckpt, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);

/// Rebuilds the flow from the config echo and restores every parameter by
/// name; shapes must match exactly.
FlowModel model_from_checkpoint(const Checkpoint& ckpt);

/// Writes content to `path` via a temp file and rename, so interrupted runs
/// cannot leave a torn file behind.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace sinflow
