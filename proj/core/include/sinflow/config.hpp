// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "sinflow/data.hpp"
#include "sinflow/flow.hpp"
#include "sinflow/train.hpp"

namespace sinflow {

struct DatasetSpec {
  enum class Kind : std::uint8_t { kToy2d, kMixture1d, kCsv };
  Kind kind = Kind::kToy2d;
  std::string toy_name = "rings";
  MixtureSpec mixture;
  std::string csv_path;
  bool csv_has_header = false;
  std::size_t n = 100000;  // synthetic sample count
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Everything one training run needs; echoed verbatim into checkpoints.
struct RunConfig {
  DatasetSpec dataset;
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;
  std::string out_dir = "runs/out";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses a JSON run configuration; faults name the offending field.
RunConfig load_run_config(const std::string& path);

/// Materializes the configured dataset (generator seeds derive from `seed`).
Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace sinflow
