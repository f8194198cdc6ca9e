// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sinflow/data.hpp"
#include "sinflow/flow.hpp"

namespace sinflow {

enum class Schedule : std::uint8_t { kNone, kExponential, kCosine };
enum class Optim : std::uint8_t { kAdam, kAdamW };

struct TrainConfig {
  std::size_t steps = 50000;
  std::size_t batch_size = 128;
  double lr0 = 1e-3;
  Schedule schedule = Schedule::kNone;
  double gamma = 0.99;   // exponential factor, applied once per 1000 steps
  double lr_min = 0.0;   // cosine floor
  double weight_decay = 0.0;
  Optim optimizer = Optim::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t validation_every = 500;
  double grad_clip = 10.0;
  bool clip_enabled = true;

  void validate() const;
};

/// First/second Adam moment accumulators, aligned with store order.
struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;

  static OptimizerState init(const ParamStore& store);
};

/// Minibatch negative mean log-likelihood, differentiable through the tape.
Tape::Id nll_loss(Tape& tape, const FlowModel& model, const Tensor& batch);

/// Bias-corrected Adam update; AdamW applies decoupled decay before the Adam
/// delta while plain Adam folds weight decay into the gradient.
void adam_step(ParamStore& store, OptimizerState& state, double lr, double weight_decay,
               Optim mode, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Learning rate before optimizer step `step` (0-based); clamps past the end.
double lr_at(std::size_t step, const TrainConfig& config);

struct HistoryRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  double val_nll = 0.0;
  bool has_val = false;
  double lr = 0.0;
};

struct NllSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Mean and standard error of -log p over a standardized sample matrix.
NllSummary eval_nll(const FlowModel& model, const Tensor& data);

enum class TrainStatus : std::uint8_t { kOk, kAbortedNonFinite };

struct TrainResult {
  TrainStatus status = TrainStatus::kOk;
  std::size_t abort_step = 0;           // step whose loss went non-finite
  std::vector<Tensor> best_params;
  double best_val_nll = 0.0;
  std::size_t best_step = 0;
  std::vector<HistoryRow> history;
};

/// Runs exactly config.steps optimizer steps over seeded shuffled minibatches.
/// The model is left at the final parameters; the best validation snapshot is
/// returned for the caller to restore. The test split is never touched here.
TrainResult train(FlowModel& model, const DataSplits& splits, const TrainConfig& config);

}  // namespace sinflow
