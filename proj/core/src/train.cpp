// SPDX-License-Identifier: Apache-2.0
#include "sinflow/train.hpp"

#include <cmath>
#include <stdexcept>

#include "sinflow/errors.hpp"

namespace sinflow {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("config: train.lr0 must be > 0");
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("config: train.gamma must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (validation_every < 1) throw ConfigError("config: train.validation_every must be >= 1");
  if (lr_min < 0.0 || lr_min > lr0) throw ConfigError("config: train.lr_min must be in [0, lr0]");
  if (weight_decay < 0.0) throw ConfigError("config: train.weight_decay must be >= 0");
}

OptimizerState OptimizerState::init(const ParamStore& store) {
  OptimizerState s;
  s.m.reserve(store.count());
  s.v.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    s.m.push_back(Tensor::zeros(store.item(i).value.shape()));
    s.v.push_back(Tensor::zeros(store.item(i).value.shape()));
  }
  return s;
}

Tape::Id nll_loss(Tape& tape, const FlowModel& model, const Tensor& batch) {
  if (batch.rank() != 2 || batch.extent(0) == 0) {
    throw std::invalid_argument("nll_loss: batch must be a nonempty [n x d] matrix, got " +
                                shape_str(batch.shape()));
  }
  return tape.neg(tape.mean(model.tape_log_prob(tape, batch)));
}

void adam_step(ParamStore& store, OptimizerState& state, double lr, double weight_decay,
               Optim mode, double beta1, double beta2, double eps) {
  if (state.m.size() != store.count()) {
    throw std::invalid_argument("adam_step: optimizer state does not match store");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < store.count(); ++pi) {
    Parameter& p = store.item(pi);
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      if (mode == Optim::kAdam && weight_decay > 0.0) g += weight_decay * p.value[i];
      if (mode == Optim::kAdamW && weight_decay > 0.0) p.value[i] -= lr * weight_decay * p.value[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

double lr_at(std::size_t step, const TrainConfig& config) {
  const std::size_t s = std::min(step, config.steps);
  switch (config.schedule) {
    case Schedule::kNone:
      return config.lr0;
    case Schedule::kExponential:
      return config.lr0 * std::pow(config.gamma, static_cast<double>(s / 1000));
    case Schedule::kCosine: {
      if (config.steps == 0) return config.lr_min;
      const double t = static_cast<double>(s) / static_cast<double>(config.steps);
      return config.lr_min + 0.5 * (config.lr0 - config.lr_min) * (1.0 + std::cos(M_PI * t));
    }
  }
  return config.lr0;
}

NllSummary eval_nll(const FlowModel& model, const Tensor& data) {
  NllSummary out;
  out.n = data.extent(0);
  if (out.n == 0) throw std::invalid_argument("eval_nll: empty data");
  const Tensor lp = model.log_prob(data);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < lp.size(); ++r) {
    const double nll = -lp[r];
    sum += nll;
    sumsq += nll * nll;
  }
  const double n = static_cast<double>(out.n);
  out.mean = sum / n;
  const double var = std::max(0.0, sumsq / n - out.mean * out.mean);
  out.std_error = out.n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return out;
}

namespace {

// Seeded epoch shuffles; batches wrap to a fresh permutation at the epoch end.
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed), idx_(n) {
    for (std::size_t i = 0; i < n; ++i) idx_[i] = i;
    reshuffle();
  }

  void fill(Tensor& batch, const Tensor& data) {
    const std::size_t d = data.extent(1);
    const std::size_t b = batch.extent(0);
    for (std::size_t r = 0; r < b; ++r) {
      if (pos_ == n_) reshuffle();
      const double* src = data.data() + idx_[pos_++] * d;
      std::copy(src, src + d, batch.data() + r * d);
    }
  }

 private:
  void reshuffle() {
    CounterRng rng(seed_, stream_id(streams::kShuffle, epoch_++));
    rng.shuffle(idx_);
    pos_ = 0;
  }

  std::size_t n_;
  std::uint64_t seed_;
  std::vector<std::size_t> idx_;
  std::size_t pos_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace

TrainResult train(FlowModel& model, const DataSplits& splits, const TrainConfig& config) {
  config.validate();
  if (splits.train.size() == 0 || splits.val.size() == 0) {
    throw std::invalid_argument("train: empty train or validation split");
  }

  TrainResult res;
  res.history.reserve(config.steps);

  // Seed "best" with the untrained model so steps=0 still yields a snapshot.
  res.best_val_nll = eval_nll(model, splits.val.samples).mean;
  res.best_step = 0;
  res.best_params = model.params().values();

  OptimizerState opt = OptimizerState::init(model.params());
  BatchCursor cursor(splits.train.size(), config.seed);
  Tensor batch({std::min(config.batch_size, splits.train.size()), model.dim()});

  for (std::size_t step = 1; step <= config.steps; ++step) {
    cursor.fill(batch, splits.train.samples);

    Tape tape;
    const Tape::Id loss_id = nll_loss(tape, model, batch);
    const double loss = tape.value(loss_id)[0];
    if (!std::isfinite(loss)) {
      res.status = TrainStatus::kAbortedNonFinite;
      res.abort_step = step;
      return res;
    }

    model.params().zero_grads();
    tape.backward(loss_id);
    if (config.clip_enabled) {
      const double norm = model.params().grad_l2_norm();
      if (norm > config.grad_clip && norm > 0.0) {
        model.params().scale_grads(config.grad_clip / norm);
      }
    }

    const double lr = lr_at(step - 1, config);
    adam_step(model.params(), opt, lr, config.weight_decay, config.optimizer, config.beta1,
              config.beta2, config.eps);

    HistoryRow row;
    row.step = step;
    row.train_loss = loss;
    row.lr = lr;
    if (step % config.validation_every == 0 || step == config.steps) {
      const double val = eval_nll(model, splits.val.samples).mean;
      if (!std::isfinite(val)) {
        res.status = TrainStatus::kAbortedNonFinite;
        res.abort_step = step;
        return res;
      }
      row.val_nll = val;
      row.has_val = true;
      if (val < res.best_val_nll) {
        res.best_val_nll = val;
        res.best_step = step;
        res.best_params = model.params().values();
      }
    }
    res.history.push_back(row);
  }
  return res;
}

}  // namespace sinflow
