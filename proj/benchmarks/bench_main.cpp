// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the training and inversion hot paths.

#include <benchmark/benchmark.h>

#include "sinflow/flow.hpp"
#include "sinflow/train.hpp"

namespace {

using namespace sinflow;

FlowModel toy_model(std::size_t dim, std::size_t blocks, bool shifts) {
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.blocks = blocks;
  cfg.use_shifts = shifts;
  return FlowModel::build(cfg, 7);
}

Tensor normal_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Tensor x({n, dim});
  CounterRng rng(seed, 0);
  for (double& v : x.vec()) v = rng.normal();
  return x;
}

void BM_TrainStep(benchmark::State& state) {
  FlowModel model = toy_model(2, static_cast<std::size_t>(state.range(0)), true);
  const Tensor batch = normal_batch(128, 2, 3);
  OptimizerState opt = OptimizerState::init(model.params());
  for (auto _ : state) {
    Tape tape;
    const Tape::Id loss = nll_loss(tape, model, batch);
    model.params().zero_grads();
    tape.backward(loss);
    adam_step(model.params(), opt, 1e-3, 0.0, Optim::kAdam);
    benchmark::DoNotOptimize(tape.value(loss)[0]);
  }
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LogProb(benchmark::State& state) {
  const FlowModel model = toy_model(2, 16, true);
  const Tensor batch = normal_batch(static_cast<std::size_t>(state.range(0)), 2, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_prob(batch)[0]);
  }
}
BENCHMARK(BM_LogProb)->Arg(128)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_SinusoidalInverse(benchmark::State& state) {
  ParamStore store;
  CounterRng rng(11, 0);
  SinusoidalLayer layer(store, "s", 2, 4, PhaseInit::kRandom, rng);
  for (std::size_t i = 0; i < store.count(); ++i) {
    for (double& v : store.item(i).value.vec()) v = rng.normal() * 0.6;
  }
  const Tensor z = normal_batch(static_cast<std::size_t>(state.range(0)), 2, 13);
  const Tensor y = layer.raw_forward(z).y;
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.raw_inverse(y, 1e-8, 100).z[0]);
  }
}
BENCHMARK(BM_SinusoidalInverse)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
  const FlowModel model = toy_model(2, 16, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.sample(256, 17, 1e-6, 100)[0]);
  }
}
BENCHMARK(BM_Sample)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
