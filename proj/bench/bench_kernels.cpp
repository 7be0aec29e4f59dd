// Copyright 2026 The crossdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP drivers.

#include <benchmark/benchmark.h>

#include "crossdiff/dataset.hpp"
#include "crossdiff/eval.hpp"
#include "crossdiff/kernels.hpp"
#include "crossdiff/rng.hpp"
#include "crossdiff/trainer.hpp"

namespace crossdiff {
namespace {

Matrix random_matrix(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_GemmSerial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix out;
  for (auto _ : state) {
    kernels::gemm_serial(a, kernels::Op::kNone, b, kernels::Op::kNone, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * n * n);
}

void BM_GemmParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix out;
  for (auto _ : state) {
    kernels::gemm(a, kernels::Op::kNone, b, kernels::Op::kNone, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * n * n);
}

BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(256);

struct Workload {
  DatasetSplit split;
  ParameterSet params;
  TrainConfig train;
};

const Workload& workload() {
  static const Workload w = [] {
    SyntheticConfig synth;
    synth.n_users = 64;
    Workload out;
    out.split = filter_and_split(generate_synthetic(synth).events);
    ModelConfig model;
    model.d = 32;
    model.vocab_x = out.split.vocab_x.size();
    model.vocab_y = out.split.vocab_y.size();
    out.params = init_parameters(model, 1);
    out.train.batch_size = 32;
    return out;
  }();
  return w;
}

void batch_loss(benchmark::State& state, bool parallel) {
  const Workload& w = workload();
  const auto users = trainable_users(w.split);
  const std::span<const UserSequence> batch(users.data(), 32);
  for (auto _ : state) {
    BatchResult r = compute_batch_loss(w.params, batch, 10, false, w.train, true, parallel);
    benchmark::DoNotOptimize(r.loss.l_total);
  }
}

void BM_BatchLossSerial(benchmark::State& state) { batch_loss(state, false); }
void BM_BatchLossParallel(benchmark::State& state) { batch_loss(state, true); }
BENCHMARK(BM_BatchLossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchLossParallel)->Unit(benchmark::kMillisecond);

void evaluation(benchmark::State& state, bool parallel) {
  const Workload& w = workload();
  EvalConfig cfg;
  cfg.num_negatives = 0;
  cfg.n_steps = 10;
  cfg.parallel = parallel;
  for (auto _ : state) {
    MetricReport r = evaluate(w.split.test, w.params, cfg);
    benchmark::DoNotOptimize(r.x.ndcg10);
  }
}

void BM_EvaluateSerial(benchmark::State& state) { evaluation(state, false); }
void BM_EvaluateParallel(benchmark::State& state) { evaluation(state, true); }
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace crossdiff

BENCHMARK_MAIN();
