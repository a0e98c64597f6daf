//
// Copyright 2026 The LDPFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/detection.h"
#include "ldpfl/federation.h"
#include "ldpfl/rdp.h"

namespace ldpfl {
namespace {

std::shared_ptr<const FederatedData> BenchData() {
  static const auto data = [] {
    const auto samples = Synthesize(20000, 1);
    return std::make_shared<const FederatedData>(
        PrepareFederatedData(samples, 100, 1));
  }();
  return data;
}

FederationConfig BenchConfig(ExecutionPolicy policy) {
  FederationConfig cfg;
  cfg.privacy = PrivacySpec::Calibrated(0.7, 0.001, 0.05);
  cfg.optimizer.learning_rate = 0.05;
  cfg.stop_threshold = 1.0;
  cfg.execution = policy;
  return cfg;
}

void BM_Episode(benchmark::State& state) {
  const auto policy = static_cast<ExecutionPolicy>(state.range(0));
  DetectorConfig detector;
  detector.kind = DetectorKind::kMix;
  AttackSetup attack{AttackMode::kMpelm, {}};
  attack.config.m = 3;
  for (auto _ : state) {
    state.PauseTiming();
    Federation fed(BenchConfig(policy), BenchData(), attack, detector);
    state.ResumeTiming();
    benchmark::DoNotOptimize(fed.RunEpisode());
  }
}
BENCHMARK(BM_Episode)
    ->Arg(static_cast<int>(ExecutionPolicy::kSerial))
    ->Arg(static_cast<int>(ExecutionPolicy::kParallel))
    ->ArgNames({"parallel"})
    ->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const Mlp model;
  const ParamVector global = model.InitParams(1);
  Substream rng(5, StreamTag::kNoise);
  std::vector<ModelUpdate> updates;
  for (int i = 0; i < 30; ++i) {
    ParamVector d(model.param_count());
    for (double& x : d) x = 0.01 * rng.Normal();
    updates.push_back({d, i, 1});
  }
  const auto validation = BenchData()->server_validation;
  const DetectionContext ctx{&model, global, validation};
  DetectorConfig cfg;
  cfg.kind = DetectorKind::kMix;
  for (auto _ : state) {
    benchmark::DoNotOptimize(parallel ? EvaluateParallel(updates, cfg, ctx)
                                      : EvaluateSerial(updates, cfg, ctx));
  }
}
BENCHMARK(BM_Detect)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_LossTables(benchmark::State& state) {
  const auto policy = static_cast<ExecutionPolicy>(state.range(0));
  LossTableSpec spec;
  spec.epsilon_grid = {0.5, 1.0};
  spec.gamma_values = {2.0};
  spec.seeds = {1, 2};
  spec.federation = BenchConfig(ExecutionPolicy::kSerial);
  spec.federation.episodes = 5;
  spec.attack.m = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(GenerateLossTables(
        spec, [](std::uint64_t) { return BenchData(); }, policy));
  }
}
BENCHMARK(BM_LossTables)
    ->Arg(static_cast<int>(ExecutionPolicy::kSerial))
    ->Arg(static_cast<int>(ExecutionPolicy::kParallel))
    ->ArgNames({"parallel"})
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ldpfl

BENCHMARK_MAIN();
