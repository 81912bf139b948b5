// Copyright 2026 The mmforecast Authors. All Rights Reserved.
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

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "mmf/config.h"
#include "mmf/losses.h"
#include "mmf/metrics.h"
#include "mmf/model.h"
#include "mmf/synth_data.h"

namespace {

using mmf::ClassTable;

// Desk-default feature grid: 64 channels at 8x16.
constexpr int64_t kC = 64, kH = 8, kW = 16;

mmf::LogitSampleSet RandomLogits(int64_t k, int64_t h, int64_t w) {
  auto table = ClassTable::Synthetic();
  std::vector<mmf::LogitVolume> v;
  std::vector<uint64_t> seeds;
  for (int64_t i = 0; i < k; ++i) {
    v.emplace_back(torch::randn({table->num_channels(), h, w}), table);
    seeds.push_back(static_cast<uint64_t>(i));
  }
  return mmf::LogitSampleSet(std::move(v), std::move(seeds));
}

void BM_SampleMoments(benchmark::State& state) {
  torch::manual_seed(0);
  const torch::Tensor x = torch::randn({state.range(0), 8, kC, kH, kW});
  for (auto _ : state) {
    mmf::MomentPair m = mmf::SampleMoments(x, 1, true);
    benchmark::DoNotOptimize(m.var.data_ptr<float>());
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_SampleMoments)->Arg(1)->Arg(8);

void BM_Mr2Loss(benchmark::State& state) {
  torch::manual_seed(0);
  const torch::Tensor x = torch::randn({state.range(0), kC, kH, kW});
  const torch::Tensor y = torch::randn({kC, kH, kW});
  for (auto _ : state) {
    torch::Tensor l = mmf::Mr2Loss(y, mmf::SampleMoments(x), 1e-4);
    benchmark::DoNotOptimize(l.item<float>());
  }
}
BENCHMARK(BM_Mr2Loss)->RangeMultiplier(2)->Range(2, 32);

void BM_PairwiseMse(benchmark::State& state) {
  torch::manual_seed(0);
  const mmf::LogitSampleSet set = RandomLogits(state.range(0), 64, 128);
  for (auto _ : state) benchmark::DoNotOptimize(mmf::PairwiseMse(set));
}
BENCHMARK(BM_PairwiseMse)->RangeMultiplier(2)->Range(2, 32);

void BM_ConfusionAccumulate(benchmark::State& state) {
  auto table = ClassTable::Synthetic();
  torch::manual_seed(0);
  const torch::Tensor pred = torch::randint(0, table->num_classes(), {64, 128}, torch::kInt64);
  const torch::Tensor gt = torch::randint(0, table->num_classes(), {64, 128}, torch::kInt64);
  mmf::ConfusionMatrix cm(table);
  for (auto _ : state) cm.Accumulate(pred, gt);
  benchmark::DoNotOptimize(cm.total());
  state.SetItemsProcessed(state.iterations() * pred.numel());
}
BENCHMARK(BM_ConfusionAccumulate);

void BM_AtLeastOnceCurve(benchmark::State& state) {
  auto table = ClassTable::Synthetic();
  torch::manual_seed(0);
  auto map = [&] {
    return mmf::SegMap(torch::randint(0, table->num_classes(), {64, 128}, torch::kInt64), table);
  };
  std::vector<mmf::SegMap> preds;
  for (int64_t i = 0; i < state.range(0); ++i) preds.push_back(map());
  const mmf::SegMap gt = map(), oracle = map();
  const std::vector<int64_t> checkpoints = mmf::DefaultCurveCheckpoints();
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmf::AtLeastOnceCurve(preds, gt, oracle, checkpoints));
  }
}
BENCHMARK(BM_AtLeastOnceCurve)->Arg(128);

void BM_GeneratorForward(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(0);
  mmf::ModelConfig config;
  mmf::F2FGenerator g(config);
  g->eval();
  const int64_t k = state.range(0);
  const torch::Tensor past = torch::randn({k, 3 * kC, kH, kW});
  const torch::Tensor noise = torch::randn({k, config.noise_channels, kH, kW});
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(past, noise).data_ptr<float>());
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(8);

void BM_GenerateClip(benchmark::State& state) {
  mmf::ScenarioParams params;
  params.horizon = 9;
  uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mmf::GenerateClip(params, seed++));
}
BENCHMARK(BM_GenerateClip);

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
