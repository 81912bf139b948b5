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

#ifndef MMF_TRAINING_H_
#define MMF_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmf/checkpoint.h"
#include "mmf/config.h"
#include "mmf/feature_cache.h"
#include "mmf/model.h"

namespace mmf {

// Cosine annealing without restarts from lr0 at step 0 to lr_min at
// total_steps. Throws std::out_of_range outside [0, total_steps].
double CosineLr(int64_t step, int64_t total_steps, double lr0, double lr_min);

// Stateless seed derivation: every random draw in training is addressed by
// (run seed, purpose, counter) so resumed runs replay uninterrupted ones.
uint64_t DeriveSeed(uint64_t seed, uint64_t purpose, uint64_t counter);

struct OracleModel {
  ModelConfig config;
  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
};

struct ForecastModel {
  ModelConfig config;
  LossKind loss_kind = LossKind::kMr1;
  F2FGenerator generator{nullptr};
  PatchDiscriminator discriminator{nullptr};

  // The deterministic L2 baseline feeds zero noise.
  bool use_noise() const { return loss_kind != LossKind::kL2Baseline; }
};

OracleModel MakeOracle(const ModelConfig& config, uint64_t seed);
ForecastModel MakeForecaster(const ModelConfig& config, LossKind kind,
                             uint64_t seed);
OracleModel LoadOracle(const std::filesystem::path& checkpoint);
ForecastModel LoadForecaster(const std::filesystem::path& checkpoint);

// Model config with the class count of the synthetic table.
ModelConfig ResolvedModelConfig(const RunConfig& config);

std::filesystem::path OracleCheckpointPath(const std::filesystem::path& oracle_dir);
std::filesystem::path CachePath(const std::filesystem::path& oracle_dir);

struct OracleEpoch {
  int64_t epoch = 0;
  double lr = 0, ce_loss = 0, val_miou = 0, val_miou_mo = 0;
};

struct OracleResult {
  std::filesystem::path checkpoint;
  std::vector<OracleEpoch> log;
  double val_miou = 0;
};

// Stage 1: trains encoder + decoder with cross-entropy on every frame of
// the train split, writes <out>/oracle.ckpt and <out>/oracle_log.csv, then
// builds the feature cache at <out>/cache.
OracleResult TrainOracle(const std::filesystem::path& dataset_root,
                         const RunConfig& config,
                         const std::filesystem::path& out_dir);

// Features of one split, loaded from the cache into batched tensors.
struct CachedSplit {
  torch::Tensor past;    // (N, n_past * C_f, h, w)
  torch::Tensor target;  // (N, C_f, h, w)
  std::vector<SegMap> gt;
  std::vector<SequenceClip> clips;

  int64_t size() const { return static_cast<int64_t>(gt.size()); }
  std::vector<FeatureMap> Past(int64_t i, int64_t n_past) const;
};

CachedSplit LoadCachedSplit(const std::filesystem::path& dataset_root,
                            const FeatureCache& cache, Split split);

struct SampleEvalStats {
  double miou = 0;     // mean over sample index of dataset-level mIoU
  double miou_mo = 0;  // NaN when no movable class occurs
  double pairwise_mse = 0;
};

SampleEvalStats EvaluateSamples(ForecastModel& model, Decoder& decoder,
                                const CachedSplit& split, int64_t k,
                                uint64_t seed,
                                MseSpace space = MseSpace::kProbability);

struct F2FEpoch {
  int64_t epoch = 0;
  double lr = 0, g_loss = 0, d_loss = 0, mr_loss = 0;
  double val_miou = 0, val_miou_mo = 0, val_pairwise_mse = 0;
};

struct F2FOptions {
  // f2f_last.ckpt of an interrupted run.
  std::filesystem::path resume_from;
  // Stop after this many completed epochs (0 = run to the end); the
  // learning-rate schedule still spans train.epochs.
  int64_t stop_after_epoch = 0;
  bool verbose = true;
};

struct F2FResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::vector<F2FEpoch> log;
  bool early_stopped = false;
};

// Stage 2: adversarial F2F training on cached features. Writes
// f2f_best.ckpt, f2f_last.ckpt and train_log.csv under out_dir.
F2FResult TrainF2F(const std::filesystem::path& dataset_root,
                   const std::filesystem::path& oracle_dir,
                   const RunConfig& config,
                   const std::filesystem::path& out_dir,
                   const F2FOptions& options = {});

std::string F2FLogCsv(std::span<const F2FEpoch> log);

}  // namespace mmf

#endif  // MMF_TRAINING_H_
