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

#ifndef MMF_CONFIG_H_
#define MMF_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmf/losses.h"
#include "mmf/metrics.h"
#include "mmf/model.h"
#include "mmf/synth_data.h"

namespace mmf {

enum class TrainStage { kOracle, kF2F };
enum class LossKind { kMr1, kMr2, kL2Baseline };
enum class MrSpace { kFeature, kLogit };

std::string LossKindName(LossKind kind);
LossKind ParseLossKind(const std::string& name);

struct TrainConfig {
  // Stage 1: segmentation oracle.
  int64_t oracle_epochs = 20;
  int64_t oracle_batch_size = 16;
  double oracle_lr = 1e-3;
  // Stage 2: F2F forecaster.
  int64_t epochs = 60;
  int64_t patience = 15;  // 0 disables early stopping
  int64_t batch_size = 8;
  double lr0 = 4e-4;
  double lr_min = 1e-7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  LossKind loss_kind = LossKind::kMr1;
  MrSpace mr_space = MrSpace::kFeature;
  int64_t d_steps_per_g = 1;
  bool d_all_k = false;
  int64_t val_k = 8;
  uint64_t seed = 0;
  int64_t threads = 1;

  void Validate() const;
};

struct EvalConfig {
  int64_t k = 8;
  int64_t curve_k = 128;
  int64_t top_k = 20;
  double top_fraction = 0.05;
  MseSpace mse_space = MseSpace::kProbability;
  std::string split = "test";
  int64_t n_counterfactual = 50;
  uint64_t seed = 0;

  void Validate() const;
};

struct DataConfig {
  ScenarioParams params;
  int64_t n_train = 300;
  int64_t n_val = 40;
  int64_t n_test = 60;
};

struct PathConfig {
  std::string data = "data";
  std::string oracle_dir = "runs/oracle";
};

// Everything a command needs, loaded from a flat `section.key = value`
// file. Every key has a default; unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  LossWeights loss;
  EvalConfig eval;
  PathConfig paths;

  void Validate() const;

  // Applies one `key = value` assignment; throws ConfigError on unknown
  // keys or unparsable values.
  void Set(const std::string& key, const std::string& value);
  std::string Get(const std::string& key) const;
  static std::vector<std::string> Keys();

  static RunConfig Parse(const std::string& text);
  static RunConfig Load(const std::filesystem::path& path);
  // Canonical resolved form, every key in schema order.
  std::string Dump() const;
};

}  // namespace mmf

#endif  // MMF_CONFIG_H_
