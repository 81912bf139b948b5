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

#ifndef MMF_PIPELINE_H_
#define MMF_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmf/config.h"
#include "mmf/metrics.h"
#include "mmf/synth_data.h"
#include "mmf/training.h"

namespace mmf {

// Name of the config echo written beside every command's outputs.
inline constexpr char kResolvedConfigName[] = "config.resolved";

void WriteResolvedConfig(const RunConfig& config, const std::filesystem::path& dir);

// One row of a metrics report.
struct MetricRow {
  std::string metric;
  std::string subset;
  double value = 0;
  int64_t k = 0;
  // Curve checkpoint n for at-least-once rows, 0 otherwise.
  int64_t checkpoint = 0;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  nlohmann::json summary;

  // First row with this metric and subset.
  std::optional<double> Find(const std::string& metric,
                             const std::string& subset = "all") const;
  std::string Csv() const;
};

enum class EvalMode { kStandard, kCurve, kCounterfactual };
enum class Baseline { kNone, kCopyLast, kOracle };

std::string EvalModeName(EvalMode mode);
EvalMode ParseEvalMode(const std::string& name);
std::string BaselineName(Baseline baseline);
Baseline ParseBaseline(const std::string& name);

struct EvalOptions {
  EvalMode mode = EvalMode::kStandard;
  Baseline baseline = Baseline::kNone;
  // Forecaster checkpoint; unused for baselines.
  std::filesystem::path checkpoint;
  // Overrides eval.k when set.
  std::optional<int64_t> k;
  // Also write per-clip logit volumes for offline re-scoring.
  bool dump = false;
};

// gen-data: writes the dataset to out_dir (paths.data when empty).
DatasetManifest CmdGenData(const RunConfig& config, const std::filesystem::path& out_dir,
                           bool overwrite);

OracleResult CmdTrainOracle(const RunConfig& config, const std::filesystem::path& out_dir);

F2FResult CmdTrainF2F(const RunConfig& config, const std::filesystem::path& out_dir,
                      const F2FOptions& options = {});

// eval: writes metrics.csv and metrics.json (plus curve.png in curve mode)
// under out_dir.
MetricsReport CmdEval(const RunConfig& config, const EvalOptions& options,
                      const std::filesystem::path& out_dir);

struct AblationRow {
  int64_t k = 0;
  double miou = 0, miou_mo = 0, pairwise_mse = 0, lpips_proxy = 0;
};

// ablate-k. With a checkpoint, K is the evaluation sample count. Without
// one, a forecaster is trained per K (written to out_dir/k<K>) and scored
// with eval.k samples; a warning is printed when the MSE column is not
// non-decreasing.
std::vector<AblationRow> CmdAblateK(const RunConfig& config,
                                    const std::filesystem::path& checkpoint,
                                    const std::vector<int64_t>& k_list,
                                    const std::filesystem::path& out_dir);

// render: panel.png with first/last input, ground-truth future, K sample
// predictions and the two variance maps; each part is also written alone.
void CmdRender(const RunConfig& config, const std::filesystem::path& checkpoint,
               const std::string& clip_id, const std::filesystem::path& out_dir);

// Palette image (H, W, 3) uint8 of a segmentation.
torch::Tensor ColorizeSeg(const SegMap& seg);
// (H, W) uint8 image of a non-negative map scaled by its maximum; an
// all-zero map stays black.
torch::Tensor GrayFromMap(const torch::Tensor& map);
// Line plot of a diversity curve against log2(n), one color per subset.
torch::Tensor PlotCurve(const DiversityCurve& curve, int64_t height = 240,
                        int64_t width = 320);

// Per-clip prediction dump:
//   "MMFPRED1" | i64 K, C, H, W | logits | gt | oracle | u32 crc32
// where each array is a u64 byte count followed by f32 logits (K, C, H, W),
// i64 gt (H, W) or i64 oracle prediction (H, W); the checksum covers
// everything before it.
struct PredictionDump {
  torch::Tensor logits;  // (K, C, H, W) float32
  torch::Tensor gt;      // (H, W) int64
  torch::Tensor oracle;  // (H, W) int64
};
void WritePredictionDump(const std::filesystem::path& path, const PredictionDump& dump);
PredictionDump ReadPredictionDump(const std::filesystem::path& path);

}  // namespace mmf

#endif  // MMF_PIPELINE_H_
