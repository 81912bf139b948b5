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

#ifndef MMF_METRICS_H_
#define MMF_METRICS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "mmf/core_types.h"
#include "mmf/model.h"
#include "mmf/synth_data.h"

namespace mmf {

// (gt, pred) co-occurrence counts over all class indices. Rows of the void
// class stay empty: void ground truth is never scored. Predictions are
// counted whatever their class, so a void prediction is a false negative.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(ClassTablePtr table);

  void Accumulate(const SegMap& pred, const SegMap& gt);
  // Tensor form: (H, W) or (N, H, W) int64 class indices.
  void Accumulate(const torch::Tensor& pred, const torch::Tensor& gt);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  // (num_classes, num_classes) int64, indexed [gt][pred].
  const torch::Tensor& counts() const { return counts_; }
  const ClassTablePtr& table() const { return table_; }
  int64_t total() const { return counts_.sum().item<int64_t>(); }
  int64_t at(int gt, int pred) const;

  // IoU per class index; absent for void and for classes with zero union.
  std::vector<std::optional<double>> PerClassIou() const;

 private:
  ClassTablePtr table_;
  torch::Tensor counts_;
};

// Mean IoU over the given class ids that have non-zero union; absent when
// none of them does.
std::optional<double> MeanIouOver(const ConfusionMatrix& cm,
                                  std::span<const int> class_ids);
// Throw std::domain_error when every considered class has zero union.
double Miou(const ConfusionMatrix& cm);
double MiouMo(const ConfusionMatrix& cm, std::span<const int> movable_ids);
double MiouMo(const ConfusionMatrix& cm);

enum class MseSpace { kProbability, kLogit };

// Mean over unordered pairs (i < j) of the per-element mean squared
// difference between samples i and j. K = 1 gives 0.
double PairwiseMse(const LogitSampleSet& samples,
                   MseSpace space = MseSpace::kProbability);

// Perceptual diversity proxy: per-layer channel-normalized encoder
// activations of the rendered soft predictions, squared differences summed
// over channels, averaged spatially, summed over layers and averaged over
// pairs.
double LpipsProxy(const LogitSampleSet& samples, Encoder& encoder);

// Per-pixel channel variance across samples, averaged over channels. (H, W).
torch::Tensor MeanLogitVariance(const LogitSampleSet& samples);
// Per-pixel variance across samples of the argmax class index. (H, W).
torch::Tensor DiscretePredictionVariance(const LogitSampleSet& samples);

LogitVolume AveragedPrediction(const LogitSampleSet& samples);

// mIoU of a single prediction against its ground truth.
double ClipMiou(const SegMap& pred, const SegMap& gt);

// Per clip, keep the best ceil(fraction * K) samples by clip mIoU and
// average the kept scores over the dataset. Requires fraction * K >= 1.
double TopFractionMiou(std::span<const LogitSampleSet> sample_sets,
                       std::span<const SegMap> gt, double fraction);

enum class PixelSubset { kAllNonVoid = 0, kMovableOnly = 1, kOracleCorrect = 2 };
constexpr std::array<PixelSubset, 3> kPixelSubsets = {
    PixelSubset::kAllNonVoid, PixelSubset::kMovableOnly,
    PixelSubset::kOracleCorrect};
std::string SubsetName(PixelSubset subset);

std::vector<int64_t> DefaultCurveCheckpoints();  // 1, 2, 4, ..., 128

// Hit counts behind the at-least-once curve; merge by addition.
struct CurveCounts {
  std::vector<int64_t> checkpoints;
  std::array<int64_t, 3> subset_pixels{};
  std::array<std::vector<int64_t>, 3> hits;

  CurveCounts& operator+=(const CurveCounts& other);
};

struct DiversityCurve {
  std::vector<int64_t> checkpoints;
  // Per subset, fraction of subset pixels classified correctly by at least
  // one of the first n samples; absent when the subset is empty.
  std::array<std::vector<std::optional<double>>, 3> values;

  static DiversityCurve FromCounts(const CurveCounts& counts);
};

// predictions: at least max(checkpoints) decoded samples, in sample order.
CurveCounts AtLeastOnceCounts(std::span<const SegMap> predictions,
                              const SegMap& gt, const SegMap& oracle_pred,
                              std::span<const int64_t> checkpoints);
DiversityCurve AtLeastOnceCurve(std::span<const SegMap> predictions,
                                const SegMap& gt, const SegMap& oracle_pred,
                                std::span<const int64_t> checkpoints);

// Oracle segmentation of a frame: decode(encode(frame)).
SegMap OraclePredict(Encoder& encoder, Decoder& decoder, const SegMap& frame,
                     int64_t feature_downsample);

// Oracle segmentation of the last observed frame, used as the forecast.
SegMap CopyLastBaseline(const SequenceClip& clip, Encoder& encoder,
                        Decoder& decoder, int64_t feature_downsample);

// IoU between the pixels predicted as class_id and a rectangle.
double RegionClassIou(const SegMap& pred, const PixelRect& region, int class_id);

}  // namespace mmf

#endif  // MMF_METRICS_H_
