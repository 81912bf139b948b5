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

#include "mmf/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mmf/errors.h"

namespace mmf {

ConfusionMatrix::ConfusionMatrix(ClassTablePtr table)
    : table_(std::move(table)),
      counts_(torch::zeros({table_->num_classes(), table_->num_classes()},
                           torch::kInt64)) {}

void ConfusionMatrix::Accumulate(const SegMap& pred, const SegMap& gt) {
  Accumulate(pred.data(), gt.data());
}

void ConfusionMatrix::Accumulate(const torch::Tensor& pred,
                                 const torch::Tensor& gt) {
  if (!pred.sizes().equals(gt.sizes())) {
    throw ShapeError("ConfusionMatrix: prediction and ground truth differ in shape");
  }
  const int64_t n = table_->num_classes();
  torch::Tensor g = gt.reshape(-1).to(torch::kInt64);
  torch::Tensor p = pred.reshape(-1).to(torch::kInt64);
  torch::Tensor valid = g.ne(table_->void_id());
  torch::Tensor idx = g.masked_select(valid) * n + p.masked_select(valid);
  counts_ += torch::bincount(idx, {}, n * n).reshape({n, n}).to(torch::kInt64);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (!(*table_ == *other.table_)) {
    throw std::invalid_argument("ConfusionMatrix: merging different class tables");
  }
  counts_ += other.counts_;
  return *this;
}

int64_t ConfusionMatrix::at(int gt, int pred) const {
  return counts_.accessor<int64_t, 2>()[gt][pred];
}

std::vector<std::optional<double>> ConfusionMatrix::PerClassIou() const {
  const int64_t n = table_->num_classes();
  auto a = counts_.accessor<int64_t, 2>();
  std::vector<std::optional<double>> out(n);
  for (int64_t c = 0; c < n; ++c) {
    if (c == table_->void_id()) continue;
    int64_t row = 0, col = 0;
    for (int64_t j = 0; j < n; ++j) {
      row += a[c][j];
      col += a[j][c];
    }
    const int64_t tp = a[c][c];
    const int64_t uni = row + col - tp;
    if (uni > 0) out[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

std::optional<double> MeanIouOver(const ConfusionMatrix& cm,
                                  std::span<const int> class_ids) {
  const auto iou = cm.PerClassIou();
  double sum = 0.0;
  int count = 0;
  for (int c : class_ids) {
    if (iou.at(c)) {
      sum += *iou[c];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

double Miou(const ConfusionMatrix& cm) {
  std::vector<int> ids;
  for (int c = 0; c < cm.table()->num_classes(); ++c) {
    if (c != cm.table()->void_id()) ids.push_back(c);
  }
  auto v = MeanIouOver(cm, ids);
  if (!v) throw std::domain_error("Miou: every class has zero union");
  return *v;
}

double MiouMo(const ConfusionMatrix& cm, std::span<const int> movable_ids) {
  auto v = MeanIouOver(cm, movable_ids);
  if (!v) throw std::domain_error("MiouMo: every movable class has zero union");
  return *v;
}

double MiouMo(const ConfusionMatrix& cm) {
  return MiouMo(cm, cm.table()->movable_ids());
}

double PairwiseMse(const LogitSampleSet& samples, MseSpace space) {
  const int64_t k = samples.size();
  if (k < 2) return 0.0;
  torch::Tensor x = samples.Stacked().to(torch::kFloat64);
  if (space == MseSpace::kProbability) x = torch::softmax(x, 1);
  double total = 0.0;
  for (int64_t i = 0; i < k; ++i) {
    for (int64_t j = i + 1; j < k; ++j) {
      total += (x[i] - x[j]).square().mean().item<double>();
    }
  }
  return total / static_cast<double>(k * (k - 1) / 2);
}

namespace {

torch::Tensor SoftRender(const torch::Tensor& logits, const ClassTable& table) {
  // (K, C, H, W) probabilities -> (K, 3, H, W) palette mixture.
  torch::Tensor colors = torch::empty({table.num_channels(), 3}, torch::kFloat32);
  for (int c = 0; c < table.num_channels(); ++c) {
    for (int j = 0; j < 3; ++j) {
      colors[c][j] = table.palette()[table.ClassOf(c)][j] / 255.0f;
    }
  }
  torch::Tensor p = torch::softmax(logits.to(torch::kFloat32), 1);
  return torch::einsum("kchw,cj->kjhw", {p, colors});
}

}  // namespace

double LpipsProxy(const LogitSampleSet& samples, Encoder& encoder) {
  if (!encoder) throw PreconditionError("LpipsProxy: no encoder");
  const int64_t k = samples.size();
  if (k < 2) return 0.0;
  torch::NoGradGuard no_grad;
  torch::Tensor images = SoftRender(samples.Stacked(), *samples[0].table());
  auto dtype = encoder->parameters().front().scalar_type();
  std::vector<torch::Tensor> acts = encoder->Activations(images.to(dtype));
  std::vector<torch::Tensor> normalized;
  for (const torch::Tensor& a : acts) {
    torch::Tensor a64 = a.to(torch::kFloat64);
    normalized.push_back(a64 / (a64.square().sum(1, true).sqrt() + 1e-10));
  }
  double total = 0.0;
  for (int64_t i = 0; i < k; ++i) {
    for (int64_t j = i + 1; j < k; ++j) {
      for (const torch::Tensor& a : normalized) {
        total += (a[i] - a[j]).square().sum(0).mean().item<double>();
      }
    }
  }
  return total / static_cast<double>(k * (k - 1) / 2);
}

torch::Tensor MeanLogitVariance(const LogitSampleSet& samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("MeanLogitVariance: needs K >= 2");
  }
  torch::Tensor x = samples.Stacked().to(torch::kFloat64);
  return x.var(0, /*unbiased=*/true).mean(0);
}

torch::Tensor DiscretePredictionVariance(const LogitSampleSet& samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("DiscretePredictionVariance: needs K >= 2");
  }
  torch::Tensor classes =
      ArgmaxClasses(samples.Stacked(), *samples[0].table()).to(torch::kFloat64);
  return classes.var(0, /*unbiased=*/true);
}

LogitVolume AveragedPrediction(const LogitSampleSet& samples) {
  return LogitVolume(samples.Stacked().mean(0), samples[0].table());
}

double ClipMiou(const SegMap& pred, const SegMap& gt) {
  ConfusionMatrix cm(gt.table());
  cm.Accumulate(pred, gt);
  return Miou(cm);
}

double TopFractionMiou(std::span<const LogitSampleSet> sample_sets,
                       std::span<const SegMap> gt, double fraction) {
  if (sample_sets.size() != gt.size()) {
    throw std::invalid_argument("TopFractionMiou: one ground truth per clip");
  }
  if (sample_sets.empty()) throw std::invalid_argument("TopFractionMiou: no clips");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("TopFractionMiou: fraction must lie in (0, 1]");
  }
  double total = 0.0;
  int64_t kept_total = 0;
  for (size_t c = 0; c < sample_sets.size(); ++c) {
    const LogitSampleSet& s = sample_sets[c];
    const double want = fraction * static_cast<double>(s.size());
    if (want < 1.0 - 1e-9) {
      throw std::invalid_argument("TopFractionMiou: fraction * K must be >= 1");
    }
    // Guard against 0.05 * 20 = 1.0000000000000002 style round-up.
    const auto keep = static_cast<int64_t>(std::ceil(want - 1e-9));
    std::vector<double> scores;
    for (const LogitVolume& v : s.samples()) {
      scores.push_back(ClipMiou(ArgmaxDecode(v), gt[c]));
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());
    for (int64_t i = 0; i < keep; ++i) total += scores[i];
    kept_total += keep;
  }
  return total / static_cast<double>(kept_total);
}

std::string SubsetName(PixelSubset subset) {
  switch (subset) {
    case PixelSubset::kAllNonVoid: return "all_nonvoid";
    case PixelSubset::kMovableOnly: return "movable_only";
    case PixelSubset::kOracleCorrect: return "oracle_correct";
  }
  return "?";
}

std::vector<int64_t> DefaultCurveCheckpoints() {
  return {1, 2, 4, 8, 16, 32, 64, 128};
}

CurveCounts& CurveCounts::operator+=(const CurveCounts& other) {
  if (checkpoints != other.checkpoints) {
    throw std::invalid_argument("CurveCounts: checkpoint lists differ");
  }
  for (size_t s = 0; s < 3; ++s) {
    subset_pixels[s] += other.subset_pixels[s];
    for (size_t i = 0; i < hits[s].size(); ++i) hits[s][i] += other.hits[s][i];
  }
  return *this;
}

DiversityCurve DiversityCurve::FromCounts(const CurveCounts& counts) {
  DiversityCurve curve;
  curve.checkpoints = counts.checkpoints;
  for (size_t s = 0; s < 3; ++s) {
    for (int64_t h : counts.hits[s]) {
      if (counts.subset_pixels[s] == 0) {
        curve.values[s].push_back(std::nullopt);
      } else {
        curve.values[s].push_back(static_cast<double>(h) /
                                  static_cast<double>(counts.subset_pixels[s]));
      }
    }
  }
  return curve;
}

CurveCounts AtLeastOnceCounts(std::span<const SegMap> predictions,
                              const SegMap& gt, const SegMap& oracle_pred,
                              std::span<const int64_t> checkpoints) {
  if (checkpoints.empty()) throw std::invalid_argument("AtLeastOnce: no checkpoints");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      checkpoints.front() < 1) {
    throw std::invalid_argument("AtLeastOnce: checkpoints must be ascending and >= 1");
  }
  if (static_cast<int64_t>(predictions.size()) < checkpoints.back()) {
    throw std::invalid_argument("AtLeastOnce: need " +
                                std::to_string(checkpoints.back()) + " samples, got " +
                                std::to_string(predictions.size()));
  }
  const ClassTable& table = *gt.table();
  const torch::Tensor& g = gt.data();
  torch::Tensor valid = gt.ValidMask();
  torch::Tensor movable = torch::zeros_like(valid);
  for (int id : table.movable_ids()) movable |= g.eq(id);
  std::array<torch::Tensor, 3> subsets = {
      valid, movable, valid & oracle_pred.data().eq(g)};

  CurveCounts counts;
  counts.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  for (size_t s = 0; s < 3; ++s) {
    counts.subset_pixels[s] = subsets[s].sum().item<int64_t>();
  }
  torch::Tensor hit = torch::zeros_like(valid);
  size_t next = 0;
  for (int64_t n = 1; n <= checkpoints.back(); ++n) {
    hit |= predictions[n - 1].data().eq(g);
    while (next < checkpoints.size() && checkpoints[next] == n) {
      for (size_t s = 0; s < 3; ++s) {
        counts.hits[s].push_back((hit & subsets[s]).sum().item<int64_t>());
      }
      ++next;
    }
  }
  return counts;
}

DiversityCurve AtLeastOnceCurve(std::span<const SegMap> predictions,
                                const SegMap& gt, const SegMap& oracle_pred,
                                std::span<const int64_t> checkpoints) {
  return DiversityCurve::FromCounts(
      AtLeastOnceCounts(predictions, gt, oracle_pred, checkpoints));
}

SegMap OraclePredict(Encoder& encoder, Decoder& decoder, const SegMap& frame,
                     int64_t feature_downsample) {
  FeatureMap f = Encode(encoder, frame, feature_downsample);
  return ArgmaxDecode(Decode(decoder, f, frame.table()));
}

SegMap CopyLastBaseline(const SequenceClip& clip, Encoder& encoder,
                        Decoder& decoder, int64_t feature_downsample) {
  return OraclePredict(encoder, decoder, clip.last_input_seg(), feature_downsample);
}

double RegionClassIou(const SegMap& pred, const PixelRect& region, int class_id) {
  torch::Tensor rect = torch::zeros({pred.height(), pred.width()}, torch::kBool);
  rect.slice(0, region.y, region.y + region.height)
      .slice(1, region.x, region.x + region.width)
      .fill_(true);
  torch::Tensor cls = pred.data().eq(class_id);
  const int64_t inter = (rect & cls).sum().item<int64_t>();
  const int64_t uni = (rect | cls).sum().item<int64_t>();
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace mmf
