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

#ifndef MMF_CORE_TYPES_H_
#define MMF_CORE_TYPES_H_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace mmf {

using Rgb = std::array<uint8_t, 3>;

// Class vocabulary shared by ground truth, predictions and metrics.
//
// Class indices address `names`. The void class is representable in a
// SegMap but owns no logit channel: channel c corresponds to the c-th
// non-void class in index order.
class ClassTable {
 public:
  ClassTable(std::vector<std::string> names, int void_id,
             std::vector<int> movable_ids, std::vector<Rgb> palette);

  // road, sidewalk, building, sky, car, pedestrian + void (index 6).
  static std::shared_ptr<const ClassTable> Synthetic();

  int num_classes() const { return static_cast<int>(names_.size()); }
  // Number of logit channels, i.e. classes excluding void.
  int num_channels() const { return num_classes() - 1; }
  int void_id() const { return void_id_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& movable_ids() const { return movable_ids_; }
  const std::vector<Rgb>& palette() const { return palette_; }

  int ChannelOf(int class_id) const;
  int ClassOf(int channel) const;
  int IdOf(const std::string& name) const;
  // Channel indices of movable classes.
  std::vector<int> MovableChannels() const;

  bool operator==(const ClassTable& other) const;

 private:
  std::vector<std::string> names_;
  int void_id_;
  std::vector<int> movable_ids_;
  std::vector<Rgb> palette_;
};

using ClassTablePtr = std::shared_ptr<const ClassTable>;

// Per-pixel class indices, int64 tensor of shape (H, W). Void allowed.
class SegMap {
 public:
  SegMap(torch::Tensor data, ClassTablePtr table);

  const torch::Tensor& data() const { return data_; }
  const ClassTablePtr& table() const { return table_; }
  int64_t height() const { return data_.size(0); }
  int64_t width() const { return data_.size(1); }
  int64_t at(int64_t y, int64_t x) const;

  // Boolean (H, W) mask of non-void pixels.
  torch::Tensor ValidMask() const;

  bool operator==(const SegMap& other) const;

 private:
  torch::Tensor data_;
  ClassTablePtr table_;
};

// Pre-softmax class scores, floating tensor of shape (C, H, W) where C is
// the non-void class count.
class LogitVolume {
 public:
  LogitVolume(torch::Tensor data, ClassTablePtr table);

  const torch::Tensor& data() const { return data_; }
  const ClassTablePtr& table() const { return table_; }
  int64_t channels() const { return data_.size(0); }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  torch::Tensor data_;
  ClassTablePtr table_;
};

// Convolutional feature grid, float tensor of shape (C_f, H_f, W_f).
class FeatureMap {
 public:
  explicit FeatureMap(torch::Tensor data);

  const torch::Tensor& data() const { return data_; }
  int64_t channels() const { return data_.size(0); }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  torch::Tensor data_;
};

// K forecasts generated from one conditioning input with K noise draws.
template <typename T>
class SampleSet {
 public:
  SampleSet(std::vector<T> samples, std::vector<uint64_t> noise_seeds)
      : samples_(std::move(samples)), noise_seeds_(std::move(noise_seeds)) {
    if (samples_.empty()) throw std::invalid_argument("SampleSet: K must be >= 1");
    if (noise_seeds_.size() != samples_.size()) {
      throw std::invalid_argument("SampleSet: one noise seed per sample");
    }
    for (const T& s : samples_) {
      if (!s.data().sizes().equals(samples_.front().data().sizes())) {
        throw std::invalid_argument("SampleSet: samples differ in shape");
      }
    }
  }

  int64_t size() const { return static_cast<int64_t>(samples_.size()); }
  const T& operator[](int64_t i) const { return samples_.at(i); }
  const std::vector<T>& samples() const { return samples_; }
  const std::vector<uint64_t>& noise_seeds() const { return noise_seeds_; }

  // Samples stacked along a new leading axis: (K, ...).
  torch::Tensor Stacked() const {
    std::vector<torch::Tensor> parts;
    parts.reserve(samples_.size());
    for (const T& s : samples_) parts.push_back(s.data());
    return torch::stack(parts);
  }

 private:
  std::vector<T> samples_;
  std::vector<uint64_t> noise_seeds_;
};

using LogitSampleSet = SampleSet<LogitVolume>;
using FeatureSampleSet = SampleSet<FeatureMap>;

// Per-pixel index of the maximal logit; ties resolve to the lowest class.
SegMap ArgmaxDecode(const LogitVolume& logits);

// (C, H, W) float64 indicator with one 1 per non-void pixel.
torch::Tensor OneHot(const SegMap& seg);

// Argmax over the channel axis of a (C, H, W) or (N, C, H, W) tensor,
// mapped to class indices, with lowest-index tie breaking.
torch::Tensor ArgmaxClasses(const torch::Tensor& logits, const ClassTable& table);

}  // namespace mmf

#endif  // MMF_CORE_TYPES_H_
