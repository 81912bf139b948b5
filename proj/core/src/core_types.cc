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

#include "mmf/core_types.h"

#include <algorithm>
#include <set>

#include "mmf/errors.h"

namespace mmf {

ClassTable::ClassTable(std::vector<std::string> names, int void_id,
                       std::vector<int> movable_ids, std::vector<Rgb> palette)
    : names_(std::move(names)),
      void_id_(void_id),
      movable_ids_(std::move(movable_ids)),
      palette_(std::move(palette)) {
  if (void_id_ < 0 || void_id_ >= num_classes()) {
    throw ConfigError("ClassTable: void_id out of range");
  }
  if (num_channels() < 2) {
    throw ConfigError("ClassTable: need at least two non-void classes");
  }
  for (int id : movable_ids_) {
    if (id < 0 || id >= num_classes() || id == void_id_) {
      throw ConfigError("ClassTable: movable id " + std::to_string(id) +
                        " is void or out of range");
    }
  }
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) {
    throw ConfigError("ClassTable: duplicate class names");
  }
  if (palette_.size() != names_.size()) {
    throw ConfigError("ClassTable: palette needs one color per class");
  }
}

std::shared_ptr<const ClassTable> ClassTable::Synthetic() {
  static const auto kTable = std::make_shared<const ClassTable>(
      std::vector<std::string>{"road", "sidewalk", "building", "sky", "car",
                               "pedestrian", "void"},
      6, std::vector<int>{4, 5},
      // Cityscapes-like colors for the analog classes; void is black.
      std::vector<Rgb>{{128, 64, 128},
                       {244, 35, 232},
                       {70, 70, 70},
                       {70, 130, 180},
                       {0, 0, 142},
                       {220, 20, 60},
                       {0, 0, 0}});
  return kTable;
}

int ClassTable::ChannelOf(int class_id) const {
  if (class_id < 0 || class_id >= num_classes() || class_id == void_id_) {
    throw std::out_of_range("ClassTable::ChannelOf: no channel for class " +
                            std::to_string(class_id));
  }
  return class_id < void_id_ ? class_id : class_id - 1;
}

int ClassTable::ClassOf(int channel) const {
  if (channel < 0 || channel >= num_channels()) {
    throw std::out_of_range("ClassTable::ClassOf: channel out of range");
  }
  return channel < void_id_ ? channel : channel + 1;
}

int ClassTable::IdOf(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown class " + name);
  return static_cast<int>(it - names_.begin());
}

std::vector<int> ClassTable::MovableChannels() const {
  std::vector<int> out;
  for (int id : movable_ids_) out.push_back(ChannelOf(id));
  return out;
}

bool ClassTable::operator==(const ClassTable& other) const {
  return names_ == other.names_ && void_id_ == other.void_id_ &&
         movable_ids_ == other.movable_ids_ && palette_ == other.palette_;
}

SegMap::SegMap(torch::Tensor data, ClassTablePtr table)
    : data_(data.to(torch::kInt64).contiguous()), table_(std::move(table)) {
  if (!table_) throw std::invalid_argument("SegMap: null class table");
  if (data_.dim() != 2) throw ShapeError("SegMap: expected (H, W) grid");
  if (data_.numel() > 0) {
    const int64_t lo = data_.min().item<int64_t>();
    const int64_t hi = data_.max().item<int64_t>();
    if (lo < 0 || hi >= table_->num_classes()) {
      throw std::invalid_argument("SegMap: class index out of range");
    }
  }
}

int64_t SegMap::at(int64_t y, int64_t x) const {
  return data_.accessor<int64_t, 2>()[y][x];
}

torch::Tensor SegMap::ValidMask() const { return data_.ne(table_->void_id()); }

bool SegMap::operator==(const SegMap& other) const {
  return *table_ == *other.table_ && data_.sizes() == other.data_.sizes() &&
         torch::equal(data_, other.data_);
}

LogitVolume::LogitVolume(torch::Tensor data, ClassTablePtr table)
    : data_(std::move(data)), table_(std::move(table)) {
  if (!table_) throw std::invalid_argument("LogitVolume: null class table");
  if (data_.dim() != 3) throw ShapeError("LogitVolume: expected (C, H, W)");
  if (data_.size(0) != table_->num_channels()) {
    throw ShapeError("LogitVolume: channel count " +
                     std::to_string(data_.size(0)) + " != non-void classes " +
                     std::to_string(table_->num_channels()));
  }
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw std::invalid_argument("LogitVolume: non-finite value");
  }
}

FeatureMap::FeatureMap(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 3) throw ShapeError("FeatureMap: expected (C, H, W)");
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw std::invalid_argument("FeatureMap: non-finite value");
  }
}

torch::Tensor ArgmaxClasses(const torch::Tensor& logits,
                            const ClassTable& table) {
  const int64_t channel_dim = logits.dim() - 3;
  // torch::argmax returns the first maximal index.
  torch::Tensor channel = logits.argmax(channel_dim);
  // Channels at or above the void slot shift up by one class index.
  return channel + channel.ge(table.void_id()).to(torch::kInt64);
}

SegMap ArgmaxDecode(const LogitVolume& logits) {
  return SegMap(ArgmaxClasses(logits.data(), *logits.table()), logits.table());
}

torch::Tensor OneHot(const SegMap& seg) {
  const ClassTable& table = *seg.table();
  torch::Tensor out = torch::zeros(
      {table.num_channels(), seg.height(), seg.width()}, torch::kFloat64);
  for (int c = 0; c < table.num_channels(); ++c) {
    out[c] = seg.data().eq(table.ClassOf(c)).to(torch::kFloat64);
  }
  return out;
}

}  // namespace mmf
