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

#ifndef MMF_SYNTH_DATA_H_
#define MMF_SYNTH_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmf/core_types.h"

namespace mmf {

// Procedural scene parameters. Timesteps are relative to the current
// moment t: inputs at t - stride * n, ..., t - stride, target at t + horizon.
struct ScenarioParams {
  int64_t height = 64;
  int64_t width = 128;
  int n_input_frames = 3;
  int input_stride = 3;
  int horizon = 3;
  double p_mode = 0.5;
  // Occluder displacement in pixels per timestep.
  double occluder_speed = 4.0;
  uint64_t rng_seed = 0;

  // Throws ConfigError on invalid values.
  void Validate() const;
  nlohmann::json ToJson() const;
  static ScenarioParams FromJson(const nlohmann::json& j);
  // Checksum of the canonical JSON form.
  std::string Hash() const;
};

struct PixelRect {
  int64_t y = 0;
  int64_t x = 0;
  int64_t height = 0;
  int64_t width = 0;

  int64_t area() const { return height * width; }
  bool operator==(const PixelRect&) const = default;
};

enum class Mode { kClearRoad, kPedestrianRevealed };

std::string ModeName(Mode mode);
Mode ParseMode(const std::string& name);

struct ModeDescriptor {
  Mode mode = Mode::kClearRoad;
  // Region occluded by the car in every input frame and uncovered by the
  // target time.
  PixelRect revealed_region;
};

struct SequenceClip {
  std::vector<SegMap> input_frames;
  SegMap target_frame;
  ModeDescriptor mode;
  std::string clip_id;
  uint64_t seed = 0;
  // Relative to t, e.g. {-9, -6, -3}.
  std::vector<int> input_times;
  int target_time = 0;

  // Segmentation at t - stride, the copy-last baseline's source frame.
  const SegMap& last_input_seg() const { return input_frames.back(); }
};

// Deterministic in (params, seed). The latent mode is drawn from a stream
// independent of the scene layout, so the past is identical across modes.
SequenceClip GenerateClip(const ScenarioParams& params, uint64_t seed);

// Both futures of one past: first is clear road, second has pedestrians.
std::pair<SequenceClip, SequenceClip> GenerateCounterfactualPair(
    const ScenarioParams& params, uint64_t seed);

// Seeds for held-out counterfactual evaluation, disjoint from every split.
uint64_t CounterfactualSeed(uint64_t index);

// Rendered network input for a segmentation frame: (3, H, W) float in
// [0, 1] holding the class palette colors.
torch::Tensor RenderImage(const SegMap& seg);

enum class Split { kTrain, kVal, kTest };
std::string SplitName(Split split);
Split ParseSplit(const std::string& name);
uint64_t SplitSeed(Split split, uint64_t index);

struct DatasetManifest {
  ScenarioParams params;
  int64_t n_train = 0;
  int64_t n_val = 0;
  int64_t n_test = 0;

  int64_t count(Split split) const;
  nlohmann::json ToJson() const;
  static DatasetManifest FromJson(const nlohmann::json& j);
};

// Writes root/{train,val,test}/clip_<id>/frame_<t>.png + clip.json and
// root/manifest.json. Refuses a non-empty root unless overwrite is set.
DatasetManifest WriteDataset(const ScenarioParams& params, int64_t n_train,
                             int64_t n_val, int64_t n_test,
                             const std::filesystem::path& root,
                             bool overwrite = false);

DatasetManifest ReadManifest(const std::filesystem::path& root);

void WriteClip(const SequenceClip& clip, const ScenarioParams& params,
               const std::filesystem::path& dir);
SequenceClip LoadClip(const std::filesystem::path& dir);

// Streams the clips of one split in clip-id order.
class ClipStream {
 public:
  ClipStream(const std::filesystem::path& root, Split split);

  std::optional<SequenceClip> Next();
  size_t size() const { return dirs_.size(); }

 private:
  std::vector<std::filesystem::path> dirs_;
  size_t next_ = 0;
};

std::vector<SequenceClip> LoadSplit(const std::filesystem::path& root,
                                    Split split);

}  // namespace mmf

#endif  // MMF_SYNTH_DATA_H_
