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

#ifndef MMF_FEATURE_CACHE_H_
#define MMF_FEATURE_CACHE_H_

#include <filesystem>
#include <string>
#include <vector>

#include "mmf/core_types.h"
#include "mmf/model.h"
#include "mmf/synth_data.h"

namespace mmf {

// Encoded features of every input and target frame, stored per
// (clip, timestep) as `<root>/<split>/<clip_id>/t<time>.feat`:
//   "MMFFEAT1" | u32 ndim | i64 dims[ndim] | u64 nbytes | f32 data | u32 crc32
// `<root>/manifest.json` records the encoder checkpoint hash.
struct CachedClip {
  std::vector<FeatureMap> past;
  FeatureMap target;
};

void WriteFeatureFile(const std::filesystem::path& path, const FeatureMap& f);
// Throws ParseError on a bad header or checksum mismatch.
FeatureMap ReadFeatureFile(const std::filesystem::path& path);

class FeatureCache {
 public:
  // Opens an existing cache; throws PreconditionError when it is missing or
  // was built by a different encoder than `encoder_hash` (empty = any).
  static FeatureCache Open(const std::filesystem::path& root,
                           const std::string& encoder_hash = "");

  // Encodes every clip of every split present under dataset_root.
  static FeatureCache Build(const std::filesystem::path& dataset_root,
                            Encoder& encoder, int64_t feature_downsample,
                            const std::string& encoder_hash,
                            const std::filesystem::path& root);

  CachedClip Load(Split split, const SequenceClip& clip) const;
  CachedClip Load(Split split, const std::string& clip_id,
                  const std::vector<int>& input_times, int target_time) const;

  const std::string& encoder_hash() const { return encoder_hash_; }
  int64_t entries() const { return entries_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  FeatureCache(std::filesystem::path root, std::string hash, int64_t entries)
      : root_(std::move(root)), encoder_hash_(std::move(hash)), entries_(entries) {}

  std::filesystem::path root_;
  std::string encoder_hash_;
  int64_t entries_ = 0;
};

}  // namespace mmf

#endif  // MMF_FEATURE_CACHE_H_
