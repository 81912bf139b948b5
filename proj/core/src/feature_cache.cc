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

#include "mmf/feature_cache.h"

#include <cstring>

#include <nlohmann/json.hpp>

#include "mmf/errors.h"
#include "mmf/io_util.h"

namespace mmf {
namespace {

constexpr char kMagic[8] = {'M', 'M', 'F', 'F', 'E', 'A', 'T', '1'};

std::string EntryName(int t) {
  return "t" + std::string(t >= 0 ? "+" : "") + std::to_string(t) + ".feat";
}

}  // namespace

void WriteFeatureFile(const std::filesystem::path& path, const FeatureMap& f) {
  torch::Tensor data = f.data().to(torch::kFloat32).contiguous();
  ByteWriter w;
  w.PutBytes({reinterpret_cast<const uint8_t*>(kMagic), sizeof(kMagic)});
  w.Put<uint32_t>(static_cast<uint32_t>(data.dim()));
  for (int64_t d : data.sizes()) w.Put<int64_t>(d);
  w.PutTensorData(data);
  const size_t n = static_cast<size_t>(data.numel()) * sizeof(float);
  w.Put<uint32_t>(Crc32({static_cast<const uint8_t*>(data.data_ptr()), n}));
  WriteFileBytes(path, w.bytes());
}

FeatureMap ReadFeatureFile(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  const std::string source = path.parent_path().filename().string() + "/" +
                             path.filename().string();
  ByteReader r(bytes, source);
  auto magic = r.GetBytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(source + ": not a feature file (bad 'magic')");
  }
  const auto ndim = r.Get<uint32_t>("ndim");
  if (ndim != 3) throw ParseError(source + ": field 'ndim' must be 3");
  std::vector<int64_t> shape(ndim);
  for (auto& d : shape) d = r.Get<int64_t>("shape");
  torch::Tensor data = r.GetTensorData(torch::kFloat32, shape, "data");
  const auto stored = r.Get<uint32_t>("checksum");
  const size_t n = static_cast<size_t>(data.numel()) * sizeof(float);
  if (Crc32({static_cast<const uint8_t*>(data.data_ptr()), n}) != stored) {
    throw ParseError(source + ": checksum mismatch (corrupt cache entry)");
  }
  return FeatureMap(data);
}

FeatureCache FeatureCache::Open(const std::filesystem::path& root,
                                const std::string& encoder_hash) {
  const auto manifest = root / "manifest.json";
  if (!std::filesystem::exists(manifest)) {
    throw PreconditionError("no feature cache at " + root.string() +
                            " (run the oracle stage first)");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFileText(manifest));
    std::string hash = j.at("encoder_hash");
    if (!encoder_hash.empty() && hash != encoder_hash) {
      throw PreconditionError("feature cache at " + root.string() +
                              " was built by encoder " + hash +
                              ", checkpoint is " + encoder_hash);
    }
    return FeatureCache(root, hash, j.at("entries").get<int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cache manifest.json: " + std::string(e.what()));
  }
}

FeatureCache FeatureCache::Build(const std::filesystem::path& dataset_root,
                                 Encoder& encoder, int64_t feature_downsample,
                                 const std::string& encoder_hash,
                                 const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (fs::exists(root)) fs::remove_all(root);
  fs::create_directories(root);
  encoder->eval();
  int64_t entries = 0;
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    ClipStream stream(dataset_root, split);
    while (auto clip = stream.Next()) {
      const fs::path dir = root / SplitName(split) / clip->clip_id;
      fs::create_directories(dir);
      for (size_t i = 0; i < clip->input_frames.size(); ++i) {
        WriteFeatureFile(dir / EntryName(clip->input_times[i]),
                         Encode(encoder, clip->input_frames[i], feature_downsample));
        ++entries;
      }
      WriteFeatureFile(dir / EntryName(clip->target_time),
                       Encode(encoder, clip->target_frame, feature_downsample));
      ++entries;
    }
  }
  nlohmann::json manifest = {{"format", "mmforecast-feature-cache"},
                             {"version", 1},
                             {"encoder_hash", encoder_hash},
                             {"entries", entries}};
  WriteFileText(root / "manifest.json", manifest.dump(2) + "\n");
  return FeatureCache(root, encoder_hash, entries);
}

CachedClip FeatureCache::Load(Split split, const SequenceClip& clip) const {
  return Load(split, clip.clip_id, clip.input_times, clip.target_time);
}

CachedClip FeatureCache::Load(Split split, const std::string& clip_id,
                              const std::vector<int>& input_times,
                              int target_time) const {
  const auto dir = root_ / SplitName(split) / clip_id;
  auto read = [&](int t) {
    const auto path = dir / EntryName(t);
    if (!std::filesystem::exists(path)) {
      throw PreconditionError("feature cache has no entry " + path.string());
    }
    return ReadFeatureFile(path);
  };
  CachedClip out{{}, read(target_time)};
  for (int t : input_times) out.past.push_back(read(t));
  return out;
}

}  // namespace mmf
