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

#ifndef MMF_CHECKPOINT_H_
#define MMF_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace mmf {

// Binary container:
//   "MMFCKPT\0" | u32 major | u32 minor | string meta_json | u64 n_arrays |
//   n_arrays x (string name | u32 dtype | u32 ndim | i64 dims[ndim] |
//               u64 nbytes | data) | u32 crc32 of all preceding bytes
// Readers accept any minor version of their own major and ignore unknown
// arrays and metadata keys.
inline constexpr uint32_t kCheckpointMajor = 1;
inline constexpr uint32_t kCheckpointMinor = 0;

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, torch::Tensor> arrays;

  const torch::Tensor& array(const std::string& name) const;
};

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws VersionError on a foreign major version, ParseError on corruption.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Checksum of the checkpoint file bytes; ties caches to an encoder.
std::string CheckpointHash(const std::filesystem::path& path);

// Parameters and buffers as `prefix/<name>` arrays.
void PutModule(Checkpoint& ckpt, const std::string& prefix,
               const torch::nn::Module& module);
void GetModule(const Checkpoint& ckpt, const std::string& prefix,
               torch::nn::Module& module);

// Adam moments and step counts keyed by parameter name.
void PutAdamState(Checkpoint& ckpt, const std::string& prefix,
                  torch::optim::Adam& optimizer, const torch::nn::Module& module);
void GetAdamState(const Checkpoint& ckpt, const std::string& prefix,
                  torch::optim::Adam& optimizer, const torch::nn::Module& module);

}  // namespace mmf

#endif  // MMF_CHECKPOINT_H_
