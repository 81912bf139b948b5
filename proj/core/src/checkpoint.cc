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

#include "mmf/checkpoint.h"

#include <cstring>

#include "mmf/errors.h"
#include "mmf/io_util.h"

namespace mmf {
namespace {

constexpr char kMagic[8] = {'M', 'M', 'F', 'C', 'K', 'P', 'T', '\0'};

uint32_t DtypeCode(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default: throw std::invalid_argument("checkpoint: unsupported dtype");
  }
}

torch::ScalarType DtypeFromCode(uint32_t code, const std::string& field) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw ParseError("checkpoint: unknown dtype code in '" + field + "'");
  }
}

}  // namespace

const torch::Tensor& Checkpoint::array(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw ParseError("checkpoint: missing array '" + name + "'");
  return it->second;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ByteWriter w;
  w.PutBytes({reinterpret_cast<const uint8_t*>(kMagic), sizeof(kMagic)});
  w.Put<uint32_t>(kCheckpointMajor);
  w.Put<uint32_t>(kCheckpointMinor);
  w.PutString(ckpt.meta.dump());
  w.Put<uint64_t>(ckpt.arrays.size());
  for (const auto& [name, t] : ckpt.arrays) {
    w.PutString(name);
    w.Put<uint32_t>(DtypeCode(t.scalar_type()));
    w.Put<uint32_t>(static_cast<uint32_t>(t.dim()));
    for (int64_t d : t.sizes()) w.Put<int64_t>(d);
    w.PutTensorData(t.detach());
  }
  const uint32_t crc = Crc32(w.bytes());
  w.Put<uint32_t>(crc);
  // Write-then-rename so an interrupted save never clobbers the last good file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  WriteFileBytes(tmp, w.bytes());
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw PreconditionError("checkpoint not found: " + path.string());
  }
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  const std::string source = path.filename().string();
  ByteReader r(bytes, source);
  auto magic = r.GetBytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(source + ": not a checkpoint (bad 'magic')");
  }
  const auto major = r.Get<uint32_t>("major_version");
  r.Get<uint32_t>("minor_version");
  if (major != kCheckpointMajor) {
    throw VersionError(source + ": checkpoint major version " +
                       std::to_string(major) + " unsupported (expected " +
                       std::to_string(kCheckpointMajor) + ")");
  }
  if (bytes.size() < sizeof(uint32_t)) throw ParseError(source + ": truncated");
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (Crc32({bytes.data(), bytes.size() - 4}) != stored_crc) {
    throw ParseError(source + ": checksum mismatch (file corrupt or truncated)");
  }
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(r.GetString("meta"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": field 'meta': " + e.what());
  }
  const auto n = r.Get<uint64_t>("array_count");
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = r.GetString("array_name");
    const auto dtype = DtypeFromCode(r.Get<uint32_t>(name + ".dtype"), name);
    const auto ndim = r.Get<uint32_t>(name + ".ndim");
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = r.Get<int64_t>(name + ".shape");
    ckpt.arrays[name] = r.GetTensorData(dtype, shape, name);
  }
  return ckpt;
}

std::string CheckpointHash(const std::filesystem::path& path) {
  return Hex32(Crc32(ReadFileBytes(path)));
}

void PutModule(Checkpoint& ckpt, const std::string& prefix,
               const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters()) {
    ckpt.arrays[prefix + "/" + p.key()] = p.value().detach().clone();
  }
  for (const auto& b : module.named_buffers()) {
    ckpt.arrays[prefix + "/" + b.key()] = b.value().detach().clone();
  }
}

void GetModule(const Checkpoint& ckpt, const std::string& prefix,
               torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& key, torch::Tensor target) {
    const torch::Tensor& src = ckpt.array(prefix + "/" + key);
    if (!src.sizes().equals(target.sizes())) {
      throw ShapeError("checkpoint array '" + prefix + "/" + key +
                       "' has a different shape than the model");
    }
    target.copy_(src);
  };
  for (auto& p : module.named_parameters()) copy(p.key(), p.value());
  for (auto& b : module.named_buffers()) copy(b.key(), b.value());
}

void PutAdamState(Checkpoint& ckpt, const std::string& prefix,
                  torch::optim::Adam& optimizer, const torch::nn::Module& module) {
  auto& state = optimizer.state();
  for (const auto& p : module.named_parameters()) {
    auto it = state.find(p.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
    const std::string base = prefix + "/" + p.key();
    ckpt.arrays[base + "/exp_avg"] = s.exp_avg().clone();
    ckpt.arrays[base + "/exp_avg_sq"] = s.exp_avg_sq().clone();
    ckpt.arrays[base + "/step"] = torch::tensor({s.step()}, torch::kInt64);
  }
}

void GetAdamState(const Checkpoint& ckpt, const std::string& prefix,
                  torch::optim::Adam& optimizer, const torch::nn::Module& module) {
  auto& state = optimizer.state();
  for (const auto& p : module.named_parameters()) {
    const std::string base = prefix + "/" + p.key();
    if (!ckpt.arrays.count(base + "/exp_avg")) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->exp_avg(ckpt.array(base + "/exp_avg").clone());
    s->exp_avg_sq(ckpt.array(base + "/exp_avg_sq").clone());
    s->step(ckpt.array(base + "/step").item<int64_t>());
    state[p.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace mmf
