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

#ifndef MMF_IO_UTIL_H_
#define MMF_IO_UTIL_H_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace mmf {

uint32_t Crc32(std::span<const uint8_t> bytes);
std::string Hex32(uint32_t value);

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> bytes);
std::string ReadFileText(const std::filesystem::path& path);
void WriteFileText(const std::filesystem::path& path, std::string_view text);

// Gray 8-bit PNG of an (H, W) integer tensor with values in [0, 255].
void WritePngGray(const std::filesystem::path& path, const torch::Tensor& grid);
// Returns an (H, W) int64 tensor. Throws ParseError on malformed input.
torch::Tensor ReadPngGray(const std::filesystem::path& path);
// RGB 8-bit PNG from an (H, W, 3) uint8 tensor.
void WritePngRgb(const std::filesystem::path& path, const torch::Tensor& rgb);

// Little-endian append-only byte buffer for the binary container formats.
class ByteWriter {
 public:
  template <typename T>
  void Put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void PutBytes(std::span<const uint8_t> bytes) {
    bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
  }
  void PutString(std::string_view s) {
    Put<uint64_t>(s.size());
    PutBytes({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
  }
  // Contiguous CPU tensor payload, prefixed with its byte count.
  void PutTensorData(const torch::Tensor& t);

  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

// Bounds-checked reader over a byte span. Every read names the field it is
// reading so truncation errors point at the offending part of the file.
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T Get(std::string_view field) {
    Require(sizeof(T), field);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string GetString(std::string_view field);
  std::span<const uint8_t> GetBytes(size_t n, std::string_view field);
  torch::Tensor GetTensorData(torch::ScalarType dtype,
                              const std::vector<int64_t>& shape,
                              std::string_view field);

  size_t position() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Require(size_t n, std::string_view field) const;

  std::span<const uint8_t> bytes_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace mmf

#endif  // MMF_IO_UTIL_H_
