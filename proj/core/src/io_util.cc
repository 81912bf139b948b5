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

#include "mmf/io_util.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <png.h>
#include <zlib.h>

#include "mmf/errors.h"

namespace mmf {

uint32_t Crc32(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  size_t offset = 0;
  while (offset < bytes.size()) {
    const size_t n = std::min<size_t>(bytes.size() - offset, 1u << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<uint32_t>(crc);
}

std::string Hex32(uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", value);
  return buf;
}

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

std::string ReadFileText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileText(const std::filesystem::path& path, std::string_view text) {
  WriteFileBytes(path, {reinterpret_cast<const uint8_t*>(text.data()),
                        text.size()});
}

namespace {

void WritePng(const std::filesystem::path& path, const torch::Tensor& pixels,
              int64_t height, int64_t width, uint32_t format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  torch::Tensor bytes = pixels.to(torch::kUInt8).contiguous();
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0,
                                 bytes.data_ptr<uint8_t>(), 0, nullptr)) {
    throw Error("png sizing failed for " + path.string() + ": " +
                image.message);
  }
  std::vector<uint8_t> buffer(size);
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0,
                                 bytes.data_ptr<uint8_t>(), 0, nullptr)) {
    throw Error("png encoding failed for " + path.string() + ": " +
                image.message);
  }
  buffer.resize(size);
  WriteFileBytes(path, buffer);
}

}  // namespace

void WritePngGray(const std::filesystem::path& path, const torch::Tensor& grid) {
  if (grid.dim() != 2) throw ShapeError("WritePngGray: expected (H, W)");
  if (grid.numel() > 0 &&
      (grid.min().item<int64_t>() < 0 || grid.max().item<int64_t>() > 255)) {
    throw std::invalid_argument("WritePngGray: values outside [0, 255]");
  }
  WritePng(path, grid, grid.size(0), grid.size(1), PNG_FORMAT_GRAY);
}

void WritePngRgb(const std::filesystem::path& path, const torch::Tensor& rgb) {
  if (rgb.dim() != 3 || rgb.size(2) != 3) {
    throw ShapeError("WritePngRgb: expected (H, W, 3)");
  }
  WritePng(path, rgb, rgb.size(0), rgb.size(1), PNG_FORMAT_RGB);
}

torch::Tensor ReadPngGray(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = ReadFileBytes(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ParseError(path.filename().string() + ": png header: " +
                     image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  torch::Tensor out = torch::empty(
      {static_cast<int64_t>(image.height), static_cast<int64_t>(image.width)},
      torch::kUInt8);
  if (!png_image_finish_read(&image, nullptr, out.data_ptr<uint8_t>(), 0,
                             nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw ParseError(path.filename().string() + ": png pixel data: " +
                     message);
  }
  return out.to(torch::kInt64);
}

void ByteWriter::PutTensorData(const torch::Tensor& t) {
  torch::Tensor c = t.contiguous().cpu();
  const size_t n = static_cast<size_t>(c.numel()) * c.element_size();
  Put<uint64_t>(n);
  PutBytes({static_cast<const uint8_t*>(c.data_ptr()), n});
}

void ByteReader::Require(size_t n, std::string_view field) const {
  if (bytes_.size() - pos_ < n) {
    throw ParseError(source_ + ": truncated while reading '" +
                     std::string(field) + "'");
  }
}

std::string ByteReader::GetString(std::string_view field) {
  const auto n = Get<uint64_t>(field);
  auto span = GetBytes(n, field);
  return {reinterpret_cast<const char*>(span.data()), span.size()};
}

std::span<const uint8_t> ByteReader::GetBytes(size_t n,
                                              std::string_view field) {
  Require(n, field);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

torch::Tensor ByteReader::GetTensorData(torch::ScalarType dtype,
                                        const std::vector<int64_t>& shape,
                                        std::string_view field) {
  const auto n = Get<uint64_t>(field);
  torch::Tensor out = torch::empty(shape, dtype);
  const size_t expected = static_cast<size_t>(out.numel()) * out.element_size();
  if (n != expected) {
    throw ParseError(source_ + ": '" + std::string(field) + "' holds " +
                     std::to_string(n) + " bytes, shape needs " +
                     std::to_string(expected));
  }
  auto span = GetBytes(n, field);
  std::memcpy(out.data_ptr(), span.data(), n);
  return out;
}

}  // namespace mmf
