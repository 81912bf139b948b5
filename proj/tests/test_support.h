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

#ifndef MMF_TESTS_TEST_SUPPORT_H_
#define MMF_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include <unistd.h>

#include "mmf/config.h"
#include "mmf/core_types.h"

namespace mmf::testing {

// Small counter-based generator for property tests. Independent of the
// library's own RNG so generated inputs never share a code path with it.
class Gen {
 public:
  explicit Gen(uint64_t seed) : state_(seed * 0x9e3779b97f4a7c15ULL + 1) {}

  uint64_t Next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }
  double Real(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  int64_t Int(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(Next() % static_cast<uint64_t>(hi - lo + 1));
  }
  double Normal() {
    const double u1 = std::max(Uniform(), 1e-300), u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::vector<double> Normals(size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * Normal();
    return v;
  }

  // float64 tensor of i.i.d. normals, filled element by element.
  torch::Tensor Tensor(std::vector<int64_t> shape, double scale = 1.0) {
    torch::Tensor t = torch::empty(shape, torch::kFloat64);
    double* p = t.data_ptr<double>();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = scale * Normal();
    return t;
  }

  // Class-index grid; each pixel is void with probability void_prob.
  SegMap Seg(int64_t h, int64_t w, const ClassTablePtr& table, double void_prob = 0.1) {
    torch::Tensor t = torch::empty({h, w}, torch::kInt64);
    int64_t* p = t.data_ptr<int64_t>();
    for (int64_t i = 0; i < h * w; ++i) {
      if (Uniform() < void_prob) {
        p[i] = table->void_id();
      } else {
        int64_t c = Int(0, table->num_channels() - 1);
        p[i] = table->ClassOf(static_cast<int>(c));
      }
    }
    return SegMap(t, table);
  }

 private:
  uint64_t state_;
};

inline double RelErr(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::max(std::abs(want), 1e-12));
}

// Two-class-plus-void table for hand-checked examples.
inline ClassTablePtr TinyTable() {
  return std::make_shared<const ClassTable>(
      std::vector<std::string>{"a", "b", "void"}, 2, std::vector<int>{1},
      std::vector<Rgb>{{255, 0, 0}, {0, 255, 0}, {0, 0, 0}});
}

// A complete pipeline configuration small enough to train in seconds.
inline RunConfig TinyConfig(const std::filesystem::path& root) {
  RunConfig c;
  c.Set("data.height", "32");
  c.Set("data.width", "64");
  c.Set("data.occluder_speed", "2");
  c.Set("data.n_train", "6");
  c.Set("data.n_val", "3");
  c.Set("data.n_test", "3");
  c.Set("model.feature_channels", "8");
  c.Set("model.noise_channels", "4");
  c.Set("model.k_samples", "3");
  c.Set("model.f2f_width", "8");
  c.Set("model.disc_width", "8");
  c.Set("train.oracle_epochs", "2");
  c.Set("train.oracle_batch_size", "4");
  c.Set("train.epochs", "3");
  c.Set("train.batch_size", "2");
  c.Set("train.val_k", "2");
  c.Set("eval.k", "3");
  c.Set("eval.curve_k", "4");
  c.Set("eval.top_k", "4");
  c.Set("eval.top_fraction", "0.25");
  c.Set("eval.n_counterfactual", "2");
  c.Set("paths.data", (root / "data").string());
  c.Set("paths.oracle_dir", (root / "oracle").string());
  c.Validate();
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mmf_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace mmf::testing

#endif  // MMF_TESTS_TEST_SUPPORT_H_
