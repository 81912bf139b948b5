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

#ifndef MMF_MODEL_H_
#define MMF_MODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "mmf/core_types.h"

namespace mmf {

struct ModelConfig {
  int64_t image_channels = 3;
  int64_t num_classes = 6;  // logit channels (non-void classes)
  int64_t feature_channels = 64;
  int64_t feature_downsample = 8;
  int64_t noise_channels = 32;
  int64_t k_samples = 8;
  int64_t f2f_layers = 3;  // dilations cycle through {1, 2, 4}
  int64_t f2f_width = 128;
  double disc_dropout = 0.5;
  int64_t disc_layers = 2;
  int64_t disc_width = 64;
  // Reserved for a deformable-convolution F2F; only false is implemented.
  bool deformable = false;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

// Feature extractor: strided conv stages followed by an average-pool
// pyramid (SPP) and a linear channel projection.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);

  // (N, 3, H, W) -> (N, C_f, H / ds, W / ds)
  torch::Tensor forward(const torch::Tensor& images);
  // Stage activations followed by the final features; used by the
  // perceptual diversity proxy.
  std::vector<torch::Tensor> Activations(const torch::Tensor& images);

 private:
  ModelConfig config_;
  torch::nn::ModuleList stages_{nullptr};
  torch::nn::ModuleList pyramid_{nullptr};
  torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(Encoder);

// Upsampling branch from features to full-resolution logits.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& config);

  // (N, C_f, h, w) -> (N, C, h * ds, w * ds)
  torch::Tensor forward(const torch::Tensor& features);

 private:
  torch::nn::Conv2d head_{nullptr};
  torch::nn::ModuleList stages_{nullptr};
  torch::nn::Conv2d classify_{nullptr};
};
TORCH_MODULE(Decoder);

// Feature-to-feature forecaster. The past features (concatenated along
// channels, oldest first) and a 32-channel noise tensor enter the first
// layer; the network predicts a residual on top of the most recent past.
class F2FGeneratorImpl : public torch::nn::Module {
 public:
  F2FGeneratorImpl(const ModelConfig& config, int64_t n_past = 3);

  // past: (N, n_past * C_f, h, w), noise: (N, noise_channels, h, w).
  torch::Tensor forward(const torch::Tensor& past, const torch::Tensor& noise);

  int64_t n_past() const { return n_past_; }
  int64_t input_channels() const { return input_channels_; }

 private:
  int64_t n_past_;
  int64_t feature_channels_;
  int64_t input_channels_;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(F2FGenerator);

// PatchGAN on features, conditioned on the past by channel concatenation.
// Dropout after the first convolution is active in training mode only and
// draws from the module's own generator.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(const ModelConfig& config, int64_t n_past = 3);

  // Pre-sigmoid patch logits, (N, 1, h', w').
  torch::Tensor forward(const torch::Tensor& candidate, const torch::Tensor& past);
  // Patch scores in (0, 1).
  torch::Tensor Scores(const torch::Tensor& candidate, const torch::Tensor& past);

  void SeedDropout(uint64_t seed);
  double dropout() const { return dropout_; }

 private:
  double dropout_;
  torch::nn::Conv2d first_{nullptr};
  torch::nn::ModuleList body_{nullptr};
  torch::nn::Conv2d out_{nullptr};
  at::Generator dropout_rng_;
};
TORCH_MODULE(PatchDiscriminator);

// ---- Single-clip operations over the value types ----

// Throws ShapeError when the frame does not divide by the downsample factor.
FeatureMap Encode(Encoder& encoder, const SegMap& frame,
                  int64_t feature_downsample);
LogitVolume Decode(Decoder& decoder, const FeatureMap& feature,
                   ClassTablePtr table);

// K i.i.d. standard Gaussian tensors of shape (channels, h, w). Sample i is
// drawn from its own seed, recorded in seeds_out when provided.
std::vector<torch::Tensor> SampleNoise(int64_t k, int64_t height, int64_t width,
                                       uint64_t seed, int64_t channels = 32,
                                       std::vector<uint64_t>* seeds_out = nullptr);
uint64_t NoiseSeed(uint64_t seed, int64_t index);
torch::Tensor NoiseFromSeed(uint64_t seed, int64_t channels, int64_t height,
                            int64_t width);

// Concatenates the past maps along channels, oldest first: (n*C_f, h, w).
torch::Tensor StackPast(std::span<const FeatureMap> past);

FeatureMap Forecast(F2FGenerator& generator, std::span<const FeatureMap> past,
                    const torch::Tensor& noise);

// use_noise = false feeds zeros to every sample (deterministic baseline).
FeatureSampleSet ForwardKFeatures(F2FGenerator& generator,
                                  std::span<const FeatureMap> past, int64_t k,
                                  uint64_t seed, int64_t noise_channels = 32,
                                  bool use_noise = true);
LogitSampleSet ForwardK(F2FGenerator& generator, Decoder& decoder,
                        std::span<const FeatureMap> past, int64_t k,
                        uint64_t seed, ClassTablePtr table,
                        int64_t noise_channels = 32, bool use_noise = true);

// Patch score grid (h', w') in (0, 1) for one candidate future.
torch::Tensor Discriminate(PatchDiscriminator& disc, const FeatureMap& candidate,
                           std::span<const FeatureMap> past);

}  // namespace mmf

#endif  // MMF_MODEL_H_
