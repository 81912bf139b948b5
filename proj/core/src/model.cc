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

#include "mmf/model.h"

#include <ATen/CPUGeneratorImpl.h>

#include "mmf/errors.h"
#include "mmf/synth_data.h"

namespace mmf {
namespace {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

int64_t Log2Exact(int64_t v) {
  int64_t n = 0;
  while ((int64_t{1} << n) < v) ++n;
  return (int64_t{1} << n) == v ? n : -1;
}

nn::Conv2d Conv3x3(int64_t in, int64_t out, int64_t stride = 1,
                   int64_t dilation = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3)
                        .stride(stride)
                        .padding(dilation)
                        .dilation(dilation));
}

nn::Conv2d Conv1x1(int64_t in, int64_t out) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 1));
}

constexpr int64_t kPyramidLevels[] = {1, 2, 4};
constexpr int64_t kDilations[] = {1, 2, 4};

}  // namespace

void ModelConfig::Validate() const {
  if (feature_channels < 1) throw ConfigError("model.feature_channels must be >= 1");
  if (Log2Exact(feature_downsample) < 1) {
    throw ConfigError("model.feature_downsample must be a power of two >= 2");
  }
  if (noise_channels < 0) throw ConfigError("model.noise_channels must be >= 0");
  if (k_samples < 1) throw ConfigError("model.k_samples must be >= 1");
  if (f2f_layers < 1) throw ConfigError("model.f2f_layers must be >= 1");
  if (f2f_width < 1 || disc_width < 1) throw ConfigError("model widths must be >= 1");
  if (disc_dropout < 0.5 || disc_dropout > 0.65) {
    throw ConfigError("model.disc_dropout must lie in [0.5, 0.65]");
  }
  if (disc_layers < 0) throw ConfigError("model.disc_layers must be >= 0");
  if (deformable) {
    throw ConfigError("model.deformable = true is not implemented");
  }
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"image_channels", image_channels}, {"num_classes", num_classes},
          {"feature_channels", feature_channels},
          {"feature_downsample", feature_downsample},
          {"noise_channels", noise_channels}, {"k_samples", k_samples},
          {"f2f_layers", f2f_layers}, {"f2f_width", f2f_width},
          {"disc_dropout", disc_dropout}, {"disc_layers", disc_layers},
          {"disc_width", disc_width}, {"deformable", deformable}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.image_channels = j.at("image_channels");
    c.num_classes = j.at("num_classes");
    c.feature_channels = j.at("feature_channels");
    c.feature_downsample = j.at("feature_downsample");
    c.noise_channels = j.at("noise_channels");
    c.k_samples = j.at("k_samples");
    c.f2f_layers = j.at("f2f_layers");
    c.f2f_width = j.at("f2f_width");
    c.disc_dropout = j.at("disc_dropout");
    c.disc_layers = j.at("disc_layers");
    c.disc_width = j.at("disc_width");
    c.deformable = j.at("deformable");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  return c;
}

EncoderImpl::EncoderImpl(const ModelConfig& config) : config_(config) {
  config.Validate();
  stages_ = register_module("stages", nn::ModuleList());
  const int64_t n = Log2Exact(config.feature_downsample);
  int64_t in = config.image_channels;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t out =
        i == n - 1 ? config.feature_channels
                   : std::min(config.feature_channels, int64_t{16} << i);
    stages_->push_back(Conv3x3(in, out, 2));
    in = out;
  }
  pyramid_ = register_module("pyramid", nn::ModuleList());
  const int64_t branch = std::max<int64_t>(1, config.feature_channels / 4);
  for (size_t i = 0; i < std::size(kPyramidLevels); ++i) {
    pyramid_->push_back(Conv1x1(config.feature_channels, branch));
  }
  project_ = register_module(
      "project",
      Conv1x1(config.feature_channels + branch * std::size(kPyramidLevels),
              config.feature_channels));
}

std::vector<torch::Tensor> EncoderImpl::Activations(const torch::Tensor& images) {
  std::vector<torch::Tensor> acts;
  torch::Tensor x = images;
  for (const auto& stage : *stages_) {
    x = torch::relu(stage->as<nn::Conv2d>()->forward(x));
    acts.push_back(x);
  }
  const int64_t h = x.size(2), w = x.size(3);
  std::vector<torch::Tensor> parts = {x};
  for (size_t i = 0; i < std::size(kPyramidLevels); ++i) {
    const int64_t lh = std::min(kPyramidLevels[i], h);
    const int64_t lw = std::min(kPyramidLevels[i], w);
    torch::Tensor p = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({lh, lw}));
    p = torch::relu(pyramid_[i]->as<nn::Conv2d>()->forward(p));
    p = F::interpolate(p, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{h, w})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    parts.push_back(p);
  }
  acts.push_back(project_->forward(torch::cat(parts, 1)));
  return acts;
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& images) {
  return Activations(images).back();
}

DecoderImpl::DecoderImpl(const ModelConfig& config) {
  config.Validate();
  head_ = register_module("head", Conv3x3(config.feature_channels,
                                          config.feature_channels));
  stages_ = register_module("stages", nn::ModuleList());
  int64_t width = config.feature_channels;
  for (int64_t i = 0; i < Log2Exact(config.feature_downsample); ++i) {
    const int64_t out = std::max<int64_t>(16, width / 2);
    stages_->push_back(Conv3x3(width, out));
    width = out;
  }
  classify_ = register_module("classify", Conv1x1(width, config.num_classes));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& features) {
  torch::Tensor x = torch::relu(head_->forward(features));
  for (const auto& stage : *stages_) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    x = torch::relu(stage->as<nn::Conv2d>()->forward(x));
  }
  return classify_->forward(x);
}

F2FGeneratorImpl::F2FGeneratorImpl(const ModelConfig& config, int64_t n_past)
    : n_past_(n_past),
      feature_channels_(config.feature_channels),
      input_channels_(n_past * config.feature_channels + config.noise_channels) {
  config.Validate();
  layers_ = register_module("layers", nn::ModuleList());
  int64_t in = input_channels_;
  for (int64_t i = 0; i < config.f2f_layers; ++i) {
    const int64_t d = kDilations[i % std::size(kDilations)];
    layers_->push_back(Conv3x3(in, config.f2f_width, 1, d));
    in = config.f2f_width;
  }
  out_ = register_module("out", Conv3x3(in, config.feature_channels));
}

torch::Tensor F2FGeneratorImpl::forward(const torch::Tensor& past,
                                        const torch::Tensor& noise) {
  if (past.dim() != 4 || past.size(1) != n_past_ * feature_channels_) {
    throw ShapeError("F2FGenerator: past must be (N, " +
                     std::to_string(n_past_ * feature_channels_) + ", h, w)");
  }
  if (noise.dim() != 4 || noise.size(0) != past.size(0) ||
      noise.size(2) != past.size(2) || noise.size(3) != past.size(3) ||
      past.size(1) + noise.size(1) != input_channels_) {
    throw ShapeError("F2FGenerator: noise not matched to past features");
  }
  torch::Tensor x = torch::cat({past, noise}, 1);
  for (const auto& layer : *layers_) {
    x = torch::relu(layer->as<nn::Conv2d>()->forward(x));
  }
  torch::Tensor last = past.narrow(1, (n_past_ - 1) * feature_channels_,
                                   feature_channels_);
  return last + out_->forward(x);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const ModelConfig& config,
                                               int64_t n_past)
    : dropout_(config.disc_dropout),
      dropout_rng_(at::detail::createCPUGenerator(0)) {
  config.Validate();
  first_ = register_module(
      "first", Conv3x3((n_past + 1) * config.feature_channels, config.disc_width));
  body_ = register_module("body", nn::ModuleList());
  int64_t width = config.disc_width;
  for (int64_t i = 0; i < config.disc_layers; ++i) {
    body_->push_back(Conv3x3(width, width * 2, 2));
    width *= 2;
  }
  out_ = register_module("out", Conv3x3(width, 1));
}

void PatchDiscriminatorImpl::SeedDropout(uint64_t seed) {
  dropout_rng_.set_current_seed(seed);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& candidate,
                                              const torch::Tensor& past) {
  if (candidate.dim() != 4 || past.dim() != 4 ||
      candidate.size(0) != past.size(0) || candidate.size(2) != past.size(2) ||
      candidate.size(3) != past.size(3)) {
    throw ShapeError("PatchDiscriminator: candidate and condition not aligned");
  }
  torch::Tensor x = torch::cat({candidate, past}, 1);
  x = F::leaky_relu(first_->forward(x), F::LeakyReLUFuncOptions().negative_slope(0.2));
  if (is_training() && dropout_ > 0.0) {
    torch::Tensor keep = torch::full_like(x, 1.0 - dropout_);
    torch::Tensor mask = torch::bernoulli(keep, dropout_rng_);
    x = x * mask / (1.0 - dropout_);
  }
  for (const auto& layer : *body_) {
    x = F::leaky_relu(layer->as<nn::Conv2d>()->forward(x),
                      F::LeakyReLUFuncOptions().negative_slope(0.2));
  }
  return out_->forward(x);
}

torch::Tensor PatchDiscriminatorImpl::Scores(const torch::Tensor& candidate,
                                             const torch::Tensor& past) {
  return torch::sigmoid(forward(candidate, past));
}

FeatureMap Encode(Encoder& encoder, const SegMap& frame,
                  int64_t feature_downsample) {
  if (frame.height() % feature_downsample != 0 ||
      frame.width() % feature_downsample != 0) {
    throw ShapeError("Encode: frame " + std::to_string(frame.height()) + "x" +
                     std::to_string(frame.width()) + " not divisible by " +
                     std::to_string(feature_downsample));
  }
  torch::NoGradGuard no_grad;
  torch::Tensor image = RenderImage(frame).unsqueeze(0);
  auto dtype = encoder->parameters().front().scalar_type();
  return FeatureMap(encoder->forward(image.to(dtype)).squeeze(0));
}

LogitVolume Decode(Decoder& decoder, const FeatureMap& feature,
                   ClassTablePtr table) {
  torch::NoGradGuard no_grad;
  return LogitVolume(decoder->forward(feature.data().unsqueeze(0)).squeeze(0),
                     std::move(table));
}

uint64_t NoiseSeed(uint64_t seed, int64_t index) {
  uint64_t x = seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(index + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

torch::Tensor NoiseFromSeed(uint64_t seed, int64_t channels, int64_t height,
                            int64_t width) {
  at::Generator gen = at::detail::createCPUGenerator(seed);
  return torch::randn({channels, height, width}, gen, torch::kFloat32);
}

std::vector<torch::Tensor> SampleNoise(int64_t k, int64_t height, int64_t width,
                                       uint64_t seed, int64_t channels,
                                       std::vector<uint64_t>* seeds_out) {
  if (k < 1) throw std::invalid_argument("SampleNoise: k must be >= 1");
  std::vector<torch::Tensor> out;
  out.reserve(k);
  for (int64_t i = 0; i < k; ++i) {
    const uint64_t s = NoiseSeed(seed, i);
    if (seeds_out) seeds_out->push_back(s);
    out.push_back(NoiseFromSeed(s, channels, height, width));
  }
  return out;
}

torch::Tensor StackPast(std::span<const FeatureMap> past) {
  if (past.empty()) throw ShapeError("StackPast: no past features");
  std::vector<torch::Tensor> parts;
  for (const FeatureMap& f : past) {
    if (!f.data().sizes().equals(past.front().data().sizes())) {
      throw ShapeError("StackPast: past features differ in shape");
    }
    parts.push_back(f.data());
  }
  return torch::cat(parts, 0);
}

FeatureMap Forecast(F2FGenerator& generator, std::span<const FeatureMap> past,
                    const torch::Tensor& noise) {
  if (static_cast<int64_t>(past.size()) != generator->n_past()) {
    throw ShapeError("Forecast: expected " + std::to_string(generator->n_past()) +
                     " past feature maps");
  }
  torch::Tensor p = StackPast(past);
  if (noise.dim() != 3 || noise.size(1) != p.size(1) || noise.size(2) != p.size(2)) {
    throw ShapeError("Forecast: noise not spatially matched to features");
  }
  torch::NoGradGuard no_grad;
  return FeatureMap(generator->forward(p.unsqueeze(0), noise.unsqueeze(0).to(p.dtype()))
                        .squeeze(0));
}

FeatureSampleSet ForwardKFeatures(F2FGenerator& generator,
                                  std::span<const FeatureMap> past, int64_t k,
                                  uint64_t seed, int64_t noise_channels,
                                  bool use_noise) {
  if (static_cast<int64_t>(past.size()) != generator->n_past()) {
    throw ShapeError("ForwardK: expected " + std::to_string(generator->n_past()) +
                     " past feature maps");
  }
  const torch::Tensor p = StackPast(past);
  std::vector<uint64_t> seeds;
  std::vector<torch::Tensor> noise =
      SampleNoise(k, p.size(1), p.size(2), seed, noise_channels, &seeds);
  torch::Tensor z = torch::stack(noise).to(p.dtype());
  if (!use_noise) z.zero_();
  torch::NoGradGuard no_grad;
  torch::Tensor out = generator->forward(p.unsqueeze(0).expand({k, -1, -1, -1}), z);
  std::vector<FeatureMap> samples;
  for (int64_t i = 0; i < k; ++i) samples.emplace_back(out[i]);
  return FeatureSampleSet(std::move(samples), std::move(seeds));
}

LogitSampleSet ForwardK(F2FGenerator& generator, Decoder& decoder,
                        std::span<const FeatureMap> past, int64_t k,
                        uint64_t seed, ClassTablePtr table,
                        int64_t noise_channels, bool use_noise) {
  FeatureSampleSet features =
      ForwardKFeatures(generator, past, k, seed, noise_channels, use_noise);
  torch::NoGradGuard no_grad;
  torch::Tensor logits = decoder->forward(features.Stacked());
  std::vector<LogitVolume> samples;
  for (int64_t i = 0; i < k; ++i) samples.emplace_back(logits[i], table);
  return LogitSampleSet(std::move(samples), features.noise_seeds());
}

torch::Tensor Discriminate(PatchDiscriminator& disc, const FeatureMap& candidate,
                           std::span<const FeatureMap> past) {
  torch::Tensor p = StackPast(past);
  if (candidate.height() != p.size(1) || candidate.width() != p.size(2)) {
    throw ShapeError("Discriminate: candidate and condition not aligned");
  }
  torch::NoGradGuard no_grad;
  return disc->Scores(candidate.data().unsqueeze(0), p.unsqueeze(0)).squeeze(0).squeeze(0);
}

}  // namespace mmf
