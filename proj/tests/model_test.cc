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

#include <gtest/gtest.h>

#include <cmath>

#include "mmf/errors.h"
#include "mmf/synth_data.h"
#include "test_support.h"

namespace mmf {
namespace {

ModelConfig Small() {
  ModelConfig c;
  c.feature_channels = 8;
  c.noise_channels = 4;
  c.f2f_width = 8;
  c.disc_width = 8;
  return c;
}

std::vector<FeatureMap> RandomPast(int64_t n, int64_t c, int64_t h, int64_t w) {
  std::vector<FeatureMap> past;
  for (int64_t i = 0; i < n; ++i) past.emplace_back(torch::randn({c, h, w}));
  return past;
}

TEST(ModelConfigTest, Validation) {
  EXPECT_NO_THROW(ModelConfig{}.Validate());
  ModelConfig c;
  c.feature_downsample = 6;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.disc_dropout = 0.3;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.deformable = true;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = Small();
  EXPECT_EQ(ModelConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());
}

TEST(EncoderDecoderTest, Shapes) {
  torch::manual_seed(1);
  const ModelConfig c = Small();
  Encoder enc(c);
  Decoder dec(c);
  auto t = ClassTable::Synthetic();
  const SegMap frame = GenerateClip(ScenarioParams{}, 3).target_frame;
  const FeatureMap f = Encode(enc, frame, c.feature_downsample);
  EXPECT_EQ(f.data().sizes(), (std::vector<int64_t>{8, 8, 16}));
  const LogitVolume l = Decode(dec, f, t);
  EXPECT_EQ(l.data().sizes(), (std::vector<int64_t>{6, 64, 128}));
  EXPECT_EQ(enc->forward(torch::zeros({2, 3, 32, 64})).sizes(),
            (std::vector<int64_t>{2, 8, 4, 8}));
}

TEST(EncoderDecoderTest, RejectsIndivisibleFrames) {
  Encoder enc(Small());
  auto t = ClassTable::Synthetic();
  SegMap odd(torch::zeros({60, 128}, torch::kInt64), t);
  EXPECT_THROW(Encode(enc, odd, 8), ShapeError);
}

TEST(NoiseTest, DeterministicAndDistinct) {
  std::vector<uint64_t> seeds;
  auto a = SampleNoise(4, 5, 6, 42, 32, &seeds);
  auto b = SampleNoise(4, 5, 6, 42);
  ASSERT_EQ(seeds.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(torch::equal(a[i], b[i]));
    EXPECT_TRUE(torch::equal(a[i], NoiseFromSeed(seeds[i], 32, 5, 6)));
    EXPECT_EQ(a[i].sizes(), (std::vector<int64_t>{32, 5, 6}));
    for (int j = 0; j < i; ++j) EXPECT_FALSE(torch::equal(a[i], a[j]));
  }
  EXPECT_FALSE(torch::equal(a[0], SampleNoise(1, 5, 6, 43)[0]));
  // A longer draw extends a shorter one.
  auto more = SampleNoise(6, 5, 6, 42);
  EXPECT_TRUE(torch::equal(more[3], a[3]));
  EXPECT_THROW(SampleNoise(0, 5, 6, 42), std::invalid_argument);
}

TEST(NoiseTest, StandardNormalMoments) {
  torch::Tensor z = NoiseFromSeed(7, 32, 64, 64).to(torch::kFloat64);
  const double n = static_cast<double>(z.numel());
  EXPECT_LT(std::abs(z.mean().item<double>()), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(z.var().item<double>() - 1.0), 5.0 * std::sqrt(2.0 / n));
}

TEST(F2FGeneratorTest, InputChannelsAndShapes) {
  torch::manual_seed(2);
  ModelConfig c;
  F2FGenerator g(c);
  EXPECT_EQ(g->input_channels(), 3 * 64 + 32);
  const auto past = RandomPast(3, 64, 8, 16);
  const FeatureMap out = Forecast(g, past, torch::randn({32, 8, 16}));
  EXPECT_EQ(out.data().sizes(), (std::vector<int64_t>{64, 8, 16}));
  EXPECT_THROW(Forecast(g, RandomPast(2, 64, 8, 16), torch::randn({32, 8, 16})), ShapeError);
  EXPECT_THROW(Forecast(g, past, torch::randn({32, 4, 16})), ShapeError);
}

TEST(F2FGeneratorTest, NoiseChangesOutputAndSeedsReproduce) {
  torch::manual_seed(3);
  const ModelConfig c = Small();
  F2FGenerator g(c);
  Decoder dec(c);
  auto t = ClassTable::Synthetic();
  const auto past = RandomPast(3, 8, 4, 8);
  const FeatureSampleSet a = ForwardKFeatures(g, past, 3, 11, c.noise_channels);
  const FeatureSampleSet b = ForwardKFeatures(g, past, 3, 11, c.noise_channels);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(torch::equal(a[i].data(), b[i].data()));
  EXPECT_FALSE(torch::equal(a[0].data(), a[1].data()));
  const FeatureSampleSet z = ForwardKFeatures(g, past, 3, 11, c.noise_channels, false);
  EXPECT_TRUE(torch::equal(z[0].data(), z[2].data()));
  const LogitSampleSet l = ForwardK(g, dec, past, 2, 11, t, c.noise_channels);
  EXPECT_EQ(l.Stacked().sizes(), (std::vector<int64_t>{2, 6, 32, 64}));
}

TEST(PatchDiscriminatorTest, ScoresInUnitIntervalAndDropoutOnlyInTraining) {
  torch::manual_seed(4);
  const ModelConfig c = Small();
  PatchDiscriminator d(c);
  const auto past = RandomPast(3, 8, 8, 16);
  const FeatureMap cand(torch::randn({8, 8, 16}));
  d->eval();
  const torch::Tensor s1 = Discriminate(d, cand, past);
  const torch::Tensor s2 = Discriminate(d, cand, past);
  EXPECT_TRUE(torch::equal(s1, s2));
  EXPECT_TRUE((s1.gt(0) & s1.lt(1)).all().item<bool>());
  EXPECT_EQ(s1.dim(), 2);

  d->train();
  d->SeedDropout(5);
  const torch::Tensor t1 = Discriminate(d, cand, past);
  const torch::Tensor t2 = Discriminate(d, cand, past);
  EXPECT_FALSE(torch::equal(t1, t2));
  d->SeedDropout(5);
  EXPECT_TRUE(torch::equal(Discriminate(d, cand, past), t1));
  EXPECT_FALSE(torch::equal(t1, s1));
  EXPECT_THROW(Discriminate(d, FeatureMap(torch::randn({8, 4, 16})), past), ShapeError);
}

TEST(StackPastTest, OldestFirst) {
  std::vector<FeatureMap> past = {FeatureMap(torch::zeros({2, 1, 1})),
                                  FeatureMap(torch::ones({2, 1, 1}))};
  const torch::Tensor s = StackPast(past);
  EXPECT_EQ(s.sizes(), (std::vector<int64_t>{4, 1, 1}));
  EXPECT_EQ(s[0][0][0].item<float>(), 0.0f);
  EXPECT_EQ(s[3][0][0].item<float>(), 1.0f);
  EXPECT_THROW(StackPast({}), ShapeError);
}

}  // namespace
}  // namespace mmf
