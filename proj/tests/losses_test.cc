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

#include "mmf/losses.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mmf/errors.h"
#include "test_support.h"

namespace mmf {
namespace {

using testing::Gen;
using testing::RelErr;

std::vector<double> Flat(const torch::Tensor& t) {
  torch::Tensor c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

// Two-pass mean and unbiased variance over the leading axis of (K, N) data.
void TwoPass(const std::vector<double>& x, int64_t k, int64_t n, std::vector<double>& mean,
             std::vector<double>& var) {
  mean.assign(n, 0.0);
  var.assign(n, 0.0);
  for (int64_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < k; ++i) s += x[i * n + j];
    mean[j] = s / static_cast<double>(k);
    double ss = 0.0;
    for (int64_t i = 0; i < k; ++i) ss += (x[i * n + j] - mean[j]) * (x[i * n + j] - mean[j]);
    var[j] = k > 1 ? ss / static_cast<double>(k - 1) : 0.0;
  }
}

TEST(SampleMomentsTest, HandExamples) {
  torch::Tensor same = torch::full({4, 3}, 2.5, torch::kFloat64);
  MomentPair m = SampleMoments(same);
  EXPECT_TRUE(torch::allclose(m.mean, torch::full({3}, 2.5, torch::kFloat64)));
  EXPECT_EQ(m.var.abs().max().item<double>(), 0.0);

  MomentPair two = SampleMoments(torch::tensor({0.0, 2.0}, torch::kFloat64));
  EXPECT_EQ(two.mean.item<double>(), 1.0);
  EXPECT_EQ(two.var.item<double>(), 2.0);
}

TEST(SampleMomentsTest, SingleSampleVarianceIsAnError) {
  torch::Tensor one = torch::ones({1, 5}, torch::kFloat64);
  EXPECT_THROW(SampleMoments(one, 0, true), std::invalid_argument);
  MomentPair m = SampleMoments(one, 0, false);
  EXPECT_FALSE(m.var.defined());
  EXPECT_TRUE(torch::equal(m.mean, torch::ones({5}, torch::kFloat64)));
}

TEST(SampleMomentsTest, MatchesTwoPassOracle) {
  Gen g(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t k = g.Int(2, 9), n = g.Int(1, 30);
    torch::Tensor x = g.Tensor({k, n}, g.Real(0.1, 10.0));
    std::vector<double> mean, var;
    TwoPass(Flat(x), k, n, mean, var);
    MomentPair m = SampleMoments(x);
    auto gm = Flat(m.mean), gv = Flat(m.var);
    for (int64_t j = 0; j < n; ++j) {
      ASSERT_LT(std::abs(gm[j] - mean[j]), 1e-10 * std::max(1.0, std::abs(mean[j])));
      ASSERT_LT(std::abs(gv[j] - var[j]), 1e-10 * std::max(1.0, std::abs(var[j])));
    }
  }
}

TEST(SampleMomentsTest, MomentsAlongInnerAxisMatchLeadingAxis) {
  Gen g(22);
  torch::Tensor x = g.Tensor({3, 5, 4, 2});
  MomentPair inner = SampleMoments(x, 1);
  MomentPair lead = SampleMoments(x.transpose(0, 1).contiguous(), 0);
  EXPECT_TRUE(torch::allclose(inner.mean, lead.mean, 0, 1e-14));
  EXPECT_TRUE(torch::allclose(inner.var, lead.var, 0, 1e-14));
}

TEST(Mr2LossTest, SpotValues) {
  torch::Tensor y = torch::full({3, 4}, 1.5, torch::kFloat64);
  MomentPair at_mean{y.clone(), torch::ones({3, 4}, torch::kFloat64)};
  EXPECT_EQ(Mr2Loss(y, at_mean).item<double>(), 0.0);
  MomentPair off_by_one{y - 1.0, torch::ones({3, 4}, torch::kFloat64)};
  EXPECT_EQ(Mr2Loss(y, off_by_one).item<double>(), 0.5);
}

TEST(Mr2LossTest, MatchesElementwiseOracle) {
  Gen g(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = g.Int(1, 40);
    const double floor = trial % 2 ? 1e-4 : 0.3;
    torch::Tensor y = g.Tensor({n}), mu = g.Tensor({n});
    torch::Tensor var = g.Tensor({n}).abs() * g.Real(0.01, 3.0);
    const double got = Mr2Loss(y, {mu, var}, floor).item<double>();
    auto fy = Flat(y), fm = Flat(mu), fv = Flat(var);
    double want = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double v = std::max(fv[i], floor);
      want += (fy[i] - fm[i]) * (fy[i] - fm[i]) / (2.0 * v) + 0.5 * std::log(v);
    }
    want /= static_cast<double>(n);
    ASSERT_LT(RelErr(got, want), 1e-10) << "trial " << trial;
  }
}

TEST(Mr2LossTest, MinimizedAtTargetForFixedVariance) {
  Gen g(24);
  for (int trial = 0; trial < 20; ++trial) {
    torch::Tensor y = g.Tensor({6});
    torch::Tensor var = g.Tensor({6}).abs() + 0.1;
    const double at = Mr2Loss(y, {y.clone(), var}).item<double>();
    for (double h : {1e-3, -1e-3, 0.5, -0.5}) {
      EXPECT_GT(Mr2Loss(y, {y + h, var}).item<double>(), at);
    }
  }
}

TEST(Mr2LossTest, MeanGradientSpotValue) {
  torch::Tensor y = torch::ones({5}, torch::kFloat64);
  torch::Tensor mu = torch::zeros({5}, torch::kFloat64).requires_grad_(true);
  Mr2Loss(y, {mu, torch::ones({5}, torch::kFloat64)}).backward();
  // d/dmu of mean((y - mu)^2 / 2) is -(y - mu) / n per element.
  EXPECT_TRUE(torch::allclose(mu.grad(), torch::full({5}, -1.0 / 5, torch::kFloat64)));
}

TEST(Mr2LossTest, RequiresVarianceAndMatchingShapes) {
  torch::Tensor y = torch::zeros({3}, torch::kFloat64);
  EXPECT_THROW(Mr2Loss(y, {y, {}}), std::invalid_argument);
  EXPECT_THROW(Mr2Loss(y, {torch::zeros({4}, torch::kFloat64), torch::ones({4}, torch::kFloat64)}),
               ShapeError);
}

TEST(Mr1LossTest, ExamplesAndIdentity) {
  torch::Tensor y = torch::full({2, 3}, 4.0, torch::kFloat64);
  EXPECT_EQ(Mr1Loss(y, {y.clone(), {}}).item<double>(), 0.0);
  EXPECT_EQ(Mr1Loss(y, {y - 2.0, {}}).item<double>(), 4.0);
  Gen g(25);
  for (int trial = 0; trial < 100; ++trial) {
    torch::Tensor t = g.Tensor({7}), mu = g.Tensor({7});
    torch::Tensor ones = torch::ones({7}, torch::kFloat64);
    const double mr1 = Mr1Loss(t, {mu, ones}).item<double>();
    // With unit variance the log term vanishes, leaving half the squared error.
    EXPECT_LT(RelErr(mr1, 2.0 * Mr2Loss(t, {mu, ones}).item<double>()), 1e-12);
    // Independent of the variance.
    EXPECT_EQ(mr1, Mr1Loss(t, {mu, g.Tensor({7}).abs()}).item<double>());
  }
  EXPECT_THROW(Mr1Loss(y, {torch::zeros({3}, torch::kFloat64), {}}), ShapeError);
}

TEST(GanLossTest, Examples) {
  torch::Tensor half = torch::full({2, 1, 3, 3}, 0.5, torch::kFloat64);
  EXPECT_NEAR(GanLossD(half, half).item<double>(), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(GanLossG(torch::ones({4}, torch::kFloat64)).item<double>(), 0.0, 1e-6);
  const double perfect = GanLossD(torch::ones({4}, torch::kFloat64),
                                  torch::zeros({4}, torch::kFloat64)).item<double>();
  EXPECT_NEAR(perfect, 0.0, 1e-6);
  // Clamping keeps the loss finite at saturated scores.
  EXPECT_TRUE(std::isfinite(GanLossG(torch::zeros({4}, torch::kFloat64)).item<double>()));
}

TEST(GanLossTest, MatchesOracleAndIsPermutationInvariant) {
  Gen g(26);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = g.Int(1, 30), m = g.Int(1, 30);
    torch::Tensor real = torch::rand({n}, torch::kFloat64) * 0.98 + 0.01;
    torch::Tensor fake = torch::rand({m}, torch::kFloat64) * 0.98 + 0.01;
    auto fr = Flat(real), ff = Flat(fake);
    double lr = 0.0, lf = 0.0, lg = 0.0;
    for (double r : fr) lr += std::log(r);
    for (double f : ff) {
      lf += std::log(1.0 - f);
      lg += std::log(f);
    }
    const double d_want = -lr / n - lf / m, g_want = -lg / m;
    ASSERT_LT(RelErr(GanLossD(real, fake).item<double>(), d_want), 1e-10);
    ASSERT_LT(RelErr(GanLossG(fake).item<double>(), g_want), 1e-10);
    torch::Tensor perm = torch::randperm(m);
    ASSERT_LT(RelErr(GanLossG(fake.index({perm})).item<double>(), g_want), 1e-12);
  }
}

TEST(CrossEntropySegTest, UniformAndConfidentLogits) {
  auto t = ClassTable::Synthetic();
  Gen g(27);
  const SegMap gt = g.Seg(5, 6, t, 0.2);
  EXPECT_NEAR(CrossEntropySeg(LogitVolume(torch::zeros({6, 5, 6}, torch::kFloat64), t), gt)
                  .item<double>(),
              std::log(6.0), 1e-12);
  torch::Tensor confident = OneHot(gt) * 60.0;
  EXPECT_LT(CrossEntropySeg(LogitVolume(confident, t), gt).item<double>(), 1e-20);
}

TEST(CrossEntropySegTest, MatchesSoftmaxOracleAndIgnoresVoid) {
  auto t = ClassTable::Synthetic();
  Gen g(28);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t h = g.Int(1, 6), w = g.Int(1, 6);
    SegMap gt = g.Seg(h, w, t, 0.3);
    if (!gt.ValidMask().any().item<bool>()) continue;
    torch::Tensor x = g.Tensor({6, h, w}, 3.0);
    auto acc = x.accessor<double, 3>();
    double total = 0.0;
    int64_t count = 0;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) {
        const int64_t cls = gt.at(y, xx);
        if (cls == t->void_id()) continue;
        double z = 0.0;
        for (int c = 0; c < 6; ++c) z += std::exp(acc[c][y][xx]);
        total += -(acc[t->ChannelOf(static_cast<int>(cls))][y][xx] - std::log(z));
        ++count;
      }
    }
    const double got = CrossEntropySeg(LogitVolume(x, t), gt).item<double>();
    ASSERT_LT(RelErr(got, total / count), 1e-10);
    // Softmax shift invariance.
    torch::Tensor shifted = x + g.Tensor({1, h, w}, 50.0);
    ASSERT_NEAR(CrossEntropySeg(LogitVolume(shifted, t), gt).item<double>(), got, 1e-9);
  }
}

TEST(CrossEntropySegTest, AllVoidIsAnError) {
  auto t = ClassTable::Synthetic();
  SegMap gt(torch::full({3, 3}, t->void_id(), torch::kInt64), t);
  EXPECT_THROW(CrossEntropySeg(LogitVolume(torch::zeros({6, 3, 3}), t), gt),
               std::invalid_argument);
}

TEST(TotalGLossTest, WeightsFromDefaults) {
  const LossWeights w;
  EXPECT_EQ(TotalGLoss(1.0, 0.0, w), 100.0);
  EXPECT_EQ(TotalGLoss(0.0, 1.0, w), 10.0);
  EXPECT_EQ(TotalGLoss(0.0, 0.0, w), 0.0);
  EXPECT_EQ(TotalGLoss(torch::tensor(1.0), torch::tensor(1.0), w).item<double>(), 110.0);
}

TEST(LossWeightsTest, Validation) {
  EXPECT_NO_THROW(LossWeights{}.Validate());
  EXPECT_THROW((LossWeights{-1.0, 10.0, 1e-4}.Validate()), ConfigError);
  EXPECT_THROW((LossWeights{100.0, -1.0, 1e-4}.Validate()), ConfigError);
  EXPECT_THROW((LossWeights{100.0, 10.0, 0.0}.Validate()), ConfigError);
}

}  // namespace
}  // namespace mmf
