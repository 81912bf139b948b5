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

#include "mmf/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "mmf/losses.h"
#include "test_support.h"

namespace mmf {
namespace {

using testing::Gen;
using testing::RelErr;

LogitSampleSet RandomSamples(Gen& g, const ClassTablePtr& t, int64_t k, int64_t h, int64_t w,
                             double scale = 2.0) {
  std::vector<LogitVolume> v;
  std::vector<uint64_t> seeds;
  for (int64_t i = 0; i < k; ++i) {
    v.emplace_back(g.Tensor({t->num_channels(), h, w}, scale), t);
    seeds.push_back(static_cast<uint64_t>(i));
  }
  return LogitSampleSet(std::move(v), std::move(seeds));
}

// Brute-force mIoU from per-pixel scans: IoU per non-void class with
// non-zero union, void ground truth skipped.
std::optional<double> BruteMiou(const std::vector<std::pair<SegMap, SegMap>>& pairs,
                                const std::vector<int>& classes) {
  double sum = 0.0;
  int n = 0;
  for (int c : classes) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& [pred, gt] : pairs) {
      const int void_id = gt.table()->void_id();
      for (int64_t y = 0; y < gt.height(); ++y) {
        for (int64_t x = 0; x < gt.width(); ++x) {
          const int64_t gv = gt.at(y, x), pv = pred.at(y, x);
          if (gv == void_id) continue;
          if (gv == c && pv == c) ++tp;
          if (gv != c && pv == c) ++fp;
          if (gv == c && pv != c) ++fn;
        }
      }
    }
    if (tp + fp + fn == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::vector<int> NonVoid(const ClassTable& t) {
  std::vector<int> ids;
  for (int c = 0; c < t.num_channels(); ++c) ids.push_back(t.ClassOf(c));
  return ids;
}

TEST(ConfusionMatrixTest, HandExample) {
  auto t = testing::TinyTable();
  // gt: a a b void ; pred: a b b a
  SegMap gt(torch::tensor({0, 0, 1, 2}, torch::kInt64).view({1, 4}), t);
  SegMap pred(torch::tensor({0, 1, 1, 0}, torch::kInt64).view({1, 4}), t);
  ConfusionMatrix cm(t);
  cm.Accumulate(pred, gt);
  EXPECT_EQ(cm.at(0, 0), 1);
  EXPECT_EQ(cm.at(0, 1), 1);
  EXPECT_EQ(cm.at(1, 1), 1);
  EXPECT_EQ(cm.total(), 3);
  auto iou = cm.PerClassIou();
  EXPECT_DOUBLE_EQ(*iou[0], 0.5);
  EXPECT_DOUBLE_EQ(*iou[1], 0.5);
  EXPECT_FALSE(iou[2].has_value());
  EXPECT_DOUBLE_EQ(Miou(cm), 0.5);
  EXPECT_DOUBLE_EQ(MiouMo(cm), 0.5);
}

TEST(ConfusionMatrixTest, PerfectAndDisjoint) {
  auto t = ClassTable::Synthetic();
  Gen g(31);
  SegMap gt = g.Seg(8, 8, t, 0.1);
  EXPECT_DOUBLE_EQ(ClipMiou(gt, gt), 1.0);
  torch::Tensor shifted = gt.data().clone();
  shifted.masked_fill_(gt.ValidMask(), 0);
  shifted.masked_fill_(gt.data().eq(0), 1);
  EXPECT_EQ(ClipMiou(SegMap(shifted, t), gt) < 1.0, true);
}

TEST(ConfusionMatrixTest, AllVoidIsDomainError) {
  auto t = ClassTable::Synthetic();
  SegMap v(torch::full({2, 2}, t->void_id(), torch::kInt64), t);
  ConfusionMatrix cm(t);
  cm.Accumulate(v, v);
  EXPECT_THROW(Miou(cm), std::domain_error);
}

TEST(ConfusionMatrixTest, MatchesBruteForceOnRandomMaps) {
  auto t = ClassTable::Synthetic();
  Gen g(32);
  const std::vector<int> all = NonVoid(*t);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<SegMap, SegMap>> pairs;
    ConfusionMatrix cm(t), merged(t);
    const int n = static_cast<int>(g.Int(1, 3));
    for (int i = 0; i < n; ++i) {
      const int64_t h = g.Int(1, 7), w = g.Int(1, 7);
      pairs.emplace_back(g.Seg(h, w, t, 0.15), g.Seg(h, w, t, 0.2));
      ConfusionMatrix part(t);
      part.Accumulate(pairs.back().first, pairs.back().second);
      merged += part;
      cm.Accumulate(pairs.back().first, pairs.back().second);
    }
    ASSERT_TRUE(torch::equal(cm.counts(), merged.counts()));
    const auto want = BruteMiou(pairs, all);
    if (!want) {
      EXPECT_THROW(Miou(cm), std::domain_error);
      continue;
    }
    ASSERT_LT(RelErr(Miou(cm), *want), 1e-10);
    const auto want_mo = BruteMiou(pairs, t->movable_ids());
    const auto got_mo = MeanIouOver(cm, t->movable_ids());
    ASSERT_EQ(got_mo.has_value(), want_mo.has_value());
    if (want_mo) ASSERT_LT(RelErr(*got_mo, *want_mo), 1e-10);
  }
}

TEST(PairwiseMseTest, KOneIsZeroAndIdenticalIsZero) {
  auto t = ClassTable::Synthetic();
  Gen g(33);
  EXPECT_EQ(PairwiseMse(RandomSamples(g, t, 1, 3, 3)), 0.0);
  LogitVolume v(g.Tensor({6, 3, 3}), t);
  LogitSampleSet same({v, v, v}, {0, 1, 2});
  EXPECT_EQ(PairwiseMse(same), 0.0);
  EXPECT_EQ(PairwiseMse(same, MseSpace::kLogit), 0.0);
}

TEST(PairwiseMseTest, MatchesTriplePairLoop) {
  auto t = ClassTable::Synthetic();
  Gen g(34);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t k = g.Int(2, 6), h = g.Int(1, 4), w = g.Int(1, 4);
    LogitSampleSet s = RandomSamples(g, t, k, h, w);
    for (MseSpace space : {MseSpace::kProbability, MseSpace::kLogit}) {
      // Per-element values, softmax computed by hand.
      std::vector<std::vector<double>> vals(k);
      for (int64_t i = 0; i < k; ++i) {
        auto a = s[i].data().accessor<double, 3>();
        for (int64_t c = 0; c < 6; ++c) {
          for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
              double v = a[c][y][x];
              if (space == MseSpace::kProbability) {
                double z = 0.0;
                for (int64_t cc = 0; cc < 6; ++cc) z += std::exp(a[cc][y][x]);
                v = std::exp(v) / z;
              }
              vals[i].push_back(v);
            }
          }
        }
      }
      double total = 0.0;
      int64_t pairs = 0;
      for (int64_t i = 0; i < k; ++i) {
        for (int64_t j = i + 1; j < k; ++j) {
          double sq = 0.0;
          for (size_t e = 0; e < vals[i].size(); ++e) {
            sq += (vals[i][e] - vals[j][e]) * (vals[i][e] - vals[j][e]);
          }
          total += sq / static_cast<double>(vals[i].size());
          ++pairs;
        }
      }
      ASSERT_LT(RelErr(PairwiseMse(s, space), total / pairs), 1e-10);
    }
  }
}

TEST(PairwiseMseTest, PermutationInvariant) {
  auto t = ClassTable::Synthetic();
  Gen g(35);
  LogitSampleSet s = RandomSamples(g, t, 5, 3, 4);
  std::vector<LogitVolume> rev(s.samples().rbegin(), s.samples().rend());
  LogitSampleSet r(std::move(rev), {0, 1, 2, 3, 4});
  EXPECT_LT(RelErr(PairwiseMse(s), PairwiseMse(r)), 1e-12);
}

TEST(VarianceMapsTest, MatchBruteForce) {
  auto t = ClassTable::Synthetic();
  Gen g(36);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t k = g.Int(2, 6), h = g.Int(1, 4), w = g.Int(1, 4);
    LogitSampleSet s = RandomSamples(g, t, k, h, w);
    torch::Tensor mlv = MeanLogitVariance(s);
    torch::Tensor dpv = DiscretePredictionVariance(s);
    ASSERT_EQ(mlv.sizes(), (std::vector<int64_t>{h, w}));
    ASSERT_EQ(dpv.sizes(), (std::vector<int64_t>{h, w}));
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double chan_sum = 0.0;
        for (int64_t c = 0; c < 6; ++c) {
          double m = 0.0;
          for (int64_t i = 0; i < k; ++i) m += s[i].data()[c][y][x].item<double>();
          m /= k;
          double ss = 0.0;
          for (int64_t i = 0; i < k; ++i) {
            const double d = s[i].data()[c][y][x].item<double>() - m;
            ss += d * d;
          }
          chan_sum += ss / (k - 1);
        }
        ASSERT_LT(RelErr(mlv[y][x].item<double>(), chan_sum / 6.0), 1e-10);

        std::vector<double> cls;
        for (int64_t i = 0; i < k; ++i) {
          int best = 0;
          for (int c = 1; c < 6; ++c) {
            if (s[i].data()[c][y][x].item<double>() > s[i].data()[best][y][x].item<double>()) {
              best = c;
            }
          }
          cls.push_back(t->ClassOf(best));
        }
        double m = 0.0;
        for (double c : cls) m += c;
        m /= k;
        double ss = 0.0;
        for (double c : cls) ss += (c - m) * (c - m);
        const double want = ss / (k - 1);
        ASSERT_NEAR(dpv[y][x].item<double>(), want, 1e-10 * std::max(1.0, want));
      }
    }
  }
}

TEST(VarianceMapsTest, RequireTwoSamples) {
  auto t = ClassTable::Synthetic();
  Gen g(37);
  LogitSampleSet one = RandomSamples(g, t, 1, 2, 2);
  EXPECT_THROW(MeanLogitVariance(one), std::invalid_argument);
  EXPECT_THROW(DiscretePredictionVariance(one), std::invalid_argument);
}

TEST(TopFractionMiouTest, MatchesSortedPrefixOracle) {
  auto t = ClassTable::Synthetic();
  Gen g(38);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t clips = g.Int(1, 3), k = g.Int(1, 12);
    const double fraction =
        std::min(1.0, (static_cast<double>(g.Int(1, k)) + 0.9 * g.Uniform()) / static_cast<double>(k));
    std::vector<LogitSampleSet> sets;
    std::vector<SegMap> gts;
    double total = 0.0;
    int64_t kept = 0;
    for (int64_t c = 0; c < clips; ++c) {
      sets.push_back(RandomSamples(g, t, k, 4, 4));
      gts.push_back(g.Seg(4, 4, t, 0.0));
      std::vector<double> scores;
      for (int64_t i = 0; i < k; ++i) {
        scores.push_back(*BruteMiou({{ArgmaxDecode(sets.back()[i]), gts.back()}}, NonVoid(*t)));
      }
      std::sort(scores.begin(), scores.end());
      const auto keep = static_cast<int64_t>(std::ceil(fraction * k - 1e-9));
      for (int64_t i = 0; i < keep; ++i) total += scores[k - 1 - i];
      kept += keep;
    }
    ASSERT_LT(RelErr(TopFractionMiou(sets, gts, fraction), total / kept), 1e-10);
  }
}

TEST(TopFractionMiouTest, Validation) {
  auto t = ClassTable::Synthetic();
  Gen g(39);
  std::vector<LogitSampleSet> sets = {RandomSamples(g, t, 4, 2, 2)};
  std::vector<SegMap> gts = {g.Seg(2, 2, t, 0.0)};
  EXPECT_THROW(TopFractionMiou(sets, gts, 0.1), std::invalid_argument);
  EXPECT_THROW(TopFractionMiou(sets, gts, 0.0), std::invalid_argument);
  EXPECT_THROW(TopFractionMiou(sets, {}, 0.5), std::invalid_argument);
  // fraction 1 is the plain mean.
  double mean = 0.0;
  for (const auto& v : sets[0].samples()) mean += ClipMiou(ArgmaxDecode(v), gts[0]);
  EXPECT_LT(RelErr(TopFractionMiou(sets, gts, 1.0), mean / 4), 1e-12);
}

TEST(AtLeastOnceTest, NonDecreasingAndMatchesBruteForce) {
  auto t = ClassTable::Synthetic();
  Gen g(40);
  const std::vector<int64_t> checkpoints = {1, 2, 3, 5, 8};
  for (int trial = 0; trial < 50; ++trial) {
    const SegMap gt = g.Seg(5, 5, t, 0.1);
    const SegMap oracle = g.Seg(5, 5, t, 0.0);
    std::vector<SegMap> preds;
    for (int i = 0; i < 8; ++i) preds.push_back(g.Seg(5, 5, t, 0.0));
    const CurveCounts counts = AtLeastOnceCounts(preds, gt, oracle, checkpoints);
    const DiversityCurve curve = DiversityCurve::FromCounts(counts);
    for (size_t s = 0; s < 3; ++s) {
      for (size_t i = 0; i < checkpoints.size(); ++i) {
        int64_t hits = 0, pixels = 0;
        for (int64_t y = 0; y < 5; ++y) {
          for (int64_t x = 0; x < 5; ++x) {
            const int64_t gv = gt.at(y, x);
            if (gv == t->void_id()) continue;
            const bool movable = gv == 4 || gv == 5;
            if (s == 1 && !movable) continue;
            if (s == 2 && oracle.at(y, x) != gv) continue;
            ++pixels;
            for (int64_t n = 0; n < checkpoints[i]; ++n) {
              if (preds[n].at(y, x) == gv) {
                ++hits;
                break;
              }
            }
          }
        }
        ASSERT_EQ(counts.subset_pixels[s], pixels);
        ASSERT_EQ(counts.hits[s][i], hits);
        if (i > 0 && curve.values[s][i]) {
          ASSERT_GE(*curve.values[s][i], *curve.values[s][i - 1]);
        }
      }
    }
  }
}

TEST(AtLeastOnceTest, IdenticalSamplesGiveFlatCurve) {
  auto t = ClassTable::Synthetic();
  Gen g(41);
  const SegMap gt = g.Seg(6, 6, t, 0.0);
  const SegMap p = g.Seg(6, 6, t, 0.0);
  std::vector<SegMap> preds(16, p);
  const DiversityCurve c = AtLeastOnceCurve(preds, gt, gt, std::vector<int64_t>{1, 4, 16});
  EXPECT_EQ(*c.values[0][0], *c.values[0][2]);
}

TEST(AtLeastOnceTest, Validation) {
  auto t = ClassTable::Synthetic();
  Gen g(42);
  const SegMap gt = g.Seg(2, 2, t, 0.0);
  std::vector<SegMap> preds(2, gt);
  EXPECT_THROW(AtLeastOnceCounts(preds, gt, gt, std::vector<int64_t>{1, 4}),
               std::invalid_argument);
  EXPECT_THROW(AtLeastOnceCounts(preds, gt, gt, std::vector<int64_t>{2, 1}),
               std::invalid_argument);
  CurveCounts a = AtLeastOnceCounts(preds, gt, gt, std::vector<int64_t>{1});
  CurveCounts b = AtLeastOnceCounts(preds, gt, gt, std::vector<int64_t>{1, 2});
  EXPECT_THROW(a += b, std::invalid_argument);
}

TEST(AveragedPredictionTest, IsChannelMean) {
  auto t = ClassTable::Synthetic();
  Gen g(43);
  LogitSampleSet s = RandomSamples(g, t, 3, 2, 2);
  torch::Tensor want = (s[0].data() + s[1].data() + s[2].data()) / 3.0;
  EXPECT_TRUE(torch::allclose(AveragedPrediction(s).data(), want, 0, 1e-14));
}

TEST(RegionClassIouTest, Examples) {
  auto t = ClassTable::Synthetic();
  torch::Tensor d = torch::zeros({4, 4}, torch::kInt64);
  d.slice(0, 0, 2).slice(1, 0, 2).fill_(5);
  SegMap pred(d, t);
  EXPECT_DOUBLE_EQ(RegionClassIou(pred, PixelRect{0, 0, 2, 2}, 5), 1.0);
  EXPECT_DOUBLE_EQ(RegionClassIou(pred, PixelRect{0, 0, 2, 4}, 5), 0.5);
  EXPECT_DOUBLE_EQ(RegionClassIou(pred, PixelRect{2, 2, 2, 2}, 5), 0.0);
}

// Spearman rank correlation without tie handling; inputs here are continuous.
double Spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    for (size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

TEST(LpipsProxyTest, ZeroForIdenticalAndTracksPerturbationSize) {
  torch::manual_seed(5);
  auto t = ClassTable::Synthetic();
  ModelConfig mc;
  mc.feature_channels = 16;
  Encoder enc(mc);
  enc->eval();
  Gen g(44);
  LogitVolume base(g.Tensor({6, 16, 32}), t);
  EXPECT_EQ(LpipsProxy(LogitSampleSet({base, base}, {0, 1}), enc), 0.0);
  EXPECT_EQ(LpipsProxy(LogitSampleSet({base}, {0}), enc), 0.0);

  std::vector<double> scale, score;
  for (int i = 0; i < 12; ++i) {
    const double s = 0.1 * (i + 1);
    LogitVolume other(base.data() + s * g.Tensor({6, 16, 32}), t);
    scale.push_back(s);
    score.push_back(LpipsProxy(LogitSampleSet({base, other}, {0, 1}), enc));
    EXPECT_GT(score.back(), 0.0);
  }
  EXPECT_GT(Spearman(scale, score), 0.7);
}

}  // namespace
}  // namespace mmf
