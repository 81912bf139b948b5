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

#include "mmf/errors.h"

namespace mmf {
namespace {

constexpr double kScoreClamp = 1e-7;

void RequireSameShape(const torch::Tensor& a, const torch::Tensor& b,
                      const char* op) {
  if (!a.sizes().equals(b.sizes())) {
    throw ShapeError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

void LossWeights::Validate() const {
  if (lambda_mr < 0) throw ConfigError("loss.lambda_mr must be >= 0");
  if (lambda_gan < 0) throw ConfigError("loss.lambda_gan must be >= 0");
  if (!(variance_floor > 0)) throw ConfigError("loss.variance_floor must be > 0");
}

MomentPair SampleMoments(const torch::Tensor& samples, int64_t dim,
                         bool with_variance) {
  const int64_t k = samples.size(dim);
  if (k < 1) throw ShapeError("SampleMoments: no samples");
  MomentPair m;
  m.mean = samples.mean(dim);
  if (with_variance) {
    if (k < 2) {
      throw std::invalid_argument("SampleMoments: variance needs K >= 2");
    }
    m.var = (samples - m.mean.unsqueeze(dim)).square().sum(dim) / double(k - 1);
  }
  return m;
}

torch::Tensor Mr2Loss(const torch::Tensor& target, const MomentPair& moments,
                      double variance_floor) {
  if (!moments.var.defined()) {
    throw std::invalid_argument("Mr2Loss: moments carry no variance");
  }
  RequireSameShape(target, moments.mean, "Mr2Loss");
  RequireSameShape(target, moments.var, "Mr2Loss");
  torch::Tensor v = moments.var.clamp_min(variance_floor);
  return ((target - moments.mean).square() / (2.0 * v) + 0.5 * v.log()).mean();
}

torch::Tensor Mr1Loss(const torch::Tensor& target, const MomentPair& moments) {
  RequireSameShape(target, moments.mean, "Mr1Loss");
  return (target - moments.mean).square().mean();
}

torch::Tensor GanLossD(const torch::Tensor& real_scores,
                       const torch::Tensor& fake_scores) {
  return -real_scores.clamp(kScoreClamp, 1.0 - kScoreClamp).log().mean() -
         (1.0 - fake_scores.clamp(kScoreClamp, 1.0 - kScoreClamp)).log().mean();
}

torch::Tensor GanLossG(const torch::Tensor& fake_scores) {
  return -fake_scores.clamp(kScoreClamp, 1.0 - kScoreClamp).log().mean();
}

torch::Tensor ChannelLookup(const ClassTable& table) {
  torch::Tensor lut = torch::full({table.num_classes()}, -1, torch::kInt64);
  for (int c = 0; c < table.num_channels(); ++c) lut[table.ClassOf(c)] = c;
  return lut;
}

torch::Tensor CrossEntropySeg(const torch::Tensor& logits,
                              const torch::Tensor& gt, const ClassTable& table) {
  torch::Tensor l = logits.dim() == 3 ? logits.unsqueeze(0) : logits;
  torch::Tensor g = gt.dim() == 2 ? gt.unsqueeze(0) : gt;
  if (l.dim() != 4 || g.dim() != 3 || l.size(0) != g.size(0) ||
      l.size(2) != g.size(1) || l.size(3) != g.size(2)) {
    throw ShapeError("CrossEntropySeg: logits and ground truth not aligned");
  }
  if (l.size(1) != table.num_channels()) {
    throw ShapeError("CrossEntropySeg: channel count != non-void classes");
  }
  torch::Tensor channel = ChannelLookup(table).index({g.to(torch::kInt64)});
  torch::Tensor valid = channel.ge(0);
  const int64_t n_valid = valid.sum().item<int64_t>();
  if (n_valid == 0) {
    throw std::invalid_argument("CrossEntropySeg: every pixel is void");
  }
  torch::Tensor logp = torch::log_softmax(l, 1);
  torch::Tensor picked =
      logp.gather(1, channel.clamp_min(0).unsqueeze(1)).squeeze(1);
  return -(picked * valid.to(picked.dtype())).sum() / static_cast<double>(n_valid);
}

torch::Tensor CrossEntropySeg(const LogitVolume& logits, const SegMap& gt) {
  return CrossEntropySeg(logits.data(), gt.data(), *gt.table());
}

torch::Tensor TotalGLoss(const torch::Tensor& mr, const torch::Tensor& adv,
                         const LossWeights& weights) {
  return weights.lambda_mr * mr + weights.lambda_gan * adv;
}

double TotalGLoss(double mr, double adv, const LossWeights& weights) {
  return weights.lambda_mr * mr + weights.lambda_gan * adv;
}

}  // namespace mmf
