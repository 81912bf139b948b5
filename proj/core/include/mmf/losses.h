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

#ifndef MMF_LOSSES_H_
#define MMF_LOSSES_H_

#include <torch/torch.h>

#include "mmf/core_types.h"

namespace mmf {

struct LossWeights {
  double lambda_mr = 100.0;
  double lambda_gan = 10.0;
  // Lower clamp on the sampled variance inside MR2.
  double variance_floor = 1e-4;

  void Validate() const;
};

// Sampled first and second moments over K generator outputs.
struct MomentPair {
  torch::Tensor mean;
  torch::Tensor var;  // undefined when only the mean was requested
};

// Mean and unbiased (K - 1) variance over `dim` of `samples`. Differentiable.
// K = 1 is accepted only with with_variance = false.
MomentPair SampleMoments(const torch::Tensor& samples, int64_t dim = 0,
                         bool with_variance = true);

template <typename T>
MomentPair SampleMoments(const SampleSet<T>& samples, bool with_variance = true) {
  return SampleMoments(samples.Stacked(), 0, with_variance);
}

// Gaussian negative log-likelihood of the target under the sampled moments,
// averaged over elements: (y - mean)^2 / (2 v) + log(v) / 2 with
// v = max(var, floor).
torch::Tensor Mr2Loss(const torch::Tensor& target, const MomentPair& moments,
                      double variance_floor = 1e-4);

// Mean squared error of the sampled mean; ignores the variance.
torch::Tensor Mr1Loss(const torch::Tensor& target, const MomentPair& moments);

// Discriminator loss -mean(log real) - mean(log(1 - fake)), scores clamped
// to [1e-7, 1 - 1e-7].
torch::Tensor GanLossD(const torch::Tensor& real_scores,
                       const torch::Tensor& fake_scores);

// Non-saturating generator loss -mean(log fake).
torch::Tensor GanLossG(const torch::Tensor& fake_scores);

// Mean negative log-softmax of the true class over non-void pixels.
// logits: (C, H, W) or (N, C, H, W); gt: (H, W) or (N, H, W) class indices.
torch::Tensor CrossEntropySeg(const torch::Tensor& logits,
                              const torch::Tensor& gt, const ClassTable& table);
torch::Tensor CrossEntropySeg(const LogitVolume& logits, const SegMap& gt);

torch::Tensor TotalGLoss(const torch::Tensor& mr, const torch::Tensor& adv,
                         const LossWeights& weights);
double TotalGLoss(double mr, double adv, const LossWeights& weights);

// Class index -> logit channel, with void mapped to -1.
torch::Tensor ChannelLookup(const ClassTable& table);

}  // namespace mmf

#endif  // MMF_LOSSES_H_
