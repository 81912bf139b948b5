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

#include "mmf/training.h"

#include <ATen/CPUGeneratorImpl.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <numeric>

#include "mmf/errors.h"
#include "mmf/io_util.h"
#include "mmf/losses.h"
#include "mmf/metrics.h"

namespace mmf {
namespace {

enum Purpose : uint64_t {
  kShuffle = 1,
  kNoise = 2,
  kDropoutG = 3,
  kDropoutD = 4,
  kFakePick = 5,
  kValNoise = 6,
};

std::string Fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<int64_t> Permutation(int64_t n, uint64_t seed) {
  std::vector<int64_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Fisher-Yates with a stateless counter-based source.
  for (int64_t i = n - 1; i > 0; --i) {
    const uint64_t r = DeriveSeed(seed, kShuffle, static_cast<uint64_t>(i));
    std::swap(idx[i], idx[static_cast<int64_t>(r % static_cast<uint64_t>(i + 1))]);
  }
  return idx;
}

void SetLr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

torch::optim::Adam MakeAdam(torch::nn::Module& module, double lr, double b1,
                            double b2) {
  return torch::optim::Adam(module.parameters(),
                            torch::optim::AdamOptions(lr).betas({b1, b2}));
}

void SetRequiresGrad(torch::nn::Module& module, bool on) {
  for (auto& p : module.parameters()) p.set_requires_grad(on);
}

void CheckFinite(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw DivergenceError(what + " became non-finite (" + Fmt(v) + ")");
  }
}

torch::Tensor PaletteLut(const ClassTable& table) {
  torch::Tensor lut = torch::empty({table.num_classes(), 3}, torch::kFloat32);
  for (int c = 0; c < table.num_classes(); ++c) {
    for (int j = 0; j < 3; ++j) lut[c][j] = table.palette()[c][j] / 255.0f;
  }
  return lut;
}

std::string OracleLogCsv(std::span<const OracleEpoch> log) {
  std::string out = "epoch,lr,ce_loss,val_miou,val_miou_mo\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + Fmt(e.lr) + "," + Fmt(e.ce_loss) +
           "," + Fmt(e.val_miou) + "," + Fmt(e.val_miou_mo) + "\n";
  }
  return out;
}

nlohmann::json ToJson(const F2FEpoch& e) {
  return {{"epoch", e.epoch},       {"lr", e.lr},
          {"g_loss", e.g_loss},     {"d_loss", e.d_loss},
          {"mr_loss", e.mr_loss},   {"val_miou", e.val_miou},
          {"val_miou_mo", std::isnan(e.val_miou_mo) ? nlohmann::json() : nlohmann::json(e.val_miou_mo)},
          {"val_pairwise_mse", e.val_pairwise_mse}};
}

F2FEpoch F2FEpochFromJson(const nlohmann::json& j) {
  F2FEpoch e;
  e.epoch = j.at("epoch");
  e.lr = j.at("lr");
  e.g_loss = j.at("g_loss");
  e.d_loss = j.at("d_loss");
  e.mr_loss = j.at("mr_loss");
  e.val_miou = j.at("val_miou");
  e.val_miou_mo = j.at("val_miou_mo").is_null() ? std::nan("") : j.at("val_miou_mo").get<double>();
  e.val_pairwise_mse = j.at("val_pairwise_mse");
  return e;
}

}  // namespace

double CosineLr(int64_t step, int64_t total_steps, double lr0, double lr_min) {
  if (total_steps < 1 || step < 0 || step > total_steps) {
    throw std::out_of_range("CosineLr: step " + std::to_string(step) +
                            " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (step == 0) return lr0;
  if (step == total_steps) return lr_min;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

uint64_t DeriveSeed(uint64_t seed, uint64_t purpose, uint64_t counter) {
  return NoiseSeed(NoiseSeed(seed, static_cast<int64_t>(purpose)),
                   static_cast<int64_t>(counter));
}

ModelConfig ResolvedModelConfig(const RunConfig& config) {
  ModelConfig m = config.model;
  m.num_classes = ClassTable::Synthetic()->num_channels();
  return m;
}

OracleModel MakeOracle(const ModelConfig& config, uint64_t seed) {
  torch::manual_seed(seed);
  return {config, Encoder(config), Decoder(config)};
}

ForecastModel MakeForecaster(const ModelConfig& config, LossKind kind,
                             uint64_t seed) {
  torch::manual_seed(DeriveSeed(seed, 0, 0));
  return {config, kind, F2FGenerator(config), PatchDiscriminator(config)};
}

OracleModel LoadOracle(const std::filesystem::path& checkpoint) {
  Checkpoint ckpt = LoadCheckpoint(checkpoint);
  if (ckpt.meta.value("kind", "") != "oracle") {
    throw PreconditionError(checkpoint.string() + " is not an oracle checkpoint");
  }
  OracleModel m = MakeOracle(ModelConfig::FromJson(ckpt.meta.at("model")), 0);
  GetModule(ckpt, "encoder", *m.encoder);
  GetModule(ckpt, "decoder", *m.decoder);
  m.encoder->eval();
  m.decoder->eval();
  return m;
}

ForecastModel LoadForecaster(const std::filesystem::path& checkpoint) {
  Checkpoint ckpt = LoadCheckpoint(checkpoint);
  if (ckpt.meta.value("kind", "") != "f2f") {
    throw PreconditionError(checkpoint.string() + " is not an F2F checkpoint");
  }
  ForecastModel m = MakeForecaster(ModelConfig::FromJson(ckpt.meta.at("model")),
                                   ParseLossKind(ckpt.meta.at("loss_kind")), 0);
  GetModule(ckpt, "generator", *m.generator);
  GetModule(ckpt, "discriminator", *m.discriminator);
  m.generator->eval();
  m.discriminator->eval();
  return m;
}

std::filesystem::path OracleCheckpointPath(const std::filesystem::path& oracle_dir) {
  return oracle_dir / "oracle.ckpt";
}

std::filesystem::path CachePath(const std::filesystem::path& oracle_dir) {
  return oracle_dir / "cache";
}

OracleResult TrainOracle(const std::filesystem::path& dataset_root,
                         const RunConfig& config,
                         const std::filesystem::path& out_dir) {
  config.Validate();
  const DatasetManifest manifest = ReadManifest(dataset_root);
  const auto table = ClassTable::Synthetic();
  const ModelConfig mc = ResolvedModelConfig(config);
  const TrainConfig& tc = config.train;
  std::filesystem::create_directories(out_dir);

  // Every frame of every training clip is a labelled example.
  std::vector<torch::Tensor> frames;
  for (const SequenceClip& clip : LoadSplit(dataset_root, Split::kTrain)) {
    for (const SegMap& f : clip.input_frames) frames.push_back(f.data().to(torch::kUInt8));
    frames.push_back(clip.target_frame.data().to(torch::kUInt8));
  }
  if (frames.empty()) throw PreconditionError("oracle training: empty train split");
  const torch::Tensor labels = torch::stack(frames);
  std::vector<SegMap> val_gt;
  for (const SequenceClip& clip : LoadSplit(dataset_root, Split::kVal)) {
    val_gt.push_back(clip.target_frame);
  }
  if (manifest.params.height % mc.feature_downsample != 0 ||
      manifest.params.width % mc.feature_downsample != 0) {
    throw ConfigError("dataset frame size not divisible by model.feature_downsample");
  }

  OracleModel model = MakeOracle(mc, tc.seed);
  torch::nn::Sequential both;
  both->push_back("encoder", model.encoder.ptr());
  both->push_back("decoder", model.decoder.ptr());
  torch::optim::Adam opt = MakeAdam(*both, tc.oracle_lr, tc.adam_beta1, tc.adam_beta2);
  const torch::Tensor lut = PaletteLut(*table);

  const int64_t n = labels.size(0);
  const int64_t steps_per_epoch = (n + tc.oracle_batch_size - 1) / tc.oracle_batch_size;
  const int64_t total = steps_per_epoch * tc.oracle_epochs;
  int64_t step = 0;
  OracleResult result;
  for (int64_t epoch = 1; epoch <= tc.oracle_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model.encoder->train();
    model.decoder->train();
    const auto order = Permutation(n, DeriveSeed(tc.seed, kShuffle, epoch));
    double loss_sum = 0.0, lr = 0.0;
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      const int64_t lo = b * tc.oracle_batch_size;
      const int64_t hi = std::min(n, lo + tc.oracle_batch_size);
      torch::Tensor idx = torch::tensor(
          std::vector<int64_t>(order.begin() + lo, order.begin() + hi), torch::kInt64);
      torch::Tensor gt = labels.index_select(0, idx).to(torch::kInt64);
      torch::Tensor images = lut.index({gt}).permute({0, 3, 1, 2}).contiguous();
      lr = CosineLr(step, total, tc.oracle_lr, tc.lr_min);
      SetLr(opt, lr);
      torch::Tensor logits = model.decoder->forward(model.encoder->forward(images));
      torch::Tensor loss = CrossEntropySeg(logits, gt, *table);
      opt.zero_grad();
      loss.backward();
      opt.step();
      const double l = loss.item<double>();
      CheckFinite(l, "oracle cross-entropy");
      loss_sum += l;
      ++step;
    }
    model.encoder->eval();
    model.decoder->eval();
    ConfusionMatrix cm(table);
    for (const SegMap& g : val_gt) {
      cm.Accumulate(OraclePredict(model.encoder, model.decoder, g, mc.feature_downsample), g);
    }
    OracleEpoch e{epoch, lr, loss_sum / steps_per_epoch, 0.0, std::nan("")};
    if (!val_gt.empty()) {
      e.val_miou = Miou(cm);
      e.val_miou_mo = MeanIouOver(cm, table->movable_ids()).value_or(std::nan(""));
    }
    result.log.push_back(e);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "[oracle] epoch %lld/%lld ce=%.4f val_miou=%.4f (%.1fs)\n",
                 static_cast<long long>(epoch), static_cast<long long>(tc.oracle_epochs),
                 e.ce_loss, e.val_miou, secs);
  }

  Checkpoint ckpt;
  ckpt.meta = {{"kind", "oracle"},
               {"model", mc.ToJson()},
               {"epoch", tc.oracle_epochs},
               {"step", step},
               {"val_miou", result.log.back().val_miou},
               {"dataset_params_hash", manifest.params.Hash()}};
  PutModule(ckpt, "encoder", *model.encoder);
  PutModule(ckpt, "decoder", *model.decoder);
  PutAdamState(ckpt, "opt", opt, *both);
  result.checkpoint = OracleCheckpointPath(out_dir);
  result.val_miou = result.log.back().val_miou;
  SaveCheckpoint(result.checkpoint, ckpt);
  WriteFileText(out_dir / "oracle_log.csv", OracleLogCsv(result.log));

  FeatureCache::Build(dataset_root, model.encoder, mc.feature_downsample,
                      CheckpointHash(result.checkpoint), CachePath(out_dir));
  return result;
}

std::vector<FeatureMap> CachedSplit::Past(int64_t i, int64_t n_past) const {
  std::vector<FeatureMap> out;
  torch::Tensor p = past[i];
  const int64_t c = p.size(0) / n_past;
  for (int64_t j = 0; j < n_past; ++j) out.emplace_back(p.narrow(0, j * c, c));
  return out;
}

CachedSplit LoadCachedSplit(const std::filesystem::path& dataset_root,
                            const FeatureCache& cache, Split split) {
  CachedSplit out;
  std::vector<torch::Tensor> past, target;
  out.clips = LoadSplit(dataset_root, split);
  for (const SequenceClip& clip : out.clips) {
    CachedClip c = cache.Load(split, clip);
    past.push_back(StackPast(c.past));
    target.push_back(c.target.data());
    out.gt.push_back(clip.target_frame);
  }
  if (!past.empty()) {
    out.past = torch::stack(past);
    out.target = torch::stack(target);
  }
  return out;
}

SampleEvalStats EvaluateSamples(ForecastModel& model, Decoder& decoder,
                                const CachedSplit& split, int64_t k,
                                uint64_t seed, MseSpace space) {
  SampleEvalStats stats;
  if (split.size() == 0) return stats;
  model.generator->eval();
  const auto table = ClassTable::Synthetic();
  std::vector<ConfusionMatrix> per_sample(k, ConfusionMatrix(table));
  double mse = 0.0;
  for (int64_t i = 0; i < split.size(); ++i) {
    const auto past = split.Past(i, model.generator->n_past());
    LogitSampleSet s = ForwardK(model.generator, decoder, past, k,
                                DeriveSeed(seed, kValNoise, i), table,
                                model.config.noise_channels, model.use_noise());
    for (int64_t j = 0; j < k; ++j) per_sample[j].Accumulate(ArgmaxDecode(s[j]), split.gt[i]);
    mse += PairwiseMse(s, space);
  }
  double miou = 0.0, mo = 0.0;
  int mo_count = 0;
  for (const ConfusionMatrix& cm : per_sample) {
    miou += Miou(cm);
    if (auto v = MeanIouOver(cm, table->movable_ids())) {
      mo += *v;
      ++mo_count;
    }
  }
  stats.miou = miou / static_cast<double>(k);
  stats.miou_mo = mo_count ? mo / mo_count : std::nan("");
  stats.pairwise_mse = mse / static_cast<double>(split.size());
  return stats;
}

std::string F2FLogCsv(std::span<const F2FEpoch> log) {
  std::string out =
      "epoch,lr,g_loss,d_loss,mr_loss,val_miou,val_miou_mo,val_pairwise_mse\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + Fmt(e.lr) + "," + Fmt(e.g_loss) + "," +
           Fmt(e.d_loss) + "," + Fmt(e.mr_loss) + "," + Fmt(e.val_miou) + "," +
           Fmt(e.val_miou_mo) + "," + Fmt(e.val_pairwise_mse) + "\n";
  }
  return out;
}

F2FResult TrainF2F(const std::filesystem::path& dataset_root,
                   const std::filesystem::path& oracle_dir,
                   const RunConfig& config,
                   const std::filesystem::path& out_dir,
                   const F2FOptions& options) {
  config.Validate();
  const TrainConfig& tc = config.train;
  const auto oracle_path = OracleCheckpointPath(oracle_dir);
  if (!std::filesystem::exists(oracle_path)) {
    throw PreconditionError("F2F training needs an oracle checkpoint at " +
                            oracle_path.string());
  }
  const std::string oracle_hash = CheckpointHash(oracle_path);
  const FeatureCache cache = FeatureCache::Open(CachePath(oracle_dir), oracle_hash);
  OracleModel oracle = LoadOracle(oracle_path);
  SetRequiresGrad(*oracle.decoder, false);

  ModelConfig mc = ResolvedModelConfig(config);
  if (mc.feature_channels != oracle.config.feature_channels ||
      mc.feature_downsample != oracle.config.feature_downsample) {
    throw ConfigError("model feature shape differs from the oracle checkpoint");
  }
  const CachedSplit train = LoadCachedSplit(dataset_root, cache, Split::kTrain);
  const CachedSplit val = LoadCachedSplit(dataset_root, cache, Split::kVal);
  if (train.size() == 0) throw PreconditionError("F2F training: empty train split");

  const bool l2 = tc.loss_kind == LossKind::kL2Baseline;
  const int64_t k = l2 ? 1 : mc.k_samples;
  LossWeights weights = config.loss;
  if (l2) weights.lambda_gan = 0.0;
  const bool adversarial = weights.lambda_gan > 0.0;
  if (tc.loss_kind == LossKind::kMr2 && k < 2) {
    throw ConfigError("MR2 needs model.k_samples >= 2");
  }

  ForecastModel model = MakeForecaster(mc, tc.loss_kind, tc.seed);
  auto opt_g = MakeAdam(*model.generator, tc.lr0, tc.adam_beta1, tc.adam_beta2);
  auto opt_d = MakeAdam(*model.discriminator, tc.lr0, tc.adam_beta1, tc.adam_beta2);

  const int64_t n = train.size();
  const int64_t steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  const int64_t total = steps_per_epoch * tc.epochs;

  F2FResult result;
  result.best_checkpoint = out_dir / "f2f_best.ckpt";
  result.last_checkpoint = out_dir / "f2f_last.ckpt";
  std::filesystem::create_directories(out_dir);

  int64_t start_epoch = 1, step = 0, bad_epochs = 0;
  double best = -1.0;
  if (!options.resume_from.empty()) {
    Checkpoint ckpt = LoadCheckpoint(options.resume_from);
    if (ckpt.meta.value("kind", "") != "f2f") {
      throw PreconditionError("resume target is not an F2F checkpoint");
    }
    GetModule(ckpt, "generator", *model.generator);
    GetModule(ckpt, "discriminator", *model.discriminator);
    GetAdamState(ckpt, "opt_g", opt_g, *model.generator);
    GetAdamState(ckpt, "opt_d", opt_d, *model.discriminator);
    start_epoch = ckpt.meta.at("epoch").get<int64_t>() + 1;
    step = ckpt.meta.at("step");
    best = ckpt.meta.at("best_val_miou");
    bad_epochs = ckpt.meta.at("bad_epochs");
    for (const auto& row : ckpt.meta.at("history")) result.log.push_back(F2FEpochFromJson(row));
  }

  auto snapshot = [&](int64_t epoch) {
    Checkpoint ckpt;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : result.log) history.push_back(ToJson(e));
    ckpt.meta = {{"kind", "f2f"},
                 {"model", mc.ToJson()},
                 {"loss_kind", LossKindName(tc.loss_kind)},
                 {"epoch", epoch},
                 {"step", step},
                 {"total_steps", total},
                 {"best_val_miou", best},
                 {"bad_epochs", bad_epochs},
                 {"oracle_hash", oracle_hash},
                 {"config", config.Dump()},
                 {"history", history}};
    PutModule(ckpt, "generator", *model.generator);
    PutModule(ckpt, "discriminator", *model.discriminator);
    PutAdamState(ckpt, "opt_g", opt_g, *model.generator);
    PutAdamState(ckpt, "opt_d", opt_d, *model.discriminator);
    return ckpt;
  };

  const int64_t fc = mc.feature_channels;
  for (int64_t epoch = start_epoch; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    model.generator->train();
    model.discriminator->train();
    const auto order = Permutation(n, DeriveSeed(tc.seed, kShuffle, epoch));
    double g_sum = 0.0, d_sum = 0.0, mr_sum = 0.0, lr = 0.0;
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      const int64_t lo = b * tc.batch_size;
      const int64_t hi = std::min(n, lo + tc.batch_size);
      const int64_t bs = hi - lo;
      torch::Tensor idx = torch::tensor(
          std::vector<int64_t>(order.begin() + lo, order.begin() + hi), torch::kInt64);
      torch::Tensor past = train.past.index_select(0, idx);
      torch::Tensor target = train.target.index_select(0, idx);
      lr = CosineLr(step, total, tc.lr0, tc.lr_min);
      SetLr(opt_g, lr);
      SetLr(opt_d, lr);

      // Generator update on K noise draws per clip.
      torch::Tensor past_rep = past.repeat_interleave(k, 0);
      at::Generator noise_gen = at::detail::createCPUGenerator(DeriveSeed(tc.seed, kNoise, step));
      torch::Tensor z = torch::randn({bs * k, mc.noise_channels, past.size(2), past.size(3)},
                                     noise_gen, torch::kFloat32);
      if (!model.use_noise()) z.zero_();
      torch::Tensor fake = model.generator->forward(past_rep, z);

      torch::Tensor samples, mr_target;
      if (tc.mr_space == MrSpace::kFeature) {
        samples = fake.view({bs, k, fc, fake.size(2), fake.size(3)});
        mr_target = target;
      } else {
        torch::Tensor logits = oracle.decoder->forward(fake);
        samples = logits.view({bs, k, logits.size(1), logits.size(2), logits.size(3)});
        torch::NoGradGuard no_grad;
        mr_target = oracle.decoder->forward(target);
      }
      const bool mr2 = tc.loss_kind == LossKind::kMr2;
      MomentPair moments = SampleMoments(samples, 1, mr2);
      torch::Tensor mr = mr2 ? Mr2Loss(mr_target, moments, weights.variance_floor)
                             : Mr1Loss(mr_target, moments);
      torch::Tensor adv = torch::zeros({}, torch::kFloat32);
      if (adversarial) {
        SetRequiresGrad(*model.discriminator, false);
        model.discriminator->SeedDropout(DeriveSeed(tc.seed, kDropoutG, step));
        adv = GanLossG(model.discriminator->Scores(fake, past_rep));
      }
      torch::Tensor g_loss = TotalGLoss(mr, adv, weights);
      opt_g.zero_grad();
      g_loss.backward();
      opt_g.step();
      if (adversarial) SetRequiresGrad(*model.discriminator, true);
      const double g_val = g_loss.item<double>();
      CheckFinite(g_val, "generator loss");
      g_sum += g_val;
      mr_sum += mr.item<double>();

      // Discriminator update: real cached target vs generated future, both
      // conditioned on the same past.
      if (adversarial) {
        torch::Tensor fake_d = fake.detach().view({bs, k, fc, fake.size(2), fake.size(3)});
        for (int64_t d = 0; d < tc.d_steps_per_g; ++d) {
          torch::Tensor fake_sel, past_sel;
          if (tc.d_all_k) {
            fake_sel = fake_d.reshape({bs * k, fc, fake.size(2), fake.size(3)});
            past_sel = past_rep;
          } else {
            std::vector<int64_t> pick(bs);
            for (int64_t i = 0; i < bs; ++i) {
              pick[i] = static_cast<int64_t>(
                  DeriveSeed(tc.seed, kFakePick, step * 1024 + i * 16 + d) %
                  static_cast<uint64_t>(k));
            }
            fake_sel = fake_d.index({torch::arange(bs), torch::tensor(pick)});
            past_sel = past;
          }
          model.discriminator->SeedDropout(DeriveSeed(tc.seed, kDropoutD, step * 16 + d));
          torch::Tensor d_loss = GanLossD(model.discriminator->Scores(target, past),
                                          model.discriminator->Scores(fake_sel, past_sel));
          opt_d.zero_grad();
          d_loss.backward();
          opt_d.step();
          const double d_val = d_loss.item<double>();
          CheckFinite(d_val, "discriminator loss");
          d_sum += d_val / static_cast<double>(tc.d_steps_per_g);
        }
      }
      ++step;
    }

    F2FEpoch e;
    e.epoch = epoch;
    e.lr = lr;
    e.g_loss = g_sum / steps_per_epoch;
    e.d_loss = d_sum / steps_per_epoch;
    e.mr_loss = mr_sum / steps_per_epoch;
    const SampleEvalStats vs = EvaluateSamples(model, oracle.decoder, val, tc.val_k,
                                               DeriveSeed(tc.seed, kValNoise, 0));
    e.val_miou = vs.miou;
    e.val_miou_mo = vs.miou_mo;
    e.val_pairwise_mse = vs.pairwise_mse;
    result.log.push_back(e);

    const bool improved = e.val_miou > best;
    if (improved) {
      best = e.val_miou;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    Checkpoint ckpt = snapshot(epoch);
    if (improved) SaveCheckpoint(result.best_checkpoint, ckpt);
    SaveCheckpoint(result.last_checkpoint, ckpt);
    WriteFileText(out_dir / "train_log.csv", F2FLogCsv(result.log));

    if (options.verbose) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr,
                   "[f2f %s] epoch %lld/%lld g=%.4f d=%.4f mr=%.4f val_miou=%.4f mse=%.4f (%.1fs)\n",
                   LossKindName(tc.loss_kind).c_str(), static_cast<long long>(epoch),
                   static_cast<long long>(tc.epochs), e.g_loss, e.d_loss, e.mr_loss,
                   e.val_miou, e.val_pairwise_mse, secs);
    }
    if (tc.patience > 0 && bad_epochs >= tc.patience) {
      result.early_stopped = true;
      break;
    }
    if (options.stop_after_epoch > 0 && epoch >= options.stop_after_epoch) break;
  }
  return result;
}

}  // namespace mmf
