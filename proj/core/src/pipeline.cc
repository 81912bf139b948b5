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

#include "mmf/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>

#include "mmf/errors.h"
#include "mmf/io_util.h"

namespace mmf {
namespace fs = std::filesystem;
namespace {

constexpr char kDumpMagic[8] = {'M', 'M', 'F', 'P', 'R', 'E', 'D', '1'};
// Minimum overlap with the revealed region for a forecast to count as
// placing a pedestrian there.
constexpr double kCoverageIou = 0.2;

std::string Fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Forecaster plus the oracle it was trained against.
struct Bundle {
  OracleModel oracle;
  ForecastModel model;
  std::string checkpoint_hash;
};

fs::path OracleDir(const RunConfig& config) { return config.paths.oracle_dir; }

OracleModel LoadOracleFor(const RunConfig& config, std::string* hash = nullptr) {
  const fs::path path = OracleCheckpointPath(OracleDir(config));
  if (!fs::exists(path)) {
    throw PreconditionError("no oracle checkpoint at " + path.string() +
                            " (run `train --stage oracle` first)");
  }
  if (hash) *hash = CheckpointHash(path);
  return LoadOracle(path);
}

Bundle LoadBundle(const RunConfig& config, const fs::path& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("a forecaster --checkpoint is required");
  std::string oracle_hash;
  Bundle b{LoadOracleFor(config, &oracle_hash), LoadForecaster(checkpoint),
           CheckpointHash(checkpoint)};
  const std::string expected = LoadCheckpoint(checkpoint).meta.value("oracle_hash", "");
  if (expected != oracle_hash) {
    throw PreconditionError(checkpoint.string() + " was trained against oracle " +
                            expected + ", but " + OracleDir(config).string() +
                            " holds " + oracle_hash);
  }
  return b;
}

std::vector<SequenceClip> EvalClips(const RunConfig& config) {
  const fs::path root = config.paths.data;
  ReadManifest(root);
  std::vector<SequenceClip> clips = LoadSplit(root, ParseSplit(config.eval.split));
  if (clips.empty()) {
    throw PreconditionError("split '" + config.eval.split + "' of " + root.string() +
                            " is empty");
  }
  return clips;
}

ScenarioParams DataParams(const RunConfig& config) {
  const fs::path root = config.paths.data;
  if (fs::exists(root / "manifest.json")) return ReadManifest(root).params;
  return config.data.params;
}

LogitSampleSet ClipSamples(Bundle& b, const SequenceClip& clip, int64_t k,
                           uint64_t seed) {
  std::vector<FeatureMap> past;
  for (const SegMap& f : clip.input_frames) {
    past.push_back(Encode(b.oracle.encoder, f, b.oracle.config.feature_downsample));
  }
  return ForwardK(b.model.generator, b.oracle.decoder, past, k, seed,
                  clip.target_frame.table(), b.model.config.noise_channels,
                  b.model.use_noise());
}

struct ForecastScores {
  double miou = 0, miou_mo = std::nan(""), miou_avg = 0, miou_top = std::nan("");
  double pairwise_mse = 0, lpips_proxy = 0;
  double mean_logit_variance = 0, discrete_variance = 0;
};

// Scores K forecasts per clip. Sample i of a clip uses noise seed
// NoiseSeed(clip seed, i), so the first k of top_k draws are the k draws.
ForecastScores ScoreForecaster(Bundle& b, const std::vector<SequenceClip>& clips,
                               int64_t k, int64_t top_k, double top_fraction,
                               uint64_t seed, MseSpace space,
                               const fs::path& dump_dir = {}) {
  const auto table = ClassTable::Synthetic();
  const int64_t n_gen = std::max(k, top_k);
  std::vector<ConfusionMatrix> per_sample(k, ConfusionMatrix(table));
  ConfusionMatrix averaged(table);
  ForecastScores s;
  double top_sum = 0.0;
  if (!dump_dir.empty()) fs::create_directories(dump_dir);
  for (size_t c = 0; c < clips.size(); ++c) {
    const SequenceClip& clip = clips[c];
    LogitSampleSet all = ClipSamples(b, clip, n_gen, NoiseSeed(seed, static_cast<int64_t>(c)));
    std::vector<LogitVolume> first(all.samples().begin(), all.samples().begin() + k);
    std::vector<uint64_t> first_seeds(all.noise_seeds().begin(),
                                      all.noise_seeds().begin() + k);
    LogitSampleSet set(std::move(first), std::move(first_seeds));
    for (int64_t j = 0; j < k; ++j) per_sample[j].Accumulate(ArgmaxDecode(set[j]), clip.target_frame);
    averaged.Accumulate(ArgmaxDecode(AveragedPrediction(set)), clip.target_frame);
    s.pairwise_mse += PairwiseMse(set, space);
    s.lpips_proxy += LpipsProxy(set, b.oracle.encoder);
    if (k >= 2) {
      s.mean_logit_variance += MeanLogitVariance(set).mean().item<double>();
      s.discrete_variance += DiscretePredictionVariance(set).mean().item<double>();
    }
    if (top_k > 0) {
      std::vector<LogitVolume> top(all.samples().begin(), all.samples().begin() + top_k);
      std::vector<uint64_t> top_seeds(all.noise_seeds().begin(),
                                      all.noise_seeds().begin() + top_k);
      const LogitSampleSet top_set(std::move(top), std::move(top_seeds));
      top_sum += TopFractionMiou(std::span(&top_set, 1), std::span(&clip.target_frame, 1),
                                 top_fraction);
    }
    if (!dump_dir.empty()) {
      WritePredictionDump(
          dump_dir / (clip.clip_id + ".pred"),
          {set.Stacked().to(torch::kFloat32),
           clip.target_frame.data(),
           OraclePredict(b.oracle.encoder, b.oracle.decoder, clip.target_frame,
                         b.oracle.config.feature_downsample)
               .data()});
    }
  }
  const double n = static_cast<double>(clips.size());
  double miou = 0.0, mo = 0.0;
  int mo_count = 0;
  for (const ConfusionMatrix& cm : per_sample) {
    miou += Miou(cm);
    if (auto v = MeanIouOver(cm, table->movable_ids())) {
      mo += *v;
      ++mo_count;
    }
  }
  s.miou = miou / static_cast<double>(k);
  if (mo_count) s.miou_mo = mo / mo_count;
  s.miou_avg = Miou(averaged);
  if (top_k > 0) s.miou_top = top_sum / n;
  s.pairwise_mse /= n;
  s.lpips_proxy /= n;
  s.mean_logit_variance /= n;
  s.discrete_variance /= n;
  return s;
}

void AddRow(MetricsReport& r, std::string metric, std::string subset, double value,
            int64_t k, int64_t checkpoint = 0) {
  r.rows.push_back({std::move(metric), std::move(subset), value, k, checkpoint});
}

nlohmann::json JsonNumber(double v) {
  return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
}

MetricsReport EvalBaseline(const RunConfig& config, Baseline baseline) {
  std::string hash;
  OracleModel oracle = LoadOracleFor(config, &hash);
  const auto clips = EvalClips(config);
  const auto table = ClassTable::Synthetic();
  ConfusionMatrix cm(table);
  for (const SequenceClip& clip : clips) {
    SegMap pred = baseline == Baseline::kCopyLast
                      ? CopyLastBaseline(clip, oracle.encoder, oracle.decoder,
                                         oracle.config.feature_downsample)
                      : OraclePredict(oracle.encoder, oracle.decoder, clip.target_frame,
                                      oracle.config.feature_downsample);
    cm.Accumulate(pred, clip.target_frame);
  }
  MetricsReport r;
  const double mo = MeanIouOver(cm, table->movable_ids()).value_or(std::nan(""));
  AddRow(r, "miou", "all", Miou(cm), 1);
  AddRow(r, "miou_mo", "movable", mo, 1);
  r.summary = {{"baseline", BaselineName(baseline)},
               {"oracle_hash", hash},
               {"miou", Miou(cm)},
               {"miou_mo", JsonNumber(mo)}};
  return r;
}

MetricsReport EvalStandard(const RunConfig& config, const EvalOptions& options,
                           int64_t k, const fs::path& out_dir) {
  Bundle b = LoadBundle(config, options.checkpoint);
  const auto clips = EvalClips(config);
  const EvalConfig& ec = config.eval;
  const ForecastScores s =
      ScoreForecaster(b, clips, k, ec.top_k, ec.top_fraction, ec.seed, ec.mse_space,
                      options.dump ? out_dir / "predictions" : fs::path());
  MetricsReport r;
  AddRow(r, "miou", "all", s.miou, k);
  AddRow(r, "miou_mo", "movable", s.miou_mo, k);
  AddRow(r, "miou_avg", "all", s.miou_avg, k);
  AddRow(r, "miou_top", "all", s.miou_top, ec.top_k);
  AddRow(r, "pairwise_mse", "all", s.pairwise_mse, k);
  AddRow(r, "lpips_proxy", "all", s.lpips_proxy, k);
  AddRow(r, "mean_logit_variance", "all", s.mean_logit_variance, k);
  AddRow(r, "discrete_prediction_variance", "all", s.discrete_variance, k);
  r.summary = {{"checkpoint_hash", b.checkpoint_hash},
               {"loss_kind", LossKindName(b.model.loss_kind)},
               {"k", k},
               {"clips", clips.size()},
               {"miou", s.miou},
               {"miou_mo", JsonNumber(s.miou_mo)},
               {"miou_avg", s.miou_avg},
               {"miou_top", JsonNumber(s.miou_top)},
               {"pairwise_mse", s.pairwise_mse},
               {"lpips_proxy", s.lpips_proxy}};
  return r;
}

MetricsReport EvalCurve(const RunConfig& config, const EvalOptions& options,
                        const fs::path& out_dir) {
  Bundle b = LoadBundle(config, options.checkpoint);
  const auto clips = EvalClips(config);
  const int64_t k = config.eval.curve_k;
  std::vector<int64_t> checkpoints;
  for (int64_t n : DefaultCurveCheckpoints()) {
    if (n <= k) checkpoints.push_back(n);
  }
  CurveCounts total;
  bool first = true;
  for (size_t c = 0; c < clips.size(); ++c) {
    const SequenceClip& clip = clips[c];
    LogitSampleSet set = ClipSamples(b, clip, k, NoiseSeed(config.eval.seed, static_cast<int64_t>(c)));
    std::vector<SegMap> preds;
    for (const LogitVolume& v : set.samples()) preds.push_back(ArgmaxDecode(v));
    const SegMap oracle_pred = OraclePredict(b.oracle.encoder, b.oracle.decoder,
                                             clip.target_frame,
                                             b.oracle.config.feature_downsample);
    CurveCounts counts = AtLeastOnceCounts(preds, clip.target_frame, oracle_pred, checkpoints);
    if (first) {
      total = std::move(counts);
      first = false;
    } else {
      total += counts;
    }
  }
  const DiversityCurve curve = DiversityCurve::FromCounts(total);
  MetricsReport r;
  nlohmann::json values = nlohmann::json::object();
  for (PixelSubset subset : kPixelSubsets) {
    const auto i = static_cast<size_t>(subset);
    nlohmann::json series = nlohmann::json::array();
    for (size_t j = 0; j < curve.checkpoints.size(); ++j) {
      const auto& v = curve.values[i][j];
      series.push_back(v ? nlohmann::json(*v) : nlohmann::json());
      if (v) AddRow(r, "at_least_once", SubsetName(subset), *v, k, curve.checkpoints[j]);
    }
    values[SubsetName(subset)] = series;
  }
  r.summary = {{"checkpoint_hash", b.checkpoint_hash},
               {"k", k},
               {"clips", clips.size()},
               {"checkpoints", curve.checkpoints},
               {"at_least_once", values}};
  fs::create_directories(out_dir);
  WritePngRgb(out_dir / "curve.png", PlotCurve(curve));
  return r;
}

MetricsReport EvalCounterfactual(const RunConfig& config, const EvalOptions& options,
                                 int64_t k) {
  const ScenarioParams params = DataParams(config);
  const auto table = ClassTable::Synthetic();
  const int pedestrian = table->IdOf("pedestrian");
  std::string hash;
  OracleModel oracle = LoadOracleFor(config, &hash);
  std::optional<Bundle> b;
  if (options.baseline == Baseline::kNone) b = LoadBundle(config, options.checkpoint);
  int64_t hits = 0;
  const int64_t n = config.eval.n_counterfactual;
  for (int64_t i = 0; i < n; ++i) {
    const SequenceClip clip = GenerateCounterfactualPair(params, CounterfactualSeed(i)).second;
    std::vector<SegMap> preds;
    if (b) {
      LogitSampleSet set = ClipSamples(*b, clip, k, NoiseSeed(config.eval.seed, i));
      for (const LogitVolume& v : set.samples()) preds.push_back(ArgmaxDecode(v));
    } else if (options.baseline == Baseline::kCopyLast) {
      preds.push_back(CopyLastBaseline(clip, oracle.encoder, oracle.decoder,
                                       oracle.config.feature_downsample));
    } else {
      preds.push_back(OraclePredict(oracle.encoder, oracle.decoder, clip.target_frame,
                                    oracle.config.feature_downsample));
    }
    for (const SegMap& p : preds) {
      if (RegionClassIou(p, clip.mode.revealed_region, pedestrian) > kCoverageIou) {
        ++hits;
        break;
      }
    }
  }
  const double coverage = n > 0 ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  MetricsReport r;
  AddRow(r, "mode_coverage", "pedestrian_mode", coverage, b ? k : 1);
  r.summary = {{"clips", n}, {"hits", hits}, {"mode_coverage", coverage},
               {"iou_threshold", kCoverageIou}, {"oracle_hash", hash}};
  if (b) {
    r.summary["checkpoint_hash"] = b->checkpoint_hash;
    r.summary["k"] = k;
  } else {
    r.summary["baseline"] = BaselineName(options.baseline);
  }
  return r;
}

void WriteReport(const MetricsReport& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  WriteFileText(out_dir / "metrics.csv", r.Csv());
  WriteFileText(out_dir / "metrics.json", r.summary.dump(2) + "\n");
}

torch::Tensor GrayToRgb(const torch::Tensor& gray) {
  return gray.unsqueeze(-1).expand({gray.size(0), gray.size(1), 3}).contiguous();
}

void DrawLine(torch::Tensor& img, int64_t x0, int64_t y0, int64_t x1, int64_t y1,
              const std::array<uint8_t, 3>& color) {
  auto acc = img.accessor<uint8_t, 3>();
  const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int64_t err = dx + dy;
  while (true) {
    for (int64_t oy = 0; oy < 2; ++oy) {
      for (int64_t ox = 0; ox < 2; ++ox) {
        const int64_t y = y0 + oy, x = x0 + ox;
        if (y >= 0 && y < img.size(0) && x >= 0 && x < img.size(1)) {
          for (int c = 0; c < 3; ++c) acc[y][x][c] = color[c];
        }
      }
    }
    if (x0 == x1 && y0 == y1) break;
    const int64_t e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

void WriteResolvedConfig(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  WriteFileText(dir / kResolvedConfigName, config.Dump());
}

std::optional<double> MetricsReport::Find(const std::string& metric,
                                          const std::string& subset) const {
  for (const MetricRow& row : rows) {
    if (row.metric == metric && row.subset == subset) return row.value;
  }
  return std::nullopt;
}

std::string MetricsReport::Csv() const {
  std::string out = "metric,subset,value,K,checkpoint\n";
  for (const MetricRow& r : rows) {
    out += r.metric + "," + r.subset + "," + Fmt(r.value) + "," + std::to_string(r.k) +
           "," + (r.checkpoint ? std::to_string(r.checkpoint) : "") + "\n";
  }
  return out;
}

std::string EvalModeName(EvalMode mode) {
  switch (mode) {
    case EvalMode::kStandard: return "standard";
    case EvalMode::kCurve: return "curve";
    case EvalMode::kCounterfactual: return "counterfactual";
  }
  return "?";
}

EvalMode ParseEvalMode(const std::string& name) {
  if (name == "standard") return EvalMode::kStandard;
  if (name == "curve") return EvalMode::kCurve;
  if (name == "counterfactual") return EvalMode::kCounterfactual;
  throw ConfigError("unknown eval mode '" + name +
                    "' (expected standard, curve or counterfactual)");
}

std::string BaselineName(Baseline baseline) {
  switch (baseline) {
    case Baseline::kNone: return "none";
    case Baseline::kCopyLast: return "copy-last";
    case Baseline::kOracle: return "oracle";
  }
  return "?";
}

Baseline ParseBaseline(const std::string& name) {
  if (name == "none") return Baseline::kNone;
  if (name == "copy-last") return Baseline::kCopyLast;
  if (name == "oracle") return Baseline::kOracle;
  throw ConfigError("unknown baseline '" + name + "' (expected copy-last or oracle)");
}

DatasetManifest CmdGenData(const RunConfig& config, const fs::path& out_dir,
                           bool overwrite) {
  config.Validate();
  const fs::path root = out_dir.empty() ? fs::path(config.paths.data) : out_dir;
  DatasetManifest m = WriteDataset(config.data.params, config.data.n_train,
                                   config.data.n_val, config.data.n_test, root, overwrite);
  WriteResolvedConfig(config, root);
  return m;
}

OracleResult CmdTrainOracle(const RunConfig& config, const fs::path& out_dir) {
  const fs::path out = out_dir.empty() ? fs::path(config.paths.oracle_dir) : out_dir;
  WriteResolvedConfig(config, out);
  return TrainOracle(config.paths.data, config, out);
}

F2FResult CmdTrainF2F(const RunConfig& config, const fs::path& out_dir,
                      const F2FOptions& options) {
  if (out_dir.empty()) throw ConfigError("train --stage f2f needs --out");
  const fs::path oracle = OracleCheckpointPath(config.paths.oracle_dir);
  if (!fs::exists(oracle)) {
    throw PreconditionError("no oracle checkpoint at " + oracle.string() +
                            " (run `train --stage oracle` first)");
  }
  WriteResolvedConfig(config, out_dir);
  return TrainF2F(config.paths.data, config.paths.oracle_dir, config, out_dir, options);
}

MetricsReport CmdEval(const RunConfig& config, const EvalOptions& options,
                      const fs::path& out_dir) {
  config.Validate();
  if (out_dir.empty()) throw ConfigError("eval needs --out");
  const int64_t k = options.k.value_or(config.eval.k);
  if (k < 1) throw ConfigError("eval K must be >= 1");
  MetricsReport r;
  switch (options.mode) {
    case EvalMode::kStandard:
      r = options.baseline == Baseline::kNone ? EvalStandard(config, options, k, out_dir)
                                              : EvalBaseline(config, options.baseline);
      break;
    case EvalMode::kCurve:
      if (options.baseline != Baseline::kNone) {
        throw ConfigError("curve mode scores a forecaster, not a baseline");
      }
      r = EvalCurve(config, options, out_dir);
      break;
    case EvalMode::kCounterfactual:
      r = EvalCounterfactual(config, options, k);
      break;
  }
  r.summary["mode"] = EvalModeName(options.mode);
  r.summary["split"] = config.eval.split;
  WriteReport(r, out_dir);
  WriteResolvedConfig(config, out_dir);
  return r;
}

std::vector<AblationRow> CmdAblateK(const RunConfig& config, const fs::path& checkpoint,
                                    const std::vector<int64_t>& k_list,
                                    const fs::path& out_dir) {
  config.Validate();
  if (out_dir.empty()) throw ConfigError("ablate-k needs --out");
  if (k_list.empty()) throw ConfigError("ablate-k needs a non-empty --k-list");
  for (int64_t k : k_list) {
    if (k < 1) throw ConfigError("ablate-k: every K must be >= 1");
  }
  const bool train_mode = checkpoint.empty();
  const auto clips = EvalClips(config);
  const EvalConfig& ec = config.eval;
  std::vector<AblationRow> rows;
  for (int64_t k : k_list) {
    ForecastScores s;
    if (train_mode) {
      RunConfig c = config;
      c.model.k_samples = k;
      const fs::path dir = out_dir / ("k" + std::to_string(k));
      F2FResult trained = CmdTrainF2F(c, dir);
      Bundle b = LoadBundle(c, trained.best_checkpoint);
      s = ScoreForecaster(b, clips, ec.k, 0, 1.0, ec.seed, ec.mse_space);
    } else {
      Bundle b = LoadBundle(config, checkpoint);
      s = ScoreForecaster(b, clips, k, 0, 1.0, ec.seed, ec.mse_space);
    }
    rows.push_back({k, s.miou, s.miou_mo, s.pairwise_mse, s.lpips_proxy});
  }
  std::string csv = "K,miou,miou_mo,pairwise_mse,lpips_proxy\n";
  nlohmann::json summary = nlohmann::json::array();
  for (const AblationRow& r : rows) {
    csv += std::to_string(r.k) + "," + Fmt(r.miou) + "," + Fmt(r.miou_mo) + "," +
           Fmt(r.pairwise_mse) + "," + Fmt(r.lpips_proxy) + "\n";
    summary.push_back({{"K", r.k},
                       {"miou", r.miou},
                       {"miou_mo", JsonNumber(r.miou_mo)},
                       {"pairwise_mse", r.pairwise_mse},
                       {"lpips_proxy", r.lpips_proxy}});
  }
  if (train_mode) {
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].k > rows[i - 1].k && rows[i].pairwise_mse < rows[i - 1].pairwise_mse) {
        std::fprintf(stderr,
                     "warning: pairwise MSE decreased from K=%lld to K=%lld "
                     "(%.6g -> %.6g); expected non-decreasing in train-time K\n",
                     static_cast<long long>(rows[i - 1].k), static_cast<long long>(rows[i].k),
                     rows[i - 1].pairwise_mse, rows[i].pairwise_mse);
      }
    }
  }
  fs::create_directories(out_dir);
  WriteFileText(out_dir / "ablate_k.csv", csv);
  WriteFileText(out_dir / "ablate_k.json",
                nlohmann::json{{"mode", train_mode ? "train" : "eval"}, {"rows", summary}}
                        .dump(2) + "\n");
  WriteResolvedConfig(config, out_dir);
  return rows;
}

void CmdRender(const RunConfig& config, const fs::path& checkpoint,
               const std::string& clip_id, const fs::path& out_dir) {
  config.Validate();
  if (out_dir.empty()) throw ConfigError("render needs --out");
  // Accept either the directory name (clip_000003) or the clip id (val_000003).
  std::optional<SequenceClip> found;
  const fs::path by_dir = fs::path(config.paths.data) / config.eval.split / clip_id;
  if (fs::exists(by_dir / "clip.json")) {
    found = LoadClip(by_dir);
  } else {
    ClipStream stream(config.paths.data, ParseSplit(config.eval.split));
    while (auto c = stream.Next()) {
      if (c->clip_id == clip_id) {
        found = std::move(c);
        break;
      }
    }
  }
  if (!found) {
    throw PreconditionError("no clip '" + clip_id + "' in split " + config.eval.split);
  }
  const SequenceClip& clip = *found;
  Bundle b = LoadBundle(config, checkpoint);
  const int64_t k = config.eval.k;
  LogitSampleSet set = ClipSamples(b, clip, k, NoiseSeed(config.eval.seed, 0));

  const int64_t h = clip.target_frame.height(), w = clip.target_frame.width();
  torch::Tensor zeros = torch::zeros({h, w}, torch::kFloat64);
  const torch::Tensor var_logit = k >= 2 ? MeanLogitVariance(set) : zeros;
  const torch::Tensor var_discrete = k >= 2 ? DiscretePredictionVariance(set) : zeros;

  std::vector<std::pair<std::string, torch::Tensor>> header = {
      {"input_first.png", ColorizeSeg(clip.input_frames.front())},
      {"input_last.png", ColorizeSeg(clip.input_frames.back())},
      {"target.png", ColorizeSeg(clip.target_frame)},
      {"mean_logit_variance.png", GrayToRgb(GrayFromMap(var_logit))},
      {"discrete_variance.png", GrayToRgb(GrayFromMap(var_discrete))}};
  std::vector<torch::Tensor> sample_images;
  for (int64_t i = 0; i < k; ++i) sample_images.push_back(ColorizeSeg(ArgmaxDecode(set[i])));

  fs::create_directories(out_dir);
  for (const auto& [name, img] : header) WritePngRgb(out_dir / name, img);
  for (int64_t i = 0; i < k; ++i) {
    WritePngRgb(out_dir / ("sample_" + std::to_string(i) + ".png"), sample_images[i]);
  }

  // Panel: inputs, ground truth and variance maps on top, samples below.
  constexpr int64_t kGap = 4;
  const int64_t cols = std::max<int64_t>(5, std::min<int64_t>(k, 8));
  const int64_t sample_rows = (k + cols - 1) / cols;
  const int64_t ph = (1 + sample_rows) * (h + kGap) + kGap;
  const int64_t pw = cols * (w + kGap) + kGap;
  torch::Tensor panel = torch::full({ph, pw, 3}, 255, torch::kUInt8);
  auto place = [&](const torch::Tensor& img, int64_t row, int64_t col) {
    const int64_t y = kGap + row * (h + kGap), x = kGap + col * (w + kGap);
    panel.slice(0, y, y + h).slice(1, x, x + w).copy_(img);
  };
  for (size_t i = 0; i < header.size(); ++i) place(header[i].second, 0, static_cast<int64_t>(i));
  for (int64_t i = 0; i < k; ++i) place(sample_images[i], 1 + i / cols, i % cols);
  WritePngRgb(out_dir / "panel.png", panel);
  WriteResolvedConfig(config, out_dir);
}

torch::Tensor ColorizeSeg(const SegMap& seg) {
  const ClassTable& table = *seg.table();
  torch::Tensor lut = torch::empty({table.num_classes(), 3}, torch::kUInt8);
  for (int c = 0; c < table.num_classes(); ++c) {
    for (int j = 0; j < 3; ++j) lut[c][j] = table.palette()[c][j];
  }
  return lut.index({seg.data()}).contiguous();
}

torch::Tensor GrayFromMap(const torch::Tensor& map) {
  torch::Tensor m = map.to(torch::kFloat64).clamp_min(0.0);
  const double peak = m.max().item<double>();
  if (!(peak > 0.0)) return torch::zeros(m.sizes(), torch::kUInt8);
  return (m / peak * 255.0).round().to(torch::kUInt8).contiguous();
}

torch::Tensor PlotCurve(const DiversityCurve& curve, int64_t height, int64_t width) {
  static constexpr std::array<std::array<uint8_t, 3>, 3> kColors = {
      {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}}};
  torch::Tensor img = torch::full({height, width, 3}, 255, torch::kUInt8);
  const int64_t left = 30, right = width - 10, top = 10, bottom = height - 25;
  const std::array<uint8_t, 3> black = {0, 0, 0}, grid = {220, 220, 220};
  for (int i = 1; i < 4; ++i) {
    const int64_t y = bottom - (bottom - top) * i / 4;
    DrawLine(img, left, y, right, y, grid);
  }
  DrawLine(img, left, bottom, right, bottom, black);
  DrawLine(img, left, top, left, bottom, black);
  const size_t n = curve.checkpoints.size();
  auto x_of = [&](size_t j) {
    return n < 2 ? left : left + static_cast<int64_t>((right - left) * j / (n - 1));
  };
  auto y_of = [&](double v) {
    return bottom - static_cast<int64_t>(std::lround(v * static_cast<double>(bottom - top)));
  };
  for (size_t j = 0; j < n; ++j) DrawLine(img, x_of(j), bottom, x_of(j), bottom + 4, black);
  for (size_t s = 0; s < 3; ++s) {
    std::optional<std::pair<int64_t, int64_t>> prev;
    for (size_t j = 0; j < n; ++j) {
      const auto& v = curve.values[s][j];
      if (!v) {
        prev.reset();
        continue;
      }
      const std::pair<int64_t, int64_t> p = {x_of(j), y_of(*v)};
      if (prev) {
        DrawLine(img, prev->first, prev->second, p.first, p.second, kColors[s]);
      } else {
        DrawLine(img, p.first, p.second, p.first, p.second, kColors[s]);
      }
      prev = p;
    }
  }
  return img;
}

void WritePredictionDump(const fs::path& path, const PredictionDump& dump) {
  const torch::Tensor logits = dump.logits.to(torch::kFloat32).contiguous();
  if (logits.dim() != 4) throw ShapeError("prediction dump: logits must be (K, C, H, W)");
  const torch::Tensor gt = dump.gt.to(torch::kInt64).contiguous();
  const torch::Tensor oracle = dump.oracle.to(torch::kInt64).contiguous();
  if (gt.size(0) != logits.size(2) || gt.size(1) != logits.size(3) ||
      !gt.sizes().equals(oracle.sizes())) {
    throw ShapeError("prediction dump: gt/oracle shape differs from logits");
  }
  ByteWriter w;
  w.PutBytes({reinterpret_cast<const uint8_t*>(kDumpMagic), sizeof(kDumpMagic)});
  for (int64_t d : logits.sizes()) w.Put<int64_t>(d);
  w.PutTensorData(logits);
  w.PutTensorData(gt);
  w.PutTensorData(oracle);
  w.Put<uint32_t>(Crc32(w.bytes()));
  WriteFileBytes(path, w.bytes());
}

PredictionDump ReadPredictionDump(const fs::path& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  const std::string source = path.filename().string();
  ByteReader r(bytes, source);
  auto magic = r.GetBytes(sizeof(kDumpMagic), "magic");
  if (std::memcmp(magic.data(), kDumpMagic, sizeof(kDumpMagic)) != 0) {
    throw ParseError(source + ": not a prediction dump (bad 'magic')");
  }
  std::vector<int64_t> shape(4);
  for (auto& d : shape) {
    d = r.Get<int64_t>("shape");
    if (d < 1 || d > (int64_t{1} << 20)) throw ParseError(source + ": field 'shape' out of range");
  }
  PredictionDump out;
  out.logits = r.GetTensorData(torch::kFloat32, shape, "logits");
  out.gt = r.GetTensorData(torch::kInt64, {shape[2], shape[3]}, "gt");
  out.oracle = r.GetTensorData(torch::kInt64, {shape[2], shape[3]}, "oracle");
  const auto stored = r.Get<uint32_t>("checksum");
  if (Crc32({bytes.data(), bytes.size() - 4}) != stored) {
    throw ParseError(source + ": checksum mismatch");
  }
  return out;
}

}  // namespace mmf
