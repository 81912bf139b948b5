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

#include "mmf/config.h"

#include <charconv>
#include <functional>
#include <sstream>

#include "mmf/errors.h"
#include "mmf/io_util.h"

namespace mmf {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field IntField(std::string key, T RunConfig::*section, int64_t T::*member) {
  return {key,
          [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& v) {
            c.*section.*member = ParseNumber<int64_t>(key, v);
          }};
}

template <typename T, typename U>
Field Uint64Field(std::string key, T RunConfig::*section, U T::*member) {
  return {key,
          [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& v) {
            c.*section.*member = ParseNumber<uint64_t>(key, v);
          }};
}

template <typename T>
Field DoubleField(std::string key, T RunConfig::*section, double T::*member) {
  return {key,
          [=](const RunConfig& c) { return FormatDouble(c.*section.*member); },
          [=](RunConfig& c, const std::string& v) {
            c.*section.*member = ParseNumber<double>(key, v);
          }};
}

const std::vector<Field>& Schema() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    using RC = RunConfig;
    // data.*
    auto p = [](RC& c) -> ScenarioParams& { return c.data.params; };
    auto cp = [](const RC& c) -> const ScenarioParams& { return c.data.params; };
    f.push_back({"data.height", [=](const RC& c) { return std::to_string(cp(c).height); },
                 [=](RC& c, const std::string& v) { p(c).height = ParseNumber<int64_t>("data.height", v); }});
    f.push_back({"data.width", [=](const RC& c) { return std::to_string(cp(c).width); },
                 [=](RC& c, const std::string& v) { p(c).width = ParseNumber<int64_t>("data.width", v); }});
    f.push_back({"data.n_input_frames", [=](const RC& c) { return std::to_string(cp(c).n_input_frames); },
                 [=](RC& c, const std::string& v) { p(c).n_input_frames = ParseNumber<int>("data.n_input_frames", v); }});
    f.push_back({"data.input_stride", [=](const RC& c) { return std::to_string(cp(c).input_stride); },
                 [=](RC& c, const std::string& v) { p(c).input_stride = ParseNumber<int>("data.input_stride", v); }});
    f.push_back({"data.horizon", [=](const RC& c) { return std::to_string(cp(c).horizon); },
                 [=](RC& c, const std::string& v) { p(c).horizon = ParseNumber<int>("data.horizon", v); }});
    f.push_back({"data.p_mode", [=](const RC& c) { return FormatDouble(cp(c).p_mode); },
                 [=](RC& c, const std::string& v) { p(c).p_mode = ParseNumber<double>("data.p_mode", v); }});
    f.push_back({"data.occluder_speed", [=](const RC& c) { return FormatDouble(cp(c).occluder_speed); },
                 [=](RC& c, const std::string& v) { p(c).occluder_speed = ParseNumber<double>("data.occluder_speed", v); }});
    f.push_back({"data.seed", [=](const RC& c) { return std::to_string(cp(c).rng_seed); },
                 [=](RC& c, const std::string& v) { p(c).rng_seed = ParseNumber<uint64_t>("data.seed", v); }});
    f.push_back(IntField("data.n_train", &RC::data, &DataConfig::n_train));
    f.push_back(IntField("data.n_val", &RC::data, &DataConfig::n_val));
    f.push_back(IntField("data.n_test", &RC::data, &DataConfig::n_test));
    // model.*
    f.push_back(IntField("model.feature_channels", &RC::model, &ModelConfig::feature_channels));
    f.push_back(IntField("model.feature_downsample", &RC::model, &ModelConfig::feature_downsample));
    f.push_back(IntField("model.noise_channels", &RC::model, &ModelConfig::noise_channels));
    f.push_back(IntField("model.k_samples", &RC::model, &ModelConfig::k_samples));
    f.push_back(IntField("model.f2f_layers", &RC::model, &ModelConfig::f2f_layers));
    f.push_back(IntField("model.f2f_width", &RC::model, &ModelConfig::f2f_width));
    f.push_back(DoubleField("model.disc_dropout", &RC::model, &ModelConfig::disc_dropout));
    f.push_back(IntField("model.disc_layers", &RC::model, &ModelConfig::disc_layers));
    f.push_back(IntField("model.disc_width", &RC::model, &ModelConfig::disc_width));
    f.push_back({"model.deformable", [](const RC& c) { return std::string(c.model.deformable ? "true" : "false"); },
                 [](RC& c, const std::string& v) { c.model.deformable = ParseBool("model.deformable", v); }});
    // train.*
    f.push_back(IntField("train.oracle_epochs", &RC::train, &TrainConfig::oracle_epochs));
    f.push_back(IntField("train.oracle_batch_size", &RC::train, &TrainConfig::oracle_batch_size));
    f.push_back(DoubleField("train.oracle_lr", &RC::train, &TrainConfig::oracle_lr));
    f.push_back(IntField("train.epochs", &RC::train, &TrainConfig::epochs));
    f.push_back(IntField("train.patience", &RC::train, &TrainConfig::patience));
    f.push_back(IntField("train.batch_size", &RC::train, &TrainConfig::batch_size));
    f.push_back(DoubleField("train.lr0", &RC::train, &TrainConfig::lr0));
    f.push_back(DoubleField("train.lr_min", &RC::train, &TrainConfig::lr_min));
    f.push_back(DoubleField("train.adam_beta1", &RC::train, &TrainConfig::adam_beta1));
    f.push_back(DoubleField("train.adam_beta2", &RC::train, &TrainConfig::adam_beta2));
    f.push_back({"train.loss", [](const RC& c) { return LossKindName(c.train.loss_kind); },
                 [](RC& c, const std::string& v) { c.train.loss_kind = ParseLossKind(v); }});
    f.push_back({"train.mr_space",
                 [](const RC& c) { return std::string(c.train.mr_space == MrSpace::kFeature ? "feature" : "logit"); },
                 [](RC& c, const std::string& v) {
                   if (v == "feature") c.train.mr_space = MrSpace::kFeature;
                   else if (v == "logit") c.train.mr_space = MrSpace::kLogit;
                   else throw ConfigError("config key 'train.mr_space': expected feature|logit, got '" + v + "'");
                 }});
    f.push_back(IntField("train.d_steps_per_g", &RC::train, &TrainConfig::d_steps_per_g));
    f.push_back({"train.d_all_k", [](const RC& c) { return std::string(c.train.d_all_k ? "true" : "false"); },
                 [](RC& c, const std::string& v) { c.train.d_all_k = ParseBool("train.d_all_k", v); }});
    f.push_back(IntField("train.val_k", &RC::train, &TrainConfig::val_k));
    f.push_back(Uint64Field("train.seed", &RC::train, &TrainConfig::seed));
    f.push_back(IntField("train.threads", &RC::train, &TrainConfig::threads));
    // loss.*
    f.push_back(DoubleField("loss.lambda_mr", &RC::loss, &LossWeights::lambda_mr));
    f.push_back(DoubleField("loss.lambda_gan", &RC::loss, &LossWeights::lambda_gan));
    f.push_back(DoubleField("loss.variance_floor", &RC::loss, &LossWeights::variance_floor));
    // eval.*
    f.push_back(IntField("eval.k", &RC::eval, &EvalConfig::k));
    f.push_back(IntField("eval.curve_k", &RC::eval, &EvalConfig::curve_k));
    f.push_back(IntField("eval.top_k", &RC::eval, &EvalConfig::top_k));
    f.push_back(DoubleField("eval.top_fraction", &RC::eval, &EvalConfig::top_fraction));
    f.push_back({"eval.mse_space",
                 [](const RC& c) { return std::string(c.eval.mse_space == MseSpace::kProbability ? "probability" : "logit"); },
                 [](RC& c, const std::string& v) {
                   if (v == "probability") c.eval.mse_space = MseSpace::kProbability;
                   else if (v == "logit") c.eval.mse_space = MseSpace::kLogit;
                   else throw ConfigError("config key 'eval.mse_space': expected probability|logit, got '" + v + "'");
                 }});
    f.push_back({"eval.split", [](const RC& c) { return c.eval.split; },
                 [](RC& c, const std::string& v) { ParseSplit(v); c.eval.split = v; }});
    f.push_back(IntField("eval.n_counterfactual", &RC::eval, &EvalConfig::n_counterfactual));
    f.push_back(Uint64Field("eval.seed", &RC::eval, &EvalConfig::seed));
    // paths.*
    f.push_back({"paths.data", [](const RC& c) { return c.paths.data; },
                 [](RC& c, const std::string& v) { c.paths.data = v; }});
    f.push_back({"paths.oracle_dir", [](const RC& c) { return c.paths.oracle_dir; },
                 [](RC& c, const std::string& v) { c.paths.oracle_dir = v; }});
    return f;
  }();
  return kFields;
}

const Field& FindField(const std::string& key) {
  for (const Field& f : Schema()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::string LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kMr1: return "mr1";
    case LossKind::kMr2: return "mr2";
    case LossKind::kL2Baseline: return "l2";
  }
  return "?";
}

LossKind ParseLossKind(const std::string& name) {
  if (name == "mr1") return LossKind::kMr1;
  if (name == "mr2") return LossKind::kMr2;
  if (name == "l2") return LossKind::kL2Baseline;
  throw ConfigError("unknown loss '" + name + "' (expected mr1|mr2|l2)");
}

void TrainConfig::Validate() const {
  if (epochs < 1 || oracle_epochs < 1) throw ConfigError("train epochs must be >= 1");
  if (batch_size < 1 || oracle_batch_size < 1) throw ConfigError("train batch sizes must be >= 1");
  if (!(lr_min < lr0) || lr_min < 0) throw ConfigError("train.lr_min must satisfy 0 <= lr_min < lr0");
  if (!(oracle_lr > 0)) throw ConfigError("train.oracle_lr must be > 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
    throw ConfigError("train Adam betas must lie in [0, 1)");
  }
  if (patience < 0) throw ConfigError("train.patience must be >= 0");
  if (d_steps_per_g < 1) throw ConfigError("train.d_steps_per_g must be >= 1");
  if (val_k < 1) throw ConfigError("train.val_k must be >= 1");
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
}

void EvalConfig::Validate() const {
  if (k < 1 || curve_k < 1 || top_k < 1) throw ConfigError("eval sample counts must be >= 1");
  if (!(top_fraction > 0 && top_fraction <= 1)) throw ConfigError("eval.top_fraction must lie in (0, 1]");
  if (top_fraction * static_cast<double>(top_k) < 1.0 - 1e-9) {
    throw ConfigError("eval.top_fraction * eval.top_k must be >= 1");
  }
  if (n_counterfactual < 0) throw ConfigError("eval.n_counterfactual must be >= 0");
  ParseSplit(split);
}

void RunConfig::Validate() const {
  data.params.Validate();
  if (data.n_train < 0 || data.n_val < 0 || data.n_test < 0) {
    throw ConfigError("data split sizes must be >= 0");
  }
  model.Validate();
  if (data.params.height % model.feature_downsample != 0 ||
      data.params.width % model.feature_downsample != 0) {
    throw ConfigError("data.height and data.width must be divisible by model.feature_downsample");
  }
  train.Validate();
  loss.Validate();
  eval.Validate();
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  FindField(key).set(*this, value);
}

std::string RunConfig::Get(const std::string& key) const {
  return FindField(key).get(*this);
}

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const Field& f : Schema()) keys.push_back(f.key);
  return keys;
}

RunConfig RunConfig::Parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    config.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  return Parse(ReadFileText(path));
}

std::string RunConfig::Dump() const {
  std::string out = "# mmforecast resolved configuration\n";
  std::string section;
  for (const Field& f : Schema()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out += "\n";
      section = s;
    }
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

}  // namespace mmf
