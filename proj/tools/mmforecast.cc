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

// Command-line entry point: gen-data, train, eval, ablate-k, render.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "mmf/config.h"
#include "mmf/errors.h"
#include "mmf/pipeline.h"

namespace {

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kConfigFailure = 2,
  kPreconditionFailure = 3,
  kDiverged = 4,
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::string out;
  std::string oracle;
  std::string data;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Flat key = value config file");
  cmd->add_option("--set", c.overrides, "Override one config key (section.key=value)");
  cmd->add_option("--seed", c.seed, "Seed for this command");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--oracle", c.oracle, "Oracle run directory (paths.oracle_dir)");
  cmd->add_option("--data", c.data, "Dataset root (paths.data)");
}

// Loads the config, applies overrides and routes --seed to seed_key.
mmf::RunConfig Resolve(const Common& c, const std::string& seed_key) {
  mmf::RunConfig config = c.config_path.empty() ? mmf::RunConfig()
                                                : mmf::RunConfig::Load(c.config_path);
  for (const std::string& kv : c.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw mmf::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    config.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) config.Set(seed_key, std::to_string(*c.seed));
  if (!c.oracle.empty()) config.paths.oracle_dir = c.oracle;
  if (!c.data.empty()) config.paths.data = c.data;
  config.Validate();
  torch::set_num_threads(static_cast<int>(config.train.threads));
  return config;
}

std::vector<int64_t> ParseKList(const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw mmf::ConfigError("--k-list: '" + item + "' is not an integer");
    }
  }
  return out;
}

void PrintReport(const mmf::MetricsReport& report) {
  std::cout << report.Csv();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal semantic forecasting with feature-to-feature generators"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, ablate_c, render_c;
  bool overwrite = false;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  AddCommon(gen, gen_c);
  gen->add_flag("--overwrite", overwrite, "Replace an existing dataset");

  std::string stage = "f2f", loss, resume;
  int64_t stop_after = 0;
  auto* train = app.add_subcommand("train", "Train the oracle or the F2F forecaster");
  AddCommon(train, train_c);
  train->add_option("--stage", stage, "oracle or f2f")
      ->check(CLI::IsMember({"oracle", "f2f"}));
  train->add_option("--loss", loss, "mr1, mr2 or l2")->check(CLI::IsMember({"mr1", "mr2", "l2"}));
  train->add_option("--resume", resume, "f2f_last.ckpt of an interrupted run");
  train->add_option("--stop-after-epoch", stop_after, "Stop after this many epochs");

  std::string checkpoint, mode = "standard", baseline = "none", k_list = "1,2,4,8,16";
  std::string clip_id, split;
  std::optional<int64_t> k;
  bool dump = false;
  auto* eval = app.add_subcommand("eval", "Score a forecaster or a baseline");
  AddCommon(eval, eval_c);
  eval->add_option("--checkpoint", checkpoint, "Forecaster checkpoint");
  eval->add_option("--k", k, "Samples per clip (default eval.k)");
  eval->add_option("--mode", mode, "standard, curve or counterfactual");
  eval->add_option("--baseline", baseline, "copy-last or oracle");
  eval->add_option("--split", split, "Dataset split (default eval.split)");
  eval->add_flag("--dump", dump, "Write per-clip prediction dumps");

  auto* ablate = app.add_subcommand("ablate-k", "Sweep the number of samples K");
  AddCommon(ablate, ablate_c);
  ablate->add_option("--checkpoint", checkpoint,
                     "Fixed forecaster; without it one model is trained per K");
  ablate->add_option("--k-list", k_list, "Comma-separated K values");
  ablate->add_option("--split", split, "Dataset split (default eval.split)");

  auto* render = app.add_subcommand("render", "Render a prediction panel for one clip");
  AddCommon(render, render_c);
  render->add_option("--checkpoint", checkpoint, "Forecaster checkpoint")->required();
  render->add_option("--clip", clip_id, "Clip id, e.g. clip_000000")->required();
  render->add_option("--split", split, "Dataset split (default eval.split)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (gen->parsed()) {
      const mmf::RunConfig config = Resolve(gen_c, "data.seed");
      const mmf::DatasetManifest m = mmf::CmdGenData(config, gen_c.out, overwrite);
      std::printf("wrote %lld train, %lld val, %lld test clips\n",
                  static_cast<long long>(m.n_train), static_cast<long long>(m.n_val),
                  static_cast<long long>(m.n_test));
    } else if (train->parsed()) {
      mmf::RunConfig config = Resolve(train_c, "train.seed");
      if (!loss.empty()) config.Set("train.loss", loss);
      if (stage == "oracle") {
        const mmf::OracleResult r = mmf::CmdTrainOracle(config, train_c.out);
        std::printf("oracle val mIoU %.6f -> %s\n", r.val_miou, r.checkpoint.c_str());
      } else {
        mmf::F2FOptions options;
        options.resume_from = resume;
        options.stop_after_epoch = stop_after;
        const mmf::F2FResult r = mmf::CmdTrainF2F(config, train_c.out, options);
        std::printf("best checkpoint %s\n", r.best_checkpoint.c_str());
      }
    } else if (eval->parsed()) {
      mmf::RunConfig config = Resolve(eval_c, "eval.seed");
      if (!split.empty()) config.Set("eval.split", split);
      mmf::EvalOptions options;
      options.mode = mmf::ParseEvalMode(mode);
      options.baseline = mmf::ParseBaseline(baseline);
      options.checkpoint = checkpoint;
      options.k = k;
      options.dump = dump;
      PrintReport(mmf::CmdEval(config, options, eval_c.out));
    } else if (ablate->parsed()) {
      mmf::RunConfig config = Resolve(ablate_c, "eval.seed");
      if (!split.empty()) config.Set("eval.split", split);
      const auto rows = mmf::CmdAblateK(config, checkpoint, ParseKList(k_list), ablate_c.out);
      std::printf("K,miou,miou_mo,pairwise_mse,lpips_proxy\n");
      for (const auto& r : rows) {
        std::printf("%lld,%.6f,%.6f,%.6g,%.6g\n", static_cast<long long>(r.k), r.miou,
                    r.miou_mo, r.pairwise_mse, r.lpips_proxy);
      }
    } else if (render->parsed()) {
      mmf::RunConfig config = Resolve(render_c, "eval.seed");
      if (!split.empty()) config.Set("eval.split", split);
      mmf::CmdRender(config, checkpoint, clip_id, render_c.out);
      std::printf("wrote %s/panel.png\n", render_c.out.c_str());
    }
  } catch (const mmf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigFailure;
  } catch (const mmf::DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kDiverged;
  } catch (const mmf::PreconditionError& e) {
    std::fprintf(stderr, "precondition failed: %s\n", e.what());
    return kPreconditionFailure;
  } catch (const mmf::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kPreconditionFailure;
  } catch (const mmf::VersionError& e) {
    std::fprintf(stderr, "version error: %s\n", e.what());
    return kPreconditionFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
