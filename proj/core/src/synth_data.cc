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

#include "mmf/synth_data.h"

#include <algorithm>
#include <cmath>

#include "mmf/errors.h"
#include "mmf/io_util.h"

namespace mmf {
namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Platform-stable draws; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t Next() { return state_ = SplitMix64(state_); }
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }
  int64_t Int(int64_t lo, int64_t hi) {  // inclusive
    if (hi <= lo) return lo;
    return lo + static_cast<int64_t>(Next() % static_cast<uint64_t>(hi - lo + 1));
  }
  double Real(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

 private:
  uint64_t state_;
};

constexpr uint64_t kModeStream = 0x6d6f6465ULL;  // "mode"
constexpr uint64_t kSplitStride = 1ULL << 24;

// Geometry that does not depend on the per-clip draws.
struct Geometry {
  int64_t car_h, car_w;
  int64_t void_top;
  int64_t max_road_top;
  std::vector<int> abs_inputs;  // absolute timesteps, first input at 0
  int abs_target;
  std::vector<int64_t> offsets;  // rounded occluder displacement per input
  int64_t target_offset;
};

Geometry MakeGeometry(const ScenarioParams& p) {
  Geometry g;
  g.car_h = 3 * p.height / 8;
  g.car_w = 3 * p.width / 8;
  g.void_top = p.height - std::max<int64_t>(1, p.height / 16);
  // Building bottom at most 0.36 H, sidewalk band at most 0.10 H.
  g.max_road_top = static_cast<int64_t>(0.36 * p.height) +
                   static_cast<int64_t>(0.10 * p.height);
  for (int i = 0; i < p.n_input_frames; ++i) {
    g.abs_inputs.push_back(i * p.input_stride);
  }
  const int now = p.n_input_frames * p.input_stride;
  g.abs_target = now + p.horizon;
  for (int t : g.abs_inputs) {
    g.offsets.push_back(std::llround(p.occluder_speed * t));
  }
  g.target_offset = std::llround(p.occluder_speed * g.abs_target);
  return g;
}

struct Layout {
  int64_t building_bottom, road_top;
  std::vector<int64_t> roofline;  // first building row per column
  int64_t car_y;
  int64_t x0;  // car left edge at absolute time 0
  int direction;
};

int64_t CarX(const Layout& l, int64_t offset) {
  return l.x0 + l.direction * offset;
}

PixelRect RevealedRegion(const Geometry& g, const Layout& l) {
  int64_t lo = std::numeric_limits<int64_t>::min();
  int64_t hi = std::numeric_limits<int64_t>::max();
  for (int64_t off : g.offsets) {
    lo = std::max(lo, CarX(l, off));
    hi = std::min(hi, CarX(l, off) + g.car_w);
  }
  return {l.car_y, lo, g.car_h, hi - lo};
}

torch::Tensor Background(const ScenarioParams& p, const Geometry& g,
                         const Layout& l, const ClassTable& table) {
  torch::Tensor seg = torch::empty({p.height, p.width}, torch::kInt64);
  auto a = seg.accessor<int64_t, 2>();
  const int64_t sky = table.IdOf("sky"), building = table.IdOf("building"),
                sidewalk = table.IdOf("sidewalk"), road = table.IdOf("road");
  for (int64_t y = 0; y < p.height; ++y) {
    for (int64_t x = 0; x < p.width; ++x) {
      int64_t c;
      if (y >= g.void_top) {
        c = table.void_id();
      } else if (y >= l.road_top) {
        c = road;
      } else if (y >= l.building_bottom) {
        c = sidewalk;
      } else if (y >= l.roofline[x]) {
        c = building;
      } else {
        c = sky;
      }
      a[y][x] = c;
    }
  }
  return seg;
}

void PaintRect(torch::Tensor& seg, int64_t y, int64_t x, int64_t h, int64_t w,
               int64_t cls) {
  const int64_t y0 = std::max<int64_t>(0, y), x0 = std::max<int64_t>(0, x);
  const int64_t y1 = std::min(seg.size(0), y + h), x1 = std::min(seg.size(1), x + w);
  if (y0 >= y1 || x0 >= x1) return;
  seg.slice(0, y0, y1).slice(1, x0, x1).fill_(cls);
}

Layout DrawLayout(const ScenarioParams& p, const Geometry& g, Rng& rng) {
  Layout l;
  const double h = static_cast<double>(p.height);
  const auto sky_bottom = static_cast<int64_t>(h * rng.Real(0.08, 0.15));
  l.building_bottom = static_cast<int64_t>(h * rng.Real(0.30, 0.36));
  l.road_top = l.building_bottom + std::max<int64_t>(
                                       1, static_cast<int64_t>(h * rng.Real(0.05, 0.10)));
  // Skyline in blocks of W/8 columns.
  const int64_t block = std::max<int64_t>(1, p.width / 8);
  l.roofline.resize(p.width);
  for (int64_t x0 = 0; x0 < p.width; x0 += block) {
    const int64_t roof = sky_bottom + rng.Int(0, static_cast<int64_t>(0.1 * h));
    for (int64_t x = x0; x < std::min(p.width, x0 + block); ++x) {
      l.roofline[x] = std::min(roof, l.building_bottom - 1);
    }
  }
  l.car_y = rng.Int(l.road_top + 1, g.void_top - g.car_h);
  l.direction = rng.Uniform() < 0.5 ? 1 : -1;
  const int64_t travel = g.offsets.back();
  if (l.direction > 0) {
    l.x0 = rng.Int(0, p.width - g.car_w - travel);
  } else {
    l.x0 = rng.Int(travel, p.width - g.car_w);
  }
  return l;
}

struct Pedestrian {
  int64_t x, y, h, w;
};

std::vector<Pedestrian> DrawPedestrians(const PixelRect& region, Rng& rng) {
  std::vector<Pedestrian> out;
  const int64_t w = std::max<int64_t>(1, std::llround(0.4 * region.width));
  const int64_t h = std::max<int64_t>(1, (3 * region.height + 3) / 4);
  const int64_t y = region.y + region.height - h;
  const int64_t count = region.width >= 2 * w + 1 ? rng.Int(1, 2) : 1;
  if (count == 1) {
    out.push_back({region.x + rng.Int(0, region.width - w), y, h, w});
  } else {
    // Two non-overlapping walkers with a gap of at least one column.
    const int64_t slack = region.width - 2 * w - 1;
    const int64_t a = rng.Int(0, slack);
    const int64_t b = rng.Int(a, slack);
    out.push_back({region.x + a, y, h, w});
    out.push_back({region.x + b + w + 1, y, h, w});
  }
  return out;
}

SequenceClip BuildClip(const ScenarioParams& p, uint64_t seed,
                       std::optional<Mode> forced_mode) {
  p.Validate();
  const auto table = ClassTable::Synthetic();
  const Geometry g = MakeGeometry(p);
  Rng scene_rng(SplitMix64(p.rng_seed) ^ SplitMix64(seed));
  const Layout layout = DrawLayout(p, g, scene_rng);
  const PixelRect region = RevealedRegion(g, layout);
  const torch::Tensor background = Background(p, g, layout, *table);
  const int64_t car = table->IdOf("car");

  SequenceClip clip{.input_frames = {},
                    .target_frame = SegMap(background, table),
                    .mode = {},
                    .clip_id = {},
                    .seed = seed,
                    .input_times = {},
                    .target_time = p.horizon};
  const int now = p.n_input_frames * p.input_stride;
  for (size_t i = 0; i < g.abs_inputs.size(); ++i) {
    torch::Tensor frame = background.clone();
    PaintRect(frame, layout.car_y, CarX(layout, g.offsets[i]), g.car_h,
              g.car_w, car);
    clip.input_frames.emplace_back(frame, table);
    clip.input_times.push_back(g.abs_inputs[i] - now);
  }

  Rng mode_rng(SplitMix64(p.rng_seed ^ kModeStream) ^ SplitMix64(~seed));
  const bool pedestrians =
      forced_mode ? *forced_mode == Mode::kPedestrianRevealed
                  : mode_rng.Uniform() < p.p_mode;
  const std::vector<Pedestrian> walkers = DrawPedestrians(region, mode_rng);

  torch::Tensor target = background.clone();
  if (pedestrians) {
    const int64_t ped = table->IdOf("pedestrian");
    for (const Pedestrian& w : walkers) PaintRect(target, w.y, w.x, w.h, w.w, ped);
  }
  PaintRect(target, layout.car_y, CarX(layout, g.target_offset), g.car_h,
            g.car_w, car);
  clip.target_frame = SegMap(target, table);
  clip.mode = {pedestrians ? Mode::kPedestrianRevealed : Mode::kClearRoad,
               region};
  return clip;
}

}  // namespace

void ScenarioParams::Validate() const {
  if (!(p_mode >= 0.0 && p_mode <= 1.0)) {
    throw ConfigError("data.p_mode must lie in [0, 1], got " +
                      std::to_string(p_mode));
  }
  if (horizon != 3 && horizon != 9) {
    throw ConfigError("data.horizon must be 3 or 9, got " +
                      std::to_string(horizon));
  }
  if (n_input_frames < 1) throw ConfigError("data.n_input_frames must be >= 1");
  if (input_stride < 1) throw ConfigError("data.input_stride must be >= 1");
  if (!(occluder_speed > 0.0)) {
    throw ConfigError("data.occluder_speed must be positive");
  }
  if (height < 16 || width < 16) {
    throw ConfigError("image too small to contain occluder trajectory: " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  const Geometry g = MakeGeometry(*this);
  const int64_t travel = g.offsets.back();
  const int64_t occluded = g.car_w - travel;
  const int64_t revealed_gap = g.target_offset - g.car_w;
  if (g.car_h < 2 || occluded < 2 || revealed_gap < 0 ||
      travel + g.car_w > width || g.max_road_top + 1 + g.car_h > g.void_top) {
    throw ConfigError(
        "image too small to contain occluder trajectory: " +
        std::to_string(height) + "x" + std::to_string(width) + " with speed " +
        std::to_string(occluder_speed) + " (car " + std::to_string(g.car_w) +
        " px wide travels " + std::to_string(travel) +
        " px over the inputs; needs < " + std::to_string(g.car_w - 1) +
        " and a full reveal by the target)");
  }
}

nlohmann::json ScenarioParams::ToJson() const {
  return {{"height", height},
          {"width", width},
          {"n_input_frames", n_input_frames},
          {"input_stride", input_stride},
          {"horizon", horizon},
          {"p_mode", p_mode},
          {"occluder_speed", occluder_speed},
          {"rng_seed", rng_seed}};
}

ScenarioParams ScenarioParams::FromJson(const nlohmann::json& j) {
  ScenarioParams p;
  auto field = [&](const char* name, auto& out) {
    if (!j.contains(name)) throw ParseError("params: missing field '" + std::string(name) + "'");
    try {
      j.at(name).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ParseError("params: bad value for field '" + std::string(name) + "'");
    }
  };
  field("height", p.height);
  field("width", p.width);
  field("n_input_frames", p.n_input_frames);
  field("input_stride", p.input_stride);
  field("horizon", p.horizon);
  field("p_mode", p.p_mode);
  field("occluder_speed", p.occluder_speed);
  field("rng_seed", p.rng_seed);
  return p;
}

std::string ScenarioParams::Hash() const {
  const std::string text = ToJson().dump();
  return Hex32(Crc32({reinterpret_cast<const uint8_t*>(text.data()), text.size()}));
}

std::string ModeName(Mode mode) {
  return mode == Mode::kClearRoad ? "clear_road" : "pedestrian_revealed";
}

Mode ParseMode(const std::string& name) {
  if (name == "clear_road") return Mode::kClearRoad;
  if (name == "pedestrian_revealed") return Mode::kPedestrianRevealed;
  throw ParseError("unknown mode '" + name + "'");
}

SequenceClip GenerateClip(const ScenarioParams& params, uint64_t seed) {
  return BuildClip(params, seed, std::nullopt);
}

std::pair<SequenceClip, SequenceClip> GenerateCounterfactualPair(
    const ScenarioParams& params, uint64_t seed) {
  return {BuildClip(params, seed, Mode::kClearRoad),
          BuildClip(params, seed, Mode::kPedestrianRevealed)};
}

uint64_t CounterfactualSeed(uint64_t index) { return 3 * kSplitStride + index; }

torch::Tensor RenderImage(const SegMap& seg) {
  const auto& palette = seg.table()->palette();
  torch::Tensor lut = torch::empty({static_cast<int64_t>(palette.size()), 3},
                                   torch::kFloat32);
  for (size_t i = 0; i < palette.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      lut[static_cast<int64_t>(i)][c] = palette[i][c] / 255.0f;
    }
  }
  // (H, W, 3) -> (3, H, W)
  return lut.index({seg.data()}).permute({2, 0, 1}).contiguous();
}

std::string SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "'");
}

uint64_t SplitSeed(Split split, uint64_t index) {
  return static_cast<uint64_t>(split) * kSplitStride + index;
}

int64_t DatasetManifest::count(Split split) const {
  switch (split) {
    case Split::kTrain: return n_train;
    case Split::kVal: return n_val;
    case Split::kTest: return n_test;
  }
  return 0;
}

nlohmann::json DatasetManifest::ToJson() const {
  nlohmann::json splits;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    splits[SplitName(s)] = {{"count", count(s)}, {"seed_base", SplitSeed(s, 0)}};
  }
  return {{"format", "mmforecast-dataset"},
          {"version", 1},
          {"params", params.ToJson()},
          {"params_hash", params.Hash()},
          {"splits", splits}};
}

DatasetManifest DatasetManifest::FromJson(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    if (j.at("format") != "mmforecast-dataset") {
      throw ParseError("manifest: field 'format' is not mmforecast-dataset");
    }
    if (j.at("version") != 1) throw ParseError("manifest: unsupported 'version'");
    m.params = ScenarioParams::FromJson(j.at("params"));
    m.n_train = j.at("splits").at("train").at("count");
    m.n_val = j.at("splits").at("val").at("count");
    m.n_test = j.at("splits").at("test").at("count");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

namespace {

std::string FrameName(int t) {
  return "frame_t" + std::string(t >= 0 ? "+" : "") + std::to_string(t) + ".png";
}

std::string ClipDirName(uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%06llu",
                static_cast<unsigned long long>(index));
  return buf;
}

}  // namespace

void WriteClip(const SequenceClip& clip, const ScenarioParams& params,
               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json inputs = nlohmann::json::array();
  for (size_t i = 0; i < clip.input_frames.size(); ++i) {
    const std::string name = FrameName(clip.input_times[i]);
    WritePngGray(dir / name, clip.input_frames[i].data());
    inputs.push_back(name);
  }
  const std::string target = FrameName(clip.target_time);
  WritePngGray(dir / target, clip.target_frame.data());
  const PixelRect& r = clip.mode.revealed_region;
  nlohmann::json meta = {
      {"clip_id", clip.clip_id},
      {"seed", clip.seed},
      {"mode", ModeName(clip.mode.mode)},
      {"revealed_region",
       {{"y", r.y}, {"x", r.x}, {"height", r.height}, {"width", r.width}}},
      {"input_times", clip.input_times},
      {"target_time", clip.target_time},
      {"input_frames", inputs},
      {"target_frame", target},
      {"params_hash", params.Hash()}};
  WriteFileText(dir / "clip.json", meta.dump(2) + "\n");
}

SequenceClip LoadClip(const std::filesystem::path& dir) {
  const std::string source = dir.filename().string() + "/clip.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ReadFileText(dir / "clip.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  auto get = [&](const nlohmann::json& obj, const char* name) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(name)) {
      throw ParseError(source + ": missing field '" + name + "'");
    }
    return obj.at(name);
  };
  const auto table = ClassTable::Synthetic();
  auto load_frame = [&](const nlohmann::json& name) {
    if (!name.is_string()) throw ParseError(source + ": frame name is not a string");
    torch::Tensor data = ReadPngGray(dir / name.get<std::string>());
    if (data.numel() > 0 && data.max().item<int64_t>() >= table->num_classes()) {
      throw ParseError(name.get<std::string>() + ": class index out of range");
    }
    return SegMap(data, table);
  };

  try {
    SequenceClip clip{.input_frames = {},
                      .target_frame = load_frame(get(meta, "target_frame")),
                      .mode = {},
                      .clip_id = get(meta, "clip_id").get<std::string>(),
                      .seed = get(meta, "seed").get<uint64_t>(),
                      .input_times = get(meta, "input_times").get<std::vector<int>>(),
                      .target_time = get(meta, "target_time").get<int>()};
    const auto& names = get(meta, "input_frames");
    if (!names.is_array() || names.size() != clip.input_times.size()) {
      throw ParseError(source + ": field 'input_frames' does not match 'input_times'");
    }
    for (const auto& n : names) clip.input_frames.push_back(load_frame(n));
    const auto& r = get(meta, "revealed_region");
    clip.mode.mode = ParseMode(get(meta, "mode").get<std::string>());
    clip.mode.revealed_region = {get(r, "y").get<int64_t>(), get(r, "x").get<int64_t>(),
                                 get(r, "height").get<int64_t>(),
                                 get(r, "width").get<int64_t>()};
    for (const SegMap& f : clip.input_frames) {
      if (!f.data().sizes().equals(clip.target_frame.data().sizes())) {
        throw ParseError(source + ": frames differ in shape");
      }
    }
    const PixelRect& rr = clip.mode.revealed_region;
    if (rr.y < 0 || rr.x < 0 || rr.height <= 0 || rr.width <= 0 ||
        rr.y + rr.height > clip.target_frame.height() ||
        rr.x + rr.width > clip.target_frame.width()) {
      throw ParseError(source + ": field 'revealed_region' lies outside the image");
    }
    const bool has_ped =
        clip.target_frame.data().eq(table->IdOf("pedestrian")).any().item<bool>();
    if (has_ped != (clip.mode.mode == Mode::kPedestrianRevealed)) {
      throw ParseError(source + ": field 'mode' inconsistent with target frame");
    }
    return clip;
  } catch (const nlohmann::json::type_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

DatasetManifest WriteDataset(const ScenarioParams& params, int64_t n_train,
                             int64_t n_val, int64_t n_test,
                             const std::filesystem::path& root, bool overwrite) {
  params.Validate();
  namespace fs = std::filesystem;
  if (n_train < 0 || n_val < 0 || n_test < 0) {
    throw ConfigError("split sizes must be non-negative");
  }
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!overwrite) {
      throw PreconditionError("dataset root " + root.string() +
                              " exists and is not empty (use overwrite)");
    }
    fs::remove_all(root);
  }
  fs::create_directories(root);
  DatasetManifest manifest{params, n_train, n_val, n_test};
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const fs::path dir = root / SplitName(split);
    fs::create_directories(dir);
    for (int64_t i = 0; i < manifest.count(split); ++i) {
      SequenceClip clip = GenerateClip(params, SplitSeed(split, i));
      clip.clip_id = SplitName(split) + "_" + ClipDirName(i).substr(5);
      WriteClip(clip, params, dir / ClipDirName(i));
    }
  }
  WriteFileText(root / "manifest.json", manifest.ToJson().dump(2) + "\n");
  return manifest;
}

DatasetManifest ReadManifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  if (!std::filesystem::exists(path)) {
    throw PreconditionError("no dataset manifest at " + path.string());
  }
  try {
    return DatasetManifest::FromJson(nlohmann::json::parse(ReadFileText(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
}

ClipStream::ClipStream(const std::filesystem::path& root, Split split) {
  const auto dir = root / SplitName(split);
  if (!std::filesystem::exists(dir)) return;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("clip_", 0) == 0) {
      dirs_.push_back(entry.path());
    }
  }
  std::sort(dirs_.begin(), dirs_.end());
}

std::optional<SequenceClip> ClipStream::Next() {
  if (next_ >= dirs_.size()) return std::nullopt;
  return LoadClip(dirs_[next_++]);
}

std::vector<SequenceClip> LoadSplit(const std::filesystem::path& root,
                                    Split split) {
  std::vector<SequenceClip> out;
  ClipStream stream(root, split);
  while (auto clip = stream.Next()) out.push_back(std::move(*clip));
  return out;
}

}  // namespace mmf
