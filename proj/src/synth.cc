// SPDX-License-Identifier: Apache-2.0
#include "gencomp/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gencomp/error.h"
#include "gencomp/io.h"
#include "json.hpp"

namespace gencomp {
namespace {

using nlohmann::json;

constexpr float kMinContrast = 0.3f;

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<BackgroundKind> kBackgrounds[] = {
    {BackgroundKind::kSolid, "solid"},
    {BackgroundKind::kGradient, "gradient"},
    {BackgroundKind::kChecker, "checker"}};
constexpr EnumName<SpriteShape> kShapes[] = {
    {SpriteShape::kDisk, "disk"}, {SpriteShape::kSquare, "square"}, {SpriteShape::kTriangle, "triangle"}};
constexpr EnumName<MotionKind> kMotions[] = {
    {MotionKind::kLinear, "linear"}, {MotionKind::kSinusoidal, "sinusoidal"}};

template <typename E, std::size_t N>
const char* NameOf(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E ValueOf(const EnumName<E> (&table)[N], const std::string& name, const char* field) {
  for (const auto& e : table) {
    if (name == e.name) return e.value;
  }
  throw InvalidInput(std::string("scene spec: unknown ") + field + " '" + name + "'");
}

json ColorJson(const Color& c) { return json::array({c[0], c[1], c[2]}); }
Color ColorFrom(const json& j) { return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()}; }

Color Lerp(const Color& a, const Color& b, float w) {
  return {a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w, a[2] + (b[2] - a[2]) * w};
}

Color BackgroundAt(const SceneSpec& spec, int y, int x) {
  switch (spec.background) {
    case BackgroundKind::kSolid:
      return spec.bg_a;
    case BackgroundKind::kGradient: {
      const float w = spec.dims.width > 1 ? static_cast<float>(x) / (spec.dims.width - 1) : 0.0f;
      return QuantizeColor(Lerp(spec.bg_a, spec.bg_b, w));
    }
    case BackgroundKind::kChecker: {
      const int cell = std::max(1, spec.checker_size);
      return ((x / cell + y / cell) % 2 == 0) ? spec.bg_a : spec.bg_b;
    }
  }
  return spec.bg_a;
}

Color RandomColor(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, 255);
  return {level(rng) / 255.0f, level(rng) / 255.0f, level(rng) / 255.0f};
}

// Background color on the far side of the sprite's luminance.
Color ContrastingColor(std::mt19937_64& rng, float sprite_lum) {
  const bool dark = sprite_lum >= 0.5f;
  for (;;) {
    const Color c = RandomColor(rng);
    const float l = Luminance(c);
    if (dark ? (l <= sprite_lum - kMinContrast) : (l >= sprite_lum + kMinContrast)) return c;
  }
}

}  // namespace

float Luminance(const Color& c) { return (c[0] + c[1] + c[2]) / 3.0f; }

Color QuantizeColor(const Color& c) {
  Color out;
  for (int k = 0; k < 3; ++k) out[k] = std::round(std::clamp(c[k], 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out;
}

std::string SceneSpec::ToJson() const {
  json j;
  j["dims"] = {dims.frames, dims.height, dims.width};
  j["background"] = NameOf(kBackgrounds, background);
  j["bg_a"] = ColorJson(bg_a);
  j["bg_b"] = ColorJson(bg_b);
  j["checker_size"] = checker_size;
  j["shape"] = NameOf(kShapes, shape);
  j["sprite"] = ColorJson(sprite);
  j["radius"] = radius;
  j["motion"] = NameOf(kMotions, motion);
  j["start"] = {start.x, start.y};
  j["velocity"] = {velocity.x, velocity.y};
  j["amplitude"] = amplitude;
  j["period"] = period;
  j["clean"] = clean;
  j["seed"] = seed;
  return j.dump();
}

SceneSpec SceneSpec::FromJson(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    const auto& d = j.at("dims");
    s.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    s.background = ValueOf(kBackgrounds, j.at("background").get<std::string>(), "background");
    s.bg_a = ColorFrom(j.at("bg_a"));
    s.bg_b = ColorFrom(j.at("bg_b"));
    s.checker_size = j.value("checker_size", s.checker_size);
    s.shape = ValueOf(kShapes, j.at("shape").get<std::string>(), "shape");
    s.sprite = ColorFrom(j.at("sprite"));
    s.radius = j.at("radius").get<int>();
    s.motion = ValueOf(kMotions, j.at("motion").get<std::string>(), "motion");
    s.start = {j.at("start").at(0).get<double>(), j.at("start").at(1).get<double>()};
    s.velocity = {j.at("velocity").at(0).get<double>(), j.at("velocity").at(1).get<double>()};
    s.amplitude = j.value("amplitude", 0.0);
    s.period = j.value("period", 8.0);
    s.clean = j.value("clean", true);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("scene spec: ") + e.what());
  }
  return s;
}

Point2 SpriteCenter(const SceneSpec& spec, int frame) {
  double x = spec.start.x + spec.velocity.x * frame;
  double y = spec.start.y + spec.velocity.y * frame;
  if (spec.motion == MotionKind::kSinusoidal && spec.period > 0) {
    y += spec.amplitude * std::sin(2.0 * std::numbers::pi * frame / spec.period);
  }
  return {std::round(x), std::round(y)};
}

bool SpriteCovers(const SceneSpec& spec, Point2 center, int x, int y) {
  const double dx = x - center.x;
  const double dy = y - center.y;
  const double r = spec.radius;
  switch (spec.shape) {
    case SpriteShape::kDisk:
      return dx * dx + dy * dy <= r * r;
    case SpriteShape::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case SpriteShape::kTriangle:
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
  }
  return false;
}

VideoTensor RenderBackground(const SceneSpec& spec) {
  VideoTensor out(spec.dims, 3);
  for (int f = 0; f < spec.dims.frames; ++f) {
    for (int y = 0; y < spec.dims.height; ++y) {
      for (int x = 0; x < spec.dims.width; ++x) {
        const Color c = BackgroundAt(spec, y, x);
        for (int k = 0; k < 3; ++k) out.at(f, y, x, k) = c[k];
      }
    }
  }
  return out;
}

SampleTriplet GenerateSample(const SceneSpec& spec) {
  const Dims d = spec.dims;
  if (d.frames < 1 || d.height < 1 || d.width < 1) throw SpecViolation("scene dims must be >= 1");
  if (spec.radius < 1) throw SpecViolation("sprite radius must be >= 1");

  SampleTriplet out;
  out.source = RenderBackground(spec);
  out.mask = MaskVideo(d);
  out.path_truth.positions.resize(d.frames);
  for (int f = 0; f < d.frames; ++f) {
    const Point2 c = SpriteCenter(spec, f);
    out.path_truth.positions[f] = c;
    if (spec.clean && (c.x - spec.radius < 0 || c.x + spec.radius > d.width - 1 ||
                       c.y - spec.radius < 0 || c.y + spec.radius > d.height - 1)) {
      throw SpecViolation("sprite leaves the frame at frame " + std::to_string(f));
    }
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        if (!SpriteCovers(spec, c, x, y)) continue;
        out.mask.set(f, y, x, true);
        for (int k = 0; k < 3; ++k) out.source.at(f, y, x, k) = spec.sprite[k];
      }
    }
  }
  out.fg_centered = CenterForeground(out.source, out.mask).video;
  return out;
}

SceneSpec RandomSceneSpec(std::mt19937_64& rng, Dims dims, std::uint64_t seed) {
  SceneSpec s;
  s.dims = dims;
  s.seed = seed;
  std::uniform_int_distribution<int> pick3(0, 2);
  s.background = static_cast<BackgroundKind>(pick3(rng));
  s.shape = static_cast<SpriteShape>(pick3(rng));

  Color sprite;
  float lum;
  do {
    sprite = RandomColor(rng);
    lum = Luminance(sprite);
  } while (lum < 0.15f || lum > 0.85f);
  s.sprite = sprite;
  s.bg_a = ContrastingColor(rng, lum);
  s.bg_b = s.background == BackgroundKind::kSolid ? s.bg_a : ContrastingColor(rng, lum);
  s.checker_size = std::max(2, std::min(dims.height, dims.width) / 4);

  const int min_side = std::min(dims.height, dims.width);
  std::uniform_int_distribution<int> pick_radius(std::max(1, min_side / 10), std::max(1, min_side / 6));
  s.radius = pick_radius(rng);
  s.motion = std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? MotionKind::kSinusoidal
                                                                 : MotionKind::kLinear;
  s.period = std::max(2, dims.frames);
  s.amplitude = s.motion == MotionKind::kSinusoidal ? std::uniform_int_distribution<int>(1, 3)(rng) : 0;

  // Shrink the velocity until the whole path fits, then place the start.
  const int span = std::max(0, dims.frames - 1);
  int vx = std::uniform_int_distribution<int>(-2, 2)(rng);
  int vy = std::uniform_int_distribution<int>(-1, 1)(rng);
  const int lo = s.radius;
  const int hi_x = dims.width - 1 - s.radius;
  const int hi_y = dims.height - 1 - s.radius - static_cast<int>(std::ceil(s.amplitude));
  const int lo_y = lo + static_cast<int>(std::ceil(s.amplitude));
  while (vx != 0 && std::abs(vx) * span > hi_x - lo) vx -= (vx > 0 ? 1 : -1);
  while (vy != 0 && std::abs(vy) * span > hi_y - lo_y) vy -= (vy > 0 ? 1 : -1);
  if (hi_x < lo || hi_y < lo_y) throw SpecViolation("frame too small for the sprite");
  const int x_min = vx >= 0 ? lo : lo - vx * span;
  const int x_max = vx >= 0 ? hi_x - vx * span : hi_x;
  const int y_min = vy >= 0 ? lo_y : lo_y - vy * span;
  const int y_max = vy >= 0 ? hi_y - vy * span : hi_y;
  s.start = {static_cast<double>(std::uniform_int_distribution<int>(x_min, x_max)(rng)),
             static_cast<double>(std::uniform_int_distribution<int>(y_min, y_max)(rng))};
  s.velocity = {static_cast<double>(vx), static_cast<double>(vy)};
  return s;
}

TrainingExample MakeTrainingExample(const SampleTriplet& triplet, double gamma,
                                    const AugmentConfig& aug) {
  TrainingExample ex;
  ex.z0 = triplet.source;
  ex.mask = InflateMask(triplet.mask, aug.inflate_sigma, aug.inflate_threshold);
  ex.masked_video = MakeMaskedVideo(triplet.source, ex.mask);
  ex.fg = gamma == 1.0 ? triplet.fg_centered : GammaCorrect(triplet.fg_centered, gamma);
  return ex;
}

TrainingExample MakeTrainingExample(const SampleTriplet& triplet, std::mt19937_64& rng,
                                    const AugmentConfig& aug) {
  std::uniform_real_distribution<double> gamma(aug.gamma_min, aug.gamma_max);
  return MakeTrainingExample(triplet, gamma(rng), aug);
}

std::vector<CorpusEntry> BuildCorpus(int n, std::uint64_t seed, const std::filesystem::path& out,
                                     Dims dims) {
  if (n < 1) throw InvalidInput("corpus size must be >= 1");
  std::filesystem::create_directories(out);
  std::mt19937_64 rng(seed);
  std::vector<CorpusEntry> entries;
  std::ostringstream manifest;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "sample_%04d", i);
    CorpusEntry e;
    e.id = id;
    e.spec = RandomSceneSpec(rng, dims, seed * 1000003ULL + static_cast<std::uint64_t>(i));
    e.source = std::filesystem::path(id) / "source";
    e.foreground = std::filesystem::path(id) / "foreground";
    e.mask = std::filesystem::path(id) / "mask";
    const SampleTriplet t = GenerateSample(e.spec);
    WriteFrames(t.source, out / e.source);
    WriteFrames(t.fg_centered, out / e.foreground);
    WriteMaskFrames(t.mask, out / e.mask);

    json rec;
    rec["id"] = e.id;
    rec["paths"] = {{"source", e.source.generic_string()},
                    {"foreground", e.foreground.generic_string()},
                    {"mask", e.mask.generic_string()}};
    rec["spec"] = json::parse(e.spec.ToJson());
    manifest << rec.dump() << '\n';
    e.source = out / e.source;
    e.foreground = out / e.foreground;
    e.mask = out / e.mask;
    entries.push_back(std::move(e));
  }
  WriteTextFile(out / "manifest.jsonl", manifest.str());
  return entries;
}

std::vector<CorpusEntry> ReadManifest(const std::filesystem::path& manifest_or_dir) {
  const std::filesystem::path path = std::filesystem::is_directory(manifest_or_dir)
                                         ? manifest_or_dir / "manifest.jsonl"
                                         : manifest_or_dir;
  const std::filesystem::path root = path.parent_path();
  std::istringstream in(ReadTextFile(path));
  std::vector<CorpusEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      CorpusEntry e;
      e.id = rec.at("id").get<std::string>();
      const auto& p = rec.at("paths");
      e.source = root / p.at("source").get<std::string>();
      e.foreground = root / p.at("foreground").get<std::string>();
      e.mask = root / p.at("mask").get<std::string>();
      e.spec = SceneSpec::FromJson(rec.at("spec").dump());
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw IoError(path.string(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw IoError(path.string(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (entries.empty()) throw IoError(path.string(), "manifest has no entries");
  return entries;
}

SampleTriplet LoadSample(const CorpusEntry& entry) {
  SampleTriplet t;
  t.source = ReadFrames(entry.source);
  t.fg_centered = ReadFrames(entry.foreground);
  t.mask = ReadMaskFrames(entry.mask);
  t.path_truth.positions.resize(entry.spec.dims.frames);
  for (int f = 0; f < entry.spec.dims.frames; ++f) t.path_truth.positions[f] = SpriteCenter(entry.spec, f);
  return t;
}

std::vector<SampleTriplet> LoadCorpus(const std::filesystem::path& manifest_or_dir) {
  std::vector<SampleTriplet> out;
  for (const auto& e : ReadManifest(manifest_or_dir)) out.push_back(LoadSample(e));
  return out;
}

}  // namespace gencomp
