// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gencomp/control.h"
#include "gencomp/diffusion.h"
#include "gencomp/video.h"

namespace gencomp {

using Color = std::array<float, 3>;

enum class BackgroundKind { kSolid, kGradient, kChecker };
enum class SpriteShape { kDisk, kSquare, kTriangle };
enum class MotionKind { kLinear, kSinusoidal };

// Sprite centers are rounded to whole pixels so every frame rasterizes the
// same shape; path_truth holds the rounded centers.
struct SceneSpec {
  Dims dims{8, 32, 32};
  BackgroundKind background = BackgroundKind::kSolid;
  Color bg_a{0.2f, 0.2f, 0.2f};
  Color bg_b{0.2f, 0.2f, 0.2f};  // gradient end / second checker color
  int checker_size = 8;
  SpriteShape shape = SpriteShape::kDisk;
  Color sprite{0.9f, 0.9f, 0.9f};
  int radius = 4;
  MotionKind motion = MotionKind::kLinear;
  Point2 start{8.0, 16.0};
  Point2 velocity{2.0, 0.0};  // px per frame
  double amplitude = 0.0;     // sinusoidal y offset
  double period = 8.0;        // frames
  bool clean = true;
  std::uint64_t seed = 0;

  std::string ToJson() const;
  static SceneSpec FromJson(const std::string& text);
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct SampleTriplet {
  VideoTensor source;
  VideoTensor fg_centered;
  MaskVideo mask;
  TrajectoryDense path_truth;
};

float Luminance(const Color& c);
Color QuantizeColor(const Color& c);  // to multiples of 1/255

Point2 SpriteCenter(const SceneSpec& spec, int frame);
bool SpriteCovers(const SceneSpec& spec, Point2 center, int x, int y);
VideoTensor RenderBackground(const SceneSpec& spec);

// Throws SpecViolation when a clean scene's sprite leaves the frame.
SampleTriplet GenerateSample(const SceneSpec& spec);

// Varied scene with sprite/background luminance contrast >= 0.3.
SceneSpec RandomSceneSpec(std::mt19937_64& rng, Dims dims, std::uint64_t seed);

struct AugmentConfig {
  double inflate_sigma = kDefaultInflateSigma;
  double inflate_threshold = kDefaultInflateThreshold;
  double gamma_min = kGammaMin;
  double gamma_max = kGammaMax;
};

TrainingExample MakeTrainingExample(const SampleTriplet& triplet, std::mt19937_64& rng,
                                    const AugmentConfig& aug = {});
// Same, with a fixed gamma instead of a draw.
TrainingExample MakeTrainingExample(const SampleTriplet& triplet, double gamma,
                                    const AugmentConfig& aug = {});

struct CorpusEntry {
  std::string id;
  std::filesystem::path source;
  std::filesystem::path foreground;
  std::filesystem::path mask;
  SceneSpec spec;
};

// Writes <out>/<id>/{source,foreground,mask}/frame_*.png and
// <out>/manifest.jsonl. Returns the manifest entries.
std::vector<CorpusEntry> BuildCorpus(int n, std::uint64_t seed, const std::filesystem::path& out,
                                     Dims dims = {8, 32, 32});
std::vector<CorpusEntry> ReadManifest(const std::filesystem::path& manifest_or_dir);
SampleTriplet LoadSample(const CorpusEntry& entry);
std::vector<SampleTriplet> LoadCorpus(const std::filesystem::path& manifest_or_dir);

}  // namespace gencomp
