// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "gencomp/error.h"
#include "gencomp/io.h"
#include "gencomp/synth.h"
#include "test_util.h"

using namespace gencomp;
using namespace gencomp::testing;

namespace {

SceneSpec DiskScene() {
  SceneSpec s;
  s.dims = {8, 32, 32};
  s.bg_a = s.bg_b = {0.1f, 0.2f, 0.3f};
  s.sprite = {0.9f, 0.8f, 0.2f};
  s.radius = 4;
  s.start = {6.0, 10.0};
  s.velocity = {2.0, 1.0};
  return s;
}

std::size_t LatticeDisk(int r) {
  std::size_t n = 0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) n += x * x + y * y <= r * r;
  return n;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("disk mask area matches lattice count in every frame") {
  const auto s = GenerateSample(DiskScene());
  for (int f = 0; f < 8; ++f) CHECK(s.mask.count(f) == LatticeDisk(4));
  CHECK(LatticeDisk(4) == 49);
}

TEST_CASE("mask is exactly where the source differs from the background render") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 12; ++i) {
    const SceneSpec spec = RandomSceneSpec(rng, {8, 32, 32}, i);
    const auto s = GenerateSample(spec);
    const VideoTensor bg = RenderBackground(spec);
    for (int f = 0; f < 8; ++f)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          bool differs = false;
          for (int k = 0; k < 3; ++k) differs |= s.source.at(f, y, x, k) != bg.at(f, y, x, k);
          if (differs != s.mask.at(f, y, x)) {
            FAIL("mask mismatch at scene " << i << " frame " << f);
          }
        }
  }
}

TEST_CASE("path truth follows the sprite") {
  const SceneSpec spec = DiskScene();
  const auto s = GenerateSample(spec);
  REQUIRE(s.path_truth.size() == 8);
  for (int f = 0; f < 8; ++f) {
    CHECK(s.path_truth[f].x == 6.0 + 2.0 * f);
    CHECK(s.path_truth[f].y == 10.0 + f);
    const Point2 c = MaskCentroid(s.mask, f);
    CHECK(c.x == doctest::Approx(s.path_truth[f].x));
    CHECK(c.y == doctest::Approx(s.path_truth[f].y));
  }
}

TEST_CASE("centered foreground") {
  const auto s = GenerateSample(DiskScene());
  const MaskVideo fg_mask = ThresholdForegroundMask(s.fg_centered);
  const Point2 center = FrameCenter(32, 32);
  for (int f = 0; f < 8; ++f) {
    CHECK(fg_mask.count(f) == s.mask.count(f));
    const Point2 c = MaskCentroid(fg_mask, f);
    CHECK(std::abs(c.x - center.x) <= 0.5);
    CHECK(std::abs(c.y - center.y) <= 0.5);
  }
}

TEST_CASE("clean scenes reject sprites leaving the frame") {
  SceneSpec s = DiskScene();
  s.velocity = {4.0, 0.0};
  CHECK_THROWS_AS(GenerateSample(s), SpecViolation);
  s.clean = false;
  CHECK_NOTHROW(GenerateSample(s));
}

TEST_CASE("random scenes are deterministic and well formed") {
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 40; ++i) {
    const SceneSpec sa = RandomSceneSpec(a, {8, 32, 32}, i);
    const SceneSpec sb = RandomSceneSpec(b, {8, 32, 32}, i);
    CHECK(sa == sb);
    CHECK(SceneSpec::FromJson(sa.ToJson()) == sa);
    const float lum = Luminance(sa.sprite);
    CHECK(std::abs(lum - Luminance(sa.bg_a)) >= 0.3f);
    CHECK(std::abs(lum - Luminance(sa.bg_b)) >= 0.3f);
    for (float c : sa.sprite) CHECK(std::round(c * 255.0f) == doctest::Approx(c * 255.0f).epsilon(1e-4));
    const auto t1 = GenerateSample(sa);
    const auto t2 = GenerateSample(sb);
    CHECK(t1.source == t2.source);
    CHECK(t1.fg_centered == t2.fg_centered);
    CHECK(t1.mask == t2.mask);
  }
}

TEST_CASE("training example construction") {
  const auto s = GenerateSample(DiskScene());
  const TrainingExample ex = MakeTrainingExample(s, 1.0);
  CHECK(ex.fg == s.fg_centered);
  CHECK(ex.z0 == s.source);
  for (std::size_t i = 0; i < s.mask.size(); ++i) {
    if (s.mask.values()[i]) CHECK(ex.mask.values()[i] == 1);
  }
  CHECK(ex.mask.count() > s.mask.count());
  for (int f = 0; f < 8; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int k = 0; k < 3; ++k) {
          const float want = ex.mask.at(f, y, x) ? 0.0f : s.source.at(f, y, x, k);
          if (ex.masked_video.at(f, y, x, k) != want) FAIL("masked video mismatch");
        }

  std::mt19937_64 r1(3), r2(3);
  const auto a = MakeTrainingExample(s, r1);
  const auto b = MakeTrainingExample(s, r2);
  CHECK(a.fg == b.fg);
  CHECK(a.mask == ex.mask);
}

TEST_CASE("corpus on disk") {
  const auto dir = ScratchDir("corpus");
  const auto entries = BuildCorpus(3, 11, dir / "a", {4, 16, 16});
  CHECK(entries.size() == 3);
  const auto again = BuildCorpus(3, 11, dir / "b", {4, 16, 16});
  CHECK(ReadTextFile(dir / "a" / "manifest.jsonl") == ReadTextFile(dir / "b" / "manifest.jsonl"));

  const auto read = ReadManifest(dir / "a");
  REQUIRE(read.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(read[i].id == entries[i].id);
    CHECK(read[i].spec == entries[i].spec);
    const auto loaded = LoadSample(read[i]);
    const auto fresh = GenerateSample(read[i].spec);
    CHECK(MaxAbsDiff(loaded.source, fresh.source) <= 0.5 / 255.0 + 1e-6);
    CHECK(loaded.mask == fresh.mask);
  }
  CHECK(BuildCorpus(1, 1, dir / "c", {4, 16, 16}).size() == 1);
  CHECK_THROWS_AS(BuildCorpus(0, 1, dir / "d"), InvalidInput);
  CHECK_THROWS_AS(ReadManifest(dir / "missing"), IoError);
}

}  // TEST_SUITE
