// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "gencomp/control.h"
#include "gencomp/error.h"
#include "gencomp/synth.h"
#include "test_util.h"

using namespace gencomp;
using namespace gencomp::testing;

TEST_SUITE("control") {

TEST_CASE("control spec json round trip") {
  const std::string text = R"({"mode":"drag","scale":0.5,"points":[{"frame":0,"x":12.0,"y":8.0},{"frame":7,"x":20.5,"y":9.0}]})";
  const ControlSpec spec = ParseControlSpec(text);
  CHECK(spec.mode == ControlMode::kDrag);
  CHECK(spec.scale == 0.5);
  REQUIRE(spec.points.size() == 2);
  CHECK(spec.points[1] == ControlPoint{7, 20.5, 9.0});
  CHECK(ParseControlSpec(SerializeControlSpec(spec)) == spec);
}

TEST_CASE("control spec validation names the field") {
  auto field_of = [](const std::string& text, const Dims* bounds = nullptr) {
    try {
      ValidateControlSpec(ParseControlSpec(text), bounds);
    } catch (const FieldError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"mode":"drag","scale":0,"points":[{"frame":0,"x":1,"y":1}]})") == "scale");
  CHECK(field_of(R"({"mode":"drag","scale":8.5,"points":[{"frame":0,"x":1,"y":1}]})") == "scale");
  CHECK(field_of(R"({"mode":"drag","scale":1,"points":[]})") == "points");
  CHECK(field_of(R"({"mode":"fly","scale":1,"points":[{"frame":0,"x":1,"y":1}]})") == "mode");
  CHECK(field_of(R"({"mode":"drag","scale":1,"points":[{"frame":2,"x":1,"y":1},{"frame":2,"x":3,"y":1}]})")
            .rfind("points[1]", 0) == 0);
  CHECK(field_of(R"({"mode":"click","scale":1,"points":[{"frame":0,"x":1,"y":1},{"frame":2,"x":3,"y":1}]})") == "points");
  const Dims d{8, 32, 32};
  CHECK(field_of(R"({"mode":"drag","scale":1,"points":[{"frame":0,"x":32,"y":1}]})", &d).rfind("points[0]", 0) == 0);
  CHECK(field_of(R"({"mode":"drag","scale":1,"points":[{"frame":8,"x":3,"y":1}]})", &d).rfind("points[0]", 0) == 0);
  CHECK(field_of(R"({"mode":"drag","scale":8,"points":[{"frame":7,"x":31,"y":31}]})", &d) == "<none>");
  CHECK_THROWS_AS(ParseControlSpec("{not json"), FieldError);
}

TEST_CASE("densify trajectory") {
  ControlSpec spec;
  spec.points = {{0, 0, 0}, {48, 48, 0}};
  auto traj = DensifyTrajectory(spec, 49);
  REQUIRE(traj.size() == 49);
  CHECK(traj[24].x == doctest::Approx(24.0));
  CHECK(traj[24].y == doctest::Approx(0.0));

  spec.points = {{0, 5, 7}};
  traj = DensifyTrajectory(spec, 8);
  for (const auto& p : traj.positions) CHECK(p == Point2{5, 7});

  spec.points = {{0, 0, 0}, {4, 8, 0}};
  traj = DensifyTrajectory(spec, 8);
  CHECK(traj[6] == Point2{8, 0});
  CHECK(traj[2] == Point2{4, 0});

  spec.points = {{2, 3, 1}, {5, 9, 4}};
  traj = DensifyTrajectory(spec, 8);
  CHECK(traj[0] == Point2{3, 1});
  CHECK(traj[2] == Point2{3, 1});
  CHECK(traj[5] == Point2{9, 4});
  CHECK_THROWS_AS(DensifyTrajectory(spec, 0), EmptyVideo);
}

TEST_CASE("track point") {
  SUBCASE("static video stays put") {
    VideoTensor v = RandomVideo({6, 32, 32}, 3, 11);
    for (int f = 1; f < 6; ++f)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          for (int c = 0; c < 3; ++c) v.at(f, y, x, c) = v.at(0, y, x, c);
    const auto traj = TrackPoint(v, {10, 10}, 0);
    REQUIRE(traj.size() == 6);
    for (const auto& p : traj.positions) {
      CHECK(p.x == doctest::Approx(10.0));
      CHECK(p.y == doctest::Approx(10.0));
    }
  }
  SUBCASE("sprite moving two pixels per frame") {
    SceneSpec s;
    s.background = BackgroundKind::kChecker;
    s.bg_a = {0.1f, 0.1f, 0.1f};
    s.bg_b = {0.3f, 0.2f, 0.2f};
    s.sprite = {0.9f, 0.8f, 0.7f};
    s.start = {8, 16};
    s.velocity = {2, 0};
    const SampleTriplet t = GenerateSample(s);
    const auto traj = TrackPoint(t.source, t.path_truth[0], 0);
    REQUIRE(traj.size() == 8);
    for (int f = 1; f < 8; ++f) {
      CHECK(std::abs(traj[f].x - traj[f - 1].x - 2.0) <= 0.5);
      CHECK(std::abs(traj[f].y - traj[f - 1].y) <= 0.5);
    }
  }
  SUBCASE("single frame and starting mid-clip") {
    const VideoTensor v = RandomVideo({1, 16, 16}, 3, 2);
    const auto traj = TrackPoint(v, {3.5, 4.0}, 0);
    REQUIRE(traj.size() == 1);
    CHECK(traj[0] == Point2{3.5, 4.0});
    CHECK(TrackPoint(RandomVideo({5, 16, 16}, 3, 3), {3, 3}, 2).size() == 3);
  }
  SUBCASE("errors") {
    const VideoTensor v = RandomVideo({2, 16, 16}, 3, 2);
    CHECK_THROWS_AS(TrackPoint(v, {16, 3}, 0), InvalidInput);
    CHECK_THROWS_AS(TrackPoint(v, {3, -1}, 0), InvalidInput);
    CHECK_THROWS_AS(TrackPoint(v, {3, 3}, 2), InvalidInput);
    CHECK_THROWS_AS(TrackPoint(VideoTensor(), {0, 0}, 0), EmptyVideo);
  }
}

TEST_CASE("retarget mask") {
  const Dims d{3, 32, 32};
  SUBCASE("identity") {
    MaskVideo m = SquareMask(d, 5, 6, 7);
    m.set(1, 6, 5, false);  // break symmetry
    TrajectoryDense traj;
    for (int f = 0; f < 3; ++f) {
      Point2 c;
      REQUIRE(MaskBoxCenter(m, f, &c));
      traj.positions.push_back(c);
    }
    CHECK(RetargetMask(m, traj, 1.0, d) == m);
  }
  SUBCASE("half scale of a 16x16 square") {
    const MaskVideo m = SquareMask(d, 8, 8, 16);
    TrajectoryDense traj{{{15.5, 15.5}, {15.5, 15.5}, {15.5, 15.5}}};
    const MaskVideo out = RetargetMask(m, traj, 0.5, d);
    for (int f = 0; f < 3; ++f) CHECK(std::abs(static_cast<int>(out.count(f)) - 64) <= 8);
  }
  SUBCASE("trajectory shift moves the centroid") {
    const MaskVideo m = SquareMask(d, 4, 9, 6);
    TrajectoryDense base, shifted;
    for (int f = 0; f < 3; ++f) {
      Point2 c;
      MaskBoxCenter(m, f, &c);
      base.positions.push_back(c);
      shifted.positions.push_back({c.x + 10, c.y});
    }
    const MaskVideo a = RetargetMask(m, base, 1.0, d);
    const MaskVideo b = RetargetMask(m, shifted, 1.0, d);
    for (int f = 0; f < 3; ++f) {
      CHECK(std::abs(MaskCentroid(b, f).x - MaskCentroid(a, f).x - 10.0) <= 0.5);
      CHECK(MaskCentroid(b, f).y == doctest::Approx(MaskCentroid(a, f).y));
    }
  }
  SUBCASE("short foreground loops and off-frame pixels are cropped") {
    MaskVideo fg(Dims{2, 8, 8});
    fg.set(0, 3, 3, true);
    fg.set(1, 3, 3, true);
    fg.set(1, 4, 4, true);
    TrajectoryDense traj{{{0, 0}, {10, 10}, {10, 10}, {10, 10}}};
    const MaskVideo out = RetargetMask(fg, traj, 1.0, {4, 16, 16});
    CHECK(out.count(0) == 1);
    CHECK(out.count(1) == 2);
    CHECK(out.count(2) == 1);
    CHECK(out.count(3) == 2);
    TrajectoryDense away{{{-50, -50}, {-50, -50}, {-50, -50}, {-50, -50}}};
    CHECK(RetargetMask(fg, away, 1.0, {4, 16, 16}).count() == 0);
  }
  SUBCASE("bad arguments") {
    const MaskVideo m = SquareMask(d, 4, 4, 4);
    TrajectoryDense traj{{{5, 5}, {5, 5}, {5, 5}}};
    CHECK_THROWS_AS(RetargetMask(m, traj, 0.0, d), InvalidInput);
    CHECK_THROWS_AS(RetargetMask(m, traj, -1.0, d), InvalidInput);
    CHECK_THROWS_AS(RetargetMask(m, TrajectoryDense{{{5, 5}}}, 1.0, d), InvalidInput);
  }
}

// Dense 2-D convolution with a window-normalised Gaussian, written
// independently of the separable implementation.
static MaskVideo InflateOracle(const MaskVideo& m, double sigma, double thr) {
  const int r = static_cast<int>(std::ceil(4 * sigma));
  double z = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) z += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  MaskVideo out(m.dims());
  for (int f = 0; f < m.frames(); ++f)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= m.height() || xx >= m.width() || !m.at(f, yy, xx)) continue;
            acc += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / z;
          }
        out.set(f, y, x, acc >= thr || m.at(f, y, x));
      }
  return out;
}

TEST_CASE("inflate mask") {
  CHECK(InflateMask(MaskVideo(Dims{2, 9, 9})).count() == 0);

  MaskVideo dot(Dims{1, 15, 15});
  dot.set(0, 7, 7, true);
  const MaskVideo inflated = InflateMask(dot, 1.0, 0.05);
  CHECK(inflated == InflateOracle(dot, 1.0, 0.05));
  CHECK(inflated.count() == 9);  // responses at squared radius 0, 1, 2

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MaskVideo m = RandomMask({2, 20, 17}, seed, 0.05);
    const MaskVideo once = InflateMask(m);
    CHECK(once == InflateOracle(m, kDefaultInflateSigma, kDefaultInflateThreshold));
    const MaskVideo twice = InflateMask(once);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(once.values()[i] >= m.values()[i]);
      CHECK(twice.values()[i] >= once.values()[i]);
    }
  }
  CHECK_THROWS_AS(InflateMask(dot, 0.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(InflateMask(dot, 1.0, 1.0), InvalidInput);
}

TEST_CASE("gamma correction") {
  const VideoTensor v = RandomVideo({2, 5, 5}, 3, 4);
  CHECK(GammaCorrect(v, 1.0) == v);

  VideoTensor q(1, 1, 3, 1);
  q.at(0, 0, 0, 0) = 0.25f;
  q.at(0, 0, 1, 0) = 0.0f;
  q.at(0, 0, 2, 0) = 1.0f;
  for (double g : {0.4, 0.5, 1.3, 1.9}) {
    const VideoTensor out = GammaCorrect(q, g);
    CHECK(out.at(0, 0, 1, 0) == 0.0f);
    CHECK(out.at(0, 0, 2, 0) == 1.0f);
  }
  CHECK(GammaCorrect(q, 0.5).at(0, 0, 0, 0) == doctest::Approx(0.5).epsilon(1e-7));

  const VideoTensor a = GammaCorrect(v, 0.7);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < std::min(v.size(), i + 4); ++j) {
      if (v.values()[i] < v.values()[j]) CHECK(a.values()[i] <= a.values()[j]);
    }
  }
  CHECK_THROWS_AS(GammaCorrect(v, 0.0), InvalidInput);
  CHECK_THROWS_AS(GammaCorrect(v, -1.0), InvalidInput);
}

TEST_CASE("masked video") {
  const Dims d{2, 6, 7};
  const VideoTensor src = RandomVideo(d, 3, 5);
  CHECK(MakeMaskedVideo(src, MaskVideo(d)) == src);
  const VideoTensor black = MakeMaskedVideo(src, MaskVideo(d, 1));
  for (float v : black.values()) CHECK(v == 0.0f);

  MaskVideo checker(d);
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 7; ++x) checker.set(f, y, x, (x + y) % 2 == 0);
  const VideoTensor out = MakeMaskedVideo(src, checker);
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 7; ++x)
        for (int c = 0; c < 3; ++c)
          CHECK(out.at(f, y, x, c) == (checker.at(f, y, x) ? 0.0f : src.at(f, y, x, c)));
  CHECK_THROWS_AS(MakeMaskedVideo(src, MaskVideo(Dims{2, 6, 6})), InvalidInput);
}

TEST_CASE("center foreground") {
  const Dims d{2, 32, 32};
  const VideoTensor src = RandomVideo(d, 3, 6, 0.2f, 1.0f);

  SUBCASE("already centered") {
    const MaskVideo m = SquareMask(d, 13, 13, 6);  // box center 15.5
    const auto out = CenterForeground(src, m);
    CHECK(out.mask == m);
    CHECK(out.video == MakeMaskedVideo(src, Complement(m)));
    CHECK(out.skipped_frames.empty());
  }
  SUBCASE("corner element moves to the center with its area") {
    MaskVideo m(d);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 4; ++x) m.set(0, y, x, true);
    for (int y = 20; y < 27; ++y)
      for (int x = 3; x < 6; ++x) m.set(1, y, x, true);
    const auto out = CenterForeground(src, m);
    for (int f = 0; f < 2; ++f) {
      const Point2 c = MaskCentroid(out.mask, f);
      CHECK(std::abs(c.x - 15.5) <= 0.5);
      CHECK(std::abs(c.y - 15.5) <= 0.5);
      CHECK(out.mask.count(f) == m.count(f));
    }
    int y0 = 32, x0 = 32;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (out.mask.at(0, y, x)) y0 = std::min(y0, y), x0 = std::min(x0, x);
    CHECK(out.video.at(0, y0 + 1, x0 + 1, 0) == src.at(0, 1, 1, 0));
  }
  SUBCASE("empty frame is skipped") {
    MaskVideo m(d);
    m.set(1, 4, 4, true);
    const auto out = CenterForeground(src, m);
    REQUIRE(out.skipped_frames.size() == 1);
    CHECK(out.skipped_frames[0] == 0);
    CHECK(out.mask.count(0) == 0);
  }
}

}  // TEST_SUITE
