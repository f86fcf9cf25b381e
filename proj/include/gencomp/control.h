// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gencomp/error.h"
#include "gencomp/video.h"

namespace gencomp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class ControlMode { kDrag, kClick };

struct ControlPoint {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const ControlPoint&, const ControlPoint&) = default;
};

// User instruction: a sparse trajectory (drag) or a single seed point whose
// motion is tracked through the background (click), plus a size factor.
struct ControlSpec {
  ControlMode mode = ControlMode::kDrag;
  std::vector<ControlPoint> points;
  double scale = 1.0;

  friend bool operator==(const ControlSpec&, const ControlSpec&) = default;
};

// Validation failure that names the offending JSON field.
class FieldError : public InvalidInput {
 public:
  FieldError(std::string field, const std::string& message)
      : InvalidInput(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Throws FieldError. When `bounds` is non-null, points must also lie inside
// the background frame ([0, W-1] x [0, H-1]) and before its last frame.
void ValidateControlSpec(const ControlSpec& spec, const Dims* bounds = nullptr);
ControlSpec ParseControlSpec(std::string_view json_text);
std::string SerializeControlSpec(const ControlSpec& spec);
std::string_view ModeName(ControlMode mode);

// One (x, y) center per background frame, x = column, y = row, in pixel-index
// coordinates (pixel centers sit on integers).
struct TrajectoryDense {
  std::vector<Point2> positions;
  std::size_t size() const { return positions.size(); }
  const Point2& operator[](std::size_t i) const { return positions[i]; }
};

Point2 FrameCenter(int height, int width);

// Tracks one point from start_frame to the last frame with block matching
// over a 15x15 window followed by iterative Lucas-Kanade refinement.
// Returns F - start_frame positions.
TrajectoryDense TrackPoint(const VideoTensor& video, Point2 start, int start_frame);

// Piecewise-linear through the keypoints, held constant outside them.
TrajectoryDense DensifyTrajectory(const ControlSpec& spec, int frames);

// Scales each foreground mask frame about its bounding-box center
// (nearest-neighbour) and moves that center onto traj[f]. Foreground frames
// are looped when the background is longer and truncated when shorter.
MaskVideo RetargetMask(const MaskVideo& fg_mask, const TrajectoryDense& traj, double scale,
                       Dims bg_dims);

inline constexpr double kDefaultInflateSigma = 3.0;
inline constexpr double kDefaultInflateThreshold = 0.1;

// Gaussian blur then re-threshold, OR-ed with the input so the result always
// contains the original mask.
MaskVideo InflateMask(const MaskVideo& mask, double sigma = kDefaultInflateSigma,
                      double threshold = kDefaultInflateThreshold);

VideoTensor GammaCorrect(const VideoTensor& video, double gamma);

inline constexpr double kGammaMin = 0.4;
inline constexpr double kGammaMax = 1.9;

// source * (1 - mask) per pixel and channel.
VideoTensor MakeMaskedVideo(const VideoTensor& source, const MaskVideo& mask);

struct CenteredForeground {
  VideoTensor video;
  MaskVideo mask;
  // Frames whose mask was empty; their output is left blank.
  std::vector<int> skipped_frames;
};

// Moves the masked element of every frame so its bounding-box center sits on
// the frame center (integer shift), zeroing everything outside the mask.
CenteredForeground CenterForeground(const VideoTensor& source, const MaskVideo& mask);

// Bounding-box center of the set pixels of one frame; false if empty.
bool MaskBoxCenter(const MaskVideo& mask, int frame, Point2* center);
Point2 MaskCentroid(const MaskVideo& mask, int frame);

// Pixels with any channel above `threshold`. Centered synthetic foreground
// clips have a black surround, so this recovers their mask.
MaskVideo ThresholdForegroundMask(const VideoTensor& fg, float threshold = 1e-3f);

}  // namespace gencomp
