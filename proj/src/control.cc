// SPDX-License-Identifier: Apache-2.0
#include "gencomp/control.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace gencomp {
namespace {

using nlohmann::json;

// Ties go toward zero so a element already half a pixel off center stays put.
int RoundHalfTowardZero(double v) {
  const double r = std::round(v);
  if (std::abs(v - std::trunc(v)) == 0.5) return static_cast<int>(std::trunc(v));
  return static_cast<int>(r);
}

int NearestIndex(double v) { return static_cast<int>(std::floor(v + 0.5)); }

double SampleClamped(const std::vector<float>& plane, int h, int w, int y, int x) {
  y = std::clamp(y, 0, h - 1);
  x = std::clamp(x, 0, w - 1);
  return plane[static_cast<std::size_t>(y) * w + x];
}

double SampleBilinear(const std::vector<float>& plane, int h, int w, double y, double x) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1 - ax) * SampleClamped(plane, h, w, y0, x0) +
                     ax * SampleClamped(plane, h, w, y0, x0 + 1);
  const double bottom = (1 - ax) * SampleClamped(plane, h, w, y0 + 1, x0) +
                        ax * SampleClamped(plane, h, w, y0 + 1, x0 + 1);
  return (1 - ay) * top + ay * bottom;
}

constexpr int kTrackHalfWindow = 7;  // 15x15
constexpr int kTrackSearch = 7;
constexpr int kLkIterations = 10;

// Displacement of the window centered at `c` from plane a to plane b.
Point2 MatchWindow(const std::vector<float>& a, const std::vector<float>& b, int h, int w,
                   int cx, int cy) {
  // Block matching, visiting offsets by increasing radius so ties keep the
  // smallest motion (a static clip yields exactly zero).
  std::vector<std::array<int, 2>> offsets;
  for (int dy = -kTrackSearch; dy <= kTrackSearch; ++dy) {
    for (int dx = -kTrackSearch; dx <= kTrackSearch; ++dx) offsets.push_back({dx, dy});
  }
  std::stable_sort(offsets.begin(), offsets.end(), [](const auto& l, const auto& r) {
    return l[0] * l[0] + l[1] * l[1] < r[0] * r[0] + r[1] * r[1];
  });
  double best = std::numeric_limits<double>::infinity();
  int best_dx = 0;
  int best_dy = 0;
  for (const auto& [dx, dy] : offsets) {
    double ssd = 0.0;
    for (int v = -kTrackHalfWindow; v <= kTrackHalfWindow; ++v) {
      for (int u = -kTrackHalfWindow; u <= kTrackHalfWindow; ++u) {
        const double d = SampleClamped(b, h, w, cy + v + dy, cx + u + dx) -
                         SampleClamped(a, h, w, cy + v, cx + u);
        ssd += d * d;
      }
    }
    if (ssd < best) {
      best = ssd;
      best_dx = dx;
      best_dy = dy;
    }
  }

  // Lucas-Kanade refinement with the template gradient (inverse compositional).
  double gxx = 0, gxy = 0, gyy = 0;
  std::vector<std::array<double, 2>> grads;
  for (int v = -kTrackHalfWindow; v <= kTrackHalfWindow; ++v) {
    for (int u = -kTrackHalfWindow; u <= kTrackHalfWindow; ++u) {
      const int y = cy + v;
      const int x = cx + u;
      const double ix = 0.5 * (SampleClamped(a, h, w, y, x + 1) - SampleClamped(a, h, w, y, x - 1));
      const double iy = 0.5 * (SampleClamped(a, h, w, y + 1, x) - SampleClamped(a, h, w, y - 1, x));
      grads.push_back({ix, iy});
      gxx += ix * ix;
      gxy += ix * iy;
      gyy += iy * iy;
    }
  }
  const double det = gxx * gyy - gxy * gxy;
  double dx = best_dx;
  double dy = best_dy;
  if (det > 1e-9) {
    for (int it = 0; it < kLkIterations; ++it) {
      double bx = 0, by = 0;
      std::size_t k = 0;
      for (int v = -kTrackHalfWindow; v <= kTrackHalfWindow; ++v) {
        for (int u = -kTrackHalfWindow; u <= kTrackHalfWindow; ++u, ++k) {
          const double e = SampleBilinear(b, h, w, cy + v + dy, cx + u + dx) -
                           SampleClamped(a, h, w, cy + v, cx + u);
          bx += grads[k][0] * e;
          by += grads[k][1] * e;
        }
      }
      const double ux = (gyy * bx - gxy * by) / det;
      const double uy = (gxx * by - gxy * bx) / det;
      dx -= ux;
      dy -= uy;
      if (std::abs(ux) < 1e-3 && std::abs(uy) < 1e-3) break;
    }
    // Refinement is only trusted near the block-matching optimum.
    if (std::abs(dx - best_dx) > 1.0 || std::abs(dy - best_dy) > 1.0 ||
        !std::isfinite(dx) || !std::isfinite(dy)) {
      dx = best_dx;
      dy = best_dy;
    }
  }
  return {dx, dy};
}

std::vector<double> GaussianKernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

std::string_view ModeName(ControlMode mode) {
  return mode == ControlMode::kDrag ? "drag" : "click";
}

void ValidateControlSpec(const ControlSpec& spec, const Dims* bounds) {
  if (!(spec.scale > 0.0 && spec.scale <= 8.0) || !std::isfinite(spec.scale)) {
    throw FieldError("scale", "must be in (0, 8]");
  }
  if (spec.points.empty()) throw FieldError("points", "must be non-empty");
  if (spec.mode == ControlMode::kClick && spec.points.size() != 1) {
    throw FieldError("points", "click mode takes exactly one point");
  }
  for (std::size_t i = 0; i < spec.points.size(); ++i) {
    const auto& p = spec.points[i];
    const std::string at = "points[" + std::to_string(i) + "]";
    if (p.frame < 0) throw FieldError(at + ".frame", "must be >= 0");
    if (i > 0 && p.frame <= spec.points[i - 1].frame) {
      throw FieldError(at + ".frame", "frame indices must be strictly increasing");
    }
    if (!std::isfinite(p.x)) throw FieldError(at + ".x", "must be finite");
    if (!std::isfinite(p.y)) throw FieldError(at + ".y", "must be finite");
    if (bounds != nullptr) {
      if (p.x < 0 || p.x > bounds->width - 1) throw FieldError(at + ".x", "outside frame");
      if (p.y < 0 || p.y > bounds->height - 1) throw FieldError(at + ".y", "outside frame");
      if (p.frame >= bounds->frames) throw FieldError(at + ".frame", "beyond last frame");
    }
  }
}

ControlSpec ParseControlSpec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FieldError("$", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FieldError("$", "expected an object");
  ControlSpec spec;
  if (!doc.contains("mode") || !doc["mode"].is_string()) {
    throw FieldError("mode", "required string \"drag\" or \"click\"");
  }
  const auto mode = doc["mode"].get<std::string>();
  if (mode == "drag") {
    spec.mode = ControlMode::kDrag;
  } else if (mode == "click") {
    spec.mode = ControlMode::kClick;
  } else {
    throw FieldError("mode", "must be \"drag\" or \"click\"");
  }
  if (!doc.contains("scale") || !doc["scale"].is_number()) {
    throw FieldError("scale", "required number");
  }
  spec.scale = doc["scale"].get<double>();
  if (!doc.contains("points") || !doc["points"].is_array()) {
    throw FieldError("points", "required array");
  }
  const auto& pts = doc["points"];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string at = "points[" + std::to_string(i) + "]";
    const auto& p = pts[i];
    if (!p.is_object()) throw FieldError(at, "expected an object");
    if (!p.contains("frame") || !p["frame"].is_number_integer()) {
      throw FieldError(at + ".frame", "required integer");
    }
    if (!p.contains("x") || !p["x"].is_number()) throw FieldError(at + ".x", "required number");
    if (!p.contains("y") || !p["y"].is_number()) throw FieldError(at + ".y", "required number");
    spec.points.push_back({p["frame"].get<int>(), p["x"].get<double>(), p["y"].get<double>()});
  }
  ValidateControlSpec(spec);
  return spec;
}

std::string SerializeControlSpec(const ControlSpec& spec) {
  json doc;
  doc["mode"] = ModeName(spec.mode);
  doc["scale"] = spec.scale;
  doc["points"] = json::array();
  for (const auto& p : spec.points) {
    doc["points"].push_back({{"frame", p.frame}, {"x", p.x}, {"y", p.y}});
  }
  return doc.dump();
}

Point2 FrameCenter(int height, int width) {
  return {(width - 1) / 2.0, (height - 1) / 2.0};
}

TrajectoryDense TrackPoint(const VideoTensor& video, Point2 start, int start_frame) {
  if (video.frames() == 0 || video.height() == 0 || video.width() == 0) throw EmptyVideo();
  const int h = video.height();
  const int w = video.width();
  if (start.x < 0 || start.x > w - 1 || start.y < 0 || start.y > h - 1 || !std::isfinite(start.x) ||
      !std::isfinite(start.y)) {
    throw InvalidInput("track start point outside frame");
  }
  if (start_frame < 0 || start_frame >= video.frames()) {
    throw InvalidInput("track start frame out of range");
  }
  TrajectoryDense traj;
  traj.positions.push_back(start);
  Point2 p = start;
  std::vector<float> prev = LuminancePlane(video, start_frame);
  for (int f = start_frame + 1; f < video.frames(); ++f) {
    std::vector<float> next = LuminancePlane(video, f);
    const int cx = NearestIndex(p.x);
    const int cy = NearestIndex(p.y);
    const Point2 d = MatchWindow(prev, next, h, w, cx, cy);
    p.x = std::clamp(p.x + d.x, 0.0, static_cast<double>(w - 1));
    p.y = std::clamp(p.y + d.y, 0.0, static_cast<double>(h - 1));
    traj.positions.push_back(p);
    prev = std::move(next);
  }
  return traj;
}

TrajectoryDense DensifyTrajectory(const ControlSpec& spec, int frames) {
  if (frames <= 0) throw EmptyVideo();
  ValidateControlSpec(spec);
  if (spec.points.back().frame >= frames) {
    throw InvalidInput("trajectory keypoint beyond the last frame");
  }
  const auto& pts = spec.points;
  TrajectoryDense traj;
  traj.positions.resize(frames);
  std::size_t seg = 0;
  for (int f = 0; f < frames; ++f) {
    if (f <= pts.front().frame) {
      traj.positions[f] = {pts.front().x, pts.front().y};
      continue;
    }
    if (f >= pts.back().frame) {
      traj.positions[f] = {pts.back().x, pts.back().y};
      continue;
    }
    while (pts[seg + 1].frame < f) ++seg;
    const auto& a = pts[seg];
    const auto& b = pts[seg + 1];
    const double u = static_cast<double>(f - a.frame) / (b.frame - a.frame);
    traj.positions[f] = {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
  }
  return traj;
}

bool MaskBoxCenter(const MaskVideo& mask, int frame, Point2* center) {
  int xmin = mask.width(), xmax = -1, ymin = mask.height(), ymax = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(frame, y, x)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax < 0) return false;
  *center = {(xmin + xmax) / 2.0, (ymin + ymax) / 2.0};
  return true;
}

Point2 MaskCentroid(const MaskVideo& mask, int frame) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(frame, y, x)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw InvalidInput("centroid of an empty mask frame");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

MaskVideo RetargetMask(const MaskVideo& fg_mask, const TrajectoryDense& traj, double scale,
                       Dims bg_dims) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("scale must be > 0");
  if (fg_mask.frames() < 1) throw EmptyVideo("foreground mask has no frames");
  if (static_cast<int>(traj.size()) != bg_dims.frames) {
    throw InvalidInput("trajectory length must equal background frame count");
  }
  MaskVideo out(bg_dims);
  for (int f = 0; f < bg_dims.frames; ++f) {
    const int src = f % fg_mask.frames();
    Point2 c;
    if (!MaskBoxCenter(fg_mask, src, &c)) continue;
    const Point2 t = traj[static_cast<std::size_t>(f)];
    for (int y = 0; y < bg_dims.height; ++y) {
      const int sy = NearestIndex(c.y + (y - t.y) / scale);
      if (sy < 0 || sy >= fg_mask.height()) continue;
      for (int x = 0; x < bg_dims.width; ++x) {
        const int sx = NearestIndex(c.x + (x - t.x) / scale);
        if (sx < 0 || sx >= fg_mask.width()) continue;
        if (fg_mask.at(src, sy, sx)) out.set(f, y, x, true);
      }
    }
  }
  return out;
}

MaskVideo InflateMask(const MaskVideo& mask, double sigma, double threshold) {
  if (!(sigma > 0.0)) throw InvalidInput("inflation sigma must be > 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("threshold must be in (0,1)");
  const auto kernel = GaussianKernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = mask.height();
  const int w = mask.width();
  MaskVideo out(mask.dims());
  std::vector<double> rows(static_cast<std::size_t>(h) * w);
  for (int f = 0; f < mask.frames(); ++f) {
    if (!mask.any(f)) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = x + k;
          if (xx >= 0 && xx < w && mask.at(f, y, xx)) acc += kernel[k + radius];
        }
        rows[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = y + k;
          if (yy >= 0 && yy < h) acc += kernel[k + radius] * rows[static_cast<std::size_t>(yy) * w + x];
        }
        out.set(f, y, x, acc >= threshold || mask.at(f, y, x));
      }
    }
  }
  return out;
}

VideoTensor GammaCorrect(const VideoTensor& video, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be > 0");
  VideoTensor out = video;
  for (float& v : out.values()) {
    v = static_cast<float>(std::pow(static_cast<double>(std::clamp(v, 0.0f, 1.0f)), gamma));
  }
  return out;
}

VideoTensor MakeMaskedVideo(const VideoTensor& source, const MaskVideo& mask) {
  if (source.dims() != mask.dims()) throw InvalidInput("masked video: dims mismatch");
  VideoTensor out = source;
  auto dst = out.values();
  const int c = source.channels();
  auto m = mask.values();
  for (std::size_t p = 0; p < m.size(); ++p) {
    if (!m[p]) continue;
    for (int k = 0; k < c; ++k) dst[p * c + k] = 0.0f;
  }
  return out;
}

CenteredForeground CenterForeground(const VideoTensor& source, const MaskVideo& mask) {
  if (source.dims() != mask.dims()) throw InvalidInput("center foreground: dims mismatch");
  const int h = source.height();
  const int w = source.width();
  const int c = source.channels();
  CenteredForeground out{VideoTensor(source.dims(), c), MaskVideo(source.dims()), {}};
  const Point2 target = FrameCenter(h, w);
  for (int f = 0; f < source.frames(); ++f) {
    Point2 box;
    if (!MaskBoxCenter(mask, f, &box)) {
      out.skipped_frames.push_back(f);
      continue;
    }
    const int sx = RoundHalfTowardZero(target.x - box.x);
    const int sy = RoundHalfTowardZero(target.y - box.y);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask.at(f, y, x)) continue;
        const int ty = y + sy;
        const int tx = x + sx;
        if (ty < 0 || ty >= h || tx < 0 || tx >= w) continue;
        out.mask.set(f, ty, tx, true);
        for (int k = 0; k < c; ++k) out.video.at(f, ty, tx, k) = source.at(f, y, x, k);
      }
    }
  }
  return out;
}

MaskVideo ThresholdForegroundMask(const VideoTensor& fg, float threshold) {
  MaskVideo out(fg.dims());
  for (int f = 0; f < fg.frames(); ++f) {
    for (int y = 0; y < fg.height(); ++y) {
      for (int x = 0; x < fg.width(); ++x) {
        bool on = false;
        for (int k = 0; k < fg.channels(); ++k) on = on || fg.at(f, y, x, k) > threshold;
        out.set(f, y, x, on);
      }
    }
  }
  return out;
}

}  // namespace gencomp
