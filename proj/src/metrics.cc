// SPDX-License-Identifier: Apache-2.0
#include "gencomp/metrics.h"

#include <algorithm>
#include <cmath>

#include "gencomp/error.h"

namespace gencomp {
namespace {

std::vector<double> GaussianKernel(int radius, double sigma) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> FilterValid(const std::vector<double>& img, int h, int w,
                                const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

void CheckSameShape(const VideoTensor& a, const VideoTensor& b, const char* what) {
  if (a.dims() != b.dims() || a.channels() != b.channels()) {
    throw InvalidInput(std::string(what) + ": dims mismatch");
  }
}

}  // namespace

double Psnr(const VideoTensor& a, const VideoTensor& b, const MaskVideo* region) {
  CheckSameShape(a, b, "psnr");
  if (a.empty()) throw EmptyVideo();
  if (region && region->dims() != a.dims()) throw InvalidInput("psnr: region dims mismatch");
  const int c = a.channels();
  auto va = a.values();
  auto vb = b.values();
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t pixels = a.dims().pixels();
  for (std::size_t p = 0; p < pixels; ++p) {
    if (region && region->values()[p] == 0) continue;
    for (int k = 0; k < c; ++k) {
      const double d = static_cast<double>(va[p * c + k]) - vb[p * c + k];
      sum += d * d;
    }
    count += static_cast<std::size_t>(c);
  }
  if (count == 0) throw InvalidInput("psnr: undefined region (no pixels selected)");
  const double mse = sum / static_cast<double>(count);
  if (mse == 0.0) return kPsnrIdentical;
  return std::min(kPsnrIdentical, 10.0 * std::log10(1.0 / mse));
}

double Ssim(const VideoTensor& a, const VideoTensor& b) {
  CheckSameShape(a, b, "ssim");
  if (a.empty()) throw EmptyVideo();
  const int h = a.height(), w = a.width();
  const int radius = std::min(5, (std::min(h, w) - 1) / 2);
  const auto k = GaussianKernel(radius, 1.5);
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  for (int f = 0; f < a.frames(); ++f) {
    const auto la = LuminancePlane(a, f);
    const auto lb = LuminancePlane(b, f);
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = la[i];
      y[i] = lb[i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = FilterValid(x, h, w, k), my = FilterValid(y, h, w, k);
    const auto sxx = FilterValid(xx, h, w, k), syy = FilterValid(yy, h, w, k),
               sxy = FilterValid(xy, h, w, k);
    double frame_sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      frame_sum += ((2 * mx[i] * my[i] + kC1) * (2 * cov + kC2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
    }
    total += frame_sum / static_cast<double>(mx.size());
  }
  return total / a.frames();
}

MaskVideo SegmentColor(const VideoTensor& video, const Color& color, double threshold) {
  if (video.channels() != 3) throw InvalidInput("segment: expected an RGB video");
  MaskVideo out(video.dims());
  const double t2 = threshold * threshold;
  for (int f = 0; f < video.frames(); ++f) {
    for (int y = 0; y < video.height(); ++y) {
      for (int x = 0; x < video.width(); ++x) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = video.at(f, y, x, c) - color[c];
          d2 += d * d;
        }
        out.set(f, y, x, d2 <= t2);
      }
    }
  }
  return out;
}

double TrajectoryAdherence(const VideoTensor& output, const TrajectoryDense& path, const Color& color,
                           double threshold) {
  if (output.empty()) throw EmptyVideo();
  if (path.size() != static_cast<std::size_t>(output.frames())) {
    throw InvalidInput("adherence: path length differs from frame count");
  }
  const MaskVideo seg = SegmentColor(output, color, threshold);
  const double penalty = std::max(output.height(), output.width());
  double total = 0.0;
  for (int f = 0; f < output.frames(); ++f) {
    if (!seg.any(f)) {
      total += penalty;
      continue;
    }
    const Point2 c = MaskCentroid(seg, f);
    total += std::hypot(c.x - path[f].x, c.y - path[f].y);
  }
  return total / output.frames();
}

}  // namespace gencomp
