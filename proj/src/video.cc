// SPDX-License-Identifier: Apache-2.0
#include "gencomp/video.h"

#include <algorithm>
#include <numeric>

#include "gencomp/error.h"

namespace gencomp {

VideoTensor::VideoTensor(int frames, int height, int width, int channels, float fill)
    : frames_(frames), height_(height), width_(width), channels_(channels) {
  if (frames < 0 || height < 0 || width < 0 || channels < 0) {
    throw InvalidInput("negative video dimension");
  }
  data_.assign(static_cast<std::size_t>(frames) * height * width * channels, fill);
}

VideoTensor VideoTensor::frame(int f) const {
  VideoTensor out(1, height_, width_, channels_);
  const std::size_t n = static_cast<std::size_t>(height_) * width_ * channels_;
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index(f, 0, 0)), n,
              out.data_.begin());
  return out;
}

void VideoTensor::clamp01() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

MaskVideo::MaskVideo(int frames, int height, int width, std::uint8_t fill)
    : frames_(frames), height_(height), width_(width) {
  if (frames < 0 || height < 0 || width < 0) {
    throw InvalidInput("negative mask dimension");
  }
  data_.assign(static_cast<std::size_t>(frames) * height * width, fill ? 1 : 0);
}

std::size_t MaskVideo::count(int f) const {
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(index(f, 0, 0));
  return static_cast<std::size_t>(
      std::count(begin, begin + static_cast<std::ptrdiff_t>(height_) * width_, 1));
}

std::size_t MaskVideo::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 1));
}

std::vector<float> LuminancePlane(const VideoTensor& video, int frame) {
  std::vector<float> plane(static_cast<std::size_t>(video.height()) * video.width());
  const int c = video.channels();
  for (int y = 0; y < video.height(); ++y) {
    for (int x = 0; x < video.width(); ++x) {
      float sum = 0.0f;
      for (int k = 0; k < c; ++k) sum += video.at(frame, y, x, k);
      plane[static_cast<std::size_t>(y) * video.width() + x] = sum / static_cast<float>(c);
    }
  }
  return plane;
}

VideoTensor ConcatChannels(const VideoTensor& a, const VideoTensor& b) {
  if (a.dims() != b.dims()) throw InvalidInput("channel concat: dims mismatch");
  VideoTensor out(a.dims(), a.channels() + b.channels());
  const std::size_t pixels = a.dims().pixels();
  const int ca = a.channels();
  const int cb = b.channels();
  auto src_a = a.values();
  auto src_b = b.values();
  auto dst = out.values();
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(src_a.begin() + static_cast<std::ptrdiff_t>(p * ca), ca,
                dst.begin() + static_cast<std::ptrdiff_t>(p * (ca + cb)));
    std::copy_n(src_b.begin() + static_cast<std::ptrdiff_t>(p * cb), cb,
                dst.begin() + static_cast<std::ptrdiff_t>(p * (ca + cb) + ca));
  }
  return out;
}

VideoTensor MaskAsVideo(const MaskVideo& mask) {
  VideoTensor out(mask.dims(), 1);
  auto dst = out.values();
  auto src = mask.values();
  std::transform(src.begin(), src.end(), dst.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

MaskVideo Complement(const MaskVideo& mask) {
  MaskVideo out(mask.dims());
  for (int f = 0; f < mask.frames(); ++f) {
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) out.set(f, y, x, !mask.at(f, y, x));
    }
  }
  return out;
}

}  // namespace gencomp
