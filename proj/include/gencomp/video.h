// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gencomp {

struct Dims {
  int frames = 0;
  int height = 0;
  int width = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
  std::size_t pixels() const {
    return static_cast<std::size_t>(frames) * height * width;
  }
};

// F x H x W x C frames, channel-interleaved, row-major. Values are nominally
// in [0,1]; intermediate diffusion states are allowed to leave that range and
// are clamped at I/O boundaries.
class VideoTensor {
 public:
  VideoTensor() = default;
  VideoTensor(int frames, int height, int width, int channels, float fill = 0.0f);
  VideoTensor(Dims dims, int channels, float fill = 0.0f)
      : VideoTensor(dims.frames, dims.height, dims.width, channels, fill) {}

  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Dims dims() const { return {frames_, height_, width_}; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int f, int y, int x, int c = 0) const {
    return ((static_cast<std::size_t>(f) * height_ + y) * width_ + x) * channels_ + c;
  }
  float& at(int f, int y, int x, int c) { return data_[index(f, y, x, c)]; }
  float at(int f, int y, int x, int c) const { return data_[index(f, y, x, c)]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  // Copy of a single frame as a 1-frame video.
  VideoTensor frame(int f) const;
  void clamp01();

  friend bool operator==(const VideoTensor&, const VideoTensor&) = default;

 private:
  int frames_ = 0;
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Binary F x H x W mask; every stored value is exactly 0 or 1.
class MaskVideo {
 public:
  MaskVideo() = default;
  MaskVideo(int frames, int height, int width, std::uint8_t fill = 0);
  explicit MaskVideo(Dims dims, std::uint8_t fill = 0)
      : MaskVideo(dims.frames, dims.height, dims.width, fill) {}

  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Dims dims() const { return {frames_, height_, width_}; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int f, int y, int x) const {
    return (static_cast<std::size_t>(f) * height_ + y) * width_ + x;
  }
  bool at(int f, int y, int x) const { return data_[index(f, y, x)] != 0; }
  void set(int f, int y, int x, bool v) { data_[index(f, y, x)] = v ? 1 : 0; }

  std::span<const std::uint8_t> values() const { return data_; }

  std::size_t count(int f) const;
  std::size_t count() const;
  bool any(int f) const { return count(f) > 0; }

  friend bool operator==(const MaskVideo&, const MaskVideo&) = default;

 private:
  int frames_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Mean over channels; used wherever a single intensity plane is needed
// (tracking, SSIM).
std::vector<float> LuminancePlane(const VideoTensor& video, int frame);

// Concatenate along channels; all inputs must share dims.
VideoTensor ConcatChannels(const VideoTensor& a, const VideoTensor& b);
VideoTensor MaskAsVideo(const MaskVideo& mask);
MaskVideo Complement(const MaskVideo& mask);

}  // namespace gencomp
