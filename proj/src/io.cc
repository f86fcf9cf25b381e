// SPDX-License-Identifier: Apache-2.0
#include "gencomp/io.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "gencomp/error.h"

namespace gencomp {
namespace {

constexpr char kRawMagic[4] = {'G', 'C', 'T', 'V'};
constexpr std::uint32_t kRawVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

std::uint8_t ToByte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::vector<std::uint8_t> ReadBinary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBinary(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<fs::path> FramePaths(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<fs::path> paths;
  for (int f = 0;; ++f) {
    fs::path p = dir / FrameFileName(f);
    if (!fs::exists(p)) break;
    paths.push_back(std::move(p));
  }
  if (paths.empty()) throw IoError(dir.string(), "no frame_00000.png found");
  return paths;
}

}  // namespace

fs::path DataRoot() {
  if (const char* env = std::getenv("GENCOMP_DATA_DIR"); env && *env) return fs::path(env);
  return fs::path("gencomp_data");
}

std::string FrameFileName(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", frame);
  return buf;
}

std::vector<std::uint8_t> EncodePng(const VideoTensor& video, int frame) {
  const int c = video.channels();
  png_uint_32 format = 0;
  switch (c) {
    case 1: format = PNG_FORMAT_GRAY; break;
    case 3: format = PNG_FORMAT_RGB; break;
    case 4: format = PNG_FORMAT_RGBA; break;
    default: throw InvalidInput("png: unsupported channel count " + std::to_string(c));
  }
  if (frame < 0 || frame >= video.frames()) throw InvalidInput("png: frame index out of range");

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(video.height()) * video.width() * c);
  auto src = video.values().subspan(video.index(frame, 0, 0), pixels.size());
  std::transform(src.begin(), src.end(), pixels.begin(), ToByte);

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(video.width());
  image.height = static_cast<png_uint_32>(video.height());
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

VideoTensor DecodePng(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw InvalidInput(std::string("png decode: ") + image.message);
  }
  int c = 3;
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    image.format = PNG_FORMAT_RGBA;
    c = 4;
  } else if (image.format & PNG_FORMAT_FLAG_COLOR) {
    image.format = PNG_FORMAT_RGB;
  } else {
    image.format = PNG_FORMAT_GRAY;
    c = 1;
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw InvalidInput(std::string("png decode: ") + image.message);
  }
  VideoTensor out(1, static_cast<int>(image.height), static_cast<int>(image.width), c);
  std::transform(pixels.begin(), pixels.end(), out.values().begin(),
                 [](std::uint8_t b) { return b / 255.0f; });
  return out;
}

void WriteFrames(const VideoTensor& video, const fs::path& dir) {
  if (video.empty()) throw EmptyVideo();
  fs::create_directories(dir);
  for (int f = 0; f < video.frames(); ++f) {
    const auto bytes = EncodePng(video, f);
    WriteBinary(dir / FrameFileName(f), bytes.data(), bytes.size());
  }
}

VideoTensor ReadFrames(const fs::path& dir) {
  const auto paths = FramePaths(dir);
  std::vector<VideoTensor> frames;
  for (const auto& p : paths) {
    try {
      frames.push_back(DecodePng(ReadBinary(p)));
    } catch (const InvalidInput& e) {
      throw IoError(p.string(), e.what());
    }
    if (frames.back().height() != frames.front().height() ||
        frames.back().width() != frames.front().width() ||
        frames.back().channels() != frames.front().channels()) {
      throw IoError(p.string(), "frame size differs from frame 0");
    }
  }
  const VideoTensor& first = frames.front();
  VideoTensor out(static_cast<int>(frames.size()), first.height(), first.width(), first.channels());
  const std::size_t per_frame = first.size();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::copy(frames[f].values().begin(), frames[f].values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(f * per_frame));
  }
  return out;
}

void WriteMaskFrames(const MaskVideo& mask, const fs::path& dir) { WriteFrames(MaskAsVideo(mask), dir); }

MaskVideo VideoToMask(const VideoTensor& video) {
  MaskVideo mask(video.dims());
  for (int f = 0; f < video.frames(); ++f) {
    for (int y = 0; y < video.height(); ++y) {
      for (int x = 0; x < video.width(); ++x) {
        float sum = 0.0f;
        for (int k = 0; k < video.channels(); ++k) sum += video.at(f, y, x, k);
        mask.set(f, y, x, sum / video.channels() >= 0.5f);
      }
    }
  }
  return mask;
}

MaskVideo ReadMaskFrames(const fs::path& dir) { return VideoToMask(ReadFrames(dir)); }

void WriteRawTensor(const VideoTensor& video, const fs::path& path) {
  std::vector<char> buf(4 + 4 * 6 + video.size() * sizeof(float));
  char* p = buf.data();
  std::memcpy(p, kRawMagic, 4);
  p += 4;
  const std::uint32_t header[6] = {kRawVersion,
                                   static_cast<std::uint32_t>(video.frames()),
                                   static_cast<std::uint32_t>(video.height()),
                                   static_cast<std::uint32_t>(video.width()),
                                   static_cast<std::uint32_t>(video.channels()),
                                   kDtypeF32};
  std::memcpy(p, header, sizeof(header));
  p += sizeof(header);
  std::memcpy(p, video.values().data(), video.size() * sizeof(float));
  WriteBinary(path, buf.data(), buf.size());
}

VideoTensor ReadRawTensor(const fs::path& path) {
  const auto bytes = ReadBinary(path);
  constexpr std::size_t kHeader = 4 + 4 * 6;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kRawMagic, 4) != 0) {
    throw IoError(path.string(), "not a GCTV raw tensor");
  }
  std::uint32_t header[6];
  std::memcpy(header, bytes.data() + 4, sizeof(header));
  if (header[0] != kRawVersion) throw IoError(path.string(), "unsupported GCTV version");
  if (header[5] != kDtypeF32) throw IoError(path.string(), "unsupported GCTV dtype");
  for (int i = 1; i <= 4; ++i) {
    if (header[i] == 0 || header[i] > (1u << 20)) throw IoError(path.string(), "bad GCTV dims");
  }
  VideoTensor out(static_cast<int>(header[1]), static_cast<int>(header[2]),
                  static_cast<int>(header[3]), static_cast<int>(header[4]));
  if (bytes.size() != kHeader + out.size() * sizeof(float)) {
    throw IoError(path.string(), "GCTV payload length does not match header dims");
  }
  std::memcpy(out.values().data(), bytes.data() + kHeader, out.size() * sizeof(float));
  return out;
}

VideoTensor ReadVideo(const fs::path& path) {
  if (fs::is_directory(path)) return ReadFrames(path);
  if (!fs::exists(path)) throw IoError(path.string(), "no such file or directory");
  return ReadRawTensor(path);
}

MaskVideo ReadMask(const fs::path& path) { return VideoToMask(ReadVideo(path)); }

std::string ReadTextFile(const fs::path& path) {
  const auto bytes = ReadBinary(path);
  return {bytes.begin(), bytes.end()};
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  WriteBinary(path, text.data(), text.size());
}

}  // namespace gencomp
