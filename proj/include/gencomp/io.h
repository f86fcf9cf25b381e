// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gencomp/video.h"

namespace gencomp {

namespace fs = std::filesystem;

// Output root: $GENCOMP_DATA_DIR if set, else ./gencomp_data.
fs::path DataRoot();

std::string FrameFileName(int frame);  // frame_00000.png

// 8-bit PNG codec. Grayscale for 1 channel, RGB for 3, RGBA for 4.
std::vector<std::uint8_t> EncodePng(const VideoTensor& video, int frame);
VideoTensor DecodePng(const std::vector<std::uint8_t>& bytes);  // 1-frame video

void WriteFrames(const VideoTensor& video, const fs::path& dir);
VideoTensor ReadFrames(const fs::path& dir);
void WriteMaskFrames(const MaskVideo& mask, const fs::path& dir);
MaskVideo ReadMaskFrames(const fs::path& dir);  // pixel >= 0.5 is set

// "GCTV" | u32 version | u32 F,H,W,C | u32 dtype (0 = f32) | f32 LE payload.
void WriteRawTensor(const VideoTensor& video, const fs::path& path);
VideoTensor ReadRawTensor(const fs::path& path);

// A directory is read as a PNG sequence; anything else as a raw tensor.
VideoTensor ReadVideo(const fs::path& path);
MaskVideo ReadMask(const fs::path& path);
MaskVideo VideoToMask(const VideoTensor& video);

std::string ReadTextFile(const fs::path& path);
void WriteTextFile(const fs::path& path, const std::string& text);

}  // namespace gencomp
