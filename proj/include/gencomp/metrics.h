// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gencomp/control.h"
#include "gencomp/synth.h"
#include "gencomp/video.h"

namespace gencomp {

// Reported for identical inputs instead of +inf.
inline constexpr double kPsnrIdentical = 100.0;

// 10 log10(1 / MSE) over all values, or only over pixels where `region` is
// set. An empty region throws InvalidInput.
double Psnr(const VideoTensor& a, const VideoTensor& b, const MaskVideo* region = nullptr);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1) on
// the channel-mean gray image over the fully covered window positions,
// averaged over frames. Frames smaller than 11 px shrink the window.
double Ssim(const VideoTensor& a, const VideoTensor& b);

// Pixels within `threshold` (Euclidean RGB) of `color`.
MaskVideo SegmentColor(const VideoTensor& video, const Color& color, double threshold);

inline constexpr double kSegmentThreshold = 0.25;

// Mean per-frame distance from the segmented sprite centroid to the path; a
// frame without sprite pixels costs max(H, W).
double TrajectoryAdherence(const VideoTensor& output, const TrajectoryDense& path, const Color& color,
                           double threshold = kSegmentThreshold);

}  // namespace gencomp
