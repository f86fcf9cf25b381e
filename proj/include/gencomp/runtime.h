// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gencomp/control.h"
#include "gencomp/diffusion.h"
#include "gencomp/model.h"
#include "gencomp/synth.h"

namespace gencomp {

inline constexpr int kDefaultSamplerSteps = 20;

struct ComposeRequest {
  VideoTensor background;
  VideoTensor foreground;
  std::optional<MaskVideo> foreground_mask;  // derived by thresholding when absent
  ControlSpec control;
  int steps = kDefaultSamplerSteps;
  std::uint64_t seed = 0;
  double inflate_sigma = kDefaultInflateSigma;
  double inflate_threshold = kDefaultInflateThreshold;
};

struct ComposeResult {
  VideoTensor video;
  MaskVideo mask;      // retargeted, before inflation
  MaskVideo inflated;  // what the model was asked to repaint
  TrajectoryDense trajectory;
};

// Per-frame path for a control spec: drag keypoints are densified, a click
// is tracked forward through the background and held before its frame.
TrajectoryDense ResolveTrajectory(const ControlSpec& spec, const VideoTensor& background);

// Loops or truncates the clip to `frames`.
VideoTensor LoopFrames(const VideoTensor& video, int frames);

// Nearest-neighbour zoom of every frame about its center; content mapped
// outside the frame is dropped and uncovered pixels are zero.
VideoTensor ScaleAboutCenter(const VideoTensor& video, double scale);

// Throws NothingToInsert when the retargeted mask is empty in every frame.
ComposeResult Compose(const DiT<float>& model, const DiffusionSchedule& sched,
                      const ComposeRequest& req);

// Inpaints `region` (inflated first) with a blank foreground condition.
ComposeResult Remove(const DiT<float>& model, const DiffusionSchedule& sched,
                     const VideoTensor& background, const MaskVideo& region,
                     int steps = kDefaultSamplerSteps, std::uint64_t seed = 0,
                     double inflate_sigma = kDefaultInflateSigma,
                     double inflate_threshold = kDefaultInflateThreshold);

struct SampleScore {
  std::string id;
  double psnr = 0.0;             // whole clip vs source
  double psnr_background = 0.0;  // outside the inflated mask
  double ssim = 0.0;
  double adherence = 0.0;        // px
};

struct EvalReport {
  std::vector<SampleScore> samples;
  double psnr = 0.0;
  double psnr_background = 0.0;
  double ssim = 0.0;
  double adherence = 0.0;
  std::string ToJson() const;
};

// Reconstructs each corpus clip from its masked source and centered
// foreground and scores it against the source.
EvalReport Evaluate(const DiT<float>& model, const DiffusionSchedule& sched,
                    const std::vector<CorpusEntry>& corpus, int steps = kDefaultSamplerSteps,
                    std::uint64_t seed = 0, int limit = 0);

}  // namespace gencomp
