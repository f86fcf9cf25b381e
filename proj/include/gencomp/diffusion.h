// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "gencomp/model.h"
#include "gencomp/video.h"

namespace gencomp {

enum class ScheduleKind { kLinear, kCosine };

std::string_view ScheduleKindName(ScheduleKind kind);
ScheduleKind ParseScheduleKind(std::string_view name);

struct DiffusionSchedule {
  ScheduleKind kind = ScheduleKind::kLinear;
  std::vector<double> betas;
  std::vector<double> alpha_bars;  // cumulative products of (1 - beta)

  int steps() const { return static_cast<int>(betas.size()); }
};

// Linear: beta from 1e-4 up to max(2e-2, 6/T), capped below 1. For T >= 300
// this is the classic DDPM range; shorter schedules keep alpha_bar_{T-1} near e^-3. Cosine: squared-cosine alpha-bar, s = 0.008.
DiffusionSchedule MakeSchedule(int steps, ScheduleKind kind = ScheduleKind::kLinear);

// sqrt(ab) * z0 + sqrt(1 - ab) * eps
VideoTensor AddNoise(const VideoTensor& z0, const VideoTensor& eps, double alpha_bar);
VideoTensor AddNoise(const VideoTensor& z0, const VideoTensor& eps, int t,
                     const DiffusionSchedule& sched);

VideoTensor GaussianNoise(Dims dims, int channels, std::mt19937_64& rng);

struct TrainingExample {
  VideoTensor z0;
  VideoTensor masked_video;
  MaskVideo mask;
  VideoTensor fg;
};

using ConditionalPredictor = std::function<VideoTensor(const NoiseInputs&)>;

// Mean squared error between drawn noise and the prediction, averaged over
// the batch. Draws t ~ U[0, T) and eps ~ N(0, I) per example from `rng`.
double TrainingLoss(const ConditionalPredictor& predict, std::span<const TrainingExample> batch,
                    const DiffusionSchedule& sched, std::mt19937_64& rng);

// Descending timesteps visited by the sampler; always starts at T-1.
std::vector<int> SamplerTimesteps(int total, int steps);

using NoisePredictor = std::function<VideoTensor(const VideoTensor& z_t, int t)>;

// Deterministic DDIM (eta = 0). The x0 estimate is clipped to [0,1] at every
// step and the output is clamped to [0,1].
VideoTensor SampleDdim(const NoisePredictor& predict, Dims dims, int channels,
                       const DiffusionSchedule& sched, int steps, std::uint64_t seed);

VideoTensor SampleComposite(const DiT<float>& model, const VideoTensor& masked_video,
                            const MaskVideo& mask, const VideoTensor& fg,
                            const DiffusionSchedule& sched, int steps, std::uint64_t seed);

}  // namespace gencomp
