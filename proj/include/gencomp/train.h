// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gencomp/diffusion.h"
#include "gencomp/model.h"
#include "gencomp/synth.h"

namespace gencomp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

enum class LrSchedule { kConstant, kCosine };

std::string_view LrScheduleName(LrSchedule s);
LrSchedule ParseLrSchedule(std::string_view name);  // throws ConfigError

// Multiplier on the base rate at `step` of `total`: linear warmup over
// `warmup` steps, then constant or half-cosine down to zero.
double LrScale(LrSchedule s, int step, int total, int warmup);

struct TrainConfig {
  ModelConfig model;  // model.variant is the ablation setting
  int steps = 200;
  int batch_size = 4;
  AdamConfig adam;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  int warmup_steps = 0;
  std::uint64_t seed = 0;
  int log_every = 50;
  ScheduleKind schedule = ScheduleKind::kLinear;
  AugmentConfig augment;
  double ema_decay = 0.99;
  // Fraction of examples whose foreground is blanked and whose target is
  // the bare background.
  double blank_fg_prob = 0.0;

  void Validate() const;  // throws ConfigError
  std::string ToJson() const;
  static TrainConfig FromJson(const std::string& text);
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
  double ema = 0.0;
};

struct LossCurve {
  std::vector<LossPoint> points;

  void Append(int step, double loss, double decay);
  double final_ema() const;
  std::string ToCsv() const;
  static LossCurve FromCsv(const std::string& text);
};

template <typename T>
class Adam {
 public:
  Adam(const std::vector<NamedParam<T>>& params, AdamConfig cfg);
  // Clips, applies one update at lr * lr_scale and returns the pre-clip
  // gradient norm.
  double Step(double lr_scale = 1.0);

 private:
  std::vector<NamedParam<T>> params_;
  AdamConfig cfg_;
  std::vector<ag::Matrix<T>> m_, v_;
  long t_ = 0;
};

struct TrainResult {
  std::unique_ptr<DiT<float>> model;
  LossCurve curve;
};

using StepCallback = std::function<void(const LossPoint&)>;

// Scene renders of every triplet without the sprite; used for blanked
// examples. Empty when blank_fg_prob is 0.
using BackgroundRenders = std::vector<VideoTensor>;

TrainResult Train(const TrainConfig& cfg, std::span<const SampleTriplet> corpus,
                  const BackgroundRenders& backgrounds = {}, const StepCallback& on_step = {});

struct VariantStats {
  Variant variant = Variant::kFull;
  std::vector<double> final_emas;
  double mean = 0.0;
  double stddev = 0.0;
  double std_error = 0.0;
};

VariantStats SummarizeRuns(Variant v, std::vector<double> final_emas);
// True when b's mean exceeds a's by more than the pooled standard error.
bool LowerByPooledStdError(const VariantStats& a, const VariantStats& b);
double PooledStdError(const VariantStats& a, const VariantStats& b);

struct AblationRun {
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  LossCurve curve;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  std::vector<VariantStats> stats;
  std::string ToJson() const;
};

using RunCallback = std::function<void(const AblationRun&, TrainResult&)>;

AblationReport RunAblation(const TrainConfig& base, std::span<const Variant> variants,
                           std::span<const std::uint64_t> seeds,
                           std::span<const SampleTriplet> corpus,
                           const BackgroundRenders& backgrounds = {},
                           const RunCallback& on_run = {});

}  // namespace gencomp
