// SPDX-License-Identifier: Apache-2.0
#include "gencomp/diffusion.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gencomp/error.h"

namespace gencomp {

std::string_view ScheduleKindName(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind ParseScheduleKind(std::string_view name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ConfigError("unknown schedule kind: " + std::string(name));
}

DiffusionSchedule MakeSchedule(int steps, ScheduleKind kind) {
  if (steps < 2) throw InvalidInput("schedule needs at least 2 steps");
  DiffusionSchedule s;
  s.kind = kind;
  s.betas.resize(steps);
  if (kind == ScheduleKind::kLinear) {
    const double start = 1e-4;
    // Short schedules keep sum(beta) near 3 so alpha_bar still ends near e^-3.
    const double end = std::min(std::max(2e-2, 6.0 / steps), 0.999);
    for (int t = 0; t < steps; ++t) s.betas[t] = start + (end - start) * t / (steps - 1);
  } else {
    constexpr double kOffset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / steps + kOffset) / (1 + kOffset) * std::numbers::pi / 2);
      return c * c;
    };
    for (int t = 0; t < steps; ++t) {
      s.betas[t] = std::min(1.0 - f(t + 1) / f(t), 0.999);
    }
  }
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    prod *= 1.0 - s.betas[t];
    s.alpha_bars[t] = prod;
  }
  return s;
}

VideoTensor AddNoise(const VideoTensor& z0, const VideoTensor& eps, double alpha_bar) {
  if (z0.dims() != eps.dims() || z0.channels() != eps.channels()) {
    throw InvalidInput("add_noise: z0 and eps dims differ");
  }
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) throw InvalidInput("add_noise: alpha_bar outside [0,1]");
  const double a = std::sqrt(alpha_bar);
  const double b = std::sqrt(1.0 - alpha_bar);
  VideoTensor out(z0.dims(), z0.channels());
  auto x = z0.values();
  auto e = eps.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(a * x[i] + b * e[i]);
  return out;
}

VideoTensor AddNoise(const VideoTensor& z0, const VideoTensor& eps, int t,
                     const DiffusionSchedule& sched) {
  if (t < 0 || t >= sched.steps()) {
    throw InvalidInput("add_noise: timestep " + std::to_string(t) + " outside [0, " +
                       std::to_string(sched.steps()) + ")");
  }
  return AddNoise(z0, eps, sched.alpha_bars[t]);
}

VideoTensor GaussianNoise(Dims dims, int channels, std::mt19937_64& rng) {
  VideoTensor out(dims, channels);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (float& v : out.values()) v = dist(rng);
  return out;
}

double TrainingLoss(const ConditionalPredictor& predict, std::span<const TrainingExample> batch,
                    const DiffusionSchedule& sched, std::mt19937_64& rng) {
  if (batch.empty()) throw InvalidInput("training loss: empty batch");
  std::uniform_int_distribution<int> pick_t(0, sched.steps() - 1);
  double total = 0.0;
  for (const auto& ex : batch) {
    const int t = pick_t(rng);
    const VideoTensor eps = GaussianNoise(ex.z0.dims(), ex.z0.channels(), rng);
    const VideoTensor z_t = AddNoise(ex.z0, eps, t, sched);
    const VideoTensor pred = predict({&z_t, &ex.masked_video, &ex.mask, &ex.fg, t});
    if (pred.size() != eps.size()) throw ContractViolation("predictor returned wrong size");
    double sum = 0.0;
    auto p = pred.values();
    auto e = eps.values();
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = static_cast<double>(p[i]) - e[i];
      sum += d * d;
    }
    total += sum / static_cast<double>(e.size());
  }
  return total / static_cast<double>(batch.size());
}

std::vector<int> SamplerTimesteps(int total, int steps) {
  if (steps < 1) throw InvalidInput("sampler needs at least 1 step");
  if (steps > total) {
    throw InvalidInput("sampler steps " + std::to_string(steps) + " exceed schedule length " +
                       std::to_string(total));
  }
  std::vector<int> ts(steps);
  if (steps == 1) {
    ts[0] = total - 1;
    return ts;
  }
  for (int i = 0; i < steps; ++i) {
    const double frac = static_cast<double>(steps - 1 - i) / (steps - 1);
    ts[i] = static_cast<int>(std::lround(frac * (total - 1)));
  }
  return ts;
}

VideoTensor SampleDdim(const NoisePredictor& predict, Dims dims, int channels,
                       const DiffusionSchedule& sched, int steps, std::uint64_t seed) {
  const std::vector<int> ts = SamplerTimesteps(sched.steps(), steps);
  std::mt19937_64 rng(seed);
  VideoTensor x = GaussianNoise(dims, channels, rng);

  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const double ab = sched.alpha_bars[t];
    const double ab_prev = k + 1 < ts.size() ? sched.alpha_bars[ts[k + 1]] : 1.0;
    const VideoTensor eps = predict(x, t);
    if (eps.size() != x.size()) throw ContractViolation("noise predictor returned wrong size");

    auto xv = x.values();
    auto ev = eps.values();
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    const double sa_prev = std::sqrt(ab_prev), sb_prev = std::sqrt(1.0 - ab_prev);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double est = std::clamp((xv[i] - sb * ev[i]) / sa, 0.0, 1.0);
      const double e = (xv[i] - sa * est) / sb;
      xv[i] = static_cast<float>(sa_prev * est + sb_prev * e);
    }
  }
  // The final update has alpha_bar_prev = 1, so x already is the clipped x0.
  x.clamp01();
  return x;
}

VideoTensor SampleComposite(const DiT<float>& model, const VideoTensor& masked_video,
                            const MaskVideo& mask, const VideoTensor& fg,
                            const DiffusionSchedule& sched, int steps, std::uint64_t seed) {
  if (sched.steps() != model.config().diffusion_steps) {
    throw ConfigError("schedule length does not match the model's diffusion_steps");
  }
  auto predict = [&](const VideoTensor& z_t, int t) {
    return model.PredictNoise({&z_t, &masked_video, &mask, &fg, t});
  };
  return SampleDdim(predict, masked_video.dims(), masked_video.channels(), sched, steps, seed);
}

}  // namespace gencomp
