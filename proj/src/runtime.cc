// SPDX-License-Identifier: Apache-2.0
#include "gencomp/runtime.h"

#include <algorithm>
#include <cmath>

#include "gencomp/error.h"
#include "gencomp/metrics.h"
#include "json.hpp"

namespace gencomp {

TrajectoryDense ResolveTrajectory(const ControlSpec& spec, const VideoTensor& background) {
  const int frames = background.frames();
  if (frames < 1) throw EmptyVideo();
  if (spec.mode == ControlMode::kDrag) return DensifyTrajectory(spec, frames);

  const ControlPoint& p = spec.points.front();
  const TrajectoryDense tracked = TrackPoint(background, {p.x, p.y}, p.frame);
  TrajectoryDense out;
  out.positions.assign(static_cast<std::size_t>(p.frame), Point2{p.x, p.y});
  out.positions.insert(out.positions.end(), tracked.positions.begin(), tracked.positions.end());
  return out;
}

VideoTensor LoopFrames(const VideoTensor& video, int frames) {
  if (video.empty()) throw EmptyVideo();
  if (video.frames() == frames) return video;
  VideoTensor out(frames, video.height(), video.width(), video.channels());
  const std::size_t per = static_cast<std::size_t>(video.height()) * video.width() * video.channels();
  for (int f = 0; f < frames; ++f) {
    auto src = video.values().subspan(static_cast<std::size_t>(f % video.frames()) * per, per);
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(f * per));
  }
  return out;
}

VideoTensor ScaleAboutCenter(const VideoTensor& video, double scale) {
  if (!(scale > 0)) throw InvalidInput("scale must be > 0");
  if (scale == 1.0) return video;
  VideoTensor out(video.dims(), video.channels());
  const double cx = (video.width() - 1) / 2.0;
  const double cy = (video.height() - 1) / 2.0;
  for (int f = 0; f < video.frames(); ++f) {
    for (int y = 0; y < video.height(); ++y) {
      const int sy = static_cast<int>(std::floor((y - cy) / scale + cy + 0.5));
      if (sy < 0 || sy >= video.height()) continue;
      for (int x = 0; x < video.width(); ++x) {
        const int sx = static_cast<int>(std::floor((x - cx) / scale + cx + 0.5));
        if (sx < 0 || sx >= video.width()) continue;
        for (int c = 0; c < video.channels(); ++c) out.at(f, y, x, c) = video.at(f, sy, sx, c);
      }
    }
  }
  return out;
}

namespace {

void CheckSamplerArgs(const DiT<float>& model, const VideoTensor& background, int steps) {
  if (background.empty()) throw EmptyVideo("background video is empty");
  if (background.channels() != model.config().channels) {
    throw InvalidInput("background has " + std::to_string(background.channels()) +
                       " channels, model expects " + std::to_string(model.config().channels));
  }
  if (steps < 1) throw InvalidInput("steps must be >= 1");
}

}  // namespace

ComposeResult Compose(const DiT<float>& model, const DiffusionSchedule& sched,
                      const ComposeRequest& req) {
  CheckSamplerArgs(model, req.background, req.steps);
  if (req.foreground.empty()) throw EmptyVideo("foreground video is empty");
  if (req.foreground.channels() != req.background.channels()) {
    throw InvalidInput("foreground and background channel counts differ");
  }
  const Dims bg = req.background.dims();
  ValidateControlSpec(req.control, &bg);

  MaskVideo fg_mask = req.foreground_mask ? *req.foreground_mask
                                          : ThresholdForegroundMask(req.foreground);
  if (fg_mask.dims() != req.foreground.dims()) {
    throw InvalidInput("foreground mask dims differ from the foreground video");
  }

  ComposeResult out;
  out.trajectory = ResolveTrajectory(req.control, req.background);
  out.mask = RetargetMask(fg_mask, out.trajectory, req.control.scale, bg);
  if (out.mask.count() == 0) throw NothingToInsert("retargeted mask is empty in every frame");
  out.inflated = InflateMask(out.mask, req.inflate_sigma, req.inflate_threshold);

  const VideoTensor masked = MakeMaskedVideo(req.background, out.inflated);
  // Only the element itself conditions the model; its surround reads as black.
  const VideoTensor element = MakeMaskedVideo(req.foreground, Complement(fg_mask));
  const VideoTensor fg = ScaleAboutCenter(LoopFrames(element, bg.frames), req.control.scale);
  out.video = SampleComposite(model, masked, out.inflated, fg, sched, req.steps, req.seed);
  return out;
}

ComposeResult Remove(const DiT<float>& model, const DiffusionSchedule& sched,
                     const VideoTensor& background, const MaskVideo& region, int steps,
                     std::uint64_t seed, double inflate_sigma, double inflate_threshold) {
  CheckSamplerArgs(model, background, steps);
  if (region.dims() != background.dims()) throw InvalidInput("removal mask dims differ from the video");
  if (region.count() == 0) throw NothingToInsert("removal mask is empty");

  ComposeResult out;
  out.mask = region;
  out.inflated = InflateMask(region, inflate_sigma, inflate_threshold);
  const VideoTensor masked = MakeMaskedVideo(background, out.inflated);
  const VideoTensor blank(background.dims(), background.channels(), 0.0f);
  out.video = SampleComposite(model, masked, out.inflated, blank, sched, steps, seed);
  return out;
}

std::string EvalReport::ToJson() const {
  nlohmann::json j;
  j["psnr"] = psnr;
  j["psnr_background"] = psnr_background;
  j["ssim"] = ssim;
  j["adherence"] = adherence;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"id", s.id},
                            {"psnr", s.psnr},
                            {"psnr_background", s.psnr_background},
                            {"ssim", s.ssim},
                            {"adherence", s.adherence}});
  }
  return j.dump(2);
}

EvalReport Evaluate(const DiT<float>& model, const DiffusionSchedule& sched,
                    const std::vector<CorpusEntry>& corpus, int steps, std::uint64_t seed,
                    int limit) {
  if (corpus.empty()) throw InvalidInput("evaluation corpus is empty");
  const std::size_t n = limit > 0 ? std::min(corpus.size(), static_cast<std::size_t>(limit))
                                  : corpus.size();
  EvalReport report;
  for (std::size_t i = 0; i < n; ++i) {
    const SampleTriplet t = LoadSample(corpus[i]);
    const TrainingExample ex = MakeTrainingExample(t, 1.0);
    const VideoTensor out =
        SampleComposite(model, ex.masked_video, ex.mask, ex.fg, sched, steps, seed + i);
    const MaskVideo keep = Complement(ex.mask);

    SampleScore s;
    s.id = corpus[i].id;
    s.psnr = Psnr(out, t.source);
    s.psnr_background = keep.count() > 0 ? Psnr(out, t.source, &keep) : kPsnrIdentical;
    s.ssim = Ssim(out, t.source);
    s.adherence = TrajectoryAdherence(out, t.path_truth, corpus[i].spec.sprite);
    report.samples.push_back(s);
  }
  for (const auto& s : report.samples) {
    report.psnr += s.psnr / n;
    report.psnr_background += s.psnr_background / n;
    report.ssim += s.ssim / n;
    report.adherence += s.adherence / n;
  }
  return report;
}

}  // namespace gencomp
