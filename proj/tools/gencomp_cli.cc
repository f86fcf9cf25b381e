// SPDX-License-Identifier: Apache-2.0
//
// gencomp: data generation, training, compositing, removal, evaluation and
// the job service. Exit status: 0 ok, 1 user error, 2 internal error.
#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gencomp/checkpoint.h"
#include "gencomp/error.h"
#include "gencomp/io.h"
#include "gencomp/runtime.h"
#include "gencomp/service.h"
#include "gencomp/synth.h"
#include "gencomp/train.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gencomp;

namespace {

void WriteOutput(const VideoTensor& video, const fs::path& out) {
  if (out.extension() == ".gctv") {
    WriteRawTensor(video, out);
  } else {
    WriteFrames(video, out);
  }
}

DiffusionSchedule ScheduleFor(const LoadedCheckpoint& ckpt) {
  return MakeSchedule(ckpt.model->config().diffusion_steps, ckpt.meta.schedule);
}

Service* g_service = nullptr;

void OnSignal(int) {
  if (g_service) g_service->Stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative video compositing at desk scale"};
  app.require_subcommand(1);

  struct {
    int n = 64;
    std::uint64_t seed = 0;
    std::string out;
    int frames = 8, height = 32, width = 32;
  } gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Render a synthetic corpus with a manifest");
  gen_cmd->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed");
  gen_cmd->add_option("--out", gen.out, "Output directory (default: $GENCOMP_DATA_DIR/corpus)");
  gen_cmd->add_option("--frames", gen.frames)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.height)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--width", gen.width)->check(CLI::PositiveNumber);

  struct {
    std::string config, corpus, out, curve;
    bool quiet = false;
  } train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--config", train.config, "Training config JSON")->required();
  train_cmd->add_option("--corpus", train.corpus, "Corpus directory or manifest")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--curve", train.curve, "Loss CSV path (default: <out>.loss.csv)");
  train_cmd->add_flag("--quiet", train.quiet);

  struct {
    std::string config, corpus, report;
    std::vector<std::string> variants{"erope_h", "erope_w", "erope_t", "shared_rope"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
  } ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train several variants and seeds; report final losses");
  ablate_cmd->add_option("--config", ablate.config, "Base training config JSON")->required();
  ablate_cmd->add_option("--corpus", ablate.corpus)->required();
  ablate_cmd->add_option("--report", ablate.report, "JSON report path")->required();
  ablate_cmd->add_option("--variants", ablate.variants);
  ablate_cmd->add_option("--seeds", ablate.seeds);

  struct {
    std::string bg, fg, fg_mask, control, ckpt, out;
    int steps = kDefaultSamplerSteps;
    std::uint64_t seed = 0;
  } compose;
  auto* compose_cmd = app.add_subcommand("compose", "Insert a foreground clip along a trajectory");
  compose_cmd->add_option("--bg", compose.bg, "Background (PNG directory or .gctv)")->required();
  compose_cmd->add_option("--fg", compose.fg, "Foreground (PNG directory or .gctv)")->required();
  compose_cmd->add_option("--fg-mask", compose.fg_mask, "Foreground mask; thresholded from --fg if absent");
  compose_cmd->add_option("--control", compose.control, "ControlSpec JSON file")->required();
  compose_cmd->add_option("--ckpt", compose.ckpt, "Checkpoint")->required();
  compose_cmd->add_option("--steps", compose.steps)->check(CLI::PositiveNumber);
  compose_cmd->add_option("--seed", compose.seed);
  compose_cmd->add_option("--out", compose.out, "Output PNG directory or .gctv file")->required();

  struct {
    std::string bg, mask, ckpt, out;
    int steps = kDefaultSamplerSteps;
    std::uint64_t seed = 0;
  } remove;
  auto* remove_cmd = app.add_subcommand("remove", "Erase a masked element");
  remove_cmd->add_option("--bg", remove.bg)->required();
  remove_cmd->add_option("--mask", remove.mask)->required();
  remove_cmd->add_option("--ckpt", remove.ckpt)->required();
  remove_cmd->add_option("--out", remove.out)->required();
  remove_cmd->add_option("--steps", remove.steps)->check(CLI::PositiveNumber);
  remove_cmd->add_option("--seed", remove.seed);

  struct {
    std::string ckpt, corpus, report;
    int steps = kDefaultSamplerSteps;
    int limit = 0;
    std::uint64_t seed = 0;
  } eval;
  auto* eval_cmd = app.add_subcommand("eval", "Reconstruction metrics over a corpus");
  eval_cmd->add_option("--ckpt", eval.ckpt)->required();
  eval_cmd->add_option("--corpus", eval.corpus)->required();
  eval_cmd->add_option("--report", eval.report, "JSON report path")->required();
  eval_cmd->add_option("--steps", eval.steps)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--limit", eval.limit, "Evaluate at most this many samples");
  eval_cmd->add_option("--seed", eval.seed);

  struct {
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string ckpt_dir, ui_dir;
    int steps = kDefaultSamplerSteps;
  } serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP job service");
  serve_cmd->add_option("--port", serve.port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--ckpt-dir", serve.ckpt_dir, "Directory of .gcmp checkpoints");
  serve_cmd->add_option("--ui-dir", serve.ui_dir, "Static files served at /ui");
  serve_cmd->add_option("--steps", serve.steps, "Default sampler steps")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen_cmd) {
      const fs::path out = gen.out.empty() ? DataRoot() / "corpus" : fs::path(gen.out);
      const auto entries = BuildCorpus(gen.n, gen.seed, out, {gen.frames, gen.height, gen.width});
      std::cout << "wrote " << entries.size() << " samples to " << out.string() << "\n";
    } else if (*train_cmd) {
      const TrainConfig cfg = TrainConfig::FromJson(ReadTextFile(train.config));
      const auto entries = ReadManifest(train.corpus);
      std::vector<SampleTriplet> corpus;
      BackgroundRenders backgrounds;
      for (const auto& e : entries) {
        corpus.push_back(LoadSample(e));
        if (cfg.blank_fg_prob > 0) backgrounds.push_back(RenderBackground(e.spec));
      }
      const int log_every = cfg.log_every;
      TrainResult result = Train(cfg, corpus, backgrounds, [&](const LossPoint& p) {
        if (!train.quiet && log_every > 0 && (p.step % log_every == 0 || p.step + 1 == cfg.steps)) {
          std::printf("step %d loss %.5f ema %.5f\n", p.step, p.loss, p.ema);
          std::fflush(stdout);
        }
      });
      SaveCheckpoint(*result.model, {cfg.seed, cfg.steps, cfg.schedule}, train.out);
      const fs::path curve = train.curve.empty() ? fs::path(train.out + ".loss.csv") : fs::path(train.curve);
      WriteTextFile(curve, result.curve.ToCsv());
      std::cout << "checkpoint " << train.out << ", loss curve " << curve.string() << "\n";
    } else if (*ablate_cmd) {
      const TrainConfig cfg = TrainConfig::FromJson(ReadTextFile(ablate.config));
      const auto corpus = LoadCorpus(ablate.corpus);
      std::vector<Variant> variants;
      for (const auto& v : ablate.variants) variants.push_back(ParseVariant(v));
      const AblationReport report = RunAblation(cfg, variants, ablate.seeds, corpus, {},
                                                [](const AblationRun& run, TrainResult&) {
                                                  std::printf("%s seed %llu final ema %.5f\n",
                                                              std::string(VariantName(run.variant)).c_str(),
                                                              static_cast<unsigned long long>(run.seed),
                                                              run.curve.final_ema());
                                                  std::fflush(stdout);
                                                });
      WriteTextFile(ablate.report, report.ToJson());
    } else if (*compose_cmd) {
      const LoadedCheckpoint ckpt = LoadCheckpoint(compose.ckpt);
      ComposeRequest req;
      req.background = ReadVideo(compose.bg);
      req.foreground = ReadVideo(compose.fg);
      if (!compose.fg_mask.empty()) req.foreground_mask = ReadMask(compose.fg_mask);
      req.control = ParseControlSpec(ReadTextFile(compose.control));
      req.steps = compose.steps;
      req.seed = compose.seed;
      const ComposeResult result = Compose(*ckpt.model, ScheduleFor(ckpt), req);
      WriteOutput(result.video, compose.out);
    } else if (*remove_cmd) {
      const LoadedCheckpoint ckpt = LoadCheckpoint(remove.ckpt);
      const ComposeResult result = Remove(*ckpt.model, ScheduleFor(ckpt), ReadVideo(remove.bg),
                                          ReadMask(remove.mask), remove.steps, remove.seed);
      WriteOutput(result.video, remove.out);
    } else if (*eval_cmd) {
      const LoadedCheckpoint ckpt = LoadCheckpoint(eval.ckpt);
      const EvalReport report = Evaluate(*ckpt.model, ScheduleFor(ckpt), ReadManifest(eval.corpus),
                                         eval.steps, eval.seed, eval.limit);
      WriteTextFile(eval.report, report.ToJson());
      std::printf("psnr %.3f  ssim %.4f  adherence %.3f px\n", report.psnr, report.ssim, report.adherence);
    } else if (*serve_cmd) {
      ServiceOptions opts;
      opts.checkpoint_dir = serve.ckpt_dir.empty() ? DataRoot() / "checkpoints" : fs::path(serve.ckpt_dir);
      opts.data_root = DataRoot();
      if (!serve.ui_dir.empty()) opts.ui_dir = serve.ui_dir;
      opts.default_steps = serve.steps;
      Service service(opts);
      const int port = service.Bind(serve.host, serve.port);
      g_service = &service;
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      std::printf("listening on http://%s:%d\n", serve.host.c_str(), port);
      std::fflush(stdout);
      service.Listen();
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return IsUserError(e) ? 1 : 2;
  }
  return 0;
}
