// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "gencomp/error.h"
#include "gencomp/synth.h"
#include "gencomp/train.h"
#include "test_util.h"

using namespace gencomp;
using namespace gencomp::testing;

namespace {

std::vector<SampleTriplet> SmallCorpus(int n, Dims d) {
  std::mt19937_64 rng(21);
  std::vector<SampleTriplet> out;
  for (int i = 0; i < n; ++i) out.push_back(GenerateSample(RandomSceneSpec(rng, d, i)));
  return out;
}

TrainConfig TinyTrain(int steps) {
  TrainConfig cfg;
  cfg.model = TinyConfig();
  cfg.steps = steps;
  cfg.batch_size = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("config validation and json") {
  TrainConfig cfg = TinyTrain(10);
  cfg.model.variant = Variant::kEropeT;
  cfg.blank_fg_prob = 0.25;
  cfg.lr_schedule = LrSchedule::kCosine;
  cfg.warmup_steps = 3;
  const TrainConfig back = TrainConfig::FromJson(cfg.ToJson());
  CHECK(back.ToJson() == cfg.ToJson());
  CHECK(back.model == cfg.model);

  TrainConfig bad = cfg;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  CHECK_THROWS_AS(TrainConfig::FromJson(R"({"ablation":"no_such_variant"})"), ConfigError);
  CHECK(TrainConfig::FromJson(R"({"ablation":"shared_rope"})").model.variant == Variant::kSharedRope);
  CHECK_THROWS_AS(TrainConfig::FromJson(R"({"lr_schedule":"step"})"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::FromJson(R"({"warmup_steps":-1})"), ConfigError);
}

TEST_CASE("learning-rate schedules") {
  CHECK(LrScale(LrSchedule::kConstant, 0, 10, 0) == 1.0);
  CHECK(LrScale(LrSchedule::kConstant, 9, 10, 0) == 1.0);
  // Warmup ramps 1/4, 2/4, 3/4, 4/4.
  for (int s = 0; s < 4; ++s) CHECK(LrScale(LrSchedule::kConstant, s, 10, 4) == doctest::Approx((s + 1) / 4.0));
  CHECK(LrScale(LrSchedule::kCosine, 4, 104, 4) == doctest::Approx(1.0));
  CHECK(LrScale(LrSchedule::kCosine, 54, 104, 4) == doctest::Approx(0.5));
  CHECK(LrScale(LrSchedule::kCosine, 29, 104, 4) == doctest::Approx((1 + std::sqrt(0.5)) / 2));
  CHECK(LrScale(LrSchedule::kCosine, 103, 104, 4) < 1e-3);
  for (int s = 5; s < 104; ++s) {
    CHECK(LrScale(LrSchedule::kCosine, s, 104, 4) < LrScale(LrSchedule::kCosine, s - 1, 104, 4));
  }
}

TEST_CASE("zero steps is rejected before training") {
  const auto corpus = SmallCorpus(1, {4, 16, 16});
  CHECK_THROWS_AS(Train(TinyTrain(0), corpus), ConfigError);
  CHECK_THROWS_AS(Train(TinyTrain(1), std::span<const SampleTriplet>{}), InvalidInput);
}

TEST_CASE("loss curve bookkeeping") {
  LossCurve c;
  c.Append(0, 2.0, 0.5);
  c.Append(1, 1.0, 0.5);
  c.Append(2, 0.0, 0.5);
  CHECK(c.points[0].ema == 2.0);
  CHECK(c.points[1].ema == 1.5);
  CHECK(c.final_ema() == 0.75);
  CHECK_THROWS_AS(c.Append(2, 1.0, 0.5), ContractViolation);
  const LossCurve back = LossCurve::FromCsv(c.ToCsv());
  REQUIRE(back.points.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.points[i].step == c.points[i].step);
    CHECK(back.points[i].loss == c.points[i].loss);
    CHECK(back.points[i].ema == c.points[i].ema);
  }
  CHECK(c.ToCsv().rfind("step,loss,ema\n", 0) == 0);
  CHECK_THROWS_AS(LossCurve::FromCsv("a,b\n"), InvalidInput);
}

TEST_CASE("adam minimizes a quadratic") {
  auto w = ag::MakeLeaf<double>(ag::Matrix<double>::Constant(1, 3, 5.0), true);
  std::vector<NamedParam<double>> params{{"w", w}};
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.grad_clip = 0.0;
  Adam<double> adam(params, cfg);
  ag::Matrix<double> target(1, 3);
  target << 1.0, -2.0, 0.5;
  w->grad = 2.0 * (w->value - target);
  adam.Step();
  // First bias-corrected step moves every coordinate by lr against its gradient sign.
  CHECK(w->value(0, 0) == doctest::Approx(4.9).epsilon(1e-6));
  for (int i = 0; i < 2000; ++i) {
    w->grad = 2.0 * (w->value - target);
    adam.Step();
  }
  CHECK((w->value - target).cwiseAbs().maxCoeff() < 1e-2);

  Adam<double> scaled(params, cfg);
  const double before = w->value(0, 1);
  w->grad = ag::Matrix<double>::Constant(1, 3, -1.0);
  scaled.Step(0.25);
  CHECK(w->value(0, 1) == doctest::Approx(before + 0.025).epsilon(1e-6));
}

TEST_CASE("adam clips the global gradient norm") {
  auto w = ag::MakeLeaf<double>(ag::Matrix<double>::Zero(1, 2), true);
  std::vector<NamedParam<double>> params{{"w", w}};
  AdamConfig cfg;
  cfg.grad_clip = 1.0;
  Adam<double> adam(params, cfg);
  w->grad = ag::Matrix<double>(1, 2);
  w->grad << 30.0, 40.0;
  CHECK(adam.Step() == doctest::Approx(50.0));
}

TEST_CASE("short training run lowers the smoothed loss") {
  const auto corpus = SmallCorpus(4, {4, 16, 16});
  TrainConfig cfg = TinyTrain(200);
  cfg.batch_size = 4;
  const TrainResult r = Train(cfg, corpus);
  REQUIRE(r.curve.points.size() == 200);
  CHECK(r.curve.final_ema() < r.curve.points.front().ema);
  for (std::size_t i = 1; i < r.curve.points.size(); ++i) {
    CHECK(r.curve.points[i].step > r.curve.points[i - 1].step);
  }
}

TEST_CASE("training is deterministic") {
  const auto corpus = SmallCorpus(2, {4, 16, 16});
  const TrainResult a = Train(TinyTrain(6), corpus);
  const TrainResult b = Train(TinyTrain(6), corpus);
  CHECK(a.curve.ToCsv() == b.curve.ToCsv());
  for (std::size_t i = 0; i < a.model->params().size(); ++i) {
    CHECK(a.model->params()[i].var->value == b.model->params()[i].var->value);
  }
  int calls = 0;
  Train(TinyTrain(3), corpus, {}, [&](const LossPoint& p) { CHECK(p.step == calls++); });
  CHECK(calls == 3);
}

TEST_CASE("blank foreground training needs background renders") {
  const auto corpus = SmallCorpus(2, {4, 16, 16});
  TrainConfig cfg = TinyTrain(2);
  cfg.blank_fg_prob = 0.5;
  CHECK_THROWS_AS(Train(cfg, corpus), InvalidInput);
  BackgroundRenders bgs;
  std::mt19937_64 rng(21);
  for (int i = 0; i < 2; ++i) bgs.push_back(RenderBackground(RandomSceneSpec(rng, {4, 16, 16}, i)));
  CHECK(Train(cfg, corpus, bgs).curve.points.size() == 2);
}

TEST_CASE("ablation statistics") {
  const VariantStats a = SummarizeRuns(Variant::kEropeH, {1.0, 2.0, 3.0});
  CHECK(a.mean == doctest::Approx(2.0));
  CHECK(a.stddev == doctest::Approx(1.0));
  CHECK(a.std_error == doctest::Approx(1.0 / std::sqrt(3.0)));
  const VariantStats b = SummarizeRuns(Variant::kSharedRope, {3.0, 4.0, 5.0});
  CHECK(PooledStdError(a, b) == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(LowerByPooledStdError(a, b));
  CHECK_FALSE(LowerByPooledStdError(b, a));
  const VariantStats c = SummarizeRuns(Variant::kSharedRope, {2.0, 2.5, 3.0});
  CHECK_FALSE(LowerByPooledStdError(a, c));
}

TEST_CASE("ablation runner covers every variant and seed") {
  const auto corpus = SmallCorpus(2, {4, 16, 16});
  const std::vector<Variant> variants{Variant::kEropeH, Variant::kSharedRope};
  const std::vector<std::uint64_t> seeds{1, 2};
  int seen = 0;
  const AblationReport rep = RunAblation(TinyTrain(3), variants, seeds, corpus, {},
                                         [&](const AblationRun&, TrainResult& r) {
                                           CHECK(r.model != nullptr);
                                           ++seen;
                                         });
  CHECK(seen == 4);
  CHECK(rep.runs.size() == 4);
  REQUIRE(rep.stats.size() == 2);
  CHECK(rep.stats[0].final_emas.size() == 2);
  CHECK(rep.ToJson().find("shared_rope") != std::string::npos);
}

}  // TEST_SUITE
