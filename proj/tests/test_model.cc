// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gencomp/error.h"
#include "gencomp/model.h"
#include "test_util.h"

using namespace gencomp;
using namespace gencomp::testing;
using ag::Matrix;
using ag::Tape;

namespace {

Matrix<double> RandomMatrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

TokenSequence<double> RandomTokens(Tape<double>& tape, int t, int h, int w, int d, std::uint64_t seed) {
  return {tape.Constant(RandomMatrix(t * h * w, d, seed)), BuildGrid(t, h, w)};
}

double MaxDiff(const Matrix<double>& a, const Matrix<double>& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

struct Inputs {
  VideoTensor z_t, masked;
  MaskVideo mask;
  VideoTensor fg;
  NoiseInputs view(int t) const { return {&z_t, &masked, &mask, &fg, t}; }
};

Inputs MakeInputs(Dims d, Dims fg, std::uint64_t seed) {
  Inputs in;
  in.z_t = RandomVideo(d, 3, seed, -1.0f, 1.0f);
  in.mask = RandomMask(d, seed + 1, 0.3);
  in.masked = MakeMaskedVideo(RandomVideo(d, 3, seed + 2), in.mask);
  in.fg = RandomVideo(fg, 3, seed + 3);
  return in;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::kFull, Variant::kSharedRope, Variant::kEropeH, Variant::kEropeW,
                    Variant::kEropeT, Variant::kNoBpBranch, Variant::kXattnInjection}) {
    CHECK(ParseVariant(VariantName(v)) == v);
  }
  CHECK_THROWS_AS(ParseVariant("erope_z"), ConfigError);
}

TEST_CASE("model config json and validation") {
  ModelConfig c = TinyConfig(Variant::kEropeW);
  c.patch = {2, 4, 2};
  CHECK(ModelConfig::FromJson(c.ToJson()) == c);
  ModelConfig bad = c;
  bad.heads = 5;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad = c;
  bad.bp_depth = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad = c;
  bad.fusion_depth = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  CHECK_THROWS_AS(ModelConfig::FromJson(R"({"variant":"nope"})"), ConfigError);
}

TEST_CASE("patch layout and rearrangement") {
  const PatchLayout layout({8, 32, 32}, 3, {1, 4, 4});
  CHECK(layout.token_count() == 512);
  CHECK(layout.patch_width() == 48);
  const PatchLayout padded({3, 30, 31}, 3, {2, 4, 4});
  CHECK(padded.tokens == GridExtents{2, 8, 8});

  const VideoTensor v = RandomVideo({3, 9, 6}, 2, 1);
  const auto m = PatchRearrange<double>(v, {2, 4, 4});
  // Token (1, 2, 1) holds frame 2, rows 8.., cols 4..; column layout (pt, ph, pw, c).
  const int token = (1 * 3 + 2) * 2 + 1;
  CHECK(m(token, ((0 * 4 + 0) * 4 + 1) * 2 + 1) == doctest::Approx(v.at(2, 8, 5, 1)));
  CHECK(m(token, ((1 * 4 + 0) * 4 + 0) * 2) == 0.0);  // frame 3 is padding
}

TEST_CASE("patchify token count and zero input") {
  DiT<double> model(TinyConfig(), 1);
  Tape<double> tape(false);
  const LinearParams<double> proj{ag::MakeLeaf<double>(RandomMatrix(48, 24, 2), false),
                                  ag::MakeLeaf<double>(Matrix<double>::Zero(1, 24), false)};
  const auto tokens = Patchify(tape, VideoTensor({8, 32, 32}, 3), {1, 4, 4}, proj);
  CHECK(tokens.size() == 512);
  CHECK(tokens.grid.extents == GridExtents{8, 8, 8});
  CHECK(tokens.tokens->value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("patchify and unpatchify with orthonormal projections round trip") {
  const int d = 128;
  const Dims dims{3, 30, 26};
  const PatchSize patch{2, 4, 4};
  const PatchLayout layout(dims, 3, patch);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(RandomMatrix(d, d, 3)));
  const Eigen::MatrixXd q = qr.householderQ();
  const Matrix<double> w = q.topRows(layout.patch_width());  // orthonormal rows
  const LinearParams<double> proj{ag::MakeLeaf<double>(w, false),
                                  ag::MakeLeaf<double>(Matrix<double>::Zero(1, d), false)};
  const VideoTensor v = RandomVideo(dims, 3, 4);
  Tape<double> tape(false);
  const auto tokens = Patchify(tape, v, patch, proj);
  const auto back = tape.Constant(tokens.tokens->value * w.transpose());
  const auto pixels = Unpatchify(tape, back, layout);
  const VideoTensor out = MatrixToVideo<double>(pixels->value, dims, 3);
  CHECK(MaxAbsDiff(out, v) <= 1e-4);
}

TEST_CASE("unpatchify locality and shape checks") {
  const PatchLayout layout({2, 8, 8}, 3, {1, 4, 4});
  Tape<double> tape(false);
  CHECK(Unpatchify(tape, tape.Constant(Matrix<double>::Zero(8, 48)), layout)->value.cwiseAbs().maxCoeff() == 0.0);
  Matrix<double> one = Matrix<double>::Zero(8, 48);
  one.row(5).setOnes();  // frame 1, token row 0, token col 1
  const VideoTensor v = MatrixToVideo<double>(Unpatchify(tape, tape.Constant(one), layout)->value, {2, 8, 8}, 3);
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const bool inside = f == 1 && y < 4 && x >= 4;
        CHECK(v.at(f, y, x, 2) == (inside ? 1.0f : 0.0f));
      }
  CHECK_THROWS_AS(Unpatchify(tape, tape.Constant(Matrix<double>::Zero(7, 48)), layout), InvalidInput);
}

TEST_CASE("downsample mask") {
  const Dims d{2, 8, 12};
  const PatchSize p{1, 4, 4};
  const TokenMask none = DownsampleMask(MaskVideo(d), p);
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  const TokenMask all = DownsampleMask(MaskVideo(d, 1), p);
  CHECK(std::count(all.begin(), all.end(), 1) == static_cast<long>(all.size()));
  MaskVideo one(d);
  one.set(1, 5, 9, true);
  const TokenMask single = DownsampleMask(one, p);
  CHECK(std::count(single.begin(), single.end(), 1) == 1);
  CHECK(single[(1 * 2 + 5 / 4) * 3 + 9 / 4] == 1);
}

TEST_CASE("dit block at initialization is the identity") {
  DiT<double> model(TinyConfig(), 2);
  Tape<double> tape(false);
  const auto x = RandomTokens(tape, 2, 3, 3, 24, 5);
  const auto c = model.Embed(tape, 4);
  const auto out = DitBlock(tape, model.fusion_blocks()[0], x, c, model.geometry());
  CHECK(out.tokens->value == x.tokens->value);
  const auto [noisy, fg] = FusionBlock(tape, model.fusion_blocks()[1], x, RandomTokens(tape, 1, 2, 2, 24, 6),
                                       c, model.geometry(), std::nullopt);
  CHECK(noisy.tokens->value == x.tokens->value);
}

TEST_CASE("dit block is equivariant to token permutation") {
  DiT<double> model(TinyConfig(), 3);
  model.Perturb(0.05, 9);
  Tape<double> tape(false);
  const auto x = RandomTokens(tape, 2, 3, 4, 24, 7);
  const auto c = model.Embed(tape, 3);
  const auto out = DitBlock(tape, model.fusion_blocks()[0], x, c, model.geometry());
  CHECK(out.tokens->rows() == x.tokens->rows());
  CHECK(out.tokens->cols() == x.tokens->cols());

  std::vector<int> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  Matrix<double> px(x.size(), 24);
  PositionGrid pg;
  pg.extents = x.grid.extents;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    px.row(static_cast<Eigen::Index>(i)) = x.tokens->value.row(perm[i]);
    pg.coords.push_back(x.grid.coords[perm[i]]);
  }
  const auto pout = DitBlock(tape, model.fusion_blocks()[0], {tape.Constant(px), pg}, c, model.geometry());
  double worst = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    worst = std::max(worst, (pout.tokens->value.row(static_cast<Eigen::Index>(i)) -
                             out.tokens->value.row(perm[i])).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("fusion block") {
  DiT<double> model(TinyConfig(), 4);
  model.Perturb(0.05, 10);
  Tape<double> tape(false);
  const auto& block = model.fusion_blocks()[0];
  const auto c = model.Embed(tape, 7);
  const auto noisy = RandomTokens(tape, 2, 3, 3, 24, 11);

  SUBCASE("no foreground tokens matches the plain block") {
    TokenSequence<double> empty{tape.Constant(Matrix<double>(0, 24)), PositionGrid{}};
    const auto [n2, f2] = FusionBlock(tape, block, noisy, empty, c, model.geometry(), Axis::kH);
    const auto plain = DitBlock(tape, block, noisy, c, model.geometry());
    CHECK(MaxDiff(n2.tokens->value, plain.tokens->value) <= 1e-12);
    CHECK(f2.size() == 0);
  }
  SUBCASE("shuffling foreground tokens with their labels leaves the noisy part unchanged") {
    auto fg = RandomTokens(tape, 2, 2, 3, 24, 12);
    fg.grid = ExtendGridErope(noisy.grid, fg.grid, Axis::kH);
    const auto [n1, f1] = FusionBlock(tape, block, noisy, fg, c, model.geometry(), Axis::kH);
    CHECK(n1.size() == noisy.size());
    CHECK(f1.size() == fg.size());

    std::vector<int> perm(fg.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
    Matrix<double> pf(fg.size(), 24);
    PositionGrid pg;
    pg.extents = fg.grid.extents;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pf.row(static_cast<Eigen::Index>(i)) = fg.tokens->value.row(perm[i]);
      pg.coords.push_back(fg.grid.coords[perm[i]]);
    }
    const auto [n2, f2] = FusionBlock(tape, block, noisy, {tape.Constant(pf), pg}, c, model.geometry(), Axis::kH);
    CHECK(MaxDiff(n1.tokens->value, n2.tokens->value) <= 1e-5);
  }
  SUBCASE("overlapping labels on the extended axis are rejected") {
    const auto fg = RandomTokens(tape, 2, 2, 3, 24, 12);
    CHECK_THROWS_AS(FusionBlock(tape, block, noisy, fg, c, model.geometry(), Axis::kH), ContractViolation);
    CHECK_NOTHROW(FusionBlock(tape, block, noisy, fg, c, model.geometry(), std::nullopt));
  }
}

TEST_CASE("background injection") {
  Tape<double> tape(false);
  const auto noisy = tape.Constant(RandomMatrix(6, 5, 1));
  const auto bp = tape.Constant(RandomMatrix(6, 5, 2));
  CHECK(InjectBackground(tape, noisy, bp, TokenMask(6, 1))->value == noisy->value);
  CHECK(InjectBackground(tape, noisy, bp, TokenMask(6, 0))->value == noisy->value + bp->value);
  const TokenMask m{1, 0, 0, 1, 0, 1};
  const auto out = InjectBackground(tape, noisy, bp, m);
  for (int r = 0; r < 6; ++r)
    for (int k = 0; k < 5; ++k)
      CHECK(out->value(r, k) == noisy->value(r, k) + (m[r] ? 0.0 : bp->value(r, k)));
  CHECK_THROWS_AS(InjectBackground(tape, noisy, bp, TokenMask(5, 0)), InvalidInput);
}

TEST_CASE("background branch") {
  DiT<double> model(TinyConfig(), 5);
  Tape<double> tape(false);
  const Dims d{2, 8, 8};
  const auto c = model.Embed(tape, 2);
  const auto zero = model.BranchForward(tape, VideoTensor(d, 3), MaskVideo(d), c);
  CHECK(zero.size() == PatchLayout(d, 3, model.config().patch).token_count());
  CHECK(zero.tokens->value.cwiseAbs().maxCoeff() == 0.0);

  model.Perturb(0.05, 3);
  const VideoTensor masked = RandomVideo(d, 3, 1);
  const MaskVideo mask = RandomMask(d, 2);
  const auto a = model.BranchForward(tape, masked, mask, c);
  const auto b = model.BranchForward(tape, masked, mask, c);
  CHECK(a.tokens->value == b.tokens->value);
  CHECK(a.grid.coords == BuildGrid(2, 2, 2).coords);
  CHECK_THROWS_AS(model.BranchForward(tape, masked, MaskVideo(Dims{2, 8, 4}), c), InvalidInput);
}

TEST_CASE("predict noise shapes for every variant") {
  const Inputs in = MakeInputs({4, 16, 12}, {3, 8, 20}, 7);
  for (Variant v : {Variant::kFull, Variant::kSharedRope, Variant::kEropeH, Variant::kEropeW,
                    Variant::kEropeT, Variant::kNoBpBranch, Variant::kXattnInjection}) {
    ModelConfig cfg = TinyConfig(v);
    cfg.patch = {2, 4, 4};
    DiT<float> model(cfg, 3);
    model.Perturb(0.05, 4);
    const VideoTensor eps = model.PredictNoise(in.view(5));
    CHECK(eps.dims() == in.z_t.dims());
    CHECK(eps.channels() == 3);
  }
}

TEST_CASE("fresh model predicts zero and leaves noisy tokens untouched") {
  DiT<double> model(TinyConfig(), 6);
  const Inputs in = MakeInputs({2, 8, 8}, {2, 8, 8}, 8);
  const VideoTensor eps = model.PredictNoise(in.view(3));
  for (float v : eps.values()) CHECK(v == 0.0f);
}

TEST_CASE("fully masked clip ignores the background branch") {
  DiT<double> model(TinyConfig(), 7);
  model.Perturb(0.05, 1);
  Inputs in = MakeInputs({2, 8, 8}, {2, 8, 8}, 9);
  in.mask = MaskVideo(in.mask.dims(), 1);
  in.masked = MakeMaskedVideo(in.masked, in.mask);
  const VideoTensor before = model.PredictNoise(in.view(4));
  for (const auto& p : model.params()) {
    if (p.name.rfind("branch.", 0) == 0) p.var->value.array() += 0.3;
  }
  CHECK(model.PredictNoise(in.view(4)) == before);
}

TEST_CASE("forward pass is deterministic") {
  DiT<float> a(TinyConfig(), 11), b(TinyConfig(), 11);
  a.Perturb(0.05, 2);
  b.Perturb(0.05, 2);
  const Inputs in = MakeInputs({2, 8, 8}, {2, 8, 8}, 10);
  const VideoTensor x = a.PredictNoise(in.view(1));
  CHECK(x == a.PredictNoise(in.view(1)));
  CHECK(x == b.PredictNoise(in.view(1)));
}

TEST_CASE("variant parameter accounting") {
  const ModelConfig base = TinyConfig();
  const DiT<float> full(base, 1);
  auto count = [&](Variant v) {
    ModelConfig c = base;
    c.variant = v;
    return DiT<float>(c, 1).ParameterCount();
  };
  CHECK(count(Variant::kSharedRope) == full.ParameterCount());
  CHECK(count(Variant::kEropeW) == full.ParameterCount());
  CHECK(count(Variant::kEropeT) == full.ParameterCount());
  CHECK(full.BranchParameterCount() > 0);
  CHECK(count(Variant::kNoBpBranch) == full.ParameterCount() - full.BranchParameterCount());
  CHECK(count(Variant::kXattnInjection) > full.ParameterCount());

  ModelConfig shared = base;
  shared.variant = Variant::kSharedRope;
  CHECK(DiT<float>(shared, 1).geometry().rotary == full.geometry().rotary);
}

TEST_CASE("bad inputs are rejected") {
  DiT<float> model(TinyConfig(), 1);
  Inputs in = MakeInputs({2, 8, 8}, {2, 8, 8}, 3);
  CHECK_THROWS_AS(model.PredictNoise(in.view(10)), InvalidInput);
  CHECK_THROWS_AS(model.PredictNoise(in.view(-1)), InvalidInput);
  in.mask = MaskVideo(Dims{2, 8, 4});
  CHECK_THROWS_AS(model.PredictNoise(in.view(1)), InvalidInput);
}

TEST_CASE("small float64 gradient check") {
  DiT<double> model(TinyConfig(), 12);
  model.Perturb(0.1, 5);
  const Inputs in = MakeInputs({2, 8, 8}, {2, 4, 8}, 11);
  const Matrix<double> target = RandomMatrix(2 * 8 * 8, 3, 13);
  auto loss = [&] {
    Tape<double> t(false);
    return ag::MeanSquaredError(t, model.Forward(t, in.view(6)), target)->value(0, 0);
  };
  model.ZeroGrad();
  {
    Tape<double> t;
    t.Backward(ag::MeanSquaredError(t, model.Forward(t, in.view(6)), target));
  }
  std::mt19937_64 rng(1);
  int checked = 0;
  for (const auto& p : model.params()) {
    std::uniform_int_distribution<Eigen::Index> pick(0, p.var->value.size() - 1);
    const Eigen::Index i = pick(rng);
    double& w = p.var->value.data()[i];
    const double saved = w, h = 1e-5;
    w = saved + h;
    const double up = loss();
    w = saved - h;
    const double down = loss();
    w = saved;
    const double num = (up - down) / (2 * h);
    const double ana = p.var->grad.size() ? p.var->grad.data()[i] : 0.0;
    CHECK_MESSAGE(std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8}) <= 1e-3, p.name);
    ++checked;
  }
  CHECK(checked == static_cast<int>(model.params().size()));
}

TEST_CASE("parameters copy across precisions") {
  DiT<float> f(TinyConfig(), 1);
  f.Perturb(0.1, 1);
  DiT<double> d(TinyConfig(), 2);
  d.CopyParamsFrom(f);
  for (std::size_t i = 0; i < f.params().size(); ++i) {
    CHECK(d.params()[i].var->value == f.params()[i].var->value.cast<double>());
  }
}

}  // TEST_SUITE
