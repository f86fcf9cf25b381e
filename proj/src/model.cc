// SPDX-License-Identifier: Apache-2.0
#include "gencomp/model.h"

#include <algorithm>
#include <cmath>

#include "gencomp/error.h"
#include "json.hpp"

namespace gencomp {

using ag::Matrix;
using ag::Tape;
using ag::Var;

namespace {

struct VariantEntry {
  Variant variant;
  std::string_view name;
};

constexpr VariantEntry kVariants[] = {
    {Variant::kFull, "full"},
    {Variant::kSharedRope, "shared_rope"},
    {Variant::kEropeH, "erope_h"},
    {Variant::kEropeW, "erope_w"},
    {Variant::kEropeT, "erope_t"},
    {Variant::kNoBpBranch, "no_bpbranch"},
    {Variant::kXattnInjection, "xattn_injection"},
};

}  // namespace

std::string_view VariantName(Variant v) {
  for (const auto& e : kVariants) {
    if (e.variant == v) return e.name;
  }
  return "unknown";
}

Variant ParseVariant(std::string_view name) {
  for (const auto& e : kVariants) {
    if (e.name == name) return e.variant;
  }
  throw ConfigError("unknown ablation variant: " + std::string(name));
}

std::optional<Axis> ModelConfig::erope_axis() const {
  switch (variant) {
    case Variant::kFull:
    case Variant::kEropeH:
    case Variant::kNoBpBranch:
      return Axis::kH;
    case Variant::kEropeW:
      return Axis::kW;
    case Variant::kEropeT:
      return Axis::kT;
    case Variant::kSharedRope:
    case Variant::kXattnInjection:
      return std::nullopt;
  }
  return std::nullopt;
}

void ModelConfig::Validate() const {
  if (d_model < 1 || heads < 1 || d_model % heads != 0) {
    throw ConfigError("d_model must be a positive multiple of heads");
  }
  if (head_dim() % 2 != 0 || head_dim() < 6) throw ConfigError("head_dim must be even and >= 6");
  if (fusion_depth < 1) throw ConfigError("fusion_depth must be >= 1");
  if (bp_depth < 1) throw ConfigError("bp_depth must be >= 1");
  if (patch.t < 1 || patch.h < 1 || patch.w < 1) throw ConfigError("patch sizes must be >= 1");
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
  if (freq_dim < 2 || freq_dim % 2 != 0) throw ConfigError("freq_dim must be even");
  if (diffusion_steps < 2) throw ConfigError("diffusion_steps must be >= 2");
}

std::string ModelConfig::ToJson() const {
  nlohmann::json j;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["fusion_depth"] = fusion_depth;
  j["bp_depth"] = bp_depth;
  j["patch"] = {patch.t, patch.h, patch.w};
  j["channels"] = channels;
  j["mlp_ratio"] = mlp_ratio;
  j["freq_dim"] = freq_dim;
  j["diffusion_steps"] = diffusion_steps;
  j["variant"] = VariantName(variant);
  return j.dump();
}

ModelConfig ModelConfig::FromJson(std::string_view text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.fusion_depth = j.value("fusion_depth", c.fusion_depth);
    c.bp_depth = j.value("bp_depth", c.bp_depth);
    if (j.contains("patch")) {
      const auto& p = j.at("patch");
      c.patch = {p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()};
    }
    c.channels = j.value("channels", c.channels);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.freq_dim = j.value("freq_dim", c.freq_dim);
    c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
    if (j.contains("variant")) c.variant = ParseVariant(j.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.Validate();
  return c;
}

// --- patch geometry --------------------------------------------------------

PatchLayout::PatchLayout(Dims d, int c, PatchSize p) : dims(d), channels(c), patch(p) {
  auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
  tokens = {ceil_div(d.frames, p.t), ceil_div(d.height, p.h), ceil_div(d.width, p.w)};
}

template <typename T>
Matrix<T> PatchRearrange(const VideoTensor& video, PatchSize patch) {
  const PatchLayout layout(video.dims(), video.channels(), patch);
  const int c = video.channels();
  Matrix<T> out = Matrix<T>::Zero(layout.token_count(), layout.patch_width());
  int n = 0;
  for (int tt = 0; tt < layout.tokens.t; ++tt) {
    for (int th = 0; th < layout.tokens.h; ++th) {
      for (int tw = 0; tw < layout.tokens.w; ++tw, ++n) {
        int j = 0;
        for (int pt = 0; pt < patch.t; ++pt) {
          const int f = tt * patch.t + pt;
          for (int ph = 0; ph < patch.h; ++ph) {
            const int y = th * patch.h + ph;
            for (int pw = 0; pw < patch.w; ++pw, j += c) {
              const int x = tw * patch.w + pw;
              if (f >= video.frames() || y >= video.height() || x >= video.width()) continue;
              for (int k = 0; k < c; ++k) out(n, j + k) = static_cast<T>(video.at(f, y, x, k));
            }
          }
        }
      }
    }
  }
  return out;
}

std::shared_ptr<const std::vector<std::int64_t>> UnpatchIndex(const PatchLayout& layout) {
  const Dims d = layout.dims;
  const int c = layout.channels;
  const PatchSize p = layout.patch;
  auto index = std::make_shared<std::vector<std::int64_t>>(d.pixels() * static_cast<std::size_t>(c));
  const std::int64_t width = layout.patch_width();
  std::size_t i = 0;
  for (int f = 0; f < d.frames; ++f) {
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        const std::int64_t token =
            (static_cast<std::int64_t>(f / p.t) * layout.tokens.h + y / p.h) * layout.tokens.w + x / p.w;
        const std::int64_t j = ((static_cast<std::int64_t>(f % p.t) * p.h + y % p.h) * p.w + x % p.w) * c;
        for (int k = 0; k < c; ++k) (*index)[i++] = token * width + j + k;
      }
    }
  }
  return index;
}

template <typename T>
VideoTensor MatrixToVideo(const Matrix<T>& m, Dims dims, int channels) {
  VideoTensor out(dims, channels);
  if (static_cast<std::size_t>(m.size()) != out.size()) throw InvalidInput("matrix/video size mismatch");
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(m.data()[i]);
  return out;
}

template <typename T>
Matrix<T> VideoToMatrix(const VideoTensor& v) {
  Matrix<T> m(static_cast<Eigen::Index>(v.dims().pixels()), v.channels());
  auto src = v.values();
  for (std::size_t i = 0; i < src.size(); ++i) m.data()[i] = static_cast<T>(src[i]);
  return m;
}

TokenMask DownsampleMask(const MaskVideo& mask, PatchSize patch) {
  const PatchLayout layout(mask.dims(), 1, patch);
  TokenMask out(static_cast<std::size_t>(layout.token_count()), 0);
  for (int f = 0; f < mask.frames(); ++f) {
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!mask.at(f, y, x)) continue;
        const std::size_t token =
            (static_cast<std::size_t>(f / patch.t) * layout.tokens.h + y / patch.h) * layout.tokens.w +
            x / patch.w;
        out[token] = 1;
      }
    }
  }
  return out;
}

// --- blocks ------------------------------------------------------------------

template <typename T>
TokenSequence<T> Patchify(Tape<T>& tape, const VideoTensor& video, PatchSize patch,
                          const LinearParams<T>& proj) {
  const PatchLayout layout(video.dims(), video.channels(), patch);
  if (proj.weight->rows() != layout.patch_width()) {
    throw InvalidInput("patchify: projection expects " + std::to_string(proj.weight->rows()) +
                       " inputs, patch has " + std::to_string(layout.patch_width()));
  }
  auto raw = tape.Constant(PatchRearrange<T>(video, patch));
  return {ag::Linear(tape, raw, proj.weight, proj.bias),
          BuildGrid(layout.tokens.t, layout.tokens.h, layout.tokens.w)};
}

template <typename T>
Var<T> Unpatchify(Tape<T>& tape, const Var<T>& tokens, const PatchLayout& layout) {
  if (tokens->rows() != layout.token_count() || tokens->cols() != layout.patch_width()) {
    throw InvalidInput("unpatchify: token count/width does not match target dims");
  }
  return ag::Gather(tape, tokens, UnpatchIndex(layout),
                    static_cast<Eigen::Index>(layout.dims.pixels()), layout.channels);
}

namespace {

template <typename T>
Var<T> Apply(Tape<T>& tape, const Var<T>& x, const LinearParams<T>& p) {
  return ag::Linear(tape, x, p.weight, p.bias);
}

template <typename T>
Var<T> SelfAttention(Tape<T>& tape, const BlockParams<T>& p, const Var<T>& h,
                     const PositionGrid& grid, const BlockGeometry& geo) {
  const Eigen::Index d = h->cols();
  auto qkv = Apply(tape, h, p.qkv);
  auto angles = std::make_shared<const std::vector<double>>(RotaryAngles(grid, geo.rotary));
  auto q = ag::Rotary(tape, ag::SliceCols(tape, qkv, 0, d), angles, geo.rotary.head_dim);
  auto k = ag::Rotary(tape, ag::SliceCols(tape, qkv, d, d), angles, geo.rotary.head_dim);
  auto v = ag::SliceCols(tape, qkv, 2 * d, d);
  return Apply(tape, ag::Attention(tape, q, k, v, geo.heads), p.proj);
}

template <typename T>
Var<T> Mlp(Tape<T>& tape, const BlockParams<T>& p, const Var<T>& h) {
  return Apply(tape, ag::Gelu(tape, Apply(tape, h, p.fc1)), p.fc2);
}

struct Modulation {
  static constexpr int kShiftAttn = 0, kScaleAttn = 1, kGateAttn = 2;
  static constexpr int kShiftMlp = 3, kScaleMlp = 4, kGateMlp = 5;
};

}  // namespace

template <typename T>
TokenSequence<T> DitBlock(Tape<T>& tape, const BlockParams<T>& p, const TokenSequence<T>& x,
                          const Var<T>& t_embed, const BlockGeometry& geo) {
  const Eigen::Index d = x.tokens->cols();
  if (x.grid.size() != static_cast<std::size_t>(x.tokens->rows())) {
    throw InvalidInput("dit block: grid size does not match token count");
  }
  auto ada = Apply(tape, ag::Silu(tape, t_embed), p.ada);
  auto part = [&](int i) { return ag::SliceCols(tape, ada, i * d, d); };

  auto h = ag::Modulate(tape, ag::LayerNorm(tape, x.tokens), part(Modulation::kShiftAttn),
                        part(Modulation::kScaleAttn));
  auto out = ag::GatedAdd(tape, x.tokens, SelfAttention(tape, p, h, x.grid, geo),
                          part(Modulation::kGateAttn));
  auto h2 = ag::Modulate(tape, ag::LayerNorm(tape, out), part(Modulation::kShiftMlp),
                         part(Modulation::kScaleMlp));
  out = ag::GatedAdd(tape, out, Mlp(tape, p, h2), part(Modulation::kGateMlp));
  return {out, x.grid};
}

template <typename T>
std::pair<TokenSequence<T>, TokenSequence<T>> FusionBlock(
    Tape<T>& tape, const BlockParams<T>& p, const TokenSequence<T>& noisy,
    const TokenSequence<T>& fg, const Var<T>& t_embed, const BlockGeometry& geo,
    std::optional<Axis> extended_axis) {
  if (extended_axis && !fg.grid.empty() &&
      !GridsDisjointOnAxis(noisy.grid, fg.grid, *extended_axis)) {
    throw ContractViolation("fusion block: foreground labels overlap the noisy grid on axis " +
                            std::string(AxisName(*extended_axis)));
  }
  const Eigen::Index n = noisy.tokens->rows();
  const Eigen::Index m = fg.tokens->rows();
  TokenSequence<T> joint{ag::ConcatRows(tape, noisy.tokens, fg.tokens),
                         ConcatGrids(noisy.grid, fg.grid)};
  auto out = DitBlock(tape, p, joint, t_embed, geo);
  return {TokenSequence<T>{ag::SliceRows(tape, out.tokens, 0, n), noisy.grid},
          TokenSequence<T>{ag::SliceRows(tape, out.tokens, n, m), fg.grid}};
}

template <typename T>
TokenSequence<T> CrossAttentionBlock(Tape<T>& tape, const BlockParams<T>& p,
                                     const TokenSequence<T>& x, const Var<T>& context,
                                     const Var<T>& t_embed, const BlockGeometry& geo) {
  if (!p.cross) throw ContractViolation("cross-attention block without cross parameters");
  const Eigen::Index d = x.tokens->cols();
  auto ada = Apply(tape, ag::Silu(tape, t_embed), p.ada);
  auto part = [&](int i) { return ag::SliceCols(tape, ada, i * d, d); };

  auto h = ag::Modulate(tape, ag::LayerNorm(tape, x.tokens), part(Modulation::kShiftAttn),
                        part(Modulation::kScaleAttn));
  auto out = ag::GatedAdd(tape, x.tokens, SelfAttention(tape, p, h, x.grid, geo),
                          part(Modulation::kGateAttn));
  if (context->rows() > 0) {
    auto q = Apply(tape, ag::LayerNorm(tape, out), p.cross->q);
    auto kv = Apply(tape, context, p.cross->kv);
    auto a = ag::Attention(tape, q, ag::SliceCols(tape, kv, 0, d), ag::SliceCols(tape, kv, d, d),
                           geo.heads);
    out = ag::Add(tape, out, Apply(tape, a, p.cross->proj));
  }
  auto h2 = ag::Modulate(tape, ag::LayerNorm(tape, out), part(Modulation::kShiftMlp),
                         part(Modulation::kScaleMlp));
  out = ag::GatedAdd(tape, out, Mlp(tape, p, h2), part(Modulation::kGateMlp));
  return {out, x.grid};
}

template <typename T>
Var<T> InjectBackground(Tape<T>& tape, const Var<T>& noisy, const Var<T>& bp, const TokenMask& mask) {
  if (mask.size() != static_cast<std::size_t>(noisy->rows()) || bp->rows() != noisy->rows() ||
      bp->cols() != noisy->cols()) {
    throw InvalidInput("inject background: length mismatch");
  }
  auto weights = std::make_shared<std::vector<T>>(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) (*weights)[i] = mask[i] ? T(0) : T(1);
  return ag::RowWeightedAdd<T>(tape, noisy, bp, weights);
}

template <typename T>
Var<T> TimestepEmbedding(Tape<T>& tape, int t, int freq_dim, const LinearParams<T>& fc1,
                         const LinearParams<T>& fc2) {
  const int half = freq_dim / 2;
  Matrix<T> sinusoid(1, freq_dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    sinusoid(0, i) = static_cast<T>(std::cos(t * freq));
    sinusoid(0, half + i) = static_cast<T>(std::sin(t * freq));
  }
  auto x = tape.Constant(std::move(sinusoid));
  return Apply(tape, ag::Silu(tape, Apply(tape, x, fc1)), fc2);
}

// --- DiT ---------------------------------------------------------------------

template <typename T>
LinearParams<T> DiT<T>::MakeLinear(std::mt19937_64& rng, const std::string& name, int in, int out,
                                   bool zero) {
  Matrix<T> w = Matrix<T>::Zero(in, out);
  if (!zero) {
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(dist(rng));
  }
  LinearParams<T> p{ag::MakeLeaf<T>(std::move(w), true),
                    ag::MakeLeaf<T>(Matrix<T>::Zero(1, out), true)};
  params_.push_back({name + ".weight", p.weight});
  params_.push_back({name + ".bias", p.bias});
  return p;
}

template <typename T>
BlockParams<T> DiT<T>::MakeBlock(std::mt19937_64& rng, const std::string& name, bool cross) {
  const int d = config_.d_model;
  const int hidden = d * config_.mlp_ratio;
  BlockParams<T> b;
  b.ada = MakeLinear(rng, name + ".ada", d, 6 * d, true);
  b.qkv = MakeLinear(rng, name + ".attn.qkv", d, 3 * d, false);
  b.proj = MakeLinear(rng, name + ".attn.proj", d, d, false);
  b.fc1 = MakeLinear(rng, name + ".mlp.fc1", d, hidden, false);
  b.fc2 = MakeLinear(rng, name + ".mlp.fc2", hidden, d, false);
  if (cross) {
    b.cross = CrossAttentionParams<T>{MakeLinear(rng, name + ".cross.q", d, d, false),
                                      MakeLinear(rng, name + ".cross.kv", d, 2 * d, false),
                                      MakeLinear(rng, name + ".cross.proj", d, d, true)};
  }
  return b;
}

template <typename T>
DiT<T>::DiT(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.Validate();
  geo_ = {config_.heads, MakeRotaryTable(config_.head_dim())};
  std::mt19937_64 rng(seed);
  const int d = config_.d_model;
  const int c = config_.channels;
  const int pv = config_.patch.volume();

  t_fc1_ = MakeLinear(rng, "t_embed.fc1", config_.freq_dim, d, false);
  t_fc2_ = MakeLinear(rng, "t_embed.fc2", d, d, false);
  patch_main_ = MakeLinear(rng, "patchify.main", pv * 2 * c, d, false);
  patch_fg_ = MakeLinear(rng, "patchify.fg", pv * c, d, false);
  for (int i = 0; i < config_.fusion_depth; ++i) {
    fusion_.push_back(MakeBlock(rng, "fusion." + std::to_string(i), !config_.token_fusion()));
  }
  if (config_.has_bpbranch()) {
    const std::size_t before = params_.size();
    BranchParams<T> b;
    b.patch = MakeLinear(rng, "branch.patchify", pv * (c + 1), d, false);
    for (int i = 0; i < config_.bp_depth; ++i) {
      b.blocks.push_back(MakeBlock(rng, "branch.block." + std::to_string(i), false));
    }
    b.head = MakeLinear(rng, "branch.head", d, d, true);
    branch_ = std::move(b);
    for (std::size_t i = before; i < params_.size(); ++i) {
      branch_param_count_ += static_cast<std::size_t>(params_[i].var->value.size());
    }
  }
  final_ada_ = MakeLinear(rng, "final.ada", d, 2 * d, true);
  final_out_ = MakeLinear(rng, "final.out", d, pv * c, true);
}

template <typename T>
std::size_t DiT<T>::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var->value.size());
  return n;
}

template <typename T>
std::size_t DiT<T>::BranchParameterCount() const {
  return branch_param_count_;
}

template <typename T>
Var<T> DiT<T>::FindParam(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.var;
  }
  return nullptr;
}

template <typename T>
void DiT<T>::ZeroGrad() {
  for (auto& p : params_) {
    if (p.var->grad.size() != 0) p.var->grad.setZero();
  }
}

template <typename T>
void DiT<T>::Perturb(double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& p : params_) {
    auto& v = p.var->value;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += static_cast<T>(dist(rng));
  }
}

template <typename T>
Var<T> DiT<T>::Embed(Tape<T>& tape, int t) const {
  return TimestepEmbedding(tape, t, config_.freq_dim, t_fc1_, t_fc2_);
}

template <typename T>
TokenSequence<T> DiT<T>::BranchForward(Tape<T>& tape, const VideoTensor& masked_video,
                                       const MaskVideo& mask, const Var<T>& t_embed) const {
  if (!branch_) throw ContractViolation("model variant has no background branch");
  if (masked_video.dims() != mask.dims()) throw InvalidInput("branch: masked video/mask dims mismatch");
  auto x = Patchify(tape, ConcatChannels(masked_video, MaskAsVideo(mask)), config_.patch,
                    branch_->patch);
  for (const auto& b : branch_->blocks) x = DitBlock(tape, b, x, t_embed, geo_);
  return {Apply(tape, x.tokens, branch_->head), x.grid};
}

template <typename T>
void DiT<T>::Validate(const NoiseInputs& in) const {
  if (!in.z_t || !in.masked_video || !in.mask || !in.fg) throw InvalidInput("missing model input");
  const int c = config_.channels;
  if (in.z_t->channels() != c || in.masked_video->channels() != c || in.fg->channels() != c) {
    throw InvalidInput("model inputs must have " + std::to_string(c) + " channels");
  }
  if (in.z_t->dims() != in.masked_video->dims() || in.z_t->dims() != in.mask->dims()) {
    throw InvalidInput("noisy input, masked video and mask must share dims");
  }
  if (in.z_t->empty() || in.fg->empty()) throw EmptyVideo();
  if (in.t < 0 || in.t >= config_.diffusion_steps) throw InvalidInput("timestep out of range");
}

template <typename T>
Var<T> DiT<T>::Forward(Tape<T>& tape, const NoiseInputs& in) const {
  Validate(in);
  auto c = Embed(tape, in.t);
  auto noisy = Patchify(tape, ConcatChannels(*in.z_t, *in.masked_video), config_.patch, patch_main_);
  auto fg = Patchify(tape, *in.fg, config_.patch, patch_fg_);
  const auto axis = config_.erope_axis();
  if (axis) fg.grid = ExtendGridErope(noisy.grid, fg.grid, *axis);

  Var<T> bp;
  if (branch_) bp = BranchForward(tape, *in.masked_video, *in.mask, c).tokens;
  const TokenMask token_mask = DownsampleMask(*in.mask, config_.patch);

  for (const auto& block : fusion_) {
    if (config_.token_fusion()) {
      std::tie(noisy, fg) = FusionBlock(tape, block, noisy, fg, c, geo_, axis);
    } else {
      noisy = CrossAttentionBlock(tape, block, noisy, fg.tokens, c, geo_);
    }
    if (bp) noisy.tokens = InjectBackground(tape, noisy.tokens, bp, token_mask);
  }

  const Eigen::Index d = config_.d_model;
  auto ada = Apply(tape, ag::Silu(tape, c), final_ada_);
  auto h = ag::Modulate(tape, ag::LayerNorm(tape, noisy.tokens), ag::SliceCols(tape, ada, 0, d),
                        ag::SliceCols(tape, ada, d, d));
  auto out = Apply(tape, h, final_out_);
  return Unpatchify(tape, out, PatchLayout(in.z_t->dims(), config_.channels, config_.patch));
}

template <typename T>
VideoTensor DiT<T>::PredictNoise(const NoiseInputs& in) const {
  Tape<T> tape(false);
  auto out = Forward(tape, in);
  return MatrixToVideo<T>(out->value, in.z_t->dims(), config_.channels);
}

#define GENCOMP_MODEL_INSTANTIATE(T)                                                           \
  template Matrix<T> PatchRearrange<T>(const VideoTensor&, PatchSize);                         \
  template VideoTensor MatrixToVideo<T>(const Matrix<T>&, Dims, int);                          \
  template Matrix<T> VideoToMatrix<T>(const VideoTensor&);                                     \
  template TokenSequence<T> Patchify(Tape<T>&, const VideoTensor&, PatchSize,                  \
                                     const LinearParams<T>&);                                  \
  template Var<T> Unpatchify(Tape<T>&, const Var<T>&, const PatchLayout&);                     \
  template TokenSequence<T> DitBlock(Tape<T>&, const BlockParams<T>&, const TokenSequence<T>&, \
                                     const Var<T>&, const BlockGeometry&);                     \
  template std::pair<TokenSequence<T>, TokenSequence<T>> FusionBlock(                          \
      Tape<T>&, const BlockParams<T>&, const TokenSequence<T>&, const TokenSequence<T>&,       \
      const Var<T>&, const BlockGeometry&, std::optional<Axis>);                               \
  template TokenSequence<T> CrossAttentionBlock(Tape<T>&, const BlockParams<T>&,               \
                                                const TokenSequence<T>&, const Var<T>&,        \
                                                const Var<T>&, const BlockGeometry&);          \
  template Var<T> InjectBackground(Tape<T>&, const Var<T>&, const Var<T>&, const TokenMask&);  \
  template Var<T> TimestepEmbedding(Tape<T>&, int, int, const LinearParams<T>&,                \
                                    const LinearParams<T>&);                                   \
  template class DiT<T>;

GENCOMP_MODEL_INSTANTIATE(float)
GENCOMP_MODEL_INSTANTIATE(double)

}  // namespace gencomp
