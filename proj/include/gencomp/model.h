// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gencomp/autograd.h"
#include "gencomp/rope.h"
#include "gencomp/video.h"

namespace gencomp {

// Wiring variants. kFull is the complete model with ERoPE on h; the others
// are the ablations used by the training runner.
enum class Variant {
  kFull,
  kSharedRope,
  kEropeH,
  kEropeW,
  kEropeT,
  kNoBpBranch,
  kXattnInjection,
};

std::string_view VariantName(Variant v);
Variant ParseVariant(std::string_view name);  // throws ConfigError

struct PatchSize {
  int t = 1;
  int h = 4;
  int w = 4;
  int volume() const { return t * h * w; }
  friend bool operator==(const PatchSize&, const PatchSize&) = default;
};

struct ModelConfig {
  int d_model = 128;
  int heads = 4;
  int fusion_depth = 4;
  int bp_depth = 2;
  PatchSize patch;
  int channels = 3;
  int mlp_ratio = 4;
  int freq_dim = 64;
  int diffusion_steps = 100;
  Variant variant = Variant::kFull;

  int head_dim() const { return d_model / heads; }
  // Axis whose foreground labels get extended; empty for shared labels and
  // for cross-attention injection (which uses no joint grid).
  std::optional<Axis> erope_axis() const;
  bool has_bpbranch() const { return variant != Variant::kNoBpBranch; }
  bool token_fusion() const { return variant != Variant::kXattnInjection; }

  void Validate() const;  // throws ConfigError
  std::string ToJson() const;
  static ModelConfig FromJson(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Token-space geometry of a video under a patch size; dims are padded up to
// a multiple of the patch with zeros.
struct PatchLayout {
  Dims dims;
  int channels = 0;
  PatchSize patch;
  GridExtents tokens;

  PatchLayout(Dims d, int c, PatchSize p);
  int token_count() const { return tokens.t * tokens.h * tokens.w; }
  int patch_width() const { return patch.volume() * channels; }
};

// Rows are tokens in BuildGrid order; columns are (pt, ph, pw, c).
template <typename T>
ag::Matrix<T> PatchRearrange(const VideoTensor& video, PatchSize patch);

// Inverse of PatchRearrange expressed as a gather index from a
// tokens x patch_width matrix to a (F*H*W) x C matrix, dropping padding.
std::shared_ptr<const std::vector<std::int64_t>> UnpatchIndex(const PatchLayout& layout);

template <typename T>
VideoTensor MatrixToVideo(const ag::Matrix<T>& m, Dims dims, int channels);
template <typename T>
ag::Matrix<T> VideoToMatrix(const VideoTensor& v);

// Per-token {0,1}; 1 iff any pixel inside the token's patch is masked.
using TokenMask = std::vector<std::uint8_t>;
TokenMask DownsampleMask(const MaskVideo& mask, PatchSize patch);

template <typename T>
struct TokenSequence {
  ag::Var<T> tokens;
  PositionGrid grid;
  Eigen::Index size() const { return tokens->rows(); }
};

template <typename T>
struct LinearParams {
  ag::Var<T> weight;  // in x out
  ag::Var<T> bias;    // 1 x out
};

template <typename T>
struct CrossAttentionParams {
  LinearParams<T> q;
  LinearParams<T> kv;
  LinearParams<T> proj;
};

// adaLN-zero DiT block: `ada` emits (shift, scale, gate) for the attention
// and MLP sublayers from the timestep embedding and starts at zero.
template <typename T>
struct BlockParams {
  LinearParams<T> ada;
  LinearParams<T> qkv;
  LinearParams<T> proj;
  LinearParams<T> fc1;
  LinearParams<T> fc2;
  std::optional<CrossAttentionParams<T>> cross;
};

template <typename T>
struct BranchParams {
  LinearParams<T> patch;
  std::vector<BlockParams<T>> blocks;
  LinearParams<T> head;  // zero-initialized
};

template <typename T>
struct NamedParam {
  std::string name;
  ag::Var<T> var;
};

struct BlockGeometry {
  int heads = 0;
  RotaryTable rotary;
};

// --- building blocks ---------------------------------------------------------

template <typename T>
TokenSequence<T> Patchify(ag::Tape<T>& tape, const VideoTensor& video, PatchSize patch,
                          const LinearParams<T>& proj);

// Linear head output (tokens x patch_width) back to pixels, cropped to dims.
template <typename T>
ag::Var<T> Unpatchify(ag::Tape<T>& tape, const ag::Var<T>& tokens, const PatchLayout& layout);

template <typename T>
TokenSequence<T> DitBlock(ag::Tape<T>& tape, const BlockParams<T>& p, const TokenSequence<T>& x,
                          const ag::Var<T>& t_embed, const BlockGeometry& geo);

// Self-attention over the token-wise concatenation; returns the two parts.
// With `extended_axis` set, the grids must not share a label on that axis.
template <typename T>
std::pair<TokenSequence<T>, TokenSequence<T>> FusionBlock(
    ag::Tape<T>& tape, const BlockParams<T>& p, const TokenSequence<T>& noisy,
    const TokenSequence<T>& fg, const ag::Var<T>& t_embed, const BlockGeometry& geo,
    std::optional<Axis> extended_axis);

// Standard block plus a cross-attention sublayer reading `context`.
template <typename T>
TokenSequence<T> CrossAttentionBlock(ag::Tape<T>& tape, const BlockParams<T>& p,
                                     const TokenSequence<T>& x, const ag::Var<T>& context,
                                     const ag::Var<T>& t_embed, const BlockGeometry& geo);

// noisy + (1 - m) * bp per token.
template <typename T>
ag::Var<T> InjectBackground(ag::Tape<T>& tape, const ag::Var<T>& noisy, const ag::Var<T>& bp,
                            const TokenMask& mask);

template <typename T>
ag::Var<T> TimestepEmbedding(ag::Tape<T>& tape, int t, int freq_dim, const LinearParams<T>& fc1,
                             const LinearParams<T>& fc2);

// --- full network --------------------------------------------------------

struct NoiseInputs {
  const VideoTensor* z_t = nullptr;
  const VideoTensor* masked_video = nullptr;
  const MaskVideo* mask = nullptr;
  const VideoTensor* fg = nullptr;
  int t = 0;
};

template <typename T>
class DiT {
 public:
  DiT(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::size_t ParameterCount() const;
  std::size_t BranchParameterCount() const;
  ag::Var<T> FindParam(std::string_view name) const;

  // Predicted noise as a (F*H*W) x C node.
  ag::Var<T> Forward(ag::Tape<T>& tape, const NoiseInputs& in) const;
  VideoTensor PredictNoise(const NoiseInputs& in) const;

  // Background-branch tokens (after the zero-initialized head).
  TokenSequence<T> BranchForward(ag::Tape<T>& tape, const VideoTensor& masked_video,
                                 const MaskVideo& mask, const ag::Var<T>& t_embed) const;
  ag::Var<T> Embed(ag::Tape<T>& tape, int t) const;

  const std::vector<BlockParams<T>>& fusion_blocks() const { return fusion_; }
  const std::optional<BranchParams<T>>& branch() const { return branch_; }
  const BlockGeometry& geometry() const { return geo_; }

  void ZeroGrad();
  // Gaussian noise on every parameter, including zero-initialized ones.
  void Perturb(double stddev, std::uint64_t seed);

  template <typename U>
  void CopyParamsFrom(const DiT<U>& other);

 private:
  LinearParams<T> MakeLinear(std::mt19937_64& rng, const std::string& name, int in, int out,
                             bool zero);
  BlockParams<T> MakeBlock(std::mt19937_64& rng, const std::string& name, bool cross);
  void Validate(const NoiseInputs& in) const;

  ModelConfig config_;
  std::uint64_t seed_;
  BlockGeometry geo_;
  std::vector<NamedParam<T>> params_;
  std::size_t branch_param_count_ = 0;

  LinearParams<T> t_fc1_, t_fc2_;
  LinearParams<T> patch_main_, patch_fg_;
  std::vector<BlockParams<T>> fusion_;
  std::optional<BranchParams<T>> branch_;
  LinearParams<T> final_ada_, final_out_;
};

template <typename T>
template <typename U>
void DiT<T>::CopyParamsFrom(const DiT<U>& other) {
  const auto& src = other.params();
  if (src.size() != params_.size()) throw std::runtime_error("parameter layout mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    params_[i].var->value = src[i].var->value.template cast<T>();
  }
}

}  // namespace gencomp
