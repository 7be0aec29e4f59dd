// Copyright 2026 The crossdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Learnable components: item and position tables, the per-domain encoders,
// guidance fusion and the guidance-conditioned denoiser.

#ifndef CROSSDIFF_NETWORK_HPP_
#define CROSSDIFF_NETWORK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crossdiff/autograd.hpp"
#include "crossdiff/dataset.hpp"
#include "crossdiff/matrix.hpp"

namespace crossdiff {

/// Ablation variants, from the bare diffusion recommender to the full model.
enum class Variant { kDiff, kDiffDE, kDiffDEG, kDiffDETriCL, kFull };

inline constexpr Variant kAllVariants[] = {Variant::kDiff, Variant::kDiffDE,
                                           Variant::kDiffDEG,
                                           Variant::kDiffDETriCL, Variant::kFull};

const char* variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// What the denoiser cross-attends to.
enum class GuidanceMode {
  kSharedRows,    // every row of the shared sequence encoder
  kSharedPooled,  // last row of the shared sequence encoder
  kFused,         // interleaved domain-encoder rows after projection
};

/// Which vector feeds the single-domain recommendation terms and is added
/// to x0 at scoring time.
enum class SingleView {
  kDomain,  // last row of the target domain's own encoder
  kFused,   // last fused guidance row
};

const char* single_view_name(SingleView v);
SingleView parse_single_view(std::string_view name);

struct ModelConfig {
  int d = 256;
  int n_heads = 1;
  int enc_layers = 2;
  int dec_layers = 1;
  int max_seq_len = 15;
  int T = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  /// Item-table rows including the two reserved tokens.
  int vocab_x = 0;
  int vocab_y = 0;
  Variant variant = Variant::kFull;
  SingleView single_view = SingleView::kDomain;

  void validate() const;
  int vocab(Domain dm) const { return dm == Domain::X ? vocab_x : vocab_y; }
  bool domain_encoders() const { return variant != Variant::kDiff; }
  bool shared_encoder() const {
    return variant == Variant::kDiff || variant == Variant::kDiffDE ||
           variant == Variant::kDiffDETriCL;
  }
  bool tri_cl() const {
    return variant == Variant::kDiffDETriCL || variant == Variant::kFull;
  }
  GuidanceMode guidance() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Parameter ids of one attention + MLP block.
struct BlockIds {
  int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

struct ParameterSet {
  ModelConfig cfg;
  std::vector<std::string> names;
  std::vector<Matrix> values;
  std::vector<uint8_t> decay;

  int e_x = -1, e_y = -1, pos = -1, step = -1;
  int fuse_w = -1, fuse_b = -1;
  std::vector<BlockIds> enc_x, enc_y, enc_c, enc_s, dec;

  int size() const { return static_cast<int>(values.size()); }
  int table(Domain dm) const { return dm == Domain::X ? e_x : e_y; }
  const std::vector<BlockIds>& encoder(Domain dm) const {
    return dm == Domain::X ? enc_x : enc_y;
  }
  std::optional<int> find(std::string_view name) const;
  size_t scalar_count() const;
  /// Layer-norm parameters and biases are not decayed.
  bool decays(int index) const { return decay.at(index) != 0; }
  bool operator==(const ParameterSet& o) const {
    return cfg == o.cfg && names == o.names && values == o.values;
  }
};

/// Embeddings ~ N(0, 0.02^2) with a zero padding row, linear weights Xavier
/// uniform, the fusion projection identity, layer norms (1, 0), biases 0.
ParameterSet init_parameters(const ModelConfig& cfg, uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Differentiable building blocks

/// Rows E_{domain_i}[item_i].
Var item_rows(Tape& t, const ParameterSet& p, std::span<const Token> tokens);

/// Rows E_{domain_i}[item_i] + Pos[i] for i < tokens.size().
Var embed_tokens(Tape& t, const ParameterSet& p, std::span<const Token> tokens);

/// Pre-norm blocks: h = x + Attn(LN(x), kv), out = h + MLP(LN(h)). An
/// invalid `memory` means self-attention.
Var run_blocks(Tape& t, const ParameterSet& p, std::span<const BlockIds> blocks,
               Var x, const AttentionMask& mask, Var memory = Var{});

/// Row-wise linear layer y = x W + b.
Var linear(Tape& t, const ParameterSet& p, Var x, int w, int b);

/// Encodings of one user's history, all on one tape.
struct SequenceEncoding {
  DomainViews views;
  int length = 0;
  /// Per-domain encoder rows; a single padding row when the domain is empty.
  Var g_x, g_y;
  /// Domain encoders applied to a lone padding token (prefixes where a
  /// domain has not occurred yet).
  Var pad_x, pad_y;
  /// Fused guidance rows in s_c order.
  Var g_d;
  /// Shared encoder rows over s_c.
  Var shared;

  Var g(Domain dm) const { return dm == Domain::X ? g_x : g_y; }
  Var pad(Domain dm) const { return dm == Domain::X ? pad_x : pad_y; }
};

/// `need_fused` forces g_d even when the variant does not guide with it.
SequenceEncoding encode_history(Tape& t, const ParameterSet& p,
                                const UserSequence& seq, bool need_fused);

/// Row of the single-domain view used for a prefix of k items and domain dm:
/// the encoder row of the last domain-dm item among the first k, the padding
/// encoding if there is none, or the shared row k - 1 without domain encoders.
struct ViewRef {
  Var source;
  int row = 0;
};
ViewRef single_view_ref(const ParameterSet& p, const SequenceEncoding& enc,
                        Domain dm, int k);

/// Guidance rows and the cross-attention mask for queries that predict the
/// items after prefixes of lengths prefix_lengths[i].
struct GuidanceContext {
  Var rows;
  AttentionMask mask;
};
GuidanceContext guidance_for_prefixes(const ParameterSet& p,
                                      const SequenceEncoding& enc,
                                      std::span<const int> prefix_lengths);

/// Batched denoiser: row i of x_t is noised at step steps[i]; the result is
/// the x0 prediction per row.
Var denoise_rows(Tape& t, const ParameterSet& p, Var x_t,
                 std::span<const int> steps, const GuidanceContext& guide);

/// Encoder_c over a whole (augmented) sequence; returns its last row (1 x d).
Var encode_sequence_c(Tape& t, const ParameterSet& p, const UserSequence& seq);

// ---------------------------------------------------------------------------
// Plain forward passes

/// Rows E_domain[item_i] + Pos[i]; the tokens must all be in `domain`.
Matrix embed_sequence(const UserSequence& seq, Domain domain,
                      const ParameterSet& p);

/// Causal per-domain encoder; positions with valid[i] == 0 are never
/// attended. An empty `valid` marks every row valid.
Matrix encode_domain(const Matrix& h, Domain which, const ParameterSet& p,
                     std::span<const uint8_t> valid = {});

/// Interleaves encoder rows back into s_c order and applies the projection.
Matrix fuse_guidance(const Matrix& g_x, const Matrix& g_y,
                     const DomainViews& views, const ParameterSet& p);

struct DenoiseOutput {
  std::vector<double> x0_hat;
  std::vector<double> h_c;
};

DenoiseOutput denoise(std::span<const double> x_t, int t, const Matrix& g_d,
                      const ParameterSet& p);

std::vector<double> encode_aug(const UserSequence& s_aug, const ParameterSet& p);

struct GuidanceBundle {
  Matrix g_x;
  Matrix g_y;
  Matrix g_d;  // fused rows; empty for variants without domain encoders
  std::vector<double> g_x_last;
  std::vector<double> g_y_last;
  std::vector<double> g_d_pooled;
  /// What the denoiser attends to and the single view added at scoring time.
  Matrix denoiser_rows;
  std::vector<double> view_x;
  std::vector<double> view_y;

  const std::vector<double>& view(Domain dm) const {
    return dm == Domain::X ? view_x : view_y;
  }
};

GuidanceBundle compute_guidance(const UserSequence& history,
                                const ParameterSet& p);

}  // namespace crossdiff

#endif  // CROSSDIFF_NETWORK_HPP_
