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

#include "crossdiff/network.hpp"

#include <cmath>
#include <stdexcept>

#include "crossdiff/rng.hpp"

namespace crossdiff {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kDiff: return "Diff";
    case Variant::kDiffDE: return "Diff+DE";
    case Variant::kDiffDEG: return "Diff+DE+G";
    case Variant::kDiffDETriCL: return "Diff+DE+TriCL";
    case Variant::kFull: return "Full";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (name == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (Diff, Diff+DE, Diff+DE+G, Diff+DE+TriCL, Full)");
}

const char* single_view_name(SingleView v) {
  return v == SingleView::kDomain ? "domain" : "fused";
}

SingleView parse_single_view(std::string_view name) {
  if (name == "domain") return SingleView::kDomain;
  if (name == "fused") return SingleView::kFused;
  throw std::invalid_argument("single_view must be 'domain' or 'fused'");
}

void ModelConfig::validate() const {
  if (d < 1 || n_heads < 1 || enc_layers < 1 || dec_layers < 1 ||
      max_seq_len < 1 || T < 1)
    throw std::invalid_argument("model sizes must be positive");
  if (d % n_heads != 0)
    throw std::invalid_argument("d must be divisible by n_heads");
  if (vocab_x <= kFirstItem || vocab_y <= kFirstItem)
    throw std::invalid_argument("each domain needs at least one real item");
}

GuidanceMode ModelConfig::guidance() const {
  switch (variant) {
    case Variant::kDiff: return GuidanceMode::kSharedRows;
    case Variant::kDiffDE:
    case Variant::kDiffDETriCL: return GuidanceMode::kSharedPooled;
    case Variant::kDiffDEG:
    case Variant::kFull: return GuidanceMode::kFused;
  }
  return GuidanceMode::kFused;
}

std::optional<int> ParameterSet::find(std::string_view name) const {
  for (int i = 0; i < size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

size_t ParameterSet::scalar_count() const {
  size_t n = 0;
  for (const Matrix& m : values) n += m.size();
  return n;
}

// ---------------------------------------------------------------------------

namespace {

class Builder {
 public:
  Builder(ParameterSet& p, uint64_t seed) : p_(p), rng_(derive_seed(seed, "init")) {}

  int normal(const std::string& name, int rows, int cols, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = stddev * rng_.normal();
    return add(name, std::move(m), true);
  }
  int xavier(const std::string& name, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (double& v : m.values()) v = limit * (2.0 * rng_.uniform() - 1.0);
    return add(name, std::move(m), true);
  }
  int constant(const std::string& name, int rows, int cols, double value) {
    return add(name, Matrix(rows, cols, value), false);
  }
  int add(const std::string& name, Matrix m, bool decay) {
    p_.names.push_back(name);
    p_.values.push_back(std::move(m));
    p_.decay.push_back(decay);
    return p_.size() - 1;
  }

  BlockIds block(const std::string& prefix, int d) {
    BlockIds b{};
    b.ln1_g = constant(prefix + ".ln1_g", 1, d, 1.0);
    b.ln1_b = constant(prefix + ".ln1_b", 1, d, 0.0);
    b.wq = xavier(prefix + ".wq", d, d);
    b.bq = constant(prefix + ".bq", 1, d, 0.0);
    b.wk = xavier(prefix + ".wk", d, d);
    b.bk = constant(prefix + ".bk", 1, d, 0.0);
    b.wv = xavier(prefix + ".wv", d, d);
    b.bv = constant(prefix + ".bv", 1, d, 0.0);
    b.wo = xavier(prefix + ".wo", d, d);
    b.bo = constant(prefix + ".bo", 1, d, 0.0);
    b.ln2_g = constant(prefix + ".ln2_g", 1, d, 1.0);
    b.ln2_b = constant(prefix + ".ln2_b", 1, d, 0.0);
    b.fc1_w = xavier(prefix + ".fc1_w", d, 4 * d);
    b.fc1_b = constant(prefix + ".fc1_b", 1, 4 * d, 0.0);
    b.fc2_w = xavier(prefix + ".fc2_w", 4 * d, d);
    b.fc2_b = constant(prefix + ".fc2_b", 1, d, 0.0);
    return b;
  }

  std::vector<BlockIds> stack(const std::string& prefix, int layers, int d) {
    std::vector<BlockIds> out;
    for (int l = 0; l < layers; ++l)
      out.push_back(block(prefix + "." + std::to_string(l), d));
    return out;
  }

 private:
  ParameterSet& p_;
  Rng rng_;
};

}  // namespace

ParameterSet init_parameters(const ModelConfig& cfg, uint64_t rng_seed) {
  cfg.validate();
  ParameterSet p;
  p.cfg = cfg;
  Builder b(p, rng_seed);
  const int d = cfg.d;
  p.e_x = b.normal("E_x", cfg.vocab_x, d, 0.02);
  p.e_y = b.normal("E_y", cfg.vocab_y, d, 0.02);
  for (int table : {p.e_x, p.e_y})
    for (double& v : p.values[table].row(kPadToken)) v = 0.0;
  p.pos = b.normal("Pos", cfg.max_seq_len, d, 0.02);
  p.step = b.normal("StepEmb", cfg.T, d, 0.02);
  if (cfg.domain_encoders()) {
    p.enc_x = b.stack("enc_x", cfg.enc_layers, d);
    p.enc_y = b.stack("enc_y", cfg.enc_layers, d);
    Matrix eye(d, d);
    for (int i = 0; i < d; ++i) eye(i, i) = 1.0;
    p.fuse_w = b.add("fuse.w", std::move(eye), true);
    p.fuse_b = b.constant("fuse.b", 1, d, 0.0);
  }
  if (cfg.shared_encoder()) p.enc_s = b.stack("enc_s", cfg.enc_layers, d);
  p.enc_c = b.stack("enc_c", cfg.enc_layers, d);
  p.dec = b.stack("dec", cfg.dec_layers, d);
  return p;
}

// ---------------------------------------------------------------------------

Var linear(Tape& t, const ParameterSet& p, Var x, int w, int b) {
  return ag::add_row(t, ag::matmul(t, x, t.param(p.values[w], w)),
                     t.param(p.values[b], b));
}

namespace {

Var param(Tape& t, const ParameterSet& p, int id) {
  return t.param(p.values[id], id);
}

Var block_forward(Tape& t, const ParameterSet& p, const BlockIds& b, Var x,
                  const AttentionMask& mask, Var memory) {
  Var a = ag::layer_norm(t, x, param(t, p, b.ln1_g), param(t, p, b.ln1_b));
  Var kv = memory.valid() ? memory : a;
  Var q = linear(t, p, a, b.wq, b.bq);
  Var k = linear(t, p, kv, b.wk, b.bk);
  Var v = linear(t, p, kv, b.wv, b.bv);
  Var att = ag::attention(t, q, k, v, mask, p.cfg.n_heads);
  Var h = ag::add(t, x, linear(t, p, att, b.wo, b.bo));
  Var m = ag::layer_norm(t, h, param(t, p, b.ln2_g), param(t, p, b.ln2_b));
  Var f = linear(t, p, ag::gelu(t, linear(t, p, m, b.fc1_w, b.fc1_b)), b.fc2_w,
                 b.fc2_b);
  return ag::add(t, h, f);
}

AttentionMask causal_all(int n) {
  std::vector<uint8_t> valid(n, 1);
  return AttentionMask::causal(valid);
}

// Domain encoder over a domain subsequence, or over a lone padding token.
Var encode_domain_tokens(Tape& t, const ParameterSet& p, Domain dm,
                         std::span<const Token> tokens) {
  if (tokens.empty()) {
    const Token pad{kPadToken, dm};
    const uint8_t invalid = 0;
    return run_blocks(t, p, p.encoder(dm), embed_tokens(t, p, {&pad, 1}),
                      AttentionMask::causal({&invalid, 1}));
  }
  return run_blocks(t, p, p.encoder(dm), embed_tokens(t, p, tokens),
                    causal_all(static_cast<int>(tokens.size())));
}

}  // namespace

Var run_blocks(Tape& t, const ParameterSet& p, std::span<const BlockIds> blocks,
               Var x, const AttentionMask& mask, Var memory) {
  for (const BlockIds& b : blocks) x = block_forward(t, p, b, x, mask, memory);
  return x;
}

Var item_rows(Tape& t, const ParameterSet& p, std::span<const Token> tokens) {
  const int n = static_cast<int>(tokens.size());
  std::vector<int> rows[2];
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    const Token& tok = tokens[i];
    const int di = domain_index(tok.domain);
    if (tok.item < 0 || tok.item >= p.cfg.vocab(tok.domain))
      throw std::out_of_range("item index " + std::to_string(tok.item) +
                              " outside the " + domain_name(tok.domain) +
                              " table");
    order[i] = di == 0 ? static_cast<int>(rows[0].size())
                       : -1 - static_cast<int>(rows[1].size());
    rows[di].push_back(tok.item);
  }
  if (rows[1].empty()) return ag::select_rows(t, param(t, p, p.e_x), rows[0]);
  if (rows[0].empty()) return ag::select_rows(t, param(t, p, p.e_y), rows[1]);
  const int nx = static_cast<int>(rows[0].size());
  const Var parts[2] = {ag::select_rows(t, param(t, p, p.e_x), rows[0]),
                        ag::select_rows(t, param(t, p, p.e_y), rows[1])};
  for (int& o : order) o = o >= 0 ? o : nx + (-1 - o);
  return ag::select_rows(t, ag::concat_rows(t, parts), order);
}

Var embed_tokens(Tape& t, const ParameterSet& p, std::span<const Token> tokens) {
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw std::invalid_argument("cannot embed an empty sequence");
  if (n > p.cfg.max_seq_len)
    throw std::invalid_argument("sequence longer than max_seq_len");
  return ag::add(t, item_rows(t, p, tokens),
                 ag::slice_rows(t, param(t, p, p.pos), 0, n));
}

SequenceEncoding encode_history(Tape& t, const ParameterSet& p,
                                const UserSequence& seq, bool need_fused) {
  if (seq.items.empty()) throw std::invalid_argument("empty history");
  SequenceEncoding enc;
  enc.views = split_domains(seq);
  enc.length = seq.length();
  if (p.cfg.domain_encoders()) {
    for (Domain dm : {Domain::X, Domain::Y}) {
      const auto& items = dm == Domain::X ? enc.views.x.items : enc.views.y.items;
      Var g = encode_domain_tokens(t, p, dm, items);
      (dm == Domain::X ? enc.g_x : enc.g_y) = g;
      Var pad = items.empty() ? g : encode_domain_tokens(t, p, dm, {});
      (dm == Domain::X ? enc.pad_x : enc.pad_y) = pad;
    }
    if (need_fused || p.cfg.guidance() == GuidanceMode::kFused ||
        p.cfg.single_view == SingleView::kFused) {
      std::vector<Var> parts;
      std::vector<int> order(enc.length);
      int offset = 0;
      for (Domain dm : {Domain::X, Domain::Y}) {
        const auto& pos = dm == Domain::X ? enc.views.positions_x
                                          : enc.views.positions_y;
        if (pos.empty()) continue;
        for (size_t i = 0; i < pos.size(); ++i) order[pos[i]] = offset + static_cast<int>(i);
        offset += static_cast<int>(pos.size());
        parts.push_back(enc.g(dm));
      }
      Var stacked = parts.size() == 1 ? parts[0] : ag::concat_rows(t, parts);
      enc.g_d = linear(t, p, ag::select_rows(t, stacked, order), p.fuse_w, p.fuse_b);
    }
  }
  if (p.cfg.shared_encoder())
    enc.shared = run_blocks(t, p, p.enc_s, embed_tokens(t, p, seq.items),
                            causal_all(enc.length));
  return enc;
}

ViewRef single_view_ref(const ParameterSet& p, const SequenceEncoding& enc,
                        Domain dm, int k) {
  if (k < 1 || k > enc.length) throw std::out_of_range("prefix length");
  if (!p.cfg.domain_encoders()) return {enc.shared, k - 1};
  if (p.cfg.single_view == SingleView::kFused) return {enc.g_d, k - 1};
  const auto& pos = dm == Domain::X ? enc.views.positions_x : enc.views.positions_y;
  int count = 0;
  while (count < static_cast<int>(pos.size()) && pos[count] < k) ++count;
  if (count == 0) return {enc.pad(dm), 0};
  return {enc.g(dm), count - 1};
}

GuidanceContext guidance_for_prefixes(const ParameterSet& p,
                                      const SequenceEncoding& enc,
                                      std::span<const int> prefix_lengths) {
  const GuidanceMode mode = p.cfg.guidance();
  GuidanceContext ctx;
  ctx.rows = mode == GuidanceMode::kFused ? enc.g_d : enc.shared;
  const int m = static_cast<int>(prefix_lengths.size());
  ctx.mask = AttentionMask(m, enc.length);
  for (int i = 0; i < m; ++i) {
    const int k = prefix_lengths[i];
    if (k < 1 || k > enc.length) throw std::out_of_range("prefix length");
    if (mode == GuidanceMode::kSharedPooled) {
      ctx.mask.set(i, k - 1, true);
    } else {
      for (int j = 0; j < k; ++j) ctx.mask.set(i, j, true);
    }
  }
  return ctx;
}

Var denoise_rows(Tape& t, const ParameterSet& p, Var x_t,
                 std::span<const int> steps, const GuidanceContext& guide) {
  const int m = t.value(x_t).rows();
  if (static_cast<int>(steps.size()) != m)
    throw std::invalid_argument("one diffusion step per denoiser row");
  if (t.value(guide.rows).rows() == 0) throw std::invalid_argument("empty guidance");
  std::vector<int> ids(steps.begin(), steps.end());
  for (int& s : ids) {
    if (s < 1 || s > p.cfg.T) throw std::out_of_range("diffusion step outside [1, T]");
    s -= 1;
  }
  Var u = ag::add(t, x_t, ag::select_rows(t, param(t, p, p.step), ids));
  Var h = run_blocks(t, p, p.enc_c, u, AttentionMask::diagonal(m));
  return run_blocks(t, p, p.dec, h, guide.mask, guide.rows);
}

Var encode_sequence_c(Tape& t, const ParameterSet& p, const UserSequence& seq) {
  const int n = seq.length();
  Var h = run_blocks(t, p, p.enc_c, embed_tokens(t, p, seq.items), causal_all(n));
  return ag::slice_rows(t, h, n - 1, n);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> row_copy(const Matrix& m, int r) {
  auto row = m.row(r);
  return {row.begin(), row.end()};
}

}  // namespace

Matrix embed_sequence(const UserSequence& seq, Domain domain,
                      const ParameterSet& p) {
  for (const Token& tok : seq.items)
    if (tok.domain != domain)
      throw std::invalid_argument("token from the other domain");
  Tape t;
  return t.value(embed_tokens(t, p, seq.items));
}

Matrix encode_domain(const Matrix& h, Domain which, const ParameterSet& p,
                     std::span<const uint8_t> valid) {
  if (!p.cfg.domain_encoders())
    throw std::logic_error("variant has no domain encoders");
  Tape t;
  std::vector<uint8_t> all(h.rows(), 1);
  if (valid.empty()) valid = all;
  if (static_cast<int>(valid.size()) != h.rows())
    throw std::invalid_argument("valid flags must match rows");
  return t.value(run_blocks(t, p, p.encoder(which), t.constant(h),
                            AttentionMask::causal(valid)));
}

Matrix fuse_guidance(const Matrix& g_x, const Matrix& g_y,
                     const DomainViews& views, const ParameterSet& p) {
  if (p.fuse_w < 0) throw std::logic_error("variant has no fusion layer");
  const int n = static_cast<int>(views.positions_x.size() + views.positions_y.size());
  Matrix inter(n, p.cfg.d);
  auto place = [&](const Matrix& g, const std::vector<int>& pos) {
    if (pos.empty()) return;
    if (g.rows() != static_cast<int>(pos.size()))
      throw std::invalid_argument("encoder rows do not match the position map");
    for (size_t i = 0; i < pos.size(); ++i) {
      auto src = g.row(static_cast<int>(i));
      std::copy(src.begin(), src.end(), inter.row(pos[i]).begin());
    }
  };
  place(g_x, views.positions_x);
  place(g_y, views.positions_y);
  Tape t;
  return t.value(linear(t, p, t.constant(std::move(inter)), p.fuse_w, p.fuse_b));
}

DenoiseOutput denoise(std::span<const double> x_t, int t, const Matrix& g_d,
                      const ParameterSet& p) {
  if (static_cast<int>(x_t.size()) != p.cfg.d)
    throw std::invalid_argument("x_t dimension differs from d");
  if (g_d.rows() == 0) throw std::invalid_argument("empty guidance");
  Tape tape;
  GuidanceContext ctx{tape.constant(g_d), AttentionMask(1, g_d.rows(), true)};
  const int steps[1] = {t};
  Var out = denoise_rows(tape, p, tape.constant(Matrix::row_vector(x_t)), steps, ctx);
  DenoiseOutput r;
  r.x0_hat = row_copy(tape.value(out), 0);
  r.h_c = r.x0_hat;
  return r;
}

std::vector<double> encode_aug(const UserSequence& s_aug, const ParameterSet& p) {
  Tape t;
  if (s_aug.items.empty()) {
    const UserSequence pad{s_aug.user_index, {Token{kPadToken, Domain::X}}};
    return row_copy(t.value(encode_sequence_c(t, p, pad)), 0);
  }
  return row_copy(t.value(encode_sequence_c(t, p, s_aug)), 0);
}

GuidanceBundle compute_guidance(const UserSequence& history,
                                const ParameterSet& p) {
  Tape t;
  const SequenceEncoding enc = encode_history(t, p, history, p.cfg.domain_encoders());
  const int n = enc.length;
  GuidanceBundle b;
  if (p.cfg.domain_encoders()) {
    b.g_x = t.value(enc.g_x);
    b.g_y = t.value(enc.g_y);
    b.g_d = t.value(enc.g_d);
    b.g_x_last = row_copy(b.g_x, b.g_x.rows() - 1);
    b.g_y_last = row_copy(b.g_y, b.g_y.rows() - 1);
    b.g_d_pooled = row_copy(b.g_d, n - 1);
  }
  switch (p.cfg.guidance()) {
    case GuidanceMode::kFused: b.denoiser_rows = b.g_d; break;
    case GuidanceMode::kSharedRows: b.denoiser_rows = t.value(enc.shared); break;
    case GuidanceMode::kSharedPooled:
      b.denoiser_rows = Matrix::row_vector(t.value(enc.shared).row(n - 1));
      break;
  }
  for (Domain dm : {Domain::X, Domain::Y}) {
    const ViewRef ref = single_view_ref(p, enc, dm, n);
    (dm == Domain::X ? b.view_x : b.view_y) = row_copy(t.value(ref.source), ref.row);
  }
  return b;
}

}  // namespace crossdiff
