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

#include "crossdiff/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "crossdiff/rng.hpp"
#include "json.hpp"

namespace crossdiff {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (epochs < 0 || warmup_epochs < 0)
    throw std::invalid_argument("epoch counts must be non-negative");
  if (epochs > 0 && warmup_epochs >= epochs)
    throw std::invalid_argument("warmup_epochs must be smaller than epochs");
  if (!(aug_rate > 0.0 && aug_rate < 1.0))
    throw std::invalid_argument("aug_rate must lie in (0, 1)");
  if (shard_size < 1) throw std::invalid_argument("shard_size must be positive");
}

double lr_at(long step, const TrainConfig& cfg, int steps_per_epoch) {
  if (step < 0) throw std::out_of_range("negative step");
  const long warm = static_cast<long>(cfg.warmup_epochs) * steps_per_epoch;
  const long total = static_cast<long>(cfg.epochs) * steps_per_epoch;
  if (step < warm) return cfg.lr * static_cast<double>(step + 1) / warm;
  // The cosine branch starts at step warm - 1, where warm-up has reached lr.
  const long origin = warm > 0 ? warm - 1 : 0;
  const long span = total - 1 - origin;
  if (span <= 0) return 0.0;
  const double progress =
      std::min(1.0, static_cast<double>(step - origin) / static_cast<double>(span));
  return 0.5 * cfg.lr * (1.0 + std::cos(M_PI * progress));
}

AdamState init_adam(const ParameterSet& params) {
  return AdamState{zeros_like(params.values), zeros_like(params.values), 0};
}

void adam_update(ParameterSet& params, const GradientBuffer& grads,
                 AdamState& opt, double lr, const TrainConfig& cfg) {
  if (grads.size() != params.values.size() || opt.m.size() != grads.size())
    throw std::invalid_argument("gradient layout does not match parameters");
  ++opt.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
  for (int i = 0; i < params.size(); ++i) {
    Matrix& w = params.values[i];
    const Matrix& g = grads[i];
    w.require_same_shape(g, "adam_update");
    double* m = opt.m[i].data();
    double* v = opt.v[i].data();
    const bool table = i == params.e_x || i == params.e_y;
    const bool decay = cfg.weight_decay > 0.0 && params.decays(i);
    const int cols = w.cols();
    for (size_t j = 0; j < w.size(); ++j) {
      const double gj = g.data()[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      double step = mhat / (std::sqrt(vhat) + cfg.adam_eps);
      if (decay && !(table && static_cast<int>(j) / cols == kPadToken))
        step += cfg.weight_decay * w.data()[j];
      w.data()[j] -= lr * step;
    }
  }
}

UserDraws draw_user(const ModelConfig& model, int examples, uint64_t seed,
                    long global_step, int user_index) {
  Rng rng(derive_seed(derive_seed(seed, "step", static_cast<uint64_t>(global_step)),
                      "user", static_cast<uint64_t>(user_index)));
  UserDraws d;
  d.steps.resize(examples);
  for (int& s : d.steps) s = static_cast<int>(rng.uniform_int(1, model.T));
  d.eps = Matrix(examples, model.d);
  for (double& v : d.eps.values()) v = rng.normal();
  d.op = kAllAugmentOps[rng.uniform_int(0, 4)];
  d.aug_seed = rng.next_u64();
  return d;
}

DiffusionSchedule schedule_for(const ModelConfig& model) {
  return build_schedule(model.T, model.beta_start, model.beta_end);
}

// ---------------------------------------------------------------------------

namespace {

struct UserGraph {
  Tape tape;
  Var diff_sum;
  Var rec_sum;
  Var views[3];  // h_c, h_d, h_aug
  int examples = 0;
  double diff_value = 0.0;
  double rec_value = 0.0;

  explicit UserGraph(GradientBuffer* sink) : tape(sink) {}
};

Var sum_vars(Tape& t, const std::vector<Var>& parts) {
  Var acc = parts.at(0);
  for (size_t i = 1; i < parts.size(); ++i) acc = ag::add(t, acc, parts[i]);
  return acc;
}

void build_user_graph(UserGraph& g, const ParameterSet& p, const UserSequence& s,
                      const UserDraws& draws, bool warmup, bool with_views,
                      const TrainConfig& cfg, const DiffusionSchedule& sched) {
  Tape& t = g.tape;
  const int n = s.length();
  const int m = n - 1;
  g.examples = m;
  const SequenceEncoding enc = encode_history(t, p, s, with_views);

  // next_other[k]: first position > k whose domain differs from item k.
  std::vector<int> next_other(n, -1);
  int last_pos[2] = {-1, -1};
  for (int k = n - 1; k >= 0; --k) {
    next_other[k] = last_pos[domain_index(other(s.items[k].domain))];
    last_pos[domain_index(s.items[k].domain)] = k;
  }

  // Per domain: (example, target item) pairs.
  std::vector<std::pair<int, int>> pairs[2];
  for (int i = 0; i < m; ++i) {
    const Token& own = s.items[i + 1];
    pairs[domain_index(own.domain)].push_back({i, own.item});
    const int o = next_other[i + 1];
    if (o >= 0) pairs[domain_index(s.items[o].domain)].push_back({i, s.items[o].item});
  }

  std::vector<Var> rec_terms;
  for (Domain dm : {Domain::X, Domain::Y}) {
    const auto& list = pairs[domain_index(dm)];
    if (list.empty()) continue;
    std::vector<Var> rows;
    std::vector<int> targets;
    for (const auto& [ex, item] : list) {
      const ViewRef ref = single_view_ref(p, enc, dm, ex + 1);
      rows.push_back(ag::slice_rows(t, ref.source, ref.row, ref.row + 1));
      targets.push_back(item);
    }
    Var view = rows.size() == 1 ? rows[0] : ag::concat_rows(t, rows);
    Var table = t.param(p.values[p.table(dm)], p.table(dm));
    rec_terms.push_back(
        ag::softmax_cross_entropy(t, ag::matmul_nt(t, view, table), targets));
  }

  if (!warmup) {
    std::vector<Token> target_tokens(s.items.begin() + 1, s.items.end());
    Var x0 = item_rows(t, p, target_tokens);
    Matrix coef(m, m), noise = draws.eps;
    std::vector<int> prefix(m);
    for (int i = 0; i < m; ++i) {
      const double ab = sched.alpha_bar(draws.steps[i]);
      coef(i, i) = std::sqrt(ab);
      for (double& v : noise.row(i)) v *= std::sqrt(1.0 - ab);
      prefix[i] = i + 1;
    }
    Var x_t = ag::add(t, ag::matmul(t, t.constant(std::move(coef)), x0),
                      t.constant(std::move(noise)));
    const GuidanceContext ctx = guidance_for_prefixes(p, enc, prefix);
    Var x0_hat = denoise_rows(t, p, x_t, draws.steps, ctx);
    g.diff_sum = ag::sum_squares(t, ag::sub(t, x0_hat, x0));
    g.diff_value = t.value(g.diff_sum)(0, 0);

    for (Domain dm : {Domain::X, Domain::Y}) {
      const auto& list = pairs[domain_index(dm)];
      if (list.empty()) continue;
      std::vector<int> rows, targets;
      for (const auto& [ex, item] : list) {
        rows.push_back(ex);
        targets.push_back(item);
      }
      Var table = t.param(p.values[p.table(dm)], p.table(dm));
      Var logits = ag::matmul_nt(t, ag::select_rows(t, x0_hat, rows), table);
      rec_terms.push_back(ag::softmax_cross_entropy(t, logits, targets));
    }

    if (with_views) {
      g.views[0] = ag::slice_rows(t, x0_hat, m - 1, m);
      g.views[1] = ag::slice_rows(t, enc.g_d, n - 2, n - 1);
      const UserSequence base{s.user_index, {s.items.begin(), s.items.end() - 1}};
      const ItemCounts counts{p.cfg.vocab_x - kFirstItem, p.cfg.vocab_y - kFirstItem};
      const UserSequence aug = augment(
          base, AugmentationSpec{draws.op, cfg.aug_rate, draws.aug_seed}, counts,
          p.cfg.max_seq_len);
      g.views[2] = encode_sequence_c(t, p, aug);
    }
  }
  g.rec_sum = sum_vars(t, rec_terms);
  g.rec_value = t.value(g.rec_sum)(0, 0);
}

}  // namespace

BatchResult compute_batch_loss(const ParameterSet& params,
                               std::span<const UserSequence> batch,
                               long global_step, bool warmup,
                               const TrainConfig& cfg, bool want_grads,
                               bool parallel) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw std::invalid_argument("empty batch");
  for (const UserSequence& s : batch)
    if (s.length() < 2)
      throw std::invalid_argument("training user " + std::to_string(s.user_index) +
                                  " has fewer than two items");
  const DiffusionSchedule sched = schedule_for(params.cfg);
  const bool with_views = !warmup && params.cfg.tri_cl() && b >= 2;
  const int shards = (b + cfg.shard_size - 1) / cfg.shard_size;

  std::vector<GradientBuffer> shard_grads;
  if (want_grads) shard_grads.assign(shards, zeros_like(params.values));
  std::vector<std::unique_ptr<UserGraph>> graphs(b);
  std::vector<std::string> errors(b);

#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int u = 0; u < b; ++u) {
    try {
      const UserSequence& s = batch[u];
      const UserDraws draws =
          draw_user(params.cfg, s.length() - 1, cfg.seed, global_step, s.user_index);
      graphs[u] = std::make_unique<UserGraph>(
          want_grads ? &shard_grads[u / cfg.shard_size] : nullptr);
      build_user_graph(*graphs[u], params, s, draws, warmup, with_views, cfg, sched);
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }
  for (int u = 0; u < b; ++u)
    if (!errors[u].empty())
      throw std::runtime_error("user " + std::to_string(batch[u].user_index) + ": " +
                               errors[u]);

  int examples = 0;
  double diff_total = 0.0, rec_total = 0.0;
  for (const auto& g : graphs) {
    examples += g->examples;
    diff_total += g->diff_value;
    rec_total += g->rec_value;
  }
  const double l_diff = warmup ? 0.0 : diff_total / examples;
  const double l_rec = rec_total / examples;

  double l_cl = 0.0;
  Matrix cl_grad;
  if (with_views) {
    const int d = params.cfg.d;
    Matrix stacked(3 * b, d);
    for (int v = 0; v < 3; ++v)
      for (int u = 0; u < b; ++u) {
        auto src = graphs[u]->tape.value(graphs[u]->views[v]).row(0);
        std::copy(src.begin(), src.end(), stacked.row(v * b + u).begin());
      }
    Tape t;
    Var h = t.variable(std::move(stacked));
    Var loss = ag::tri_view_nce(t, h, b, cfg.normalize_views);
    l_cl = t.value(loss)(0, 0);
    if (want_grads) {
      t.seed_scalar(loss, cfg.weights.tri_cl);
      t.backward();
      cl_grad = t.grad(h);
    }
  }

  BatchResult result;
  try {
    result.loss = total_loss(l_diff, l_rec, l_cl, cfg.weights, warmup);
  } catch (const std::exception& e) {
    std::string users;
    for (const UserSequence& s : batch) users += " " + std::to_string(s.user_index);
    throw std::runtime_error(std::string(e.what()) + " at step " +
                             std::to_string(global_step) + " (l_diff=" +
                             std::to_string(l_diff) + ", l_rec=" +
                             std::to_string(l_rec) + ", l_tri_cl=" +
                             std::to_string(l_cl) + "; users" + users + ")");
  }
  result.examples = examples;
  if (!want_grads) return result;

#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int s = 0; s < shards; ++s) {
    const int end = std::min(b, (s + 1) * cfg.shard_size);
    for (int u = s * cfg.shard_size; u < end; ++u) {
      UserGraph& g = *graphs[u];
      Tape& t = g.tape;
      t.seed_scalar(g.rec_sum, cfg.weights.rec / examples);
      if (!warmup) t.seed_scalar(g.diff_sum, cfg.weights.diff / examples);
      if (with_views)
        for (int v = 0; v < 3; ++v)
          t.seed(g.views[v], Matrix::row_vector(cl_grad.row(v * b + u)));
      t.backward();
      graphs[u].reset();
    }
  }
  result.grads = std::move(shard_grads[0]);
  for (int s = 1; s < shards; ++s)
    for (size_t i = 0; i < result.grads.size(); ++i) result.grads[i] += shard_grads[s][i];
  return result;
}

// ---------------------------------------------------------------------------

TrainState init_state(const ModelConfig& model, const TrainConfig& cfg) {
  TrainState s;
  s.params = init_parameters(model, derive_seed(cfg.seed, "params"));
  s.opt = init_adam(s.params);
  s.best_params = s.params;
  return s;
}

StepResult train_step(std::span<const UserSequence> batch, TrainState& state,
                      const TrainConfig& cfg, int steps_per_epoch) {
  const bool warmup =
      state.global_step < static_cast<long>(cfg.warmup_epochs) * steps_per_epoch;
  BatchResult r = compute_batch_loss(state.params, batch, state.global_step, warmup,
                                     cfg, true, cfg.parallel);
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (const Matrix& g : r.grads)
      for (double v : g.values()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) {
      const double scale = cfg.grad_clip / norm;
      for (Matrix& g : r.grads)
        for (double& v : g.values()) v *= scale;
    }
  }
  StepResult out{r.loss, lr_at(state.global_step, cfg, steps_per_epoch)};
  adam_update(state.params, r.grads, state.opt, out.lr, cfg);
  ++state.global_step;
  return out;
}

std::vector<UserSequence> trainable_users(const DatasetSplit& split) {
  std::vector<UserSequence> out;
  for (const UserSequence& s : split.train)
    if (s.length() >= 2) out.push_back(s);
  return out;
}

std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "shuffle", static_cast<uint64_t>(epoch)));
  rng.shuffle(order.begin(), order.end());
  return order;
}

std::string metrics_header() { return "step,l_diff,l_rec,l_tri_cl,l_total,lr"; }

std::string metrics_line(long step, const StepResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g", step,
                r.loss.l_diff, r.loss.l_rec, r.loss.l_tri_cl, r.loss.l_total, r.lr);
  return buf;
}

TrainState fit(const DatasetSplit& split, const ModelConfig& model,
               const TrainConfig& cfg, const FitOptions& options) {
  cfg.validate();
  model.validate();
  const std::vector<UserSequence> users = trainable_users(split);
  if (users.empty()) throw std::invalid_argument("no user has two training items");
  const int n = static_cast<int>(users.size());
  const int bs = std::min(cfg.batch_size, n);
  const int steps_per_epoch = (n + bs - 1) / bs;

  TrainState state = init_state(model, cfg);
  const auto last_dir = options.out_dir / "last";
  const auto best_dir = options.out_dir / "best";
  if (options.resume && !options.out_dir.empty() &&
      std::filesystem::exists(last_dir / "manifest.json")) {
    LoadedCheckpoint ck = load_checkpoint(last_dir);
    if (!(ck.params.cfg == model))
      throw std::runtime_error("checkpoint model config differs from the requested one");
    state.params = std::move(ck.params);
    state.opt = std::move(ck.opt);
    state.global_step = ck.global_step;
    state.epoch = ck.epoch;
    state.best_metric = ck.best_metric;
    state.best_epoch = ck.best_epoch;
    state.history = std::move(ck.history);
    state.best_params = std::filesystem::exists(best_dir / "manifest.json")
                            ? load_checkpoint(best_dir).params
                            : state.params;
  }

  int run = 0;
  while (state.epoch < cfg.epochs) {
    if (options.max_epochs_this_call >= 0 && run >= options.max_epochs_this_call) break;
    const std::vector<int> order = epoch_order(n, cfg.seed, state.epoch);
    for (int start = 0; start < n; start += bs) {
      std::vector<UserSequence> batch;
      for (int i = start; i < std::min(n, start + bs); ++i) batch.push_back(users[order[i]]);
      const long step = state.global_step;
      const StepResult r = train_step(batch, state, cfg, steps_per_epoch);
      if (options.metrics != nullptr) *options.metrics << metrics_line(step, r) << '\n';
    }
    ++state.epoch;
    ++run;
    bool improved = false;
    if (options.validate) {
      const double metric = options.validate(state.params);
      state.history.push_back({state.epoch, metric});
      if (metric > state.best_metric) {
        state.best_metric = metric;
        state.best_epoch = state.epoch;
        state.best_params = state.params;
        improved = true;
      }
    } else {
      state.best_params = state.params;
      state.best_epoch = state.epoch;
      improved = true;
    }
    if (!options.out_dir.empty()) {
      if (improved) save_checkpoint(best_dir, state.best_params, nullptr, state, cfg);
      save_checkpoint(last_dir, state.params, &state.opt, state, cfg);
    }
    if (options.metrics != nullptr) options.metrics->flush();
  }
  return state;
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint arrays are stored little-endian");

constexpr int kFormatVersion = 1;

json model_to_json(const ModelConfig& m) {
  return {{"d", m.d},
          {"n_heads", m.n_heads},
          {"enc_layers", m.enc_layers},
          {"dec_layers", m.dec_layers},
          {"max_seq_len", m.max_seq_len},
          {"T", m.T},
          {"vocab_x", m.vocab_x},
          {"vocab_y", m.vocab_y},
          {"variant", variant_name(m.variant)},
          {"single_view", single_view_name(m.single_view)}};
}

ModelConfig model_from_json(const json& j, const json& sched) {
  ModelConfig m;
  m.d = j.at("d");
  m.n_heads = j.at("n_heads");
  m.enc_layers = j.at("enc_layers");
  m.dec_layers = j.at("dec_layers");
  m.max_seq_len = j.at("max_seq_len");
  m.T = j.at("T");
  m.vocab_x = j.at("vocab_x");
  m.vocab_y = j.at("vocab_y");
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.single_view = parse_single_view(j.at("single_view").get<std::string>());
  m.beta_start = sched.at("beta_start");
  m.beta_end = sched.at("beta_end");
  if (sched.at("T").get<int>() != m.T)
    throw std::runtime_error("schedule T disagrees with model T");
  parse_schedule_shape(sched.at("shape").get<std::string>());
  return m;
}

void write_arrays(const std::filesystem::path& path, const std::vector<const Matrix*>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Matrix* m : arrays)
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void read_arrays(const std::filesystem::path& path, const std::vector<Matrix*>& arrays) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  size_t expected = 0;
  for (Matrix* m : arrays) {
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(m->size() * sizeof(double)));
    expected += m->size() * sizeof(double);
    if (!in) throw std::runtime_error(path.string() + " is shorter than its manifest");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error(path.string() + " is longer than its manifest (" +
                             std::to_string(expected) + " bytes expected)");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const AdamState* opt, const TrainState& state,
                     const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["model"] = model_to_json(params.cfg);
  manifest["schedule"] = {{"T", params.cfg.T},
                          {"beta_start", params.cfg.beta_start},
                          {"beta_end", params.cfg.beta_end},
                          {"shape", schedule_shape_name(ScheduleShape::kLinear)}};
  manifest["seed"] = cfg.seed;
  manifest["global_step"] = state.global_step;
  manifest["epoch"] = state.epoch;
  manifest["best_metric"] = state.best_metric;
  manifest["best_epoch"] = state.best_epoch;
  json hist = json::array();
  for (const EpochRecord& r : state.history)
    hist.push_back({{"epoch", r.epoch}, {"validation", r.validation}});
  manifest["history"] = hist;
  json shapes = json::array();
  std::vector<const Matrix*> arrays;
  for (int i = 0; i < params.size(); ++i) {
    shapes.push_back({{"name", params.names[i]},
                      {"rows", params.values[i].rows()},
                      {"cols", params.values[i].cols()}});
    arrays.push_back(&params.values[i]);
  }
  manifest["parameters"] = shapes;
  manifest["dtype"] = "float64-le";
  manifest["has_optimizer"] = opt != nullptr;
  write_arrays(dir / "params.bin", arrays);
  if (opt != nullptr) {
    manifest["adam_t"] = opt->t;
    std::vector<const Matrix*> moments;
    for (const Matrix& m : opt->m) moments.push_back(&m);
    for (const Matrix& v : opt->v) moments.push_back(&v);
    write_arrays(dir / "optimizer.bin", moments);
  } else {
    std::filesystem::remove(dir / "optimizer.bin");
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no checkpoint manifest in " + dir.string());
  const json manifest = json::parse(in);
  if (manifest.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint format version");
  LoadedCheckpoint ck;
  const ModelConfig model = model_from_json(manifest.at("model"), manifest.at("schedule"));
  ck.params = init_parameters(model, 0);
  const json& shapes = manifest.at("parameters");
  if (shapes.size() != ck.params.values.size())
    throw std::runtime_error("checkpoint parameter count differs from its model config");
  std::vector<Matrix*> arrays;
  for (int i = 0; i < ck.params.size(); ++i) {
    const json& s = shapes[i];
    if (s.at("name").get<std::string>() != ck.params.names[i] ||
        s.at("rows").get<int>() != ck.params.values[i].rows() ||
        s.at("cols").get<int>() != ck.params.values[i].cols())
      throw std::runtime_error("checkpoint parameter " + std::to_string(i) +
                               " does not match the model layout");
    arrays.push_back(&ck.params.values[i]);
  }
  read_arrays(dir / "params.bin", arrays);
  ck.has_optimizer = manifest.at("has_optimizer");
  ck.opt = init_adam(ck.params);
  if (ck.has_optimizer) {
    ck.opt.t = manifest.at("adam_t");
    std::vector<Matrix*> moments;
    for (Matrix& m : ck.opt.m) moments.push_back(&m);
    for (Matrix& v : ck.opt.v) moments.push_back(&v);
    read_arrays(dir / "optimizer.bin", moments);
  }
  ck.global_step = manifest.at("global_step");
  ck.epoch = manifest.at("epoch");
  ck.best_metric = manifest.at("best_metric");
  ck.best_epoch = manifest.at("best_epoch");
  ck.seed = manifest.at("seed");
  for (const json& r : manifest.at("history"))
    ck.history.push_back({r.at("epoch"), r.at("validation")});
  return ck;
}

}  // namespace crossdiff
