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

// Acceptance checks. Prints one PASS/FAIL line per criterion; arguments pick
// criteria by number (none runs all). Exit status is nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../common/fixture.hpp"
#include "crossdiff/config.hpp"
#include "crossdiff/dataset.hpp"
#include "crossdiff/diffusion.hpp"
#include "crossdiff/eval.hpp"
#include "crossdiff/objectives.hpp"
#include "crossdiff/pipeline.hpp"
#include "crossdiff/rng.hpp"
#include "crossdiff/trainer.hpp"

#ifndef CROSSDIFF_BENCHMARK_CONFIG
#error "CROSSDIFF_BENCHMARK_CONFIG must name the synthetic benchmark config"
#endif

namespace crossdiff {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Accumulates failed sub-checks; the first few are reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::ostringstream out;
    out << total_ - failures_.size() << "/" << total_ << " checks";
    for (size_t i = 0; i < failures_.size() && i < 3; ++i) out << "; failed: " << failures_[i];
    return out.str();
  }

 private:
  long total_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

std::vector<double> random_vector(int n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// ---------------------------------------------------------------------------
// 1. Diffusion math

Outcome diffusion_math() {
  Checks c;
  const DiffusionSchedule s = build_schedule(50, 1e-4, 0.02);
  double prev = 1.0;
  for (int t = 1; t <= 50; ++t) {
    c.expect(s.alpha_bar(t) < prev && s.alpha_bar(t) > 0.0, "abar(" + std::to_string(t) + ")");
    prev = s.alpha_bar(t);
  }
  // Log-space product as an independent route to abar_T.
  double log_sum = 0.0;
  for (int t = 1; t <= 50; ++t) log_sum += std::log1p(-(1e-4 + (t - 1) * (0.02 - 1e-4) / 49.0));
  c.expect(std::abs(s.alpha_bar(50) - std::exp(log_sum)) <= 1e-12, "abar_T log-space");

  // Forward moments: mean sqrt(abar) x0, variance 1 - abar.
  Rng rng(derive_seed(1, "acceptance", 1));
  double worst_var = 0.0;
  for (int t : {1, 25, 50}) {
    const double x0[] = {0.7};
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double eps[] = {rng.normal()};
      const double v = forward_diffuse(x0, t, eps, s).x_t[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n, var = sq / n - mean * mean, want = 1.0 - s.alpha_bar(t);
    worst_var = std::max(worst_var, std::abs(var / want - 1.0));
    c.expect(std::abs(var / want - 1.0) <= 0.05, "variance t=" + std::to_string(t));
    c.expect(std::abs(mean - std::sqrt(s.alpha_bar(t)) * 0.7) <= 5 * std::sqrt(want / n),
             "mean t=" + std::to_string(t));
  }

  // Reverse step against the Bayes posterior of x_s given x_t and x0.
  double worst_post = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = static_cast<int>(rng.uniform_int(2, 50));
    const int prev_t = trial % 2 == 0 ? t - 1 : static_cast<int>(rng.uniform_int(1, t - 1));
    const double a = s.alpha_bar(t) / s.alpha_bar(prev_t);
    const double x0[] = {rng.normal()}, xt[] = {rng.normal()}, zero[] = {0.0}, one[] = {1.0};
    const double prior_var = 1.0 - s.alpha_bar(prev_t), like_var = 1.0 - a;
    const double precision = 1.0 / prior_var + a / like_var;
    const double mean =
        (std::sqrt(s.alpha_bar(prev_t)) * x0[0] / prior_var + std::sqrt(a) * xt[0] / like_var) /
        precision;
    const double sd = std::sqrt(1.0 / precision);
    const double got = reverse_step(xt, t, x0, s, zero, prev_t)[0];
    const double shifted = reverse_step(xt, t, x0, s, one, prev_t)[0];
    worst_post = std::max({worst_post, std::abs(got - mean), std::abs(shifted - got - sd)});
  }
  c.expect(worst_post <= 1e-10, "posterior");

  // t = 1 returns the prediction whatever the noise.
  const std::vector<double> xt{0.4, -2.0}, x0{1.5, 0.25}, noise{3.0, -7.0};
  c.expect(reverse_step(xt, 1, x0, s, noise) == x0, "t=1 determinism");
  return {c.ok(), c.summary() + ", max |var ratio - 1| " + fmt("%.4f", worst_var) +
                      ", max posterior error " + fmt("%.2e", worst_post)};
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

Outcome gradient_check() {
  // Tiny config: d=4, L=3, 10 table rows (8 items), B=4.
  const std::vector<UserSequence> users = {
      {0, {{2, Domain::X}, {3, Domain::Y}, {4, Domain::X}}},
      {1, {{5, Domain::Y}, {6, Domain::X}, {7, Domain::Y}}},
      {2, {{8, Domain::X}, {9, Domain::X}, {2, Domain::Y}}},
      {3, {{9, Domain::Y}, {8, Domain::Y}, {3, Domain::X}}},
  };
  // Truncation error is O(h^2); at h = 1e-5 it reaches 1e-4 on a few small
  // embedding gradients, while roundoff at 1e-6 stays near 1e-9.
  const double h = 1e-6, tol = 1e-4, floor = 1e-3;
  Checks c;
  double worst = 0.0;
  long entries = 0;
  for (Variant v : kAllVariants) {
    ModelConfig m;
    m.d = 4;
    m.n_heads = 1;
    m.max_seq_len = 3;
    m.T = 10;
    m.vocab_x = m.vocab_y = 10;
    m.variant = v;
    ParameterSet p = init_parameters(m, 11);
    TrainConfig cfg;
    const long step = 3;
    const BatchResult r = compute_batch_loss(p, users, step, false, cfg);
    c.expect(r.loss.l_diff > 0 && r.loss.l_rec > 0, std::string(variant_name(v)) + " terms");
    double variant_worst = 0.0;
    for (int id = 0; id < p.size(); ++id) {
      for (size_t j = 0; j < p.values[id].size(); ++j) {
        double& w = p.values[id].data()[j];
        const double keep = w;
        w = keep + h;
        const double up = compute_batch_loss(p, users, step, false, cfg, false).loss.l_total;
        w = keep - h;
        const double down = compute_batch_loss(p, users, step, false, cfg, false).loss.l_total;
        w = keep;
        const double numeric = (up - down) / (2 * h), analytic = r.grads[id].data()[j];
        const double rel =
            std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
        variant_worst = std::max(variant_worst, rel);
        if (rel > tol)
          c.expect(false, std::string(variant_name(v)) + " " + p.names[id] + "[" +
                              std::to_string(j) + "] rel " + fmt("%.2e", rel));
        ++entries;
      }
    }
    worst = std::max(worst, variant_worst);
  }
  return {c.ok(), std::to_string(entries) + " entries over 5 variants, max rel error " +
                      fmt("%.2e", worst) + (c.ok() ? "" : "; " + c.summary())};
}

// ---------------------------------------------------------------------------
// 3. Loss oracles

double oracle_ce(const std::vector<double>& v, const Matrix& table, int target) {
  double z = 0.0, pos = 0.0;
  for (int i = kFirstItem; i < table.rows(); ++i) {
    double s = 0.0;
    for (int k = 0; k < table.cols(); ++k) s += v[k] * table(i, k);
    z += std::exp(s);
    if (i == target) pos = s;
  }
  return std::log(z) - pos;
}

double oracle_cl(const Matrix& hc, const Matrix& hd, const Matrix& ha, bool normalize) {
  const int b = hc.rows(), d = hc.cols();
  std::vector<std::vector<double>> rows;
  for (const Matrix* m : {&hc, &hd, &ha}) {
    for (int r = 0; r < b; ++r) {
      std::vector<double> v(d);
      double n = 0.0;
      for (int k = 0; k < d; ++k) n += (*m)(r, k) * (*m)(r, k);
      for (int k = 0; k < d; ++k) v[k] = normalize ? (*m)(r, k) / std::sqrt(n) : (*m)(r, k);
      rows.push_back(v);
    }
  }
  double total = 0.0;
  int terms = 0;
  for (int va = 0; va < 3; ++va) {
    for (int vp = 0; vp < 3; ++vp) {
      if (va == vp) continue;
      for (int u = 0; u < b; ++u) {
        const auto& anchor = rows[va * b + u];
        auto sim = [&](const std::vector<double>& o) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += anchor[k] * o[k];
          return s;
        };
        double denom = std::exp(sim(rows[vp * b + u]));
        for (int j = 0; j < 3 * b; ++j)
          if (j % b != u) denom += std::exp(sim(rows[j]));
        total += std::log(denom) - sim(rows[vp * b + u]);
        ++terms;
      }
    }
  }
  return total / terms;
}

Outcome loss_oracles() {
  Checks c;
  Rng rng(derive_seed(3, "acceptance", 3));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 6, nx = 3 + trial % 5, ny = 4 + trial % 7;
    const Matrix ex = random_matrix(nx, d, rng), ey = random_matrix(ny, d, rng);
    const auto x0 = random_vector(d, rng), vx = random_vector(d, rng), vy = random_vector(d, rng);
    RecTargets tg;
    if (trial % 3 != 1) tg.x = static_cast<int>(rng.uniform_int(kFirstItem, nx - 1));
    if (trial % 3 != 0) tg.y = static_cast<int>(rng.uniform_int(kFirstItem, ny - 1));
    double want = 0.0;
    if (tg.x >= 0) want += oracle_ce(x0, ex, tg.x) + oracle_ce(vx, ex, tg.x);
    if (tg.y >= 0) want += oracle_ce(x0, ey, tg.y) + oracle_ce(vy, ey, tg.y);
    const double err = std::abs(rec_loss(x0, vx, vy, tg, ex, ey) - want);
    worst = std::max(worst, err);
    c.expect(err <= 1e-10, "rec_loss trial " + std::to_string(trial));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 2 + trial % 4, d = 1 + trial % 5;
    const Matrix hc = random_matrix(b, d, rng), hd = random_matrix(b, d, rng),
                 ha = random_matrix(b, d, rng);
    const bool normalize = trial % 2 == 0;
    const double err = std::abs(tri_view_cl_loss(hc, hd, ha, normalize) -
                                oracle_cl(hc, hd, ha, normalize));
    worst = std::max(worst, err);
    c.expect(err <= 1e-10, "tri_view_cl_loss trial " + std::to_string(trial));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 1 + trial % 5, d = 1 + trial % 7;
    const Matrix a = random_matrix(b, d, rng), x = random_matrix(b, d, rng);
    double want = 0.0;
    for (int r = 0; r < b; ++r)
      for (int k = 0; k < d; ++k) want += (a(r, k) - x(r, k)) * (a(r, k) - x(r, k));
    const double err = std::abs(diffusion_loss(a, x) - want / b);
    worst = std::max(worst, err);
    c.expect(err <= 1e-10, "diffusion_loss trial " + std::to_string(trial));
  }
  for (int n : {2, 10, 1000}) {
    const std::vector<double> logits(n + kFirstItem, -0.8);
    c.expect(std::abs(cross_entropy(logits, kFirstItem + n / 3) - std::log(n)) <= 1e-10,
             "uniform CE n=" + std::to_string(n));
  }
  for (int b : {2, 4, 16, 64}) {
    const Matrix same(b, 5, 1.0 / std::sqrt(5.0));
    c.expect(std::abs(tri_view_cl_loss(same, same, same) - std::log(3.0 * (b - 1) + 1.0)) <= 1e-10,
             "equal-similarity CL B=" + std::to_string(b));
  }
  return {c.ok(), c.summary() + ", max oracle error " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4. Metric oracle

Outcome metric_oracle() {
  Checks c;
  Rng rng(derive_seed(4, "acceptance", 4));
  double worst = 0.0;
  for (int list = 0; list < 1000; ++list) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 49));
    std::vector<int> ranks(n);
    for (int& r : ranks) r = static_cast<int>(rng.uniform_int(1, list % 2 == 0 ? 20 : 1000));
    double mrr = 0, n5 = 0, n10 = 0, h5 = 0, h10 = 0;
    for (int r : ranks) {
      if (r <= 10) mrr += 1.0 / r, h10 += 1, n10 += 1.0 / std::log2(r + 1.0);
      if (r <= 5) h5 += 1, n5 += 1.0 / std::log2(r + 1.0);
    }
    const DomainMetrics m = compute_metrics(ranks);
    for (auto [got, want] : {std::pair{m.mrr, mrr}, {m.ndcg5, n5}, {m.ndcg10, n10},
                             {m.hr5, h5}, {m.hr10, h10}})
      worst = std::max(worst, std::abs(got - want / n));
    c.expect(m.hr5 <= m.hr10 && m.ndcg5 <= m.ndcg10 && m.mrr <= m.hr10,
             "inequalities list " + std::to_string(list));
  }
  c.expect(worst <= 1e-12, "metric values");

  // Uniform random scores over 1 + 999 candidates: E[MRR@10] = H_10 / 1000.
  const int users = 3000;
  std::vector<HeldOut> cases;
  for (int u = 0; u < users; ++u) {
    HeldOut h;
    h.history.user_index = u;
    h.history.items = {{kFirstItem, Domain::X}};
    h.target = {kFirstItem + 1 + u % 700, Domain::X};
    cases.push_back(h);
  }
  const ScoreFn random = [](const UserSequence&, Domain, uint64_t seed) {
    Rng r(seed);
    std::vector<double> s(kFirstItem + 1500);
    for (double& v : s) v = r.uniform();
    return s;
  };
  EvalConfig cfg;
  cfg.num_negatives = 999;
  const MetricReport r = evaluate(cases, random, {1500, 0}, cfg);
  double h10 = 0.0, h10_sq = 0.0;
  for (int k = 1; k <= 10; ++k) h10 += 1.0 / k, h10_sq += 1.0 / (k * k);
  const double mean = h10 / 1000.0, sigma = std::sqrt((h10_sq / 1000.0 - mean * mean) / users);
  c.expect(std::abs(mean - 0.00293) < 5e-6, "analytic MRR");
  c.expect(std::abs(r.x.mrr - mean) <= 3 * sigma, "random-scorer MRR");
  return {c.ok(), c.summary() + ", max metric error " + fmt("%.1e", worst) + ", random MRR " +
                      fmt("%.5f", r.x.mrr) + " vs " + fmt("%.5f", mean) + " (3 sigma " +
                      fmt("%.5f", 3 * sigma) + ")"};
}

// ---------------------------------------------------------------------------
// 5. Overfit smoke test

Outcome overfit() {
  SyntheticConfig sc;
  sc.n_users = 8;
  sc.n_items_x = sc.n_items_y = 20;
  sc.n_shared_interests = 2;
  sc.n_specific_interests = 2;
  sc.cluster_size = 5;
  FilterConfig keep_all;
  keep_all.min_user_interactions = 1;
  keep_all.min_per_domain = 1;
  const DatasetSplit split = filter_and_split(generate_synthetic(sc).events, keep_all);
  ModelConfig m;
  m.d = 32;
  m.vocab_x = split.vocab_x.size();
  m.vocab_y = split.vocab_y.size();
  TrainConfig tc;
  tc.batch_size = 8;
  tc.epochs = 500;  // one step per epoch
  tc.warmup_epochs = 0;
  tc.lr = 0.01;
  const TrainState state = fit(split, m, tc);

  // Each user's last training item given the items before it.
  std::vector<HeldOut> cases;
  for (const UserSequence& u : split.train) {
    HeldOut h;
    h.history = u;
    h.history.items.pop_back();
    h.target = u.items.back();
    cases.push_back(h);
  }
  EvalConfig ec;
  ec.num_negatives = 0;
  ec.exclude_history = false;
  std::vector<RankedCase> ranked;
  evaluate(cases, model_scorer(state.params, 0), {m.vocab_x - kFirstItem, m.vocab_y - kFirstItem},
           ec, &ranked);
  int top = 0;
  for (const RankedCase& r : ranked) top += r.rank == 1;
  const double hr1 = static_cast<double>(top) / ranked.size();
  const bool ok = split.user_ids.size() == 8 && state.global_step == 500 && hr1 >= 0.9;
  return {ok, std::to_string(split.user_ids.size()) + " users, " +
                  std::to_string(state.global_step) + " steps, training-target HR@1 " +
                  fmt("%.3f", hr1)};
}

// ---------------------------------------------------------------------------
// 6-8. Synthetic benchmark

struct Benchmark {
  Settings settings;
  DatasetSplit split;
  std::optional<ParameterSet> full_model;  // Full variant, first seed
};

Benchmark& benchmark() {
  static Benchmark* b = [] {
    auto* out = new Benchmark;
    apply_config_file(out->settings, CROSSDIFF_BENCHMARK_CONFIG);
    out->split = filter_and_split(generate_synthetic(out->settings.synth).events,
                                  out->settings.filter);
    return out;
  }();
  return *b;
}

constexpr uint64_t kBenchmarkSeeds[] = {1, 2, 3};

AblationResult train_benchmark(Variant v, uint64_t seed, ParameterSet* best) {
  Benchmark& b = benchmark();
  TrainConfig tc = b.settings.train;
  tc.seed = seed;
  EvalConfig ec = b.settings.eval;
  ec.seed = seed;
  return run_ablation(v, b.split, b.settings.model, tc, ec, best);
}

const ParameterSet& full_model() {
  Benchmark& b = benchmark();
  if (!b.full_model) {
    ParameterSet p;
    train_benchmark(Variant::kFull, kBenchmarkSeeds[0], &p);
    b.full_model = std::move(p);
  }
  return *b.full_model;
}

EvalConfig benchmark_eval() {
  EvalConfig ec = benchmark().settings.eval;
  ec.seed = kBenchmarkSeeds[0];
  return ec;
}

Outcome guidance_ablation() {
  Benchmark& b = benchmark();
  std::map<Variant, double> sum;
  std::ostringstream per_seed;
  for (uint64_t seed : kBenchmarkSeeds) {
    for (Variant v : {Variant::kDiff, Variant::kDiffDEG, Variant::kFull}) {
      ParameterSet p;
      const bool keep = v == Variant::kFull && seed == kBenchmarkSeeds[0];
      const AblationResult r = train_benchmark(v, seed, keep ? &p : nullptr);
      if (keep) b.full_model = std::move(p);
      sum[v] += r.test.headline();
      per_seed << " " << variant_name(v) << "@" << seed << "=" << fmt("%.4f", r.test.headline());
      std::cout << "  seed " << seed << " " << variant_name(v) << " NDCG@10 "
                << fmt("%.4f", r.test.headline()) << " (best epoch " << r.best_epoch << ")\n"
                << std::flush;
    }
  }
  const double n = std::size(kBenchmarkSeeds);
  const double diff = sum[Variant::kDiff] / n, deg = sum[Variant::kDiffDEG] / n,
               full = sum[Variant::kFull] / n;
  const bool ok = full >= 1.10 * diff && deg >= diff;
  return {ok, std::to_string(b.split.user_ids.size()) + " users; mean NDCG@10 Diff " +
                  fmt("%.4f", diff) + ", Diff+DE+G " + fmt("%.4f", deg) + ", Full " +
                  fmt("%.4f", full) + " (Full/Diff " + fmt("%.3f", full / diff) + ")"};
}

Outcome robustness() {
  const std::vector<double> rates = {0.0, 0.1, 0.2, 0.3};
  const auto rows = noise_robustness(benchmark().split.test, full_model(), rates, benchmark_eval());
  Checks c;
  c.expect(rows.size() == rates.size(), "row count");
  c.expect(rows[0].retained_fraction == 1.0, "rate 0 retains exactly 1.0");
  std::string trace;
  for (size_t i = 0; i < rows.size(); ++i) {
    trace += " " + fmt("%.1f", rows[i].rate) + ":" + fmt("%.3f", rows[i].retained_fraction);
    if (i > 0)
      c.expect(rows[i].retained_fraction <= rows[i - 1].retained_fraction + 0.03,
               "non-increasing at rate " + fmt("%.1f", rows[i].rate));
  }
  std::cout << "  reference: the published model retains about 85% of its original "
               "performance at 30% noise; this run retains "
            << fmt("%.1f", 100 * rows.back().retained_fraction) << "%\n";
  return {c.ok(), c.summary() + ", retained" + trace};
}

Outcome step_sweep_check() {
  const ParameterSet& p = full_model();
  const EvalConfig ec = benchmark_eval();
  const int T = p.cfg.T;
  EvalConfig full_cfg = ec;
  full_cfg.n_steps = 0;
  const MetricReport full = evaluate(benchmark().split.test, p, full_cfg);
  const std::vector<int> steps = {1, 2, 5, 10, 20, T};
  const auto rows = step_sweep(benchmark().split.test, p, steps, ec);
  Checks c;
  c.expect(rows.back().report == full, "n_steps=T equals full evaluation");
  std::string trace;
  for (const SweepRow& r : rows) {
    const double rel = r.report.headline() / full.headline() - 1.0;
    trace += " " + std::to_string(r.n_steps) + ":" + fmt("%.4f", r.report.headline());
    if (r.n_steps >= 5)
      c.expect(std::abs(rel) <= 0.10, "n_steps=" + std::to_string(r.n_steps) + " within 10%");
  }
  return {c.ok(), c.summary() + ", full " + fmt("%.4f", full.headline()) + ", NDCG@10 by steps" +
                      trace};
}

// ---------------------------------------------------------------------------
// 9. Pipeline determinism

Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / "crossdiff_acceptance_pipeline";
  fs::remove_all(root);
  Settings s;
  s.synth.n_users = 40;
  s.synth.n_items_x = s.synth.n_items_y = 60;
  s.synth.n_shared_interests = 3;
  s.synth.n_specific_interests = 2;
  s.synth.cluster_size = 6;
  s.model.d = 16;
  s.model.n_heads = 2;
  s.model.T = 10;
  s.train.epochs = 4;
  s.train.warmup_epochs = 1;
  s.train.batch_size = 8;
  s.train.seed = 5;
  s.eval.num_negatives = 20;
  std::ostringstream log;
  Checks c;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    cmd_synth(s, dir / "synth", log);
    cmd_prepare(dir / "synth" / "events.tsv", LogFormat::kTsv, dir / "data", s, log);
    cmd_train(dir / "data", s, dir / "train", {}, log);
    cmd_eval(dir / "train", dir / "data", "test", s, dir / "eval", log);
  }
  for (const char* file : {"eval/report.csv", "eval/report.txt", "train/metrics.log",
                           "data/stats.txt", "train/best/params.bin"})
    c.expect(slurp(root / "a" / file) == slurp(root / "b" / file) &&
                 !slurp(root / "a" / file).empty(),
             std::string(file) + " identical");

  // Interrupted after one epoch, then resumed.
  cmd_train(root / "a" / "data", s, root / "split", {true, 1}, log);
  cmd_train(root / "a" / "data", s, root / "split", {true, -1}, log);
  c.expect(slurp(root / "a" / "train" / "metrics.log") == slurp(root / "split" / "metrics.log"),
           "resumed losses identical");
  c.expect(slurp(root / "a" / "train" / "last" / "params.bin") ==
               slurp(root / "split" / "last" / "params.bin"),
           "resumed parameters identical");
  fs::remove_all(root);
  return {c.ok(), c.summary() + " (reports, logs and checkpoints byte-compared)"};
}

// ---------------------------------------------------------------------------
// 10. Preprocessing conformance

std::string named(const Token& t, const DatasetSplit& split) {
  return std::string(t.domain == Domain::X ? "X:" : "Y:") + split.vocab(t.domain).item_id(t.item);
}

std::vector<std::string> named(const UserSequence& s, const DatasetSplit& split) {
  std::vector<std::string> out;
  for (const Token& t : s.items) out.push_back(named(t, split));
  return out;
}

Outcome preprocessing() {
  const IngestResult parsed = parse_log(testing::fixture_log(), LogFormat::kTsv);
  const DatasetSplit split = filter_and_split(parsed.events);
  const auto expected = testing::fixture_expected_users();
  Checks c;
  c.expect(parsed.errors.size() == 1, "one malformed row");
  c.expect(split.user_ids.size() == expected.size(), "surviving users");
  for (size_t u = 0; u < expected.size() && u < split.user_ids.size(); ++u) {
    const auto& want = expected[u].sequence;
    const size_t n = want.size();
    const std::string who = expected[u].user_id;
    c.expect(split.user_ids[u] == who, who + " order");
    c.expect(named(split.train[u], split) == std::vector<std::string>(want.begin(), want.end() - 2),
             who + " train");
    c.expect(named(split.validation[u].history, split) == named(split.train[u], split) &&
                 named(split.validation[u].target, split) == want[n - 2],
             who + " validation");
    c.expect(named(split.test[u].history, split) ==
                     std::vector<std::string>(want.begin(), want.end() - 1) &&
                 named(split.test[u].target, split) == want[n - 1],
             who + " test");
  }
  c.expect(split.vocab_x.num_items() == 16 && split.vocab_y.num_items() == 19, "vocabulary sizes");
  for (int i = 0; i < 16 && i < split.vocab_x.num_items(); ++i)
    c.expect(split.vocab_x.item_id(kFirstItem + i) == testing::fixture_vocab_x()[i], "vocab X");
  for (int i = 0; i < 19 && i < split.vocab_y.num_items(); ++i)
    c.expect(split.vocab_y.item_id(kFirstItem + i) == testing::fixture_vocab_y()[i], "vocab Y");
  return {c.ok(), c.summary() + ", users kept " + std::to_string(split.user_ids.size()) +
                      " of 6"};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "diffusion math", 10, diffusion_math},
      {2, "gradient correctness", 60, gradient_check},
      {3, "loss oracles", 0, loss_oracles},
      {4, "metric oracle", 0, metric_oracle},
      {5, "overfit smoke test", 120, overfit},
      {6, "guidance ablation", 900, guidance_ablation},
      {7, "robustness harness", 0, robustness},
      {8, "step sweep", 0, step_sweep_check},
      {9, "pipeline determinism", 0, pipeline_determinism},
      {10, "preprocessing conformance", 0, preprocessing},
  };
  return all;
}

int run(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const Criterion& cr : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), cr.id) == wanted.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_seconds > 0 && sec > cr.limit_seconds) {
      out.pass = false;
      out.detail += "; runtime over " + fmt("%.0f", cr.limit_seconds) + " s";
    }
    all_pass = all_pass && out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << cr.id << " (" << cr.name
              << "): " << out.detail << " [" << fmt("%.1f", sec) << " s]\n"
              << std::flush;
  }
  return all_pass ? 0 : 1;
}

}  // namespace
}  // namespace crossdiff

int main(int argc, char** argv) { return crossdiff::run(argc, argv); }
