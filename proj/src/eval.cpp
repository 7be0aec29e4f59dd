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

#include "crossdiff/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "crossdiff/diffusion.hpp"
#include "crossdiff/objectives.hpp"
#include "crossdiff/rng.hpp"

namespace crossdiff {

double MetricReport::headline() const {
  double total = 0.0;
  int domains = 0;
  for (const DomainMetrics* m : {&x, &y}) {
    if (m->n_users == 0) continue;
    total += m->ndcg10;
    ++domains;
  }
  return domains == 0 ? 0.0 : total / domains;
}

DomainMetrics compute_metrics(std::span<const int> ranks) {
  if (ranks.empty()) throw std::invalid_argument("no ranks to aggregate");
  DomainMetrics m;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("ranks start at 1");
    const double gain = 1.0 / std::log2(r + 1.0);
    if (r <= 5) {
      m.hr5 += 1.0;
      m.ndcg5 += gain;
    }
    if (r <= 10) {
      m.hr10 += 1.0;
      m.ndcg10 += gain;
      m.mrr += 1.0 / r;
    }
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.ndcg5 /= n;
  m.ndcg10 /= n;
  m.hr5 /= n;
  m.hr10 /= n;
  m.n_users = static_cast<int>(ranks.size());
  return m;
}

int rank_of_positive(std::span<const double> scores, int positive_index) {
  const double s = scores[positive_index];
  if (std::isnan(s)) return static_cast<int>(scores.size());
  int rank = 1;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (i != positive_index && !(scores[i] < s)) ++rank;
  return rank;
}

std::vector<int> sample_negatives(int positive, int vocab_size,
                                  std::span<const int> history, int k,
                                  uint64_t seed, bool exclude_history) {
  if (k < 0) throw std::invalid_argument("negative sample count");
  std::unordered_set<int> banned{positive};
  if (exclude_history) banned.insert(history.begin(), history.end());
  std::vector<int> eligible;
  for (int i = kFirstItem; i < vocab_size; ++i)
    if (!banned.contains(i)) eligible.push_back(i);
  if (k == 0) return eligible;
  const int n = static_cast<int>(eligible.size());
  if (n < k)
    throw std::invalid_argument("only " + std::to_string(n) +
                                " eligible negatives for " + std::to_string(k) +
                                " requested");
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(k);
  return eligible;
}

std::vector<double> item_scores(const UserSequence& history, Domain target_domain,
                                const ParameterSet& params, int n_steps,
                                uint64_t seed) {
  if (history.items.empty()) throw std::invalid_argument("empty history");
  const GuidanceBundle bundle = compute_guidance(history, params);
  const DiffusionSchedule sched = schedule_for(params.cfg);
  const DenoiseFn denoiser = [&](std::span<const double> x_t, int t) {
    return denoise(x_t, t, bundle.denoiser_rows, params).x0_hat;
  };
  std::vector<double> v = guided_sample(denoiser, sched, params.cfg.d, seed,
                                        n_steps == 0 ? sched.T : n_steps);
  const std::vector<double>& view = bundle.view(target_domain);
  for (size_t i = 0; i < v.size(); ++i) v[i] += view[i];
  std::vector<double> logits =
      item_logits(v, params.values[params.table(target_domain)]);
  for (int i = 0; i < kFirstItem; ++i)
    logits[i] = -std::numeric_limits<double>::infinity();
  return logits;
}

std::vector<double> score_user(const UserSequence& history, Domain target_domain,
                               const ParameterSet& params, int n_steps,
                               uint64_t seed) {
  std::vector<double> z = item_scores(history, target_domain, params, n_steps, seed);
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

ScoreFn model_scorer(const ParameterSet& params, int n_steps) {
  return [&params, n_steps](const UserSequence& h, Domain d, uint64_t seed) {
    return item_scores(h, d, params, n_steps, seed);
  };
}

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string eval_fingerprint(const EvalConfig& cfg) {
  const std::string text = "n_steps=" + std::to_string(cfg.n_steps) +
                           ";num_negatives=" + std::to_string(cfg.num_negatives) +
                           ";exclude_history=" + std::to_string(cfg.exclude_history) +
                           ";seed=" + std::to_string(cfg.seed);
  return hex64(fnv1a64(text));
}

// Negatives follow `reference` (the unperturbed history) so that only the
// model input changes between perturbed and clean runs.
MetricReport evaluate_impl(std::span<const HeldOut> cases,
                           std::span<const HeldOut> reference, const ScoreFn& scorer,
                           const ItemCounts& items, const EvalConfig& cfg,
                           std::vector<RankedCase>* ranked) {
  if (cases.empty()) throw std::invalid_argument("nothing to evaluate");
  const int n = static_cast<int>(cases.size());
  std::vector<int> ranks(n, 0);
  std::vector<std::string> errors(n);

#pragma omp parallel for schedule(dynamic, 4) if (cfg.parallel)
  for (int i = 0; i < n; ++i) {
    try {
      const HeldOut& c = cases[i];
      const Domain dm = c.target.domain;
      const uint64_t user_seed =
          derive_seed(cfg.seed, "eval", static_cast<uint64_t>(c.history.user_index));
      std::vector<int> seen;
      for (const Token& tok : reference[i].history.items)
        if (tok.domain == dm) seen.push_back(tok.item);
      std::vector<int> candidates{c.target.item};
      const std::vector<int> negatives =
          sample_negatives(c.target.item, items.of(dm) + kFirstItem, seen,
                           cfg.num_negatives, derive_seed(user_seed, "negatives"),
                           cfg.exclude_history);
      candidates.insert(candidates.end(), negatives.begin(), negatives.end());
      const std::vector<double> scores =
          scorer(c.history, dm, derive_seed(user_seed, "sample"));
      std::vector<double> picked(candidates.size());
      for (size_t j = 0; j < candidates.size(); ++j) picked[j] = scores.at(candidates[j]);
      ranks[i] = rank_of_positive(picked, 0);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty())
      throw std::runtime_error("evaluating user " +
                               std::to_string(cases[i].history.user_index) + ": " +
                               errors[i]);

  std::vector<int> per_domain[2];
  for (int i = 0; i < n; ++i) {
    per_domain[domain_index(cases[i].target.domain)].push_back(ranks[i]);
    if (ranked != nullptr)
      ranked->push_back({cases[i].history.user_index, cases[i].target.domain, ranks[i]});
  }
  MetricReport report;
  if (!per_domain[0].empty()) report.x = compute_metrics(per_domain[0]);
  if (!per_domain[1].empty()) report.y = compute_metrics(per_domain[1]);
  report.fingerprint = eval_fingerprint(cfg);
  return report;
}

ItemCounts counts_of(const ParameterSet& p) {
  return {p.cfg.vocab_x - kFirstItem, p.cfg.vocab_y - kFirstItem};
}

// n_steps = 0 means the full schedule; spell it out so the fingerprint of
// an explicit T matches.
EvalConfig resolve_steps(EvalConfig cfg, const ParameterSet& params) {
  if (cfg.n_steps == 0) cfg.n_steps = params.cfg.T;
  return cfg;
}

}  // namespace

MetricReport evaluate(std::span<const HeldOut> cases, const ScoreFn& scorer,
                      const ItemCounts& items, const EvalConfig& cfg,
                      std::vector<RankedCase>* ranked) {
  return evaluate_impl(cases, cases, scorer, items, cfg, ranked);
}

MetricReport evaluate(std::span<const HeldOut> cases, const ParameterSet& params,
                      const EvalConfig& config) {
  const EvalConfig cfg = resolve_steps(config, params);
  return evaluate(cases, model_scorer(params, cfg.n_steps), counts_of(params), cfg);
}

std::vector<RobustnessRow> noise_robustness(std::span<const HeldOut> cases,
                                            const ParameterSet& params,
                                            std::span<const double> rates,
                                            const EvalConfig& config) {
  const EvalConfig cfg = resolve_steps(config, params);
  const ItemCounts items = counts_of(params);
  const ScoreFn scorer = model_scorer(params, cfg.n_steps);
  std::vector<RobustnessRow> rows;
  double base = 0.0;
  bool have_base = false;
  for (double rate : rates) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("noise rate outside [0, 1)");
    std::vector<HeldOut> noisy(cases.begin(), cases.end());
    double edit_total = 0.0;
    const uint64_t rate_seed = derive_seed(cfg.seed, "noise", std::bit_cast<uint64_t>(rate));
    for (HeldOut& h : noisy) {
      const int len = h.history.length();
      NoiseResult r = inject_noise(h.history, rate, items, params.cfg.max_seq_len,
                                   derive_seed(rate_seed, "user",
                                               static_cast<uint64_t>(h.history.user_index)));
      edit_total += static_cast<double>(r.edits) / len;
      h.history = std::move(r.sequence);
    }
    RobustnessRow row;
    row.rate = rate;
    row.report = evaluate_impl(noisy, cases, scorer, items, cfg, nullptr);
    row.edit_fraction = edit_total / static_cast<double>(noisy.size());
    if (!have_base) {
      // The first rate (normally 0) is the reference point.
      base = row.report.headline();
      have_base = true;
    }
    const double value = row.report.headline();
    row.retained_fraction = base > 0.0 ? value / base : (value == base ? 1.0 : 0.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> step_sweep(std::span<const HeldOut> cases,
                                 const ParameterSet& params,
                                 std::span<const int> step_counts,
                                 const EvalConfig& cfg) {
  std::vector<SweepRow> rows;
  for (int n : step_counts) {
    if (n < 1 || n > params.cfg.T)
      throw std::invalid_argument("step count " + std::to_string(n) + " outside [1, T]");
    EvalConfig c = cfg;
    c.n_steps = n;
    rows.push_back({n, evaluate(cases, params, c)});
  }
  return rows;
}

std::string split_fingerprint(const DatasetSplit& split) {
  uint64_t h = fnv1a64("split");
  for (const UserSequence& s : split.train) h = fnv1a64(format_sequence(s) + "\n", h);
  for (const auto* part : {&split.validation, &split.test})
    for (const HeldOut& c : *part)
      h = fnv1a64(format_sequence(c.history) + "|" +
                      std::to_string(c.target.item) + domain_name(c.target.domain) + "\n",
                  h);
  h = fnv1a64(std::to_string(split.vocab_x.size()) + "/" +
                  std::to_string(split.vocab_y.size()),
              h);
  return hex64(h);
}

AblationResult run_ablation(Variant variant, const DatasetSplit& split,
                            const ModelConfig& model, const TrainConfig& train,
                            const EvalConfig& eval, ParameterSet* best) {
  ModelConfig m = model;
  m.variant = variant;
  m.vocab_x = split.vocab_x.size();
  m.vocab_y = split.vocab_y.size();
  FitOptions options;
  options.validate = [&](const ParameterSet& p) {
    return evaluate(split.validation, p, eval).headline();
  };
  const TrainState state = fit(split, m, train, options);
  AblationResult r;
  r.variant = variant;
  r.seed = train.seed;
  r.best_epoch = state.best_epoch;
  r.validation = evaluate(split.validation, state.best_params, eval);
  r.test = evaluate(split.test, state.best_params, eval);
  r.fingerprint = hex64(fnv1a64(split_fingerprint(split) + ";train_seed=" +
                                std::to_string(train.seed) + ";" +
                                r.test.fingerprint));
  if (best != nullptr) *best = state.best_params;
  return r;
}

// ---------------------------------------------------------------------------

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.8f", v);
  return buf;
}

namespace {

struct MetricField {
  const char* name;
  double DomainMetrics::*field;
};

constexpr MetricField kFields[] = {{"MRR", &DomainMetrics::mrr},
                                   {"NDCG@5", &DomainMetrics::ndcg5},
                                   {"NDCG@10", &DomainMetrics::ndcg10},
                                   {"HR@5", &DomainMetrics::hr5},
                                   {"HR@10", &DomainMetrics::hr10}};

std::string x100(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricReport& r) {
  out << "domain,metric,value,value_x100\n";
  for (Domain d : {Domain::X, Domain::Y}) {
    const DomainMetrics& m = r.of(d);
    if (m.n_users == 0) continue;
    for (const auto& f : kFields)
      out << domain_name(d) << ',' << f.name << ',' << format_value(m.*f.field) << ','
          << x100(m.*f.field) << '\n';
    out << domain_name(d) << ",users," << m.n_users << ',' << m.n_users << '\n';
  }
}

void write_report_table(std::ostream& out, const MetricReport& r) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %7s %8s %8s %8s %8s %8s\n", "domain",
                "users", "MRR", "N@5", "N@10", "H@5", "H@10");
  out << line;
  for (Domain d : {Domain::X, Domain::Y}) {
    const DomainMetrics& m = r.of(d);
    std::snprintf(line, sizeof(line), "%-6s %7d %8.2f %8.2f %8.2f %8.2f %8.2f\n",
                  domain_name(d), m.n_users, 100 * m.mrr, 100 * m.ndcg5,
                  100 * m.ndcg10, 100 * m.hr5, 100 * m.hr10);
    out << line;
  }
  out << "(values x100; headline NDCG@10 = " << x100(r.headline()) << ")\n";
}

void write_robustness_csv(std::ostream& out, std::span<const RobustnessRow> rows) {
  out << "rate,domain,metric,value\n";
  for (const RobustnessRow& row : rows) {
    const std::string rate = format_value(row.rate);
    for (Domain d : {Domain::X, Domain::Y}) {
      const DomainMetrics& m = row.report.of(d);
      if (m.n_users == 0) continue;
      for (const auto& f : kFields)
        out << rate << ',' << domain_name(d) << ',' << f.name << ','
            << format_value(m.*f.field) << '\n';
    }
    out << rate << ",all,NDCG@10," << format_value(row.report.headline()) << '\n';
    out << rate << ",all,retained_fraction," << format_value(row.retained_fraction) << '\n';
    out << rate << ",all,edit_fraction," << format_value(row.edit_fraction) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "steps,domain,metric,value\n";
  for (const SweepRow& row : rows) {
    for (Domain d : {Domain::X, Domain::Y}) {
      const DomainMetrics& m = row.report.of(d);
      if (m.n_users == 0) continue;
      for (const auto& f : kFields)
        out << row.n_steps << ',' << domain_name(d) << ',' << f.name << ','
            << format_value(m.*f.field) << '\n';
    }
    out << row.n_steps << ",all,NDCG@10," << format_value(row.report.headline()) << '\n';
  }
}

void write_ablation_csv(std::ostream& out, std::span<const AblationResult> rows) {
  out << "variant,seed,domain,metric,value\n";
  for (const AblationResult& r : rows) {
    for (Domain d : {Domain::X, Domain::Y}) {
      const DomainMetrics& m = r.test.of(d);
      if (m.n_users == 0) continue;
      for (const auto& f : kFields)
        out << variant_name(r.variant) << ',' << r.seed << ',' << domain_name(d) << ','
            << f.name << ',' << format_value(m.*f.field) << '\n';
    }
    out << variant_name(r.variant) << ',' << r.seed << ",all,NDCG@10,"
        << format_value(r.test.headline()) << '\n';
  }
}

}  // namespace crossdiff
