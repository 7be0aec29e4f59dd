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

// Guided-inference scoring, sampled ranking metrics and the robustness,
// step-sweep and ablation harnesses.

#ifndef CROSSDIFF_EVAL_HPP_
#define CROSSDIFF_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crossdiff/dataset.hpp"
#include "crossdiff/network.hpp"
#include "crossdiff/trainer.hpp"

namespace crossdiff {

struct EvalConfig {
  /// Denoiser calls per user; 0 means the full schedule.
  int n_steps = 0;
  /// Sampled negatives per test case; 0 ranks against every eligible item.
  int num_negatives = 999;
  bool exclude_history = true;
  uint64_t seed = 42;
  bool parallel = true;
};

struct DomainMetrics {
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double hr5 = 0.0;
  double hr10 = 0.0;
  int n_users = 0;
  bool operator==(const DomainMetrics&) const = default;
};

struct MetricReport {
  DomainMetrics x;
  DomainMetrics y;
  std::string fingerprint;

  const DomainMetrics& of(Domain d) const { return d == Domain::X ? x : y; }
  /// Model-selection metric: NDCG@10 averaged over the domains that have
  /// test cases.
  double headline() const;
  bool operator==(const MetricReport&) const = default;
};

/// H@k = mean(rank <= k), N@k = mean(rank <= k ? 1 / log2(rank + 1) : 0),
/// MRR = mean(rank <= 10 ? 1 / rank : 0).
DomainMetrics compute_metrics(std::span<const int> ranks);

/// 1 + the number of candidates scoring at least the positive's score
/// (ties count against the positive).
int rank_of_positive(std::span<const double> scores, int positive_index);

/// `k` distinct items drawn uniformly from [kFirstItem, vocab_size) minus the
/// positive and, optionally, the history. k == 0 returns every eligible item.
std::vector<int> sample_negatives(int positive, int vocab_size,
                                  std::span<const int> history, int k,
                                  uint64_t seed, bool exclude_history = true);

/// Scores for every row of the target domain's table given a history.
using ScoreFn = std::function<std::vector<double>(
    const UserSequence& history, Domain target_domain, uint64_t seed)>;

/// Logits (x0_hat + view_target) . E_target with reserved rows at -inf.
std::vector<double> item_scores(const UserSequence& history, Domain target_domain,
                                const ParameterSet& params, int n_steps,
                                uint64_t seed);

/// Softmax of item_scores; reserved rows get probability 0.
std::vector<double> score_user(const UserSequence& history, Domain target_domain,
                               const ParameterSet& params, int n_steps,
                               uint64_t seed);

ScoreFn model_scorer(const ParameterSet& params, int n_steps);

/// Per-case rank records, kept for tests and reports.
struct RankedCase {
  int user_index = 0;
  Domain domain = Domain::X;
  int rank = 0;
};

MetricReport evaluate(std::span<const HeldOut> cases, const ScoreFn& scorer,
                      const ItemCounts& items, const EvalConfig& cfg,
                      std::vector<RankedCase>* ranked = nullptr);
MetricReport evaluate(std::span<const HeldOut> cases, const ParameterSet& params,
                      const EvalConfig& cfg);

struct RobustnessRow {
  double rate = 0.0;
  MetricReport report;
  double retained_fraction = 0.0;
  double edit_fraction = 0.0;
};

/// Perturbs every history with inject_noise at each rate and re-evaluates.
std::vector<RobustnessRow> noise_robustness(std::span<const HeldOut> cases,
                                            const ParameterSet& params,
                                            std::span<const double> rates,
                                            const EvalConfig& cfg);

struct SweepRow {
  int n_steps = 0;
  MetricReport report;
};

std::vector<SweepRow> step_sweep(std::span<const HeldOut> cases,
                                 const ParameterSet& params,
                                 std::span<const int> step_counts,
                                 const EvalConfig& cfg);

struct AblationResult {
  Variant variant = Variant::kFull;
  uint64_t seed = 0;
  MetricReport validation;
  MetricReport test;
  int best_epoch = -1;
  /// Hash of the split and every seed; equal across variants of one run.
  std::string fingerprint;
};

/// Trains `variant` on split.train, selects the best validation epoch and
/// evaluates it on split.test.
/// `best`, when given, receives the selected parameters.
AblationResult run_ablation(Variant variant, const DatasetSplit& split,
                            const ModelConfig& model, const TrainConfig& train,
                            const EvalConfig& eval, ParameterSet* best = nullptr);

// ---------------------------------------------------------------------------
// Reports

std::string split_fingerprint(const DatasetSplit& split);

/// domain,metric,value,value_x100
void write_report_csv(std::ostream& out, const MetricReport& r);
void write_report_table(std::ostream& out, const MetricReport& r);
/// rate,domain,metric,value plus retained_fraction rows
void write_robustness_csv(std::ostream& out, std::span<const RobustnessRow> rows);
/// steps,domain,metric,value
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
/// variant,seed,domain,metric,value
void write_ablation_csv(std::ostream& out, std::span<const AblationResult> rows);

std::string format_value(double v);

}  // namespace crossdiff

#endif  // CROSSDIFF_EVAL_HPP_
