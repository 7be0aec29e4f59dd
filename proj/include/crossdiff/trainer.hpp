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

// Mini-batch training: per-user forward graphs, staged losses, Adam with a
// warm-up + cosine learning rate, checkpoints and deterministic resumption.

#ifndef CROSSDIFF_TRAINER_HPP_
#define CROSSDIFF_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crossdiff/autograd.hpp"
#include "crossdiff/dataset.hpp"
#include "crossdiff/diffusion.hpp"
#include "crossdiff/network.hpp"
#include "crossdiff/objectives.hpp"

namespace crossdiff {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 512;
  int epochs = 100;
  int warmup_epochs = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Decoupled decay; skips biases, layer norms and the padding rows.
  double weight_decay = 0.0;
  /// Global gradient-norm clip; 0 disables it.
  double grad_clip = 0.0;
  uint64_t seed = 42;
  double aug_rate = 0.2;
  bool normalize_views = true;
  LossWeights weights;
  /// Users per gradient shard; shards are reduced in a fixed order.
  int shard_size = 16;
  bool parallel = true;

  void validate() const;
};

/// Linear warm-up to lr over warmup_epochs, then cosine decay reaching 0 at
/// the final step.
double lr_at(long step, const TrainConfig& cfg, int steps_per_epoch);

struct AdamState {
  GradientBuffer m;
  GradientBuffer v;
  long t = 0;
};

AdamState init_adam(const ParameterSet& params);
void adam_update(ParameterSet& params, const GradientBuffer& grads,
                 AdamState& opt, double lr, const TrainConfig& cfg);

/// Random draws for one user at one step.
struct UserDraws {
  std::vector<int> steps;  // one per prefix example
  Matrix eps;              // examples x d
  AugmentOp op = AugmentOp::kCrop;
  uint64_t aug_seed = 0;
};

UserDraws draw_user(const ModelConfig& model, int examples, uint64_t seed,
                    long global_step, int user_index);

struct BatchResult {
  LossBreakdown loss;
  GradientBuffer grads;
  int examples = 0;
};

/// Losses over every prefix example of every user in `batch` and, when
/// `want_grads`, the gradient of l_total. `parallel` selects the OpenMP
/// driver; both drivers reduce in the same order and agree bitwise.
BatchResult compute_batch_loss(const ParameterSet& params,
                               std::span<const UserSequence> batch,
                               long global_step, bool warmup,
                               const TrainConfig& cfg, bool want_grads = true,
                               bool parallel = true);

struct EpochRecord {
  int epoch = 0;
  double validation = 0.0;
};

struct TrainState {
  ParameterSet params;
  AdamState opt;
  long global_step = 0;
  int epoch = 0;
  double best_metric = -1.0;
  int best_epoch = -1;
  ParameterSet best_params;
  std::vector<EpochRecord> history;
};

TrainState init_state(const ModelConfig& model, const TrainConfig& cfg);

struct StepResult {
  LossBreakdown loss;
  double lr = 0.0;
};

StepResult train_step(std::span<const UserSequence> batch, TrainState& state,
                      const TrainConfig& cfg, int steps_per_epoch);

/// Users with at least two training items, in user order.
std::vector<UserSequence> trainable_users(const DatasetSplit& split);

/// Epoch shuffle: a seeded permutation of [0, n).
std::vector<int> epoch_order(int n, uint64_t seed, int epoch);

using ValidateFn = std::function<double(const ParameterSet&)>;

struct FitOptions {
  /// Returns the model-selection metric; empty means no validation.
  ValidateFn validate;
  /// Checkpoint directory (last/ and best/); empty disables writing.
  std::filesystem::path out_dir;
  /// Continue from out_dir/last when it exists.
  bool resume = false;
  /// Stop after this many epochs in this call (-1: run to the end).
  int max_epochs_this_call = -1;
  /// Receives one line per step.
  std::ostream* metrics = nullptr;
};

TrainState fit(const DatasetSplit& split, const ModelConfig& model,
               const TrainConfig& cfg, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const AdamState* opt, const TrainState& state,
                     const TrainConfig& cfg);

struct LoadedCheckpoint {
  ParameterSet params;
  AdamState opt;
  bool has_optimizer = false;
  long global_step = 0;
  int epoch = 0;
  double best_metric = -1.0;
  int best_epoch = -1;
  std::vector<EpochRecord> history;
  uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

DiffusionSchedule schedule_for(const ModelConfig& model);

std::string metrics_header();
std::string metrics_line(long step, const StepResult& r);

}  // namespace crossdiff

#endif  // CROSSDIFF_TRAINER_HPP_
