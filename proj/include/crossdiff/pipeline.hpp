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

// Subcommand implementations shared by the command-line tool and the
// acceptance tests. Each command writes its artifacts plus one run manifest.

#ifndef CROSSDIFF_PIPELINE_HPP_
#define CROSSDIFF_PIPELINE_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "crossdiff/config.hpp"
#include "crossdiff/eval.hpp"

namespace crossdiff {

inline constexpr const char* kCodeVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string config_text;
  std::string data_fingerprint;
  uint64_t seed = 0;
  std::string code_version = kCodeVersion;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
};

/// Writes `dir/manifest.json`.
void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m);
std::string utc_timestamp();

struct PrepareStats {
  int users_in = 0;
  int users = 0;
  int items_x = 0;
  int items_y = 0;
  long interactions_x = 0;
  long interactions_y = 0;
  double avg_length = 0.0;
  int row_errors = 0;
};

std::string format_prepare_stats(const PrepareStats& s);

PrepareStats cmd_prepare(const std::filesystem::path& input, LogFormat format,
                         const std::filesystem::path& out, const Settings& settings,
                         std::ostream& log);

/// events.tsv (interaction log) and interests.tsv (ground truth).
void cmd_synth(const Settings& settings, const std::filesystem::path& out,
               std::ostream& log);

struct TrainOptions {
  bool resume = false;
  /// Stop after this many epochs in this invocation (-1: all).
  int stop_after_epochs = -1;
};

TrainState cmd_train(const std::filesystem::path& data, const Settings& settings,
                     const std::filesystem::path& out, const TrainOptions& options,
                     std::ostream& log);

/// `ckpt` may be a checkpoint directory or a training output directory (its
/// best/ checkpoint is used). `part` is "test" or "valid".
MetricReport cmd_eval(const std::filesystem::path& ckpt,
                      const std::filesystem::path& data, const std::string& part,
                      const Settings& settings, const std::filesystem::path& out,
                      std::ostream& log);

std::vector<AblationResult> cmd_ablate(const std::filesystem::path& data,
                                       const Settings& settings,
                                       const std::vector<Variant>& variants,
                                       const std::vector<uint64_t>& seeds,
                                       const std::filesystem::path& out,
                                       std::ostream& log);

std::vector<RobustnessRow> cmd_robust(const std::filesystem::path& ckpt,
                                      const std::filesystem::path& data,
                                      const std::vector<double>& rates,
                                      const Settings& settings,
                                      const std::filesystem::path& out,
                                      std::ostream& log);

std::vector<SweepRow> cmd_sweep(const std::filesystem::path& ckpt,
                                const std::filesystem::path& data,
                                const std::vector<int>& steps,
                                const Settings& settings,
                                const std::filesystem::path& out, std::ostream& log);

/// Loads parameters from a checkpoint or a training output directory.
ParameterSet load_parameters(const std::filesystem::path& ckpt);

/// Rejects num_negatives larger than the smallest domain vocabulary.
void check_negatives(const DatasetSplit& split, const EvalConfig& eval);

}  // namespace crossdiff

#endif  // CROSSDIFF_PIPELINE_HPP_
