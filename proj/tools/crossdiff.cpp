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

// Command-line entry point: prepare, synth, train, eval, ablate, robust, sweep.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crossdiff/config.hpp"
#include "crossdiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace crossdiff;

namespace {

constexpr const char* kSchemas = R"(Output files
  report.csv      domain,metric,value,value_x100  (domain X|Y; metric MRR,
                  NDCG@5,NDCG@10,HR@5,HR@10, plus a users row)
  metrics.log     step,l_diff,l_rec,l_tri_cl,l_total,lr  (one row per step)
  ablation.csv    variant,seed,domain,metric,value  (test split; domain all
                  holds the headline NDCG@10)
  summary.csv     variant,mean_ndcg10,relative_to_diff
  robustness.csv  rate,domain,metric,value  (domain all: NDCG@10,
                  retained_fraction, edit_fraction)
  sweep.csv       steps,domain,metric,value
  manifest.json   command, config, config_hash, data_fingerprint, seed,
                  code_version, started, finished, outputs

Settings are applied in order: defaults, --config file, CROSSDIFF_<KEY>
environment variables, then --set key=value and --<key> flags.
Randomness derives from `seed` through named streams (params, shuffle,
step, user, eval, negatives, sample, noise); the synthetic generator uses
synth_seed.)";

// Collects config sources shared by every subcommand.
struct SettingsOptions {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::optional<std::string>>> flags;
};

void add_settings_options(CLI::App* cmd, SettingsOptions& o) {
  cmd->add_option("--config", o.config, "flat key = value config file");
  cmd->add_option("--set", o.sets, "override a setting, key=value (repeatable)");
  const auto keys = setting_keys();
  o.flags.reserve(keys.size() + 1);
  for (const std::string& key : keys) {
    std::string flag = key;
    for (char& c : flag)
      if (c == '_') c = '-';
    o.flags.emplace_back(key, std::nullopt);
    std::string names = "--" + flag;
    if (key == "min_user_interactions") names += ",--min-interactions";
    cmd->add_option(names, o.flags.back().second, "see `crossdiff keys`")
        ->group("Settings");
  }
}

Settings resolve(const SettingsOptions& o) {
  Settings s;
  if (!o.config.empty()) apply_config_file(s, o.config);
  apply_env(s);
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : o.flags)
    if (value) apply_setting(s, key, *value);
  return s;
}

void require_outputs(const fs::path& dir, const std::vector<std::string>& files) {
  for (const std::string& f : files)
    if (!fs::exists(dir / f))
      throw std::runtime_error("expected output missing: " + (dir / f).string());
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  if (names.empty()) return {std::begin(kAllVariants), std::end(kAllVariants)};
  std::vector<Variant> out;
  for (const std::string& n : names) out.push_back(parse_variant(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossdiff: diffusion-based cross-domain sequential recommendation"};
  app.footer(kSchemas);
  app.require_subcommand(1);

  // prepare
  SettingsOptions prep_opts;
  std::string prep_input, prep_format = "tsv", prep_out;
  auto* prep = app.add_subcommand("prepare", "filter a raw log and write the leave-one-out split");
  prep->add_option("--input", prep_input, "raw interaction log")->required();
  prep->add_option("--format", prep_format, "tsv | csv")
      ->check(CLI::IsMember({"tsv", "csv"}));
  prep->add_option("--out", prep_out, "split directory")->required();
  add_settings_options(prep, prep_opts);

  // synth
  SettingsOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate the synthetic cross-domain log");
  synth->add_option("--out", synth_out, "output directory")->required();
  add_settings_options(synth, synth_opts);

  // train
  SettingsOptions train_opts;
  std::string train_data, train_out;
  bool train_resume = false;
  int train_stop = -1;
  auto* train = app.add_subcommand("train", "train a model on a prepared split");
  train->add_option("--data", train_data, "split directory")->required();
  train->add_option("--out", train_out, "run directory")->required();
  train->add_flag("--resume", train_resume, "continue from <out>/last");
  train->add_option("--stop-after-epochs", train_stop, "stop after this many epochs in this call");
  add_settings_options(train, train_opts);

  // eval
  SettingsOptions eval_opts;
  std::string eval_ckpt, eval_data, eval_out, eval_part = "test";
  auto* eval = app.add_subcommand("eval", "rank held-out items and write report.csv");
  eval->add_option("--ckpt", eval_ckpt, "checkpoint or run directory")->required();
  eval->add_option("--data", eval_data, "split directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--part", eval_part, "test | valid")->check(CLI::IsMember({"test", "valid"}));
  add_settings_options(eval, eval_opts);

  // ablate
  SettingsOptions abl_opts;
  std::string abl_data, abl_out;
  std::vector<std::string> abl_variants;
  std::vector<uint64_t> abl_seeds{1, 2, 3};
  auto* ablate = app.add_subcommand("ablate", "train and test every model variant over seeds");
  ablate->add_option("--data", abl_data, "split directory")->required();
  ablate->add_option("--out", abl_out, "report directory")->required();
  ablate->add_option("--variants", abl_variants, "variants to run (default all)");
  ablate->add_option("--seeds", abl_seeds, "seeds to average over");
  add_settings_options(ablate, abl_opts);

  // robust
  SettingsOptions rob_opts;
  std::string rob_ckpt, rob_data, rob_out;
  std::vector<double> rob_rates{0.0, 0.1, 0.2, 0.3};
  auto* robust = app.add_subcommand("robust", "evaluate under injected history noise");
  robust->add_option("--ckpt", rob_ckpt, "checkpoint or run directory")->required();
  robust->add_option("--data", rob_data, "split directory")->required();
  robust->add_option("--out", rob_out, "report directory")->required();
  robust->add_option("--rates", rob_rates, "noise rates; the first is the baseline");
  add_settings_options(robust, rob_opts);

  // sweep
  SettingsOptions sweep_opts;
  std::string sweep_ckpt, sweep_data, sweep_out;
  std::vector<int> sweep_steps{1, 2, 5, 10, 20, 50};
  auto* sweep = app.add_subcommand("sweep", "evaluate with fewer reverse diffusion steps");
  sweep->add_option("--ckpt", sweep_ckpt, "checkpoint or run directory")->required();
  sweep->add_option("--data", sweep_data, "split directory")->required();
  sweep->add_option("--out", sweep_out, "report directory")->required();
  sweep->add_option("--steps", sweep_steps, "denoiser call counts");
  add_settings_options(sweep, sweep_opts);

  auto* keys = app.add_subcommand("keys", "list every setting with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prep->parsed()) {
      if (!fs::exists(prep_input)) throw std::runtime_error("input not found: " + prep_input);
      cmd_prepare(prep_input, prep_format == "csv" ? LogFormat::kCsv : LogFormat::kTsv,
                  prep_out, resolve(prep_opts), std::cout);
      require_outputs(prep_out, {"train.tsv", "valid.tsv", "test.tsv", "vocab.tsv",
                                 "manifest.json"});
    } else if (synth->parsed()) {
      cmd_synth(resolve(synth_opts), synth_out, std::cout);
      require_outputs(synth_out, {"events.tsv", "interests.tsv", "manifest.json"});
    } else if (train->parsed()) {
      cmd_train(train_data, resolve(train_opts), train_out, {train_resume, train_stop},
                std::cout);
      require_outputs(train_out, {"last/params.bin", "best/params.bin", "metrics.log",
                                  "manifest.json"});
    } else if (eval->parsed()) {
      cmd_eval(eval_ckpt, eval_data, eval_part, resolve(eval_opts), eval_out, std::cout);
      require_outputs(eval_out, {"report.csv", "report.txt", "manifest.json"});
    } else if (ablate->parsed()) {
      cmd_ablate(abl_data, resolve(abl_opts), parse_variants(abl_variants), abl_seeds, abl_out,
                 std::cout);
      require_outputs(abl_out, {"ablation.csv", "summary.csv", "manifest.json"});
    } else if (robust->parsed()) {
      cmd_robust(rob_ckpt, rob_data, rob_rates, resolve(rob_opts), rob_out, std::cout);
      require_outputs(rob_out, {"robustness.csv", "manifest.json"});
    } else if (sweep->parsed()) {
      cmd_sweep(sweep_ckpt, sweep_data, sweep_steps, resolve(sweep_opts), sweep_out,
                std::cout);
      require_outputs(sweep_out, {"sweep.csv", "manifest.json"});
    } else if (keys->parsed()) {
      std::cout << describe_settings();
    }
  } catch (const std::exception& e) {
    std::cerr << "crossdiff: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
