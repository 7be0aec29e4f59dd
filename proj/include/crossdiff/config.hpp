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

// Flat key=value run settings with environment and command-line overrides.

#ifndef CROSSDIFF_CONFIG_HPP_
#define CROSSDIFF_CONFIG_HPP_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossdiff/dataset.hpp"
#include "crossdiff/eval.hpp"
#include "crossdiff/network.hpp"
#include "crossdiff/trainer.hpp"

namespace crossdiff {

struct Settings {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  SyntheticConfig synth;
  FilterConfig filter;
  DomainLabels labels;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every accepted key, in canonical order.
std::vector<std::string> setting_keys();
/// One-line description per key for --help.
std::string describe_settings();

void apply_setting(Settings& s, const std::string& key, const std::string& value);
std::string get_setting(const Settings& s, const std::string& key);

/// Parses `key = value` lines; '#' starts a comment.
void apply_config_text(Settings& s, const std::string& text, const std::string& origin);
void apply_config_file(Settings& s, const std::filesystem::path& path);

/// Applies PREFIX<KEY> variables (key upper-cased) found through `getenv`.
void apply_env(Settings& s, const std::string& prefix = "CROSSDIFF_",
               const std::function<std::optional<std::string>(const std::string&)>&
                   getenv = {});

/// Canonical `key=value` listing; settings_hash hashes it.
std::string to_config_text(const Settings& s);
std::string settings_hash(const Settings& s);

}  // namespace crossdiff

#endif  // CROSSDIFF_CONFIG_HPP_
