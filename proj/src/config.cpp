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

#include "crossdiff/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crossdiff/rng.hpp"

namespace crossdiff {
namespace {

struct Entry {
  const char* key;
  const char* help;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

#define INT_ENTRY(KEY, FIELD, HELP)                                        \
  Entry{KEY, HELP,                                                         \
        [](Settings& s, const std::string& v) { s.FIELD = to_int(KEY, v); }, \
        [](const Settings& s) { return std::to_string(s.FIELD); }}
#define U64_ENTRY(KEY, FIELD, HELP)                                        \
  Entry{KEY, HELP,                                                         \
        [](Settings& s, const std::string& v) { s.FIELD = to_u64(KEY, v); }, \
        [](const Settings& s) { return std::to_string(s.FIELD); }}
#define REAL_ENTRY(KEY, FIELD, HELP)                                          \
  Entry{KEY, HELP,                                                            \
        [](Settings& s, const std::string& v) { s.FIELD = to_double(KEY, v); }, \
        [](const Settings& s) { return num(s.FIELD); }}
#define BOOL_ENTRY(KEY, FIELD, HELP)                                        \
  Entry{KEY, HELP,                                                          \
        [](Settings& s, const std::string& v) { s.FIELD = to_bool(KEY, v); }, \
        [](const Settings& s) { return std::string(s.FIELD ? "true" : "false"); }}
#define STR_ENTRY(KEY, FIELD, HELP)                                 \
  Entry{KEY, HELP, [](Settings& s, const std::string& v) { s.FIELD = v; }, \
        [](const Settings& s) { return s.FIELD; }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      // model
      INT_ENTRY("d", model.d, "embedding dimension"),
      INT_ENTRY("n_heads", model.n_heads, "attention heads"),
      INT_ENTRY("enc_layers", model.enc_layers, "blocks per sequence encoder"),
      INT_ENTRY("dec_layers", model.dec_layers, "cross-attention decoder blocks"),
      Entry{"max_seq_len", "most recent items kept per user (also the position table size)",
            [](Settings& s, const std::string& v) {
              s.model.max_seq_len = s.filter.max_seq_len = to_int("max_seq_len", v);
            },
            [](const Settings& s) { return std::to_string(s.model.max_seq_len); }},
      INT_ENTRY("T", model.T, "diffusion steps"),
      REAL_ENTRY("beta_start", model.beta_start, "first beta of the linear schedule"),
      REAL_ENTRY("beta_end", model.beta_end, "last beta of the linear schedule"),
      Entry{"variant", "Diff | Diff+DE | Diff+DE+G | Diff+DE+TriCL | Full",
            [](Settings& s, const std::string& v) {
              try {
                s.model.variant = parse_variant(v);
              } catch (const std::exception& e) {
                throw ConfigError(e.what());
              }
            },
            [](const Settings& s) { return std::string(variant_name(s.model.variant)); }},
      Entry{"single_view", "domain | fused: vector behind the single-domain loss and scores",
            [](Settings& s, const std::string& v) {
              try {
                s.model.single_view = parse_single_view(v);
              } catch (const std::exception& e) {
                throw ConfigError(e.what());
              }
            },
            [](const Settings& s) {
              return std::string(single_view_name(s.model.single_view));
            }},
      // training
      REAL_ENTRY("lr", train.lr, "peak learning rate"),
      INT_ENTRY("batch_size", train.batch_size, "users per mini-batch"),
      INT_ENTRY("epochs", train.epochs, "training epochs"),
      INT_ENTRY("warmup_epochs", train.warmup_epochs, "linear warm-up epochs (rec loss only)"),
      REAL_ENTRY("beta1", train.beta1, "Adam first-moment decay"),
      REAL_ENTRY("beta2", train.beta2, "Adam second-moment decay"),
      REAL_ENTRY("adam_eps", train.adam_eps, "Adam epsilon"),
      REAL_ENTRY("weight_decay", train.weight_decay, "decoupled weight decay"),
      REAL_ENTRY("grad_clip", train.grad_clip, "global gradient-norm clip, 0 = off"),
      Entry{"seed", "master seed for initialization, batches and evaluation",
            [](Settings& s, const std::string& v) {
              s.train.seed = s.eval.seed = to_u64("seed", v);
            },
            [](const Settings& s) { return std::to_string(s.train.seed); }},
      REAL_ENTRY("aug_rate", train.aug_rate, "augmentation rate for the contrastive view"),
      BOOL_ENTRY("normalize_views", train.normalize_views, "L2-normalize contrastive views"),
      REAL_ENTRY("w_diff", train.weights.diff, "weight of l_diff"),
      REAL_ENTRY("w_rec", train.weights.rec, "weight of l_rec"),
      REAL_ENTRY("w_tri_cl", train.weights.tri_cl, "weight of l_tri_cl"),
      INT_ENTRY("shard_size", train.shard_size, "users per gradient shard"),
      Entry{"parallel", "use the OpenMP drivers",
            [](Settings& s, const std::string& v) {
              s.train.parallel = s.eval.parallel = to_bool("parallel", v);
            },
            [](const Settings& s) { return std::string(s.train.parallel ? "true" : "false"); }},
      // evaluation
      INT_ENTRY("n_steps", eval.n_steps, "denoiser calls at inference, 0 = T"),
      INT_ENTRY("num_negatives", eval.num_negatives, "sampled negatives, 0 = rank all items"),
      BOOL_ENTRY("exclude_history", eval.exclude_history, "never sample history items as negatives"),
      // synthetic data
      INT_ENTRY("n_users", synth.n_users, "synthetic users"),
      INT_ENTRY("n_items_x", synth.n_items_x, "synthetic items in domain X"),
      INT_ENTRY("n_items_y", synth.n_items_y, "synthetic items in domain Y"),
      INT_ENTRY("n_shared_interests", synth.n_shared_interests, "cross-domain interest clusters"),
      INT_ENTRY("n_specific_interests", synth.n_specific_interests, "single-domain interest clusters"),
      INT_ENTRY("cluster_size", synth.cluster_size, "items per cluster and domain"),
      REAL_ENTRY("specific_prob", synth.specific_prob, "share of users with a specific interest"),
      REAL_ENTRY("specific_share", synth.specific_share, "specific-interest share of that domain"),
      REAL_ENTRY("noise_rate", synth.noise_rate, "off-cluster item rate"),
      INT_ENTRY("min_len", synth.min_len, "shortest synthetic sequence"),
      INT_ENTRY("max_len", synth.max_len, "longest synthetic sequence"),
      U64_ENTRY("synth_seed", synth.rng_seed, "synthetic generator seed"),
      // preprocessing
      INT_ENTRY("min_user_interactions", filter.min_user_interactions, "drop users below this count"),
      INT_ENTRY("min_per_domain", filter.min_per_domain, "drop users below this count in a domain"),
      STR_ENTRY("domain_x_label", labels.x, "label of domain X in input logs"),
      STR_ENTRY("domain_y_label", labels.y, "label of domain Y in input logs"),
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries())
    if (key == e.key) return e;
  throw ConfigError("unknown setting '" + key + "'");
}

std::string strip(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::vector<std::string> setting_keys() {
  std::vector<std::string> out;
  for (const Entry& e : entries()) out.emplace_back(e.key);
  return out;
}

std::string describe_settings() {
  std::ostringstream out;
  const Settings defaults;
  for (const Entry& e : entries()) {
    char line[200];
    std::snprintf(line, sizeof(line), "  %-22s %-12s %s\n", e.key,
                  e.get(defaults).c_str(), e.help);
    out << line;
  }
  return out.str();
}

void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  find_entry(key).set(s, value);
}

std::string get_setting(const Settings& s, const std::string& key) {
  return find_entry(key).get(s);
}

void apply_config_text(Settings& s, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(s, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(Settings& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(s, ss.str(), path.string());
}

void apply_env(Settings& s, const std::string& prefix,
               const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  for (const Entry& e : entries()) {
    std::string name = prefix;
    for (const char* c = e.key; *c; ++c)
      name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
    std::optional<std::string> value;
    if (getenv) {
      value = getenv(name);
    } else if (const char* raw = std::getenv(name.c_str())) {
      value = raw;
    }
    if (!value) continue;
    try {
      e.set(s, *value);
    } catch (const ConfigError& err) {
      throw ConfigError(name + ": " + err.what());
    }
  }
}

std::string to_config_text(const Settings& s) {
  std::string out;
  for (const Entry& e : entries()) out += std::string(e.key) + "=" + e.get(s) + "\n";
  return out;
}

std::string settings_hash(const Settings& s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_config_text(s))));
  return buf;
}

}  // namespace crossdiff
