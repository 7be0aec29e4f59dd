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

// Interaction logs, preprocessing, the leave-one-out split, sequence
// augmentations and the synthetic cross-domain generator.

#ifndef CROSSDIFF_DATASET_HPP_
#define CROSSDIFF_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace crossdiff {

enum class Domain : uint8_t { X = 0, Y = 1 };

inline int domain_index(Domain d) { return static_cast<int>(d); }
inline Domain other(Domain d) { return d == Domain::X ? Domain::Y : Domain::X; }
inline const char* domain_name(Domain d) { return d == Domain::X ? "X" : "Y"; }

// Reserved rows at the front of every per-domain item table.
inline constexpr int kMaskToken = 0;
inline constexpr int kPadToken = 1;
inline constexpr int kFirstItem = 2;

/// Error raised for malformed inputs the caller cannot recover from.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InteractionEvent {
  std::string user_id;
  std::string item_id;
  Domain domain = Domain::X;
  int64_t timestamp = 0;

  bool operator==(const InteractionEvent&) const = default;
};

/// One interaction inside a sequence: an index into its domain's item table.
struct Token {
  int item = kPadToken;
  Domain domain = Domain::X;

  bool operator==(const Token&) const = default;
};

struct UserSequence {
  int user_index = 0;
  std::vector<Token> items;

  int length() const { return static_cast<int>(items.size()); }
  bool operator==(const UserSequence&) const = default;
};

/// A history with its held-out next interaction.
struct HeldOut {
  UserSequence history;
  Token target;

  bool operator==(const HeldOut&) const = default;
};

/// Item-string <-> index table for one domain. Indices 0 and 1 are the mask
/// and padding tokens; real items start at kFirstItem.
class Vocabulary {
 public:
  Vocabulary();
  int add(const std::string& item_id);
  std::optional<int> find(const std::string& item_id) const;
  const std::string& item_id(int index) const { return ids_.at(index); }
  /// Table rows including the two reserved tokens.
  int size() const { return static_cast<int>(ids_.size()); }
  int num_items() const { return size() - kFirstItem; }
  bool operator==(const Vocabulary& o) const { return ids_ == o.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

struct DatasetSplit {
  std::vector<std::string> user_ids;  // by user_index
  std::vector<UserSequence> train;
  std::vector<HeldOut> validation;
  std::vector<HeldOut> test;
  Vocabulary vocab_x;
  Vocabulary vocab_y;

  const Vocabulary& vocab(Domain d) const { return d == Domain::X ? vocab_x : vocab_y; }
  bool operator==(const DatasetSplit&) const = default;
};

// ---------------------------------------------------------------------------
// Ingestion

enum class LogFormat { kTsv, kCsv };

struct DomainLabels {
  std::string x = "X";
  std::string y = "Y";
};

struct RowError {
  int line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<InteractionEvent> events;
  std::vector<RowError> errors;
};

/// Parses a delimited log with header `user_id,item_id,domain,timestamp`
/// (tab-separated for kTsv). Malformed rows are collected in `errors`; an
/// unknown domain label or an empty file throws DataError.
IngestResult ingest_log(const std::filesystem::path& path, LogFormat format,
                        const DomainLabels& labels = {});
IngestResult parse_log(std::string_view text, LogFormat format,
                       const DomainLabels& labels = {});

void write_log(const std::filesystem::path& path,
               std::span<const InteractionEvent> events, LogFormat format,
               const DomainLabels& labels = {});

// ---------------------------------------------------------------------------
// Preprocessing

struct FilterConfig {
  int min_user_interactions = 10;
  int min_per_domain = 3;
  int max_seq_len = 15;
};

/// Keeps users with enough interactions overall and per domain, orders each
/// user's events by timestamp (ties keep input order), truncates to the most
/// recent max_seq_len and applies leave-one-out: last -> test, second to
/// last -> validation, the rest -> train. Users and items are indexed by
/// first appearance.
DatasetSplit filter_and_split(std::span<const InteractionEvent> events,
                              const FilterConfig& cfg = {});

/// The events of users that survive filter_and_split, in input order.
std::vector<InteractionEvent> surviving_events(
    std::span<const InteractionEvent> events, const DatasetSplit& split);

struct DomainViews {
  UserSequence x;
  UserSequence y;
  /// positions[d][i] is the index in the merged sequence of views[d][i].
  std::vector<int> positions_x;
  std::vector<int> positions_y;
};

/// Order-preserving per-domain subsequences.
DomainViews split_domains(const UserSequence& seq);

/// Inverse of split_domains.
UserSequence interleave(const DomainViews& views, int user_index);

// ---------------------------------------------------------------------------
// Augmentation

enum class AugmentOp { kCrop, kMask, kReorder, kSubstitute, kInsert };

inline constexpr AugmentOp kAllAugmentOps[] = {
    AugmentOp::kCrop, AugmentOp::kMask, AugmentOp::kReorder,
    AugmentOp::kSubstitute, AugmentOp::kInsert};

const char* augment_op_name(AugmentOp op);

struct AugmentationSpec {
  AugmentOp op = AugmentOp::kCrop;
  double rate = 0.2;
  uint64_t rng_seed = 0;
};

/// Number of real items per domain, used to draw same-domain replacements.
struct ItemCounts {
  int x = 0;
  int y = 0;
  int of(Domain d) const { return d == Domain::X ? x : y; }
};

/// Applies one augmentation; sequences shorter than 2 pass through.
/// Counts use ceil(rate * L) (Crop keeps ceil((1 - rate) * L)).
UserSequence augment(const UserSequence& seq, const AugmentationSpec& spec,
                     const ItemCounts& items, int max_seq_len);

struct NoiseResult {
  UserSequence sequence;
  int edits = 0;
};

/// Test-time noise injection: round(rate * L) edits in expectation (floor
/// plus a Bernoulli remainder), each an Insert or a Substitute with equal
/// probability, at distinct positions of the original sequence. Rate 0 is
/// the identity.
NoiseResult inject_noise(const UserSequence& seq, double rate,
                         const ItemCounts& items, int max_seq_len,
                         uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticConfig {
  int n_users = 200;
  int n_items_x = 1200;
  int n_items_y = 1200;
  int n_shared_interests = 8;
  int n_specific_interests = 8;
  /// Items per interest cluster in each domain.
  int cluster_size = 12;
  /// Probability that a user carries a domain-specific interest.
  double specific_prob = 1.0;
  /// Share of the specific domain's clean interactions drawn from it.
  double specific_share = 0.7;
  double noise_rate = 0.2;
  int min_len = 10;
  int max_len = 15;
  uint64_t rng_seed = 7;
};

struct UserInterest {
  std::string user_id;
  int shared = 0;
  /// -1 when the user has no domain-specific interest.
  int specific = -1;
  Domain specific_domain = Domain::X;
};

struct SyntheticData {
  std::vector<InteractionEvent> events;
  std::vector<UserInterest> interests;
};

/// Cluster layout shared by the generator and its tests.
struct ClusterLayout {
  int cluster_size = 0;
  int n_shared = 0;
  int n_specific = 0;
  /// Item ids look like "x17"; numbers are 0-based within the domain.
  static std::string item_name(Domain d, int number);
  /// Shared clusters occupy numbers [0, n_shared * size), specific clusters
  /// follow; the rest are background items reachable only through noise.
  int shared_item(int cluster, int slot) const { return cluster * cluster_size + slot; }
  int specific_item(int cluster, int slot) const {
    return (n_shared + cluster) * cluster_size + slot;
  }
};

ClusterLayout cluster_layout(const SyntheticConfig& cfg);

/// Users draw one shared interest cluster, present in both domains, that each
/// domain walks through in order from its own offset; optionally a
/// conflicting single-domain interest walked the same way; and a noise_rate
/// fraction of off-cluster items.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// Split manifest

/// Writes {train,valid,test,vocab}.tsv under `dir`.
void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

std::string format_sequence(const UserSequence& seq);
UserSequence parse_sequence(std::string_view text, int user_index);

}  // namespace crossdiff

#endif  // CROSSDIFF_DATASET_HPP_
