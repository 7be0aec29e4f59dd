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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "../common/fixture.hpp"
#include "crossdiff/dataset.hpp"
#include "crossdiff/rng.hpp"

namespace crossdiff {
namespace {

std::vector<std::string> named(const UserSequence& s, const DatasetSplit& split) {
  std::vector<std::string> out;
  for (const Token& t : s.items)
    out.push_back(std::string(domain_name(t.domain)) + ":" + split.vocab(t.domain).item_id(t.item));
  return out;
}

std::string named(const Token& t, const DatasetSplit& split) {
  return std::string(domain_name(t.domain)) + ":" + split.vocab(t.domain).item_id(t.item);
}

TEST(ParseLog, CollectsRowErrorsAndRejectsUnknownDomains) {
  const IngestResult r = parse_log(testing::fixture_log(), LogFormat::kTsv);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 10);
  EXPECT_NE(r.errors[0].message.find("notatime"), std::string::npos);
  EXPECT_THROW(parse_log("user_id,item_id,domain,timestamp\nu,i,Z,1\n", LogFormat::kCsv),
               DataError);
  EXPECT_THROW(parse_log("", LogFormat::kCsv), DataError);
  EXPECT_THROW(parse_log("a,b\n", LogFormat::kCsv), DataError);
  const IngestResult labelled = parse_log("user_id,item_id,domain,timestamp\nu,i,Books,3\n",
                                          LogFormat::kCsv, {"Books", "Movies"});
  ASSERT_EQ(labelled.events.size(), 1u);
  EXPECT_EQ(labelled.events[0], (InteractionEvent{"u", "i", Domain::X, 3}));
}

TEST(ParseLog, WriteThenParseRoundTrips) {
  const auto events = parse_log(testing::fixture_log(), LogFormat::kTsv).events;
  const auto path = std::filesystem::temp_directory_path() / "crossdiff_roundtrip.csv";
  write_log(path, events, LogFormat::kCsv);
  EXPECT_EQ(ingest_log(path, LogFormat::kCsv).events, events);
  std::filesystem::remove(path);
  EXPECT_THROW(ingest_log(path, LogFormat::kCsv), DataError);
}

TEST(FilterAndSplit, ReproducesHandEnumeratedFixture) {
  const auto events = parse_log(testing::fixture_log(), LogFormat::kTsv).events;
  const DatasetSplit split = filter_and_split(events);
  const auto expected = testing::fixture_expected_users();
  ASSERT_EQ(split.user_ids.size(), expected.size());
  for (size_t u = 0; u < expected.size(); ++u) {
    const auto& want = expected[u].sequence;
    const size_t n = want.size();
    EXPECT_EQ(split.user_ids[u], expected[u].user_id);
    EXPECT_EQ(named(split.train[u], split), std::vector<std::string>(want.begin(), want.end() - 2));
    EXPECT_EQ(named(split.validation[u].history, split), named(split.train[u], split));
    EXPECT_EQ(named(split.validation[u].target, split), want[n - 2]);
    EXPECT_EQ(named(split.test[u].history, split),
              std::vector<std::string>(want.begin(), want.end() - 1));
    EXPECT_EQ(named(split.test[u].target, split), want[n - 1]);
  }
  ASSERT_EQ(split.vocab_x.num_items(), 16);
  ASSERT_EQ(split.vocab_y.num_items(), 19);
  for (int i = 0; i < 16; ++i)
    EXPECT_EQ(split.vocab_x.item_id(kFirstItem + i), testing::fixture_vocab_x()[i]);
  for (int i = 0; i < 19; ++i)
    EXPECT_EQ(split.vocab_y.item_id(kFirstItem + i), testing::fixture_vocab_y()[i]);
  EXPECT_FALSE(split.vocab_x.find("a99"));
  EXPECT_FALSE(split.vocab_x.find("c1"));
}

TEST(FilterAndSplit, ThresholdsAreConfigurable) {
  const auto events = parse_log(testing::fixture_log(), LogFormat::kTsv).events;
  FilterConfig loose;
  loose.min_user_interactions = 1;
  EXPECT_EQ(filter_and_split(events, loose).user_ids.size(), 5u);  // u3 fails per domain
  loose.min_per_domain = 1;
  EXPECT_EQ(filter_and_split(events, loose).user_ids.size(), 6u);
  FilterConfig strict;
  strict.min_user_interactions = 100;
  try {
    filter_and_split(events, strict);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("min_user_interactions=100"), std::string::npos);
  }
  strict.min_user_interactions = 1;
  strict.min_per_domain = 50;
  try {
    filter_and_split(events, strict);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("min_per_domain=50"), std::string::npos);
  }
}

TEST(FilterAndSplit, SurvivingEventsKeepInputOrder) {
  const auto events = parse_log(testing::fixture_log(), LogFormat::kTsv).events;
  const auto kept = surviving_events(events, filter_and_split(events));
  EXPECT_EQ(kept.size(), 12u + 10u + 17u + 10u);
  EXPECT_EQ(kept.front().item_id, "a2");
  EXPECT_EQ(kept.back().item_id, "a7");
}

TEST(SplitFiles, WriteReadRoundTrip) {
  const auto events = parse_log(testing::fixture_log(), LogFormat::kTsv).events;
  const DatasetSplit split = filter_and_split(events);
  const auto dir = std::filesystem::temp_directory_path() / "crossdiff_split_test";
  write_split(dir, split);
  EXPECT_EQ(read_split(dir), split);
  std::filesystem::remove_all(dir);
}

UserSequence random_sequence(Rng& rng, int len, int user = 0) {
  UserSequence s{user, {}};
  for (int i = 0; i < len; ++i) {
    const Domain d = rng.bernoulli(0.5) ? Domain::X : Domain::Y;
    s.items.push_back({kFirstItem + static_cast<int>(rng.uniform_int(0, 19)), d});
  }
  return s;
}

TEST(DomainViews, SplitThenInterleaveIsIdentity) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const UserSequence s = random_sequence(rng, trial % 16, 3);
    const DomainViews v = split_domains(s);
    for (const Token& t : v.x.items) EXPECT_EQ(t.domain, Domain::X);
    for (const Token& t : v.y.items) EXPECT_EQ(t.domain, Domain::Y);
    EXPECT_EQ(interleave(v, 3), s);
  }
}

std::multiset<std::pair<int, int>> bag(const UserSequence& s) {
  std::multiset<std::pair<int, int>> out;
  for (const Token& t : s.items) out.insert({t.item, domain_index(t.domain)});
  return out;
}

TEST(Augment, EachOperationHasItsDocumentedShape) {
  Rng rng(2);
  const ItemCounts items{20, 20};
  for (int trial = 0; trial < 200; ++trial) {
    const int len = 2 + trial % 14;
    const UserSequence s = random_sequence(rng, len);
    const double rate = 0.1 + 0.1 * (trial % 5);
    const int edits = static_cast<int>(std::ceil(rate * len - 1e-9));
    for (AugmentOp op : kAllAugmentOps) {
      const UserSequence a = augment(s, {op, rate, rng.next_u64()}, items, 15);
      switch (op) {
        case AugmentOp::kCrop: {
          const int keep = std::max(1, static_cast<int>(std::ceil((1 - rate) * len - 1e-9)));
          ASSERT_EQ(a.length(), keep);
          EXPECT_TRUE(std::search(s.items.begin(), s.items.end(), a.items.begin(),
                                  a.items.end()) != s.items.end());
          break;
        }
        case AugmentOp::kMask: {
          ASSERT_EQ(a.length(), len);
          int masked = 0;
          for (int i = 0; i < len; ++i) {
            EXPECT_EQ(a.items[i].domain, s.items[i].domain);
            if (a.items[i].item == kMaskToken) ++masked;
            else EXPECT_EQ(a.items[i], s.items[i]);
          }
          EXPECT_EQ(masked, edits);
          break;
        }
        case AugmentOp::kReorder:
          EXPECT_EQ(bag(a), bag(s));
          break;
        case AugmentOp::kSubstitute: {
          ASSERT_EQ(a.length(), len);
          for (int i = 0; i < len; ++i) EXPECT_EQ(a.items[i].domain, s.items[i].domain);
          break;
        }
        case AugmentOp::kInsert:
          EXPECT_EQ(a.length(), std::min(15, len + edits));
          break;
      }
      for (const Token& t : a.items) EXPECT_LT(t.item, kFirstItem + 20);
    }
  }
}

TEST(Augment, DeterministicShortSequencesPassAndRateValidated) {
  Rng rng(3);
  const UserSequence s = random_sequence(rng, 8);
  const AugmentationSpec spec{AugmentOp::kSubstitute, 0.3, 17};
  EXPECT_EQ(augment(s, spec, {20, 20}, 15), augment(s, spec, {20, 20}, 15));
  const UserSequence one = random_sequence(rng, 1);
  EXPECT_EQ(augment(one, spec, {20, 20}, 15), one);
  EXPECT_THROW(augment(s, {AugmentOp::kMask, 0.0, 1}, {20, 20}, 15), std::invalid_argument);
}

TEST(InjectNoise, RateZeroIsIdentityAndEditsAverageToRate) {
  Rng rng(4);
  const UserSequence s = random_sequence(rng, 10);
  EXPECT_EQ(inject_noise(s, 0.0, {20, 20}, 15, 1).sequence, s);
  EXPECT_EQ(inject_noise(s, 0.0, {20, 20}, 15, 1).edits, 0);
  double total = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const NoiseResult r = inject_noise(s, 0.25, {20, 20}, 15, i);
    total += r.edits;
    EXPECT_GE(r.sequence.length(), 10);
    EXPECT_LE(r.sequence.length(), 13);
  }
  EXPECT_NEAR(total / n, 2.5, 0.05);
  EXPECT_THROW(inject_noise(s, 1.0, {20, 20}, 15, 1), std::invalid_argument);
}

TEST(Synthetic, DeterministicAndWithinConfiguredShape) {
  SyntheticConfig cfg;
  cfg.n_users = 50;
  const SyntheticData a = generate_synthetic(cfg), b = generate_synthetic(cfg);
  EXPECT_EQ(a.events, b.events);
  std::map<std::string, int> lengths;
  for (const auto& e : a.events) ++lengths[e.user_id];
  EXPECT_EQ(lengths.size(), 50u);
  for (const auto& [u, n] : lengths) {
    EXPECT_GE(n, cfg.min_len);
    EXPECT_LE(n, cfg.max_len);
  }
  cfg.rng_seed = 8;
  EXPECT_NE(generate_synthetic(cfg).events, a.events);
}

// Off-cluster share recounted from the ground truth.
double off_cluster_fraction(const SyntheticConfig& cfg, const SyntheticData& data) {
  std::map<std::string, UserInterest> by_user;
  for (const auto& u : data.interests) by_user[u.user_id] = u;
  int off = 0;
  for (const auto& e : data.events) {
    const UserInterest& u = by_user.at(e.user_id);
    const int number = std::stoi(e.item_id.substr(1));
    const int cluster = number / cfg.cluster_size;
    const bool own = cluster == u.shared ||
                     (u.specific >= 0 && e.domain == u.specific_domain &&
                      cluster == cfg.n_shared_interests + u.specific);
    off += own ? 0 : 1;
  }
  return static_cast<double>(off) / data.events.size();
}

TEST(Synthetic, NoiseFractionMatchesConfiguration) {
  SyntheticConfig cfg;
  cfg.noise_rate = 0.0;
  EXPECT_EQ(off_cluster_fraction(cfg, generate_synthetic(cfg)), 0.0);
  cfg.noise_rate = 0.3;
  cfg.n_users = 1000;  // about 12.5k events
  EXPECT_NEAR(off_cluster_fraction(cfg, generate_synthetic(cfg)), 0.3, 0.05);
}

TEST(Synthetic, OtherDomainHistoryPredictsSharedCluster) {
  // Guess the cluster of each user's last Y item from the majority shared
  // cluster among their X items; chance level is 1 / n_shared. Specific
  // clusters (ids from n_shared up) are left out: they never cross domains.
  SyntheticConfig cfg;
  cfg.n_users = 400;
  const SyntheticData data = generate_synthetic(cfg);
  std::map<std::string, std::map<int, int>> x_votes;
  std::map<std::string, int> last_y;
  for (const auto& e : data.events) {
    const int cluster = std::stoi(e.item_id.substr(1)) / cfg.cluster_size;
    if (e.domain == Domain::X) {
      if (cluster < cfg.n_shared_interests) ++x_votes[e.user_id][cluster];
    } else {
      last_y[e.user_id] = cluster;
    }
  }
  int hits = 0, total = 0;
  for (const auto& [user, y_cluster] : last_y) {
    const auto& votes = x_votes[user];
    if (votes.empty()) continue;
    const auto best = std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) {
      return a.second < b.second;
    });
    hits += best->first == y_cluster;
    ++total;
  }
  EXPECT_GT(static_cast<double>(hits) / total, 2.0 / cfg.n_shared_interests);
}

}  // namespace
}  // namespace crossdiff
