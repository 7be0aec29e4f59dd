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
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "crossdiff/eval.hpp"
#include "crossdiff/rng.hpp"

namespace crossdiff {
namespace {

// Per-user brute force: each metric evaluated from its definition.
DomainMetrics oracle_metrics(const std::vector<int>& ranks) {
  DomainMetrics m;
  for (int r : ranks) {
    m.hr5 += r <= 5 ? 1 : 0;
    m.hr10 += r <= 10 ? 1 : 0;
    m.ndcg5 += r <= 5 ? std::log(2.0) / std::log(r + 1.0) : 0;
    m.ndcg10 += r <= 10 ? std::log(2.0) / std::log(r + 1.0) : 0;
    m.mrr += r <= 10 ? 1.0 / r : 0;
  }
  const double n = ranks.size();
  m.hr5 /= n, m.hr10 /= n, m.ndcg5 /= n, m.ndcg10 /= n, m.mrr /= n;
  return m;
}

TEST(Metrics, MatchBruteForceOnRandomRankLists) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> ranks(1 + trial % 17);
    for (int& r : ranks) r = static_cast<int>(rng.uniform_int(1, trial % 2 ? 20 : 1000));
    const DomainMetrics got = compute_metrics(ranks), want = oracle_metrics(ranks);
    EXPECT_NEAR(got.hr5, want.hr5, 1e-12);
    EXPECT_NEAR(got.hr10, want.hr10, 1e-12);
    EXPECT_NEAR(got.ndcg5, want.ndcg5, 1e-12);
    EXPECT_NEAR(got.ndcg10, want.ndcg10, 1e-12);
    EXPECT_NEAR(got.mrr, want.mrr, 1e-12);
    EXPECT_LE(got.hr5, got.hr10);
    EXPECT_LE(got.ndcg5, got.ndcg10);
    EXPECT_LE(got.mrr, got.hr10);
    EXPECT_EQ(got.n_users, static_cast<int>(ranks.size()));
  }
}

TEST(Metrics, RankOneIsPerfectAndInvalidRanksThrow) {
  const DomainMetrics m = compute_metrics(std::vector<int>{1, 1});
  EXPECT_EQ(m.mrr, 1.0);
  EXPECT_EQ(m.ndcg10, 1.0);
  EXPECT_EQ(m.hr5, 1.0);
  EXPECT_THROW(compute_metrics(std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(compute_metrics(std::vector<int>{0}), std::invalid_argument);
}

TEST(RankOfPositive, TiesCountAgainstThePositive) {
  EXPECT_EQ(rank_of_positive(std::vector<double>{0.5, 0.1, 0.2}, 0), 1);
  EXPECT_EQ(rank_of_positive(std::vector<double>{0.5, 0.5, 0.2}, 0), 2);
  EXPECT_EQ(rank_of_positive(std::vector<double>{0.1, 0.5, 0.5}, 0), 3);
  EXPECT_EQ(rank_of_positive(std::vector<double>(5, 1.0), 2), 5);
}

TEST(SampleNegatives, DistinctEligibleAndDeterministic) {
  const std::vector<int> history{3, 4, 5};
  const auto a = sample_negatives(7, 40, history, 20, 99);
  EXPECT_EQ(a, sample_negatives(7, 40, history, 20, 99));
  EXPECT_NE(a, sample_negatives(7, 40, history, 20, 100));
  const std::set<int> unique(a.begin(), a.end());
  EXPECT_EQ(unique.size(), 20u);
  for (int v : a) {
    EXPECT_GE(v, kFirstItem);
    EXPECT_LT(v, 40);
    EXPECT_NE(v, 7);
    EXPECT_FALSE(std::count(history.begin(), history.end(), v));
  }
  // k == 0: every eligible item; without exclusion history items return.
  EXPECT_EQ(sample_negatives(7, 10, history, 0, 1), (std::vector<int>{2, 6, 8, 9}));
  EXPECT_EQ(sample_negatives(7, 10, history, 0, 1, false).size(), 7u);
  EXPECT_THROW(sample_negatives(7, 10, history, 5, 1), std::invalid_argument);
}

std::vector<HeldOut> toy_cases(int users, int items) {
  std::vector<HeldOut> cases;
  for (int u = 0; u < users; ++u) {
    HeldOut h;
    h.history.user_index = u;
    h.history.items = {{kFirstItem + u % items, Domain::X}, {kFirstItem + (u + 1) % items, Domain::Y}};
    h.target = {kFirstItem + (u + 2) % items, u % 2 ? Domain::Y : Domain::X};
    cases.push_back(h);
  }
  return cases;
}

TEST(Evaluate, OracleScorerGivesPerfectMetrics) {
  const auto cases = toy_cases(30, 25);
  std::map<int, int> target_of;
  for (const HeldOut& h : cases) target_of[h.history.user_index] = h.target.item;
  const ScoreFn oracle = [&](const UserSequence& h, Domain, uint64_t) {
    std::vector<double> s(27, 0.0);
    s[target_of[h.user_index]] = 1.0;
    return s;
  };
  EvalConfig cfg;
  cfg.num_negatives = 10;
  const MetricReport r = evaluate(cases, oracle, {25, 25}, cfg);
  for (const DomainMetrics* m : {&r.x, &r.y}) {
    EXPECT_EQ(m->mrr, 1.0);
    EXPECT_EQ(m->hr10, 1.0);
    EXPECT_EQ(m->n_users, 15);
  }
  EXPECT_EQ(r.headline(), 1.0);
}

TEST(Evaluate, ConstantScorerRanksLastAndParallelMatchesSerial) {
  const auto cases = toy_cases(40, 25);
  const ScoreFn flat = [](const UserSequence&, Domain, uint64_t) {
    return std::vector<double>(27, 0.0);
  };
  EvalConfig cfg;
  cfg.num_negatives = 0;
  std::vector<RankedCase> ranked;
  const MetricReport par = evaluate(cases, flat, {25, 25}, cfg, &ranked);
  for (const RankedCase& c : ranked) EXPECT_GT(c.rank, 10);
  EXPECT_EQ(par.headline(), 0.0);
  cfg.parallel = false;
  EXPECT_EQ(evaluate(cases, flat, {25, 25}, cfg), par);
}

TEST(Evaluate, UniformRandomScorerMrrNearAnalyticValue) {
  // 1 positive + 999 negatives: E[MRR@10] = H_10 / 1000.
  const int users = 4000;
  std::vector<HeldOut> cases;
  for (int u = 0; u < users; ++u) {
    HeldOut h;
    h.history.user_index = u;
    h.history.items = {{kFirstItem, Domain::X}};
    h.target = {kFirstItem + 1 + u % 500, Domain::X};
    cases.push_back(h);
  }
  const ScoreFn random = [](const UserSequence&, Domain, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> s(1200);
    for (double& v : s) v = rng.uniform();
    return s;
  };
  EvalConfig cfg;
  cfg.num_negatives = 999;
  const MetricReport r = evaluate(cases, random, {1198, 0}, cfg);
  double h10 = 0, h10_sq = 0;
  for (int k = 1; k <= 10; ++k) h10 += 1.0 / k, h10_sq += 1.0 / (k * k);
  const double mean = h10 / 1000, var = h10_sq / 1000 - mean * mean;
  EXPECT_NEAR(mean, 0.00293, 1e-5);
  EXPECT_NEAR(r.x.mrr, mean, 3 * std::sqrt(var / users));
}

TEST(Reports, CsvHasOneRowPerMetricAndDomain) {
  MetricReport r;
  r.x = compute_metrics(std::vector<int>{1, 3});
  std::ostringstream out;
  write_report_csv(out, r);
  std::string line;
  std::istringstream in(out.str());
  std::getline(in, line);
  EXPECT_EQ(line, "domain,metric,value,value_x100");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
  EXPECT_NE(out.str().find("X,HR@10,1.00000000,100.0000"), std::string::npos);
}

}  // namespace
}  // namespace crossdiff
