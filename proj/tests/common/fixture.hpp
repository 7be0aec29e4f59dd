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

// Hand-built preprocessing fixture shared by the unit and acceptance tests.
//
// u1  12 events, 6 X / 6 Y, two rows out of time order        kept
// u2   9 events                                                dropped (total)
// u3  11 events, 9 X / 2 Y, holds the only copy of a99         dropped (domain)
// u4  10 events, 3 X / 7 Y (both thresholds at their bound)    kept
// u5  17 events, truncated to the 15 most recent               kept
// u6  10 events with timestamp ties                            kept
// plus one row with a malformed timestamp.

#ifndef CROSSDIFF_TESTS_COMMON_FIXTURE_HPP_
#define CROSSDIFF_TESTS_COMMON_FIXTURE_HPP_

#include <string>
#include <vector>

namespace crossdiff::testing {

inline std::string fixture_log() {
  std::string s = "user_id\titem_id\tdomain\ttimestamp\n";
  auto row = [&](const std::string& u, const std::string& i, const char* d, const std::string& t) {
    s += u + "\t" + i + "\t" + d + "\t" + t + "\n";
  };
  row("u1", "a2", "X", "300");
  row("u1", "a1", "X", "100");
  row("u1", "b1", "Y", "200");
  row("u1", "b2", "Y", "400");
  row("u1", "a3", "X", "500");
  row("u1", "b3", "Y", "600");
  row("u1", "a4", "X", "700");
  row("u1", "b4", "Y", "800");
  row("u1", "a9", "X", "notatime");
  row("u1", "a5", "X", "900");
  row("u1", "b6", "Y", "1200");
  row("u1", "b5", "Y", "1000");
  row("u1", "a6", "X", "1100");
  for (int k = 1; k <= 5; ++k) row("u2", "a" + std::to_string(k), "X", std::to_string(k));
  for (int k = 1; k <= 4; ++k) row("u2", "b" + std::to_string(k), "Y", std::to_string(5 + k));
  for (int k = 1; k <= 8; ++k) row("u3", "a" + std::to_string(k), "X", std::to_string(k));
  row("u3", "a99", "X", "9");
  row("u3", "b1", "Y", "10");
  row("u3", "b2", "Y", "11");
  row("u4", "b7", "Y", "1");
  row("u4", "a2", "X", "2");
  row("u4", "b8", "Y", "3");
  row("u4", "b9", "Y", "4");
  row("u4", "a7", "X", "5");
  row("u4", "b10", "Y", "6");
  row("u4", "b11", "Y", "7");
  row("u4", "a8", "X", "8");
  row("u4", "b12", "Y", "9");
  row("u4", "b1", "Y", "10");
  for (int k = 1; k <= 9; ++k) {
    row("u5", "c" + std::to_string(k), "X", std::to_string(2 * k - 1));
    if (k <= 8) row("u5", "d" + std::to_string(k), "Y", std::to_string(2 * k));
  }
  row("u6", "a3", "X", "10");
  row("u6", "b2", "Y", "10");
  row("u6", "a1", "X", "5");
  row("u6", "b3", "Y", "20");
  row("u6", "a2", "X", "20");
  row("u6", "a4", "X", "30");
  row("u6", "a5", "X", "30");
  row("u6", "b1", "Y", "40");
  row("u6", "a6", "X", "40");
  row("u6", "a7", "X", "50");
  return s;
}

struct ExpectedUser {
  std::string user_id;
  // Item ids of the kept (truncated, time-ordered) sequence, "X:a1" style.
  std::vector<std::string> sequence;
};

// Enumerated by hand from the rows above: survivors in order of first
// appearance, each sorted by time with ties in input order.
inline std::vector<ExpectedUser> fixture_expected_users() {
  return {
      {"u1", {"X:a1", "Y:b1", "X:a2", "Y:b2", "X:a3", "Y:b3", "X:a4", "Y:b4", "X:a5",
              "Y:b5", "X:a6", "Y:b6"}},
      {"u4", {"Y:b7", "X:a2", "Y:b8", "Y:b9", "X:a7", "Y:b10", "Y:b11", "X:a8", "Y:b12",
              "Y:b1"}},
      {"u5", {"X:c2", "Y:d2", "X:c3", "Y:d3", "X:c4", "Y:d4", "X:c5", "Y:d5", "X:c6",
              "Y:d6", "X:c7", "Y:d7", "X:c8", "Y:d8", "X:c9"}},
      {"u6", {"X:a1", "X:a3", "Y:b2", "Y:b3", "X:a2", "X:a4", "X:a5", "Y:b1", "X:a6",
              "X:a7"}},
  };
}

inline const std::vector<std::string>& fixture_vocab_x() {
  static const std::vector<std::string> v{"a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8",
                                          "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"};
  return v;
}

inline const std::vector<std::string>& fixture_vocab_y() {
  static const std::vector<std::string> v{"b1",  "b2",  "b3", "b4", "b5", "b6", "b7",
                                          "b8",  "b9",  "b10", "b11", "b12", "d2", "d3",
                                          "d4",  "d5",  "d6", "d7", "d8"};
  return v;
}

}  // namespace crossdiff::testing

#endif  // CROSSDIFF_TESTS_COMMON_FIXTURE_HPP_
