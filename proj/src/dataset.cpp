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

#include "crossdiff/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "crossdiff/rng.hpp"

namespace crossdiff {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

int ceil_count(double x) {
  return static_cast<int>(std::ceil(x - 1e-9));
}

std::vector<int> sample_distinct(Rng& rng, int n, int k) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Token random_item(Rng& rng, Domain d, const ItemCounts& items) {
  const int n = items.of(d);
  if (n <= 0) throw DataError("no items available in domain " + std::string(domain_name(d)));
  return Token{kFirstItem + static_cast<int>(rng.uniform_int(0, n - 1)), d};
}

void keep_most_recent(std::vector<Token>& items, int max_len) {
  if (static_cast<int>(items.size()) > max_len)
    items.erase(items.begin(), items.end() - max_len);
}

}  // namespace

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : ids_{"<mask>", "<pad>"} {}

int Vocabulary::add(const std::string& item_id) {
  if (auto it = index_.find(item_id); it != index_.end()) return it->second;
  const int idx = size();
  ids_.push_back(item_id);
  index_.emplace(item_id, idx);
  return idx;
}

std::optional<int> Vocabulary::find(const std::string& item_id) const {
  if (auto it = index_.find(item_id); it != index_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

IngestResult parse_log(std::string_view text, LogFormat format,
                       const DomainLabels& labels) {
  const char sep = format == LogFormat::kTsv ? '\t' : ',';
  IngestResult result;
  int line_no = 0;
  bool header_seen = false;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line, sep);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 4 && trim(fields[0]) == "user_id") continue;
      throw DataError("line 1: expected header user_id" + std::string(1, sep) +
                      "item_id" + sep + "domain" + sep + "timestamp");
    }
    if (fields.size() != 4) {
      result.errors.push_back({line_no, "expected 4 fields, got " +
                                            std::to_string(fields.size())});
      continue;
    }
    for (auto& f : fields) f = trim(f);
    if (fields[0].empty() || fields[1].empty()) {
      result.errors.push_back({line_no, "empty user_id or item_id"});
      continue;
    }
    Domain domain;
    if (fields[2] == labels.x) {
      domain = Domain::X;
    } else if (fields[2] == labels.y) {
      domain = Domain::Y;
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown domain '" +
                      std::string(fields[2]) + "' (configured: '" + labels.x +
                      "', '" + labels.y + "')");
    }
    int64_t ts = 0;
    if (!parse_number(fields[3], ts) || ts < 0) {
      result.errors.push_back({line_no, "invalid timestamp '" +
                                            std::string(fields[3]) + "'"});
      continue;
    }
    result.events.push_back({std::string(fields[0]), std::string(fields[1]),
                             domain, ts});
  }
  if (!header_seen) throw DataError("empty interaction log");
  if (result.events.empty() && result.errors.empty())
    throw DataError("interaction log has a header but no rows");
  return result;
}

IngestResult ingest_log(const std::filesystem::path& path, LogFormat format,
                        const DomainLabels& labels) {
  if (!std::filesystem::exists(path))
    throw DataError("input log not found: " + path.string());
  return parse_log(read_file(path), format, labels);
}

void write_log(const std::filesystem::path& path,
               std::span<const InteractionEvent> events, LogFormat format,
               const DomainLabels& labels) {
  const char sep = format == LogFormat::kTsv ? '\t' : ',';
  auto out = open_out(path);
  out << "user_id" << sep << "item_id" << sep << "domain" << sep << "timestamp\n";
  for (const auto& e : events)
    out << e.user_id << sep << e.item_id << sep
        << (e.domain == Domain::X ? labels.x : labels.y) << sep << e.timestamp
        << '\n';
}

// ---------------------------------------------------------------------------

DatasetSplit filter_and_split(std::span<const InteractionEvent> events,
                              const FilterConfig& cfg) {
  if (events.empty()) throw DataError("no events to split");
  if (cfg.max_seq_len < 3)
    throw DataError("max_seq_len must leave room for train/valid/test");

  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<size_t>> by_user;
  for (size_t i = 0; i < events.size(); ++i) {
    auto [it, inserted] = by_user.try_emplace(events[i].user_id);
    if (inserted) user_order.push_back(events[i].user_id);
    it->second.push_back(i);
  }

  DatasetSplit split;
  int dropped_total = 0, dropped_domain = 0;
  for (const std::string& user : user_order) {
    std::vector<size_t>& idx = by_user[user];
    if (static_cast<int>(idx.size()) < cfg.min_user_interactions) {
      ++dropped_total;
      continue;
    }
    int per_domain[2] = {0, 0};
    for (size_t i : idx) ++per_domain[domain_index(events[i].domain)];
    if (per_domain[0] < cfg.min_per_domain || per_domain[1] < cfg.min_per_domain) {
      ++dropped_domain;
      continue;
    }
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return events[a].timestamp < events[b].timestamp;
    });
    if (static_cast<int>(idx.size()) > cfg.max_seq_len)
      idx.erase(idx.begin(), idx.end() - cfg.max_seq_len);
    if (idx.size() < 3) {
      ++dropped_total;
      continue;
    }

    const int user_index = static_cast<int>(split.user_ids.size());
    split.user_ids.push_back(user);
    UserSequence full{user_index, {}};
    for (size_t i : idx) {
      const auto& e = events[i];
      Vocabulary& vocab = e.domain == Domain::X ? split.vocab_x : split.vocab_y;
      full.items.push_back(Token{vocab.add(e.item_id), e.domain});
    }
    const int n = full.length();
    UserSequence train{user_index, {full.items.begin(), full.items.end() - 2}};
    UserSequence valid_hist = train;
    UserSequence test_hist{user_index, {full.items.begin(), full.items.end() - 1}};
    split.train.push_back(train);
    split.validation.push_back({valid_hist, full.items[n - 2]});
    split.test.push_back({test_hist, full.items[n - 1]});
  }

  if (split.user_ids.empty()) {
    const std::string binding =
        dropped_total >= dropped_domain
            ? "min_user_interactions=" + std::to_string(cfg.min_user_interactions)
            : "min_per_domain=" + std::to_string(cfg.min_per_domain);
    throw DataError("no users survive filtering; binding threshold: " + binding +
                    " (" + std::to_string(dropped_total) + " users below the total, " +
                    std::to_string(dropped_domain) + " below the per-domain count)");
  }
  return split;
}

std::vector<InteractionEvent> surviving_events(
    std::span<const InteractionEvent> events, const DatasetSplit& split) {
  std::unordered_set<std::string> keep(split.user_ids.begin(), split.user_ids.end());
  std::vector<InteractionEvent> out;
  for (const auto& e : events)
    if (keep.contains(e.user_id)) out.push_back(e);
  return out;
}

DomainViews split_domains(const UserSequence& seq) {
  DomainViews v;
  v.x.user_index = v.y.user_index = seq.user_index;
  for (int i = 0; i < seq.length(); ++i) {
    const Token& t = seq.items[i];
    if (t.domain == Domain::X) {
      v.x.items.push_back(t);
      v.positions_x.push_back(i);
    } else {
      v.y.items.push_back(t);
      v.positions_y.push_back(i);
    }
  }
  return v;
}

UserSequence interleave(const DomainViews& views, int user_index) {
  const size_t n = views.x.items.size() + views.y.items.size();
  UserSequence out{user_index, std::vector<Token>(n)};
  for (size_t i = 0; i < views.x.items.size(); ++i)
    out.items.at(views.positions_x[i]) = views.x.items[i];
  for (size_t i = 0; i < views.y.items.size(); ++i)
    out.items.at(views.positions_y[i]) = views.y.items[i];
  return out;
}

// ---------------------------------------------------------------------------

const char* augment_op_name(AugmentOp op) {
  switch (op) {
    case AugmentOp::kCrop: return "crop";
    case AugmentOp::kMask: return "mask";
    case AugmentOp::kReorder: return "reorder";
    case AugmentOp::kSubstitute: return "substitute";
    case AugmentOp::kInsert: return "insert";
  }
  return "?";
}

UserSequence augment(const UserSequence& seq, const AugmentationSpec& spec,
                     const ItemCounts& items, int max_seq_len) {
  if (!(spec.rate > 0.0 && spec.rate < 1.0))
    throw std::invalid_argument("augmentation rate must lie in (0, 1)");
  if (seq.length() < 2) return seq;
  Rng rng(spec.rng_seed);
  const int len = seq.length();
  UserSequence out{seq.user_index, seq.items};
  switch (spec.op) {
    case AugmentOp::kCrop: {
      const int keep = std::max(1, ceil_count((1.0 - spec.rate) * len));
      const int begin = static_cast<int>(rng.uniform_int(0, len - keep));
      out.items.assign(seq.items.begin() + begin, seq.items.begin() + begin + keep);
      break;
    }
    case AugmentOp::kMask: {
      for (int p : sample_distinct(rng, len, ceil_count(spec.rate * len)))
        out.items[p].item = kMaskToken;
      break;
    }
    case AugmentOp::kReorder: {
      const int window = std::min(len, ceil_count(spec.rate * len));
      if (window >= 2) {
        const int begin = static_cast<int>(rng.uniform_int(0, len - window));
        rng.shuffle(out.items.begin() + begin, out.items.begin() + begin + window);
      }
      break;
    }
    case AugmentOp::kSubstitute: {
      for (int p : sample_distinct(rng, len, ceil_count(spec.rate * len)))
        out.items[p] = random_item(rng, out.items[p].domain, items);
      break;
    }
    case AugmentOp::kInsert: {
      const int count = ceil_count(spec.rate * len);
      for (int i = 0; i < count; ++i) {
        const int cur = out.length();
        const int pos = static_cast<int>(rng.uniform_int(0, cur));
        const Domain d = out.items[std::min(pos, cur - 1)].domain;
        out.items.insert(out.items.begin() + pos, random_item(rng, d, items));
      }
      keep_most_recent(out.items, max_seq_len);
      break;
    }
  }
  return out;
}

NoiseResult inject_noise(const UserSequence& seq, double rate,
                         const ItemCounts& items, int max_seq_len,
                         uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("noise rate must lie in [0, 1)");
  NoiseResult result{seq, 0};
  if (rate == 0.0 || seq.length() == 0) return result;
  Rng rng(seed);
  const int len = seq.length();
  const double expected = rate * len;
  int edits = static_cast<int>(std::floor(expected));
  if (rng.bernoulli(expected - edits)) ++edits;
  edits = std::min(edits, len);
  const std::vector<int> positions = sample_distinct(rng, len, edits);
  std::vector<Token> out;
  out.reserve(len + edits);
  size_t next = 0;
  for (int i = 0; i < len; ++i) {
    const Token& tok = seq.items[i];
    if (next < positions.size() && positions[next] == i) {
      ++next;
      if (rng.bernoulli(0.5)) {
        out.push_back(random_item(rng, tok.domain, items));  // insert before
        out.push_back(tok);
      } else {
        out.push_back(random_item(rng, tok.domain, items));  // substitute
      }
    } else {
      out.push_back(tok);
    }
  }
  keep_most_recent(out, max_seq_len);
  result.sequence.items = std::move(out);
  result.edits = edits;
  return result;
}

// ---------------------------------------------------------------------------

std::string ClusterLayout::item_name(Domain d, int number) {
  return (d == Domain::X ? "x" : "y") + std::to_string(number);
}

ClusterLayout cluster_layout(const SyntheticConfig& cfg) {
  return ClusterLayout{cfg.cluster_size, cfg.n_shared_interests,
                       cfg.n_specific_interests};
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_users <= 0 || cfg.n_items_x <= 0 || cfg.n_items_y <= 0 ||
      cfg.n_shared_interests <= 0 || cfg.n_specific_interests < 0 ||
      cfg.cluster_size <= 0)
    throw std::invalid_argument("synthetic counts must be positive");
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0))
    throw std::invalid_argument("noise_rate must lie in [0, 1)");
  if (cfg.min_len < 1 || cfg.min_len > cfg.max_len || cfg.max_len > 15)
    throw std::invalid_argument("sequence length range must satisfy 1 <= min <= max <= 15");
  const int clustered = (cfg.n_shared_interests + cfg.n_specific_interests) *
                        cfg.cluster_size;
  if (cfg.n_items_x < clustered || cfg.n_items_y < clustered)
    throw std::invalid_argument(
        "item counts are smaller than the interest clusters they must hold (" +
        std::to_string(clustered) + " items per domain needed)");
  // Noise must have somewhere to land outside a user's clusters.
  if (cfg.noise_rate > 0.0 &&
      (cfg.n_items_x <= 2 * cfg.cluster_size || cfg.n_items_y <= 2 * cfg.cluster_size))
    throw std::invalid_argument("too few items for off-cluster noise");

  const ClusterLayout layout = cluster_layout(cfg);
  Rng rng(derive_seed(cfg.rng_seed, "synthetic"));
  SyntheticData data;
  const int n_items[2] = {cfg.n_items_x, cfg.n_items_y};

  for (int u = 0; u < cfg.n_users; ++u) {
    UserInterest interest;
    interest.user_id = "u" + std::to_string(u);
    interest.shared = static_cast<int>(rng.uniform_int(0, cfg.n_shared_interests - 1));
    if (cfg.n_specific_interests > 0 && rng.bernoulli(cfg.specific_prob)) {
      interest.specific =
          static_cast<int>(rng.uniform_int(0, cfg.n_specific_interests - 1));
      interest.specific_domain = rng.bernoulli(0.5) ? Domain::X : Domain::Y;
    }

    const int len = static_cast<int>(rng.uniform_int(cfg.min_len, cfg.max_len));
    std::vector<Domain> pattern(len);
    for (int attempt = 0; attempt < 100; ++attempt) {
      int count_x = 0;
      for (auto& d : pattern) {
        d = rng.bernoulli(0.5) ? Domain::X : Domain::Y;
        count_x += d == Domain::X;
      }
      if (std::min(count_x, len - count_x) >= std::min(3, len / 2)) break;
    }

    auto in_user_cluster = [&](Domain d, int number) {
      const int cluster = number / cfg.cluster_size;
      if (cluster == interest.shared) return true;
      return interest.specific >= 0 && d == interest.specific_domain &&
             cluster == cfg.n_shared_interests + interest.specific;
    };

    int shared_step[2];
    for (int& s : shared_step) s = static_cast<int>(rng.uniform_int(0, cfg.cluster_size - 1));
    int specific_step = static_cast<int>(rng.uniform_int(0, cfg.cluster_size - 1));
    for (int i = 0; i < len; ++i) {
      const Domain d = pattern[i];
      int number;
      if (rng.bernoulli(cfg.noise_rate)) {
        do {
          number = static_cast<int>(rng.uniform_int(0, n_items[domain_index(d)] - 1));
        } while (in_user_cluster(d, number));
      } else if (interest.specific >= 0 && d == interest.specific_domain &&
                 rng.bernoulli(cfg.specific_share)) {
        number = layout.specific_item(interest.specific,
                                      specific_step % cfg.cluster_size);
        ++specific_step;
      } else {
        int& step = shared_step[domain_index(d)];
        number = layout.shared_item(interest.shared, step % cfg.cluster_size);
        ++step;
      }
      data.events.push_back({interest.user_id, ClusterLayout::item_name(d, number),
                             d, 1'000'000 + 3600LL * i});
    }
    data.interests.push_back(interest);
  }
  return data;
}

// ---------------------------------------------------------------------------

std::string format_sequence(const UserSequence& seq) {
  std::string out;
  for (size_t i = 0; i < seq.items.size(); ++i) {
    if (i) out += ' ';
    out += domain_name(seq.items[i].domain);
    out += ':';
    out += std::to_string(seq.items[i].item);
  }
  return out;
}

namespace {

Token parse_token(std::string_view tok) {
  if (tok.size() < 3 || tok[1] != ':' || (tok[0] != 'X' && tok[0] != 'Y'))
    throw DataError("malformed token '" + std::string(tok) + "'");
  int item = 0;
  if (!parse_number(tok.substr(2), item) || item < 0)
    throw DataError("malformed token '" + std::string(tok) + "'");
  return Token{item, tok[0] == 'X' ? Domain::X : Domain::Y};
}

std::vector<std::vector<std::string_view>> read_table(const std::string& text,
                                                      const std::string& name,
                                                      size_t width) {
  std::vector<std::vector<std::string_view>> rows;
  std::string_view all(text);
  size_t start = 0;
  bool header = true;
  int line_no = 0;
  while (start < all.size()) {
    size_t end = all.find('\n', start);
    if (end == std::string_view::npos) end = all.size();
    std::string_view line = trim(all.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = split_fields(line, '\t');
    if (fields.size() != width)
      throw DataError(name + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

UserSequence parse_sequence(std::string_view text, int user_index) {
  UserSequence seq{user_index, {}};
  for (auto tok : split_fields(text, ' '))
    if (!tok.empty()) seq.items.push_back(parse_token(tok));
  return seq;
}

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "train.tsv");
    out << "user_index\tuser_id\tsequence\n";
    for (const auto& s : split.train)
      out << s.user_index << '\t' << split.user_ids.at(s.user_index) << '\t'
          << format_sequence(s) << '\n';
  }
  auto write_held = [&](const char* file, const std::vector<HeldOut>& part) {
    auto out = open_out(dir / file);
    out << "user_index\tuser_id\thistory\ttarget\n";
    for (const auto& h : part)
      out << h.history.user_index << '\t' << split.user_ids.at(h.history.user_index)
          << '\t' << format_sequence(h.history) << '\t'
          << format_sequence(UserSequence{0, {h.target}}) << '\n';
  };
  write_held("valid.tsv", split.validation);
  write_held("test.tsv", split.test);
  auto out = open_out(dir / "vocab.tsv");
  out << "domain\tindex\titem_id\n";
  for (Domain d : {Domain::X, Domain::Y}) {
    const Vocabulary& v = split.vocab(d);
    for (int i = kFirstItem; i < v.size(); ++i)
      out << domain_name(d) << '\t' << i << '\t' << v.item_id(i) << '\n';
  }
}

DatasetSplit read_split(const std::filesystem::path& dir) {
  DatasetSplit split;
  const std::string vocab_text = read_file(dir / "vocab.tsv");
  for (const auto& f : read_table(vocab_text, "vocab.tsv", 3)) {
    Vocabulary& v = f[0] == "X" ? split.vocab_x : split.vocab_y;
    int index = 0;
    if (!parse_number(f[1], index) || index != v.size())
      throw DataError("vocab.tsv indices must be dense and ordered");
    v.add(std::string(f[2]));
  }
  auto check_tokens = [&](const UserSequence& s) {
    for (const Token& t : s.items)
      if (t.item >= split.vocab(t.domain).size())
        throw DataError("token outside vocabulary in split files");
  };
  const std::string train_text = read_file(dir / "train.tsv");
  for (const auto& f : read_table(train_text, "train.tsv", 3)) {
    int user_index = 0;
    if (!parse_number(f[0], user_index) ||
        user_index != static_cast<int>(split.user_ids.size()))
      throw DataError("train.tsv user indices must be dense and ordered");
    split.user_ids.emplace_back(f[1]);
    split.train.push_back(parse_sequence(f[2], user_index));
    check_tokens(split.train.back());
  }
  auto read_held = [&](const char* file, std::vector<HeldOut>& part) {
    const std::string text = read_file(dir / file);
    for (const auto& f : read_table(text, file, 4)) {
      int user_index = 0;
      if (!parse_number(f[0], user_index) || user_index < 0 ||
          user_index >= static_cast<int>(split.user_ids.size()))
        throw DataError(std::string(file) + ": unknown user index");
      HeldOut h{parse_sequence(f[2], user_index), parse_token(f[3])};
      check_tokens(h.history);
      part.push_back(std::move(h));
    }
  };
  read_held("valid.tsv", split.validation);
  read_held("test.tsv", split.test);
  return split;
}

}  // namespace crossdiff
