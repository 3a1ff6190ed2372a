// src/evalkit.cpp

// Copyright 2026 The zrmat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "zrmat/evalkit.hpp"

#include <algorithm>
#include <tuple>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

// Greedy one-to-one matching on (cost, i, j) triples, cheapest first.
int greedy_match(std::vector<std::tuple<int, int, int>> candidates, int n_left, int n_right) {
  std::sort(candidates.begin(), candidates.end());
  std::vector<char> left(n_left, 0), right(n_right, 0);
  int matched = 0;
  for (const auto& [cost, i, j] : candidates) {
    if (left[i] || right[j]) continue;
    left[i] = right[j] = 1;
    ++matched;
  }
  return matched;
}

struct Stratum {
  std::uint64_t count = 0;
  const std::vector<int>* a = nullptr;
  const std::vector<int>* b = nullptr;
  const std::vector<int>* x = nullptr;  // null for the within condition
};

AbxTriple decode_triple(const Stratum& s, std::uint64_t idx) {
  const std::uint64_t nb = s.b->size();
  if (!s.x) {
    const std::uint64_t per_a = (s.a->size() - 1) * nb;
    const std::uint64_t ai = idx / per_a;
    const std::uint64_t rem = idx % per_a;
    std::uint64_t xi = rem / nb;
    if (xi >= ai) ++xi;
    return {(*s.a)[ai], (*s.b)[rem % nb], (*s.a)[xi]};
  }
  const std::uint64_t nx = s.x->size();
  const std::uint64_t ai = idx / (nb * nx);
  const std::uint64_t rem = idx % (nb * nx);
  return {(*s.a)[ai], (*s.b)[rem / nx], (*s.x)[rem % nx]};
}

}  // namespace

GoldAlignment read_gold(const fs::path& path) {
  GoldAlignment gold;
  for (const auto& row : read_tsv(path)) {
    if (row.fields.size() != 5)
      throw ParseError("gold line needs 5 tab-separated fields", row.line);
    GoldSegment seg{row.fields[1], parse_int_field(row.fields[2], "start", row.line),
                    parse_int_field(row.fields[3], "end", row.line)};
    if (seg.start < 0 || seg.start >= seg.end)
      throw ParseError("gold segment must satisfy 0 <= start < end", row.line);
    GoldUtterance& utt = gold[row.fields[0]];
    if (utt.segments.empty())
      utt.speaker = row.fields[4];
    else if (utt.speaker != row.fields[4])
      throw ParseError("speaker changes within utterance '" + row.fields[0] + "'", row.line);
    if (!utt.segments.empty() && utt.segments.back().end > seg.start)
      throw ParseError("gold segments of '" + row.fields[0] + "' overlap or are unordered",
                       row.line);
    utt.segments.push_back(std::move(seg));
  }
  return gold;
}

void write_gold(const GoldAlignment& gold, const fs::path& path) {
  std::string out;
  for (const auto& [utt, g] : gold)
    for (const auto& s : g.segments)
      out += utt + "\t" + s.label + "\t" + std::to_string(s.start) + "\t" +
             std::to_string(s.end) + "\t" + g.speaker + "\n";
  write_text_file(path, out);
}

const char* to_string(AbxCondition condition) {
  return condition == AbxCondition::kWithin ? "within" : "across";
}

AbxTask build_abx_task(const GoldAlignment& gold, AbxCondition condition, int max_per_pair,
                       std::uint64_t seed) {
  if (max_per_pair < 1) throw ValidationError("max triples per label pair must be >= 1");
  AbxTask task;
  task.condition = condition;
  std::map<std::string, std::map<std::string, std::vector<int>>> groups;
  for (const auto& [utt, g] : gold)
    for (const auto& s : g.segments) {
      groups[s.label][g.speaker].push_back(static_cast<int>(task.items.size()));
      task.items.push_back({utt, s.label, g.speaker, s.start, s.end});
    }

  std::uint64_t pair_index = 0;
  for (const auto& [la, by_speaker_a] : groups) {
    for (const auto& [lb, by_speaker_b] : groups) {
      if (la == lb) continue;
      std::vector<Stratum> strata;
      std::uint64_t total = 0;
      for (const auto& [spk, a] : by_speaker_a) {
        auto bit = by_speaker_b.find(spk);
        if (bit == by_speaker_b.end()) continue;
        if (condition == AbxCondition::kWithin) {
          const std::uint64_t c = a.size() * (a.size() - 1) * bit->second.size();
          if (c) strata.push_back({c, &a, &bit->second, nullptr});
        } else {
          for (const auto& [spk_x, x] : by_speaker_a) {
            if (spk_x == spk) continue;
            const std::uint64_t c = a.size() * bit->second.size() * x.size();
            if (c) strata.push_back({c, &a, &bit->second, &x});
          }
        }
      }
      for (const auto& s : strata) total += s.count;
      ++pair_index;
      if (total == 0) continue;
      auto emit = [&](std::uint64_t idx) {
        for (const auto& s : strata) {
          if (idx < s.count) {
            task.triples.push_back(decode_triple(s, idx));
            return;
          }
          idx -= s.count;
        }
      };
      if (total <= static_cast<std::uint64_t>(max_per_pair)) {
        for (std::uint64_t i = 0; i < total; ++i) emit(i);
      } else {
        Rng rng(derive_seed(seed, {0xab5, pair_index}));
        for (int i = 0; i < max_per_pair; ++i) emit(rng.below(total));
      }
    }
  }
  return task;
}

double abx_score(double d_ax, double d_bx) {
  if (d_ax > d_bx) return 1.0;
  if (d_ax == d_bx) return 0.5;
  return 0.0;
}

double abx_error(const Corpus& features, const AbxTask& task, FrameMetric metric) {
  if (task.triples.empty()) throw ValidationError("ABX task has no triples");
  std::map<std::string, const FeatureSequence*> by_id;
  for (const auto& seq : features) by_id[seq.utterance_id] = &seq;
  std::vector<FeatureMatrix> segs(task.items.size());
  std::vector<char> loaded(task.items.size(), 0);
  auto segment = [&](int i) -> const FeatureMatrix& {
    if (!loaded[i]) {
      const AbxItem& it = task.items[i];
      auto f = by_id.find(it.utterance_id);
      if (f == by_id.end())
        throw ValidationError("no features for utterance '" + it.utterance_id + "'");
      if (it.end > f->second->num_frames())
        throw ValidationError("ABX item runs past the end of '" + it.utterance_id + "'");
      segs[i] = f->second->frames.middleRows(it.start, it.end - it.start);
      loaded[i] = 1;
    }
    return segs[i];
  };
  std::map<std::pair<int, int>, double> cache;
  auto distance = [&](int i, int j) {
    auto key = std::minmax(i, j);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double d = feature_dtw(segment(i), segment(j), metric);
    cache.emplace(key, d);
    return d;
  };
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> per_pair;
  for (const AbxTriple& t : task.triples) {
    const double c = abx_score(distance(t.a, t.x), distance(t.b, t.x));
    auto& acc = per_pair[{task.items[t.a].label, task.items[t.b].label}];
    acc.first += c;
    acc.second += 1;
  }
  double sum = 0.0;
  for (const auto& [key, acc] : per_pair) sum += acc.first / acc.second;
  return sum / static_cast<double>(per_pair.size());
}

Prf make_prf(int matched, int discovered, int gold) {
  Prf p;
  p.matched = matched;
  p.discovered = discovered;
  p.gold = gold;
  p.precision = discovered > 0 ? static_cast<double>(matched) / discovered : 0.0;
  p.recall = gold > 0 ? static_cast<double>(matched) / gold : 0.0;
  p.f = p.precision + p.recall > 0.0
            ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
            : 0.0;
  return p;
}

int edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double ned(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
  if (pairs.empty()) throw ValidationError("NED needs at least one pair");
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    const std::size_t len = std::max(a.size(), b.size());
    if (len > 0) sum += static_cast<double>(edit_distance(a, b)) / static_cast<double>(len);
  }
  return sum / static_cast<double>(pairs.size());
}

double ned(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> seqs;
  auto chars = [](const std::string& s) {
    std::vector<std::string> out;
    for (char c : s) out.emplace_back(1, c);
    return out;
  };
  for (const auto& [a, b] : pairs) seqs.emplace_back(chars(a), chars(b));
  return ned(seqs);
}

std::vector<std::string> transcribe(const GoldUtterance& gold, int start, int end) {
  std::vector<std::string> out;
  for (const auto& s : gold.segments) {
    const int overlap = std::min(end, s.end) - std::max(start, s.start);
    if (overlap <= 0) continue;
    if (2 * overlap > s.length() || (s.start <= start && s.end >= end)) out.push_back(s.label);
  }
  return out;
}

std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> ned_pairs(
    const Labeling& discovered, const GoldAlignment& gold) {
  std::map<int, std::vector<std::vector<std::string>>> by_token;
  for (const auto& [utt, segs] : discovered) {
    auto g = gold.find(utt);
    if (g == gold.end()) continue;
    for (const auto& s : segs) by_token[s.token].push_back(transcribe(g->second, s.start, s.end));
  }
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
  for (const auto& [token, frags] : by_token)
    for (std::size_t i = 1; i < frags.size(); ++i) out.emplace_back(frags[i - 1], frags[i]);
  return out;
}

double coverage(const Labeling& discovered, const GoldAlignment& gold) {
  long covered = 0, total = 0;
  for (const auto& [utt, g] : gold) {
    auto d = discovered.find(utt);
    for (const auto& s : g.segments) {
      total += s.length();
      if (d == discovered.end()) continue;
      for (int t = s.start; t < s.end; ++t)
        for (const auto& seg : d->second)
          if (seg.start <= t && t < seg.end) {
            ++covered;
            break;
          }
    }
  }
  return total > 0 ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
}

Prf boundary_prf(const std::vector<int>& discovered, const std::vector<int>& gold, int tolerance) {
  if (tolerance < 0) throw ValidationError("boundary tolerance must be >= 0");
  std::vector<std::tuple<int, int, int>> candidates;
  for (std::size_t i = 0; i < discovered.size(); ++i)
    for (std::size_t j = 0; j < gold.size(); ++j) {
      const int d = std::abs(discovered[i] - gold[j]);
      if (d <= tolerance) candidates.emplace_back(d, static_cast<int>(i), static_cast<int>(j));
    }
  const int matched = greedy_match(std::move(candidates), static_cast<int>(discovered.size()),
                                   static_cast<int>(gold.size()));
  return make_prf(matched, static_cast<int>(discovered.size()), static_cast<int>(gold.size()));
}

std::vector<int> interior_boundaries(const SegmentSeq& segments) {
  std::vector<int> out;
  for (std::size_t i = 1; i < segments.size(); ++i) out.push_back(segments[i].start);
  return out;
}

std::vector<int> interior_boundaries(const GoldUtterance& gold) {
  std::set<int> b;
  for (const auto& s : gold.segments) {
    b.insert(s.start);
    b.insert(s.end);
  }
  if (!gold.segments.empty()) {
    b.erase(gold.segments.front().start);
    b.erase(gold.segments.back().end);
  }
  return {b.begin(), b.end()};
}

Prf boundary_scores(const Labeling& discovered, const GoldAlignment& gold, int tolerance) {
  int matched = 0, n_disc = 0, n_gold = 0;
  for (const auto& [utt, g] : gold) {
    const auto gb = interior_boundaries(g);
    std::vector<int> db;
    if (auto d = discovered.find(utt); d != discovered.end()) db = interior_boundaries(d->second);
    const Prf p = boundary_prf(db, gb, tolerance);
    matched += p.matched;
    n_disc += p.discovered;
    n_gold += p.gold;
  }
  for (const auto& [utt, segs] : discovered)
    if (!gold.count(utt)) n_disc += static_cast<int>(interior_boundaries(segs).size());
  return make_prf(matched, n_disc, n_gold);
}

TokenTypeScores token_type_prf(const Labeling& discovered, const GoldAlignment& gold,
                               int tolerance) {
  if (tolerance < 0) throw ValidationError("boundary tolerance must be >= 0");
  int matched = 0, n_disc = 0, n_gold = 0;
  std::set<int> ids;
  std::set<std::string> gold_types;
  std::map<int, std::map<std::string, int>> votes;
  for (const auto& [utt, segs] : discovered) {
    n_disc += static_cast<int>(segs.size());
    for (const auto& s : segs) ids.insert(s.token);
  }
  for (const auto& [utt, g] : gold) {
    n_gold += static_cast<int>(g.segments.size());
    for (const auto& s : g.segments) gold_types.insert(s.label);
    auto d = discovered.find(utt);
    if (d == discovered.end()) continue;
    const SegmentSeq& segs = d->second;
    std::vector<std::tuple<int, int, int>> candidates;
    for (std::size_t i = 0; i < segs.size(); ++i)
      for (std::size_t j = 0; j < g.segments.size(); ++j) {
        const int ds = std::abs(segs[i].start - g.segments[j].start);
        const int de = std::abs(segs[i].end - g.segments[j].end);
        if (ds <= tolerance && de <= tolerance)
          candidates.emplace_back(ds + de, static_cast<int>(i), static_cast<int>(j));
      }
    std::sort(candidates.begin(), candidates.end());
    std::vector<char> used_d(segs.size(), 0), used_g(g.segments.size(), 0);
    for (const auto& [cost, i, j] : candidates) {
      if (used_d[i] || used_g[j]) continue;
      used_d[i] = used_g[j] = 1;
      ++matched;
      ++votes[segs[i].token][g.segments[j].label];
    }
  }
  TokenTypeScores out;
  out.token = make_prf(matched, n_disc, n_gold);
  std::set<std::string> mapped;
  for (const auto& [token, counts] : votes) {
    const std::string* best = nullptr;
    int best_count = 0;
    for (const auto& [label, c] : counts)  // labels ascending: ties keep the smaller
      if (c > best_count) {
        best = &label;
        best_count = c;
      }
    if (best) mapped.insert(*best);
  }
  const int k = static_cast<int>(mapped.size());
  out.type = make_prf(k, static_cast<int>(ids.size()), static_cast<int>(gold_types.size()));
  return out;
}

Relevance read_relevance(const fs::path& path) {
  Relevance rel;
  for (const auto& row : read_tsv(path)) {
    if (row.fields.size() != 2)
      throw ParseError("relevance line needs 2 tab-separated fields", row.line);
    rel[row.fields[0]].insert(row.fields[1]);
  }
  return rel;
}

void write_relevance(const Relevance& relevance, const fs::path& path) {
  std::string out;
  for (const auto& [q, docs] : relevance)
    for (const auto& d : docs) out += q + "\t" + d + "\n";
  write_text_file(path, out);
}

double average_precision(const std::vector<RankedDoc>& ranking,
                         const std::set<std::string>& relevant) {
  if (relevant.empty()) throw ValidationError("average precision needs a relevant document");
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (relevant.count(ranking[i].doc)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  return sum / static_cast<double>(relevant.size());
}

double mean_average_precision(const std::vector<SearchResult>& results,
                              const Relevance& relevance) {
  if (results.empty()) throw ValidationError("no search results to score");
  double sum = 0.0;
  for (const auto& r : results) {
    auto it = relevance.find(r.query);
    if (it == relevance.end() || it->second.empty())
      throw ValidationError("query '" + r.query + "' has no relevant documents");
    sum += average_precision(r.ranking, it->second);
  }
  return sum / static_cast<double>(results.size());
}

}  // namespace zrmat
