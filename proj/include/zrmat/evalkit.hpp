// zrmat/evalkit.hpp

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

// Evaluation: ABX discriminability, unit-discovery scores (NED, coverage,
// boundary/token/type P/R/F) and mean average precision for search.

#ifndef ZRMAT_EVALKIT_HPP_
#define ZRMAT_EVALKIT_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/match.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct GoldSegment {
  std::string label;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
};

struct GoldUtterance {
  std::string speaker;
  std::vector<GoldSegment> segments;  // ascending, non-overlapping; gaps allowed
};

using GoldAlignment = std::map<std::string, GoldUtterance>;

// TSV: utt <TAB> label <TAB> start <TAB> end <TAB> speaker
GoldAlignment read_gold(const fs::path& path);
void write_gold(const GoldAlignment& gold, const fs::path& path);

// -------------------------------------------------------------------- ABX

enum class AbxCondition { kWithin, kAcross };

const char* to_string(AbxCondition condition);

struct AbxItem {
  std::string utterance_id;
  std::string label;
  std::string speaker;
  int start = 0;
  int end = 0;
};

// Indices into AbxTask::items. A and X share a label, B does not.
struct AbxTriple {
  int a = 0;
  int b = 0;
  int x = 0;
};

struct AbxTask {
  AbxCondition condition = AbxCondition::kWithin;
  std::vector<AbxItem> items;
  std::vector<AbxTriple> triples;
};

// Within: A, B and X share a speaker. Across: A and B share a speaker, X
// has another. For every ordered label pair, all valid triples are kept
// when there are at most max_per_pair of them; otherwise max_per_pair are
// drawn uniformly (with replacement) using the seed.
AbxTask build_abx_task(const GoldAlignment& gold, AbxCondition condition,
                       int max_per_pair, std::uint64_t seed);

// Contribution of one triple from its two distances: 1 if d(A,X) > d(B,X),
// 0.5 on a tie, else 0.
double abx_score(double d_ax, double d_bx);

// Full-alignment feature DTW between segments; contributions averaged per
// (label of A, label of B) pair, then over pairs.
double abx_error(const Corpus& features, const AbxTask& task,
                 FrameMetric metric = FrameMetric::kCosine);

// ------------------------------------------------------- unit discovery

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  int matched = 0;
  int discovered = 0;
  int gold = 0;
};

// P = matched/discovered (0 when nothing is discovered), R likewise, F the
// harmonic mean or 0.
Prf make_prf(int matched, int discovered, int gold);

// Levenshtein distance over symbol sequences.
int edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Mean of edit distance / max length; two empty strings are at 0.
double ned(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs);
double ned(const std::vector<std::pair<std::string, std::string>>& pairs);

// Gold labels transcribing frames [start, end) of an utterance: every gold
// segment with more than half of its frames inside, or containing the
// whole span.
std::vector<std::string> transcribe(const GoldUtterance& gold, int start, int end);

// Pairs of same-token fragments (consecutive occurrences in corpus order),
// transcribed against the gold alignment.
std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> ned_pairs(
    const Labeling& discovered, const GoldAlignment& gold);

// Fraction of gold-covered frames inside at least one discovered segment.
double coverage(const Labeling& discovered, const GoldAlignment& gold);

// Greedy one-to-one matching, nearest pairs first.
Prf boundary_prf(const std::vector<int>& discovered, const std::vector<int>& gold,
                 int tolerance);

// Interior boundaries of every utterance, counts pooled over the corpus.
Prf boundary_scores(const Labeling& discovered, const GoldAlignment& gold, int tolerance);

std::vector<int> interior_boundaries(const SegmentSeq& segments);
std::vector<int> interior_boundaries(const GoldUtterance& gold);

struct TokenTypeScores {
  Prf token;
  Prf type;
};

// Token: a discovered segment matches a gold one when both ends are
// within tolerance (one-to-one, nearest first). Type: each discovered id
// maps to the majority gold label of its matched segments (ties to the
// smaller label); P = distinct mapped labels / discovered ids, R =
// distinct mapped labels / gold labels.
TokenTypeScores token_type_prf(const Labeling& discovered, const GoldAlignment& gold,
                               int tolerance);

// ----------------------------------------------------------------- search

using Relevance = std::map<std::string, std::set<std::string>>;

// TSV: query_id <TAB> doc
Relevance read_relevance(const fs::path& path);
void write_relevance(const Relevance& relevance, const fs::path& path);

double average_precision(const std::vector<RankedDoc>& ranking,
                         const std::set<std::string>& relevant);

double mean_average_precision(const std::vector<SearchResult>& results,
                              const Relevance& relevance);

}  // namespace zrmat

#endif  // ZRMAT_EVALKIT_HPP_
