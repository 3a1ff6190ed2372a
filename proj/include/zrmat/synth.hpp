// zrmat/synth.hpp

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

// Synthetic corpora: words are phone sequences, phones are runs of
// Gaussian frames, speakers shift the phone means. Gold alignments,
// queries and relevance lists come out alongside the features.

#ifndef ZRMAT_SYNTH_HPP_
#define ZRMAT_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/evalkit.hpp"
#include "zrmat/match.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct SyntheticLanguageSpec {
  int num_phones = 6;
  int dim = 13;
  // Phone sequences; generated (distinct, no phone repeated back to back)
  // when empty.
  std::vector<std::vector<int>> words;
  int num_words = 3;
  int min_word_phones = 3;
  int max_word_phones = 4;
  int min_duration = 8;  // frames per phone
  int max_duration = 12;
  int min_utterance_words = 1;
  int max_utterance_words = 3;
  int num_speakers = 2;
  double phone_spread = 1.0;   // sd of phone means
  double speaker_shift = 0.4;  // sd of per-speaker, per-phone mean offsets
  double noise = 2.5;          // sd of frame noise
  int num_queries = 5;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<std::vector<int>> words;
  Corpus features;
  std::map<std::string, std::string> speakers;
  GoldAlignment phones;
  GoldAlignment word_alignment;
  std::vector<Query> queries;
  Relevance relevance;
};

// Throws when no query set with a relevant document for every query is
// found within a bounded number of redraws.
SyntheticCorpus gen_synth(const SyntheticLanguageSpec& spec, int utterances, std::uint64_t seed);

// manifest.tsv, features/<utt>.zrf, gold.tsv, gold_words.tsv, queries.tsv,
// relevance.tsv.
void write_synth(const SyntheticCorpus& corpus, const fs::path& dir);

}  // namespace zrmat

#endif  // ZRMAT_SYNTH_HPP_
