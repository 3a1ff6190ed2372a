// src/synth.cpp

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

#include "zrmat/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

constexpr int kMaxRedraws = 20;

std::string phone_name(int p) { return "p" + std::to_string(p); }
std::string word_name(int w) { return "w" + std::to_string(w); }

std::string utterance_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%04d", i);
  return buf;
}

std::vector<std::vector<int>> make_words(const SyntheticLanguageSpec& spec, Rng& rng) {
  if (!spec.words.empty()) return spec.words;
  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> words;
  for (int attempt = 0; static_cast<int>(words.size()) < spec.num_words; ++attempt) {
    if (attempt > 10000) throw ValidationError("cannot draw enough distinct words");
    const int len = rng.range(spec.min_word_phones, spec.max_word_phones);
    std::vector<int> w;
    while (static_cast<int>(w.size()) < len) {
      const int p = static_cast<int>(rng.below(spec.num_phones));
      if (!w.empty() && w.back() == p) continue;
      w.push_back(p);
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

struct Occurrence {
  std::string utt;
  int start = 0;
  int end = 0;
};

// Returns false when some query cannot get a relevant document.
bool pick_queries(const SyntheticLanguageSpec& spec, SyntheticCorpus& c, Rng& rng) {
  const int W = static_cast<int>(c.words.size());
  std::vector<std::vector<Occurrence>> occ(W);
  std::vector<std::set<std::string>> containing(W);
  for (const auto& [utt, g] : c.word_alignment)
    for (const auto& s : g.segments) {
      const int w = std::stoi(s.label.substr(1));
      occ[w].push_back({utt, s.start, s.end});
      containing[w].insert(utt);
    }
  std::set<std::pair<std::string, int>> used;
  for (int q = 0; q < spec.num_queries; ++q) {
    const int w = q % W;
    if (containing[w].size() < 2) return false;
    std::vector<Occurrence> free;
    for (const auto& o : occ[w])
      if (!used.count({o.utt, o.start})) free.push_back(o);
    if (free.empty()) return false;
    const Occurrence& o = free[rng.below(free.size())];
    used.insert({o.utt, o.start});
    char id[16];
    std::snprintf(id, sizeof(id), "q%02d", q);
    c.queries.push_back({id, o.utt, {o.start, o.end}, word_name(w)});
    for (const auto& utt : containing[w])
      if (utt != o.utt) c.relevance[id].insert(utt);
  }
  return true;
}

SyntheticCorpus draw(const SyntheticLanguageSpec& spec, int utterances, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticCorpus c;
  c.words = make_words(spec, rng);
  for (const auto& w : c.words)
    for (int p : w)
      if (p < 0 || p >= spec.num_phones) throw ValidationError("word uses an unknown phone");

  const int d = spec.dim;
  Eigen::MatrixXd means(spec.num_phones, d);
  for (int p = 0; p < spec.num_phones; ++p)
    for (int j = 0; j < d; ++j) means(p, j) = spec.phone_spread * rng.normal();
  std::vector<Eigen::MatrixXd> shifts(spec.num_speakers, Eigen::MatrixXd(spec.num_phones, d));
  for (auto& s : shifts)
    for (int p = 0; p < spec.num_phones; ++p)
      for (int j = 0; j < d; ++j) s(p, j) = spec.speaker_shift * rng.normal();

  for (int u = 0; u < utterances; ++u) {
    const std::string utt = utterance_name(u);
    const int spk = u % spec.num_speakers;
    const std::string speaker = "s" + std::to_string(spk);
    c.speakers[utt] = speaker;
    GoldUtterance& phones = c.phones[utt];
    GoldUtterance& words = c.word_alignment[utt];
    phones.speaker = words.speaker = speaker;
    const int count = rng.range(spec.min_utterance_words, spec.max_utterance_words);
    std::vector<int> frame_phones;
    for (int k = 0; k < count; ++k) {
      const int w = static_cast<int>(rng.below(c.words.size()));
      const int word_start = static_cast<int>(frame_phones.size());
      for (int p : c.words[w]) {
        const int dur = rng.range(spec.min_duration, spec.max_duration);
        const int start = static_cast<int>(frame_phones.size());
        phones.segments.push_back({phone_name(p), start, start + dur});
        frame_phones.insert(frame_phones.end(), dur, p);
      }
      words.segments.push_back({word_name(w), word_start, static_cast<int>(frame_phones.size())});
    }
    FeatureSequence seq;
    seq.utterance_id = utt;
    seq.frames.resize(static_cast<Eigen::Index>(frame_phones.size()), d);
    for (std::size_t t = 0; t < frame_phones.size(); ++t) {
      const int p = frame_phones[t];
      for (int j = 0; j < d; ++j)
        seq.frames(t, j) = static_cast<float>(means(p, j) + shifts[spk](p, j) +
                                              spec.noise * rng.normal());
    }
    c.features.push_back(std::move(seq));
  }
  if (spec.num_queries > 0 && !pick_queries(spec, c, rng)) {
    c.queries.clear();
    c.relevance.clear();
    throw ValidationError("no valid query set");
  }
  return c;
}

}  // namespace

void SyntheticLanguageSpec::validate() const {
  if (num_phones < 1) throw ValidationError("synthetic language needs at least one phone");
  if (dim < 1) throw ValidationError("feature dimension must be >= 1");
  if (words.empty()) {
    if (num_words < 1) throw ValidationError("synthetic language needs at least one word");
    if (min_word_phones < 1 || max_word_phones < min_word_phones)
      throw ValidationError("bad word length range");
    if (num_phones < 2 && max_word_phones > 1)
      throw ValidationError("multi-phone words need at least two phones");
  }
  for (const auto& w : words)
    if (w.empty()) throw ValidationError("words must be non-empty");
  if (min_duration < 3 || max_duration < min_duration)
    throw ValidationError("phone durations must be >= 3 frames with min <= max");
  if (min_utterance_words < 1 || max_utterance_words < min_utterance_words)
    throw ValidationError("bad words-per-utterance range");
  if (num_speakers < 1) throw ValidationError("need at least one speaker");
  if (phone_spread < 0 || speaker_shift < 0 || noise < 0)
    throw ValidationError("scales must be non-negative");
  if (num_queries < 0) throw ValidationError("query count must be >= 0");
}

SyntheticCorpus gen_synth(const SyntheticLanguageSpec& spec, int utterances, std::uint64_t seed) {
  spec.validate();
  if (utterances < 1) throw ValidationError("need at least one utterance");
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    try {
      return draw(spec, utterances, derive_seed(seed, {0x5e7, static_cast<std::uint64_t>(attempt)}));
    } catch (const ValidationError& e) {
      if (std::string(e.what()) != "no valid query set") throw;
    }
  }
  throw ValidationError("could not draw a corpus where every query has a relevant document in " +
                        std::to_string(kMaxRedraws) + " attempts; add utterances or fewer queries");
}

void write_synth(const SyntheticCorpus& c, const fs::path& dir) {
  Manifest manifest;
  for (const auto& seq : c.features) {
    const fs::path rel = fs::path("features") / (seq.utterance_id + ".zrf");
    write_features(seq, dir / rel);
    manifest.entries.push_back({seq.utterance_id, rel.string(), c.speakers.at(seq.utterance_id)});
  }
  write_manifest(manifest, dir / "manifest.tsv");
  write_gold(c.phones, dir / "gold.tsv");
  write_gold(c.word_alignment, dir / "gold_words.tsv");
  write_queries(c.queries, dir / "queries.tsv");
  write_relevance(c.relevance, dir / "relevance.tsv");
}

}  // namespace zrmat
