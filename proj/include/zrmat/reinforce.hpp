// zrmat/reinforce.hpp

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

// Cross-layer refinement: joint boundary fusion over all layers, then LDA
// over bags of (layer, token) words to give every fused segment a fresh
// token id.

#ifndef ZRMAT_REINFORCE_HPP_
#define ZRMAT_REINFORCE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

// b(j) for the T-1 interior positions; element j-1 is 1 iff a segment of
// the labeling starts at frame j.
std::vector<double> boundary_function(const SegmentSeq& segments);

struct FusionOptions {
  // Per-layer weights; when absent, w = m / sum(m).
  std::optional<std::map<LayerId, double>> weights;
  double threshold = 1.0;   // peaks need B >= threshold * mean(B)
  int merge_distance = 3;   // peaks closer than this are merged
  int min_segment = 3;
};

// Weighted average of the layers' boundary functions.
std::vector<double> joint_boundary(const std::map<LayerId, const SegmentSeq*>& layers,
                                   const std::map<LayerId, double>& weights);

// Centered [1/4, 1/2, 1/4] smoothing; positions outside the utterance
// count as zero.
std::vector<double> smooth_boundary(const std::vector<double>& b);

// Peak picking on a smoothed joint boundary function of an utterance with
// num_frames frames. Returns the chosen boundary frames, ascending.
std::vector<int> pick_peaks(const std::vector<double>& smoothed, int num_frames,
                            const FusionOptions& opts = {});

Segmentation fuse_boundaries(const LayeredLabeling& layers, const FusionOptions& opts = {});

// Maps (layer, token id) to a word index; layers are laid out in LayerId
// order, each taking n consecutive indices.
class Vocabulary {
 public:
  explicit Vocabulary(const std::vector<LayerId>& layers);

  int size() const { return size_; }
  int index(const LayerId& layer, int token) const;
  std::pair<LayerId, int> word(int index) const;

 private:
  std::map<LayerId, int> offset_;
  std::vector<LayerId> layers_;
  int size_ = 0;
};

struct LdaOptions {
  int topics = 2;
  std::optional<double> alpha;  // default 50 / topics
  double beta = 0.01;
  int sweeps = 200;
  std::uint64_t seed = 1;
};

struct LdaModel {
  int topics = 0;
  int vocab = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<int> topic_word;  // topics x vocab
  std::vector<int> topic_total; // topics
  std::vector<int> doc_topic;   // docs x topics
  int num_docs = 0;

  int word_count(int topic, int word) const { return topic_word[topic * vocab + word]; }
  int doc_count(int doc, int topic) const { return doc_topic[doc * topics + topic]; }

  // Most probable topic for a training document; ties go to the lower id.
  int dominant_topic(int doc) const;
  // phi(topic, word) = (n_tw + beta) / (n_t + V beta)
  double word_probability(int topic, int word) const;
};

// Collapsed Gibbs sampling. Every document must be non-empty.
LdaModel lda_fit(const std::vector<std::vector<int>>& documents, int vocab_size,
                 const LdaOptions& opts);

// One document per fused segment (utterances in key order, segments in
// time order): every token instance of every layer that overlaps the
// segment contributes its word once.
std::vector<std::vector<int>> build_documents(const Segmentation& segments,
                                              const LayeredLabeling& layers,
                                              const Vocabulary& vocab);

// Labels each fused segment with its document's dominant topic.
Labeling relabel(const Segmentation& segments, const LdaModel& lda);

struct ReinitOptions {
  FusionOptions fusion;
  double beta = 0.01;
  std::optional<double> alpha;
  int sweeps = 200;
  std::uint64_t seed = 1;
};

struct Reinitialization {
  Segmentation fused;
  std::map<int, LdaModel> lda;       // keyed by n
  LayeredLabeling initial_labels;    // omega_0 for every layer
};

// Fusion, one LDA per distinct n (topics = n), and the resulting initial
// labels for every layer. Segments shorter than a layer's m are merged
// into a neighbour for that layer.
Reinitialization reinitialize(const LayeredLabeling& layers, const ReinitOptions& opts = {});

ModelFile lda_to_model(const LdaModel& lda);
LdaModel lda_from_model(const ModelFile& model);

}  // namespace zrmat

#endif  // ZRMAT_REINFORCE_HPP_
