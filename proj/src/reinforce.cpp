// src/reinforce.cpp

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

#include "zrmat/reinforce.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "zrmat/error.hpp"
#include "zrmat/hmmtok.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

int utterance_length(const SegmentSeq& segs) { return segs.empty() ? 0 : segs.back().end; }

std::map<LayerId, double> default_weights(const LayeredLabeling& layers) {
  double total = 0.0;
  for (const auto& [layer, lab] : layers) total += layer.m;
  std::map<LayerId, double> w;
  for (const auto& [layer, lab] : layers) w[layer] = layer.m / total;
  return w;
}

std::vector<Span> spans_from_boundaries(const std::vector<int>& boundaries, int num_frames) {
  std::vector<Span> out;
  int start = 0;
  for (int b : boundaries) {
    out.push_back({start, b});
    start = b;
  }
  out.push_back({start, num_frames});
  return out;
}

}  // namespace

// ----------------------------------------------------------------- fusion

std::vector<double> boundary_function(const SegmentSeq& segments) {
  const int T = utterance_length(segments);
  std::vector<double> b(std::max(T - 1, 0), 0.0);
  for (std::size_t i = 1; i < segments.size(); ++i) b[segments[i].start - 1] = 1.0;
  return b;
}

std::vector<double> joint_boundary(const std::map<LayerId, const SegmentSeq*>& layers,
                                   const std::map<LayerId, double>& weights) {
  if (layers.empty()) return {};
  const int T = utterance_length(*layers.begin()->second);
  std::vector<double> joint(std::max(T - 1, 0), 0.0);
  double wsum = 0.0;
  for (const auto& [layer, segs] : layers) {
    if (utterance_length(*segs) != T)
      throw ValidationError("layer " + layer.str() + " disagrees on utterance length");
    auto it = weights.find(layer);
    if (it == weights.end()) throw ValidationError("no fusion weight for layer " + layer.str());
    if (!(it->second > 0)) throw ValidationError("fusion weights must be positive");
    const auto b = boundary_function(*segs);
    for (std::size_t j = 0; j < b.size(); ++j) joint[j] += it->second * b[j];
    wsum += it->second;
  }
  for (double& v : joint) v /= wsum;
  return joint;
}

std::vector<double> smooth_boundary(const std::vector<double>& b) {
  const std::size_t n = b.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? b[i - 1] : 0.0;
    const double right = i + 1 < n ? b[i + 1] : 0.0;
    out[i] = 0.25 * left + 0.5 * b[i] + 0.25 * right;
  }
  return out;
}

std::vector<int> pick_peaks(const std::vector<double>& s, int num_frames,
                            const FusionOptions& opts) {
  const int n = static_cast<int>(s.size());
  if (n == 0) return {};
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  const int spacing = std::max(opts.merge_distance, opts.min_segment);

  struct Peak {
    int frame;
    double value;
  };
  std::vector<Peak> candidates;
  for (int i = 0; i < n; ++i) {
    const double left = i > 0 ? s[i - 1] : 0.0;
    const double right = i + 1 < n ? s[i + 1] : 0.0;
    const int frame = i + 1;
    if (s[i] <= 0.0) continue;
    if (!(left - 2.0 * s[i] + right < 0.0)) continue;
    if (s[i] < left || s[i] < right) continue;
    if (s[i] < opts.threshold * mean) continue;
    if (frame < opts.min_segment || num_frames - frame < opts.min_segment) continue;
    candidates.push_back({frame, s[i]});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });
  std::vector<int> kept;
  for (const auto& p : candidates) {
    bool ok = true;
    for (int k : kept)
      if (std::abs(k - p.frame) < spacing) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(p.frame);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

Segmentation fuse_boundaries(const LayeredLabeling& layers, const FusionOptions& opts) {
  if (layers.empty()) throw ValidationError("boundary fusion needs at least one layer");
  const auto& first = layers.begin()->second;
  Segmentation out;
  if (layers.size() == 1) {
    spdlog::warn("boundary fusion called with a single layer; returning its own segmentation");
    for (const auto& [utt, segs] : first)
      for (const auto& s : segs) out[utt].push_back({s.start, s.end});
    return out;
  }
  const auto weights = opts.weights ? *opts.weights : default_weights(layers);
  for (const auto& [utt, segs0] : first) {
    std::map<LayerId, const SegmentSeq*> per_layer;
    for (const auto& [layer, lab] : layers) {
      auto it = lab.find(utt);
      if (it == lab.end())
        throw ValidationError("layer " + layer.str() + " has no labels for '" + utt + "'");
      per_layer[layer] = &it->second;
    }
    const int T = utterance_length(segs0);
    const auto smoothed = smooth_boundary(joint_boundary(per_layer, weights));
    out[utt] = spans_from_boundaries(pick_peaks(smoothed, T, opts), T);
  }
  for (const auto& [layer, lab] : layers)
    if (lab.size() != first.size())
      throw ValidationError("layer " + layer.str() + " covers a different set of utterances");
  return out;
}

// ------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary(const std::vector<LayerId>& layers) {
  std::set<LayerId> sorted(layers.begin(), layers.end());
  for (const auto& l : sorted) {
    offset_[l] = size_;
    layers_.push_back(l);
    size_ += l.n;
  }
}

int Vocabulary::index(const LayerId& layer, int token) const {
  auto it = offset_.find(layer);
  if (it == offset_.end()) throw ValidationError("layer " + layer.str() + " not in vocabulary");
  if (token < 0 || token >= layer.n) throw ValidationError("token id out of range");
  return it->second + token;
}

std::pair<LayerId, int> Vocabulary::word(int index) const {
  for (const auto& l : layers_) {
    const int off = offset_.at(l);
    if (index >= off && index < off + l.n) return {l, index - off};
  }
  throw ValidationError("word index out of range");
}

// -------------------------------------------------------------------- lda

int LdaModel::dominant_topic(int doc) const {
  int best = 0;
  for (int k = 1; k < topics; ++k)
    if (doc_count(doc, k) > doc_count(doc, best)) best = k;
  return best;
}

double LdaModel::word_probability(int topic, int word) const {
  return (word_count(topic, word) + beta) / (topic_total[topic] + vocab * beta);
}

LdaModel lda_fit(const std::vector<std::vector<int>>& documents, int vocab_size,
                 const LdaOptions& opts) {
  if (opts.topics < 2) throw ValidationError("LDA needs at least 2 topics");
  if (vocab_size < 1) throw ValidationError("LDA needs a non-empty vocabulary");
  const int K = opts.topics;
  LdaModel lda;
  lda.topics = K;
  lda.vocab = vocab_size;
  lda.alpha = opts.alpha.value_or(50.0 / K);
  lda.beta = opts.beta;
  lda.num_docs = static_cast<int>(documents.size());
  lda.topic_word.assign(static_cast<std::size_t>(K) * vocab_size, 0);
  lda.topic_total.assign(K, 0);
  lda.doc_topic.assign(static_cast<std::size_t>(lda.num_docs) * K, 0);

  Rng rng(opts.seed);
  std::vector<std::vector<int>> z(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (documents[d].empty())
      throw ValidationError("LDA document " + std::to_string(d) + " (segment) is empty");
    z[d].resize(documents[d].size());
    for (std::size_t i = 0; i < documents[d].size(); ++i) {
      const int w = documents[d][i];
      if (w < 0 || w >= vocab_size) throw ValidationError("word index out of vocabulary");
      const int k = static_cast<int>(rng.below(K));
      z[d][i] = k;
      ++lda.topic_word[k * vocab_size + w];
      ++lda.topic_total[k];
      ++lda.doc_topic[d * K + k];
    }
  }

  const double vbeta = vocab_size * lda.beta;
  std::vector<double> p(K);
  for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
    for (std::size_t d = 0; d < documents.size(); ++d) {
      int* dt = &lda.doc_topic[d * K];
      for (std::size_t i = 0; i < documents[d].size(); ++i) {
        const int w = documents[d][i];
        int k = z[d][i];
        --lda.topic_word[k * vocab_size + w];
        --lda.topic_total[k];
        --dt[k];
        double total = 0.0;
        for (int t = 0; t < K; ++t) {
          total += (dt[t] + lda.alpha) * (lda.topic_word[t * vocab_size + w] + lda.beta) /
                   (lda.topic_total[t] + vbeta);
          p[t] = total;
        }
        const double u = rng.uniform() * total;
        k = K - 1;
        for (int t = 0; t < K; ++t)
          if (u < p[t]) {
            k = t;
            break;
          }
        z[d][i] = k;
        ++lda.topic_word[k * vocab_size + w];
        ++lda.topic_total[k];
        ++dt[k];
      }
    }
  }
  return lda;
}

std::vector<std::vector<int>> build_documents(const Segmentation& segments,
                                              const LayeredLabeling& layers,
                                              const Vocabulary& vocab) {
  std::vector<std::vector<int>> docs;
  for (const auto& [utt, spans] : segments) {
    for (const auto& span : spans) {
      std::vector<int> doc;
      for (const auto& [layer, lab] : layers) {
        auto it = lab.find(utt);
        if (it == lab.end())
          throw ValidationError("layer " + layer.str() + " has no labels for '" + utt + "'");
        for (const auto& s : it->second)
          if (s.start < span.end && s.end > span.start) doc.push_back(vocab.index(layer, s.token));
      }
      if (doc.empty())
        throw ValidationError("segment [" + std::to_string(span.start) + "," +
                              std::to_string(span.end) + ") of '" + utt + "' has no tokens");
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

Labeling relabel(const Segmentation& segments, const LdaModel& lda) {
  Labeling out;
  int doc = 0;
  for (const auto& [utt, spans] : segments) {
    auto& segs = out[utt];
    for (const auto& span : spans) {
      if (doc >= lda.num_docs) throw ValidationError("more segments than LDA documents");
      segs.push_back({lda.dominant_topic(doc), span.start, span.end});
      ++doc;
    }
  }
  if (doc != lda.num_docs) throw ValidationError("segment count does not match LDA documents");
  return out;
}

Reinitialization reinitialize(const LayeredLabeling& layers, const ReinitOptions& opts) {
  Reinitialization out;
  out.fused = fuse_boundaries(layers, opts.fusion);
  std::vector<LayerId> ids;
  std::set<int> distinct_n;
  for (const auto& [layer, lab] : layers) {
    ids.push_back(layer);
    distinct_n.insert(layer.n);
  }
  const Vocabulary vocab(ids);
  const auto docs = build_documents(out.fused, layers, vocab);
  for (int n : distinct_n) {
    LdaOptions lo;
    lo.topics = n;
    lo.alpha = opts.alpha;
    lo.beta = opts.beta;
    lo.sweeps = opts.sweeps;
    lo.seed = derive_seed(opts.seed, {0x1da, static_cast<std::uint64_t>(n)});
    auto lda = lda_fit(docs, vocab.size(), lo);
    const Labeling base = relabel(out.fused, lda);
    for (const auto& layer : ids) {
      if (layer.n != n) continue;
      Labeling lab;
      for (const auto& [utt, segs] : base) lab[utt] = enforce_min_length(segs, layer.m);
      out.initial_labels[layer] = std::move(lab);
    }
    out.lda.emplace(n, std::move(lda));
  }
  return out;
}

ModelFile lda_to_model(const LdaModel& lda) {
  ModelFile f;
  f.kind = "lda";
  f.set("topics", static_cast<long long>(lda.topics));
  f.set("vocab", static_cast<long long>(lda.vocab));
  f.set("docs", static_cast<long long>(lda.num_docs));
  f.set("alpha", lda.alpha);
  f.set("beta", lda.beta);
  f.set("layout", std::string("topic_word[topics*vocab] doc_topic[docs*topics]"));
  for (int v : lda.topic_word) f.payload.push_back(v);
  for (int v : lda.doc_topic) f.payload.push_back(v);
  return f;
}

LdaModel lda_from_model(const ModelFile& f) {
  if (f.kind != "lda") throw FormatError("expected an lda model, got " + f.kind);
  LdaModel lda;
  lda.topics = static_cast<int>(f.get_int("topics"));
  lda.vocab = static_cast<int>(f.get_int("vocab"));
  lda.num_docs = static_cast<int>(f.get_int("docs"));
  lda.alpha = f.get_double("alpha");
  lda.beta = f.get_double("beta");
  const std::size_t tw = static_cast<std::size_t>(lda.topics) * lda.vocab;
  const std::size_t dt = static_cast<std::size_t>(lda.num_docs) * lda.topics;
  if (f.payload.size() != tw + dt) throw FormatError("lda payload size mismatch");
  lda.topic_word.assign(f.payload.begin(), f.payload.begin() + static_cast<std::ptrdiff_t>(tw));
  lda.doc_topic.assign(f.payload.begin() + static_cast<std::ptrdiff_t>(tw), f.payload.end());
  lda.topic_total.assign(lda.topics, 0);
  for (int k = 0; k < lda.topics; ++k)
    for (int w = 0; w < lda.vocab; ++w) lda.topic_total[k] += lda.word_count(k, w);
  return lda;
}

}  // namespace zrmat
