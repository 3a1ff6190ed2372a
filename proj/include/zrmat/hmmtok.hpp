// zrmat/hmmtok.hpp

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

// One acoustic tokenizer layer: a set of n left-to-right HMMs with m
// single-Gaussian states each, trained by alternating model estimation on
// the current labels and Viterbi decoding over a token loop.
//
// All likelihoods here share one definition. For a segment of token k
// occupying frames [s, e) with a state path that visits every state in
// order, the score is
//
//   log(1/n) + sum_t log N(x_t | state_t) + sum_t log a(state_t -> next)
//
// where each frame contributes its state's self-loop probability, or the
// advance probability (1 - self-loop) when it is the state's last frame,
// including the exit from the final state. Decoding maximizes the sum of
// segment scores; training maximizes the same quantity with the token
// sequence fixed. That shared objective is what makes the per-epoch corpus
// log-likelihood non-decreasing.

#ifndef ZRMAT_HMMTOK_HPP_
#define ZRMAT_HMMTOK_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "zrmat/corpusio.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct TokenHmm {
  Eigen::MatrixXd means;      // m x d
  Eigen::MatrixXd variances;  // m x d
  Eigen::VectorXd self_loop;  // m

  int num_states() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct TokenSet {
  LayerId layer;
  int dim = 0;
  std::vector<TokenHmm> models;

  int num_tokens() const { return static_cast<int>(models.size()); }
};

struct TokenizerOptions {
  int init_segment_frames = 10;
  int kmeans_iterations = 50;
  int realign_passes = 3;
  double variance_floor = 1e-4;
  double min_self_loop = 0.05;
  double max_self_loop = 0.95;
  int max_epochs = 10;
};

// Uniform cuts of max(m, init_segment_frames) frames (the last cut absorbs
// the remainder), segment means clustered by k-means++ / Lloyd.
Labeling initialize(const Corpus& corpus, const LayerId& layer, std::uint64_t seed,
                    const TokenizerOptions& opts = {});

// Estimates every token model from the segments carrying its id. Without a
// warm start the first state alignment is a uniform split of each segment;
// with one, it is the Viterbi alignment under the previous models. Either
// way realign_passes alignment/estimation rounds follow. Tokens with no
// segments are rebuilt from the most-populated token (see the .cpp).
TokenSet train_models(const Corpus& corpus, const Labeling& labels, const LayerId& layer,
                      const TokenizerOptions& opts = {},
                      const TokenSet* warm_start = nullptr);

struct DecodeResult {
  SegmentSeq segments;
  double log_likelihood = 0.0;
};

DecodeResult decode(const FeatureMatrix& frames, const TokenSet& tokens);

// Score of a fixed token sequence under its best state path (same
// objective as decode, so decode's result always scores at least as high).
double score_labeling(const FeatureMatrix& frames, const SegmentSeq& segments,
                      const TokenSet& tokens);

struct LayerFit {
  TokenSet tokens;
  Labeling labels;
  std::vector<double> epoch_log_likelihoods;
  int epochs = 0;
};

// Called after every epoch with (epoch, corpus log-likelihood).
using EpochCallback = std::function<void(int, double)>;

LayerFit fit_layer(const Corpus& corpus, const LayerId& layer, const Labeling& init,
                   const TokenizerOptions& opts = {}, const EpochCallback& on_epoch = {});

// Forced alignment of one segment to one token model. Returns the state
// index of each frame (non-decreasing, starts at 0, ends at m-1).
std::vector<int> align_segment(const FeatureMatrix& frames, int start, int end,
                               const TokenHmm& model, double* score = nullptr);

double gaussian_log_density(const Eigen::Ref<const Eigen::RowVectorXf>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& mean,
                            const Eigen::Ref<const Eigen::RowVectorXd>& var);

// Merges segments shorter than min_length into a neighbour so every
// segment can host a left-to-right model with min_length states.
SegmentSeq enforce_min_length(const SegmentSeq& segments, int min_length);

ModelFile token_set_to_model(const TokenSet& tokens);
TokenSet token_set_from_model(const ModelFile& model);

}  // namespace zrmat

#endif  // ZRMAT_HMMTOK_HPP_
