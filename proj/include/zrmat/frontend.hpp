// zrmat/frontend.hpp

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

#ifndef ZRMAT_FRONTEND_HPP_
#define ZRMAT_FRONTEND_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

// The MFCC recipe. Defaults give 12 cepstra + log energy, then deltas and
// accelerations: 39 values per frame.
struct MfccOptions {
  double window_ms = 25.0;
  double shift_ms = 10.0;
  double preemphasis = 0.97;
  int num_filters = 26;
  int num_ceps = 12;
  int delta_window = 2;
  double low_freq = 0.0;
  double high_freq = 0.0;  // 0 means Nyquist
  double energy_floor = 1e-10;
};

struct PcmAudio {
  std::vector<std::int16_t> samples;
  int sample_rate = 16000;
};

// 16-bit PCM mono RIFF/WAVE only.
PcmAudio read_wav(const fs::path& path);
void write_wav(const PcmAudio& audio, const fs::path& path);

int mfcc_num_frames(std::size_t num_samples, int sample_rate,
                    const MfccOptions& opts = {});

// Static coefficients only: [c1..c12, logE] per frame.
FeatureMatrix mfcc_static(std::span<const std::int16_t> pcm, int sample_rate,
                          const MfccOptions& opts = {});

// Regression deltas over +-window frames, edges clamped.
FeatureMatrix deltas(const FeatureMatrix& x, int window);

FeatureSequence mfcc39(std::span<const std::int16_t> pcm, int sample_rate,
                       const MfccOptions& opts = {});

// Per-utterance mean/variance normalization; variance floored at 1e-8.
FeatureSequence cmvn(const FeatureSequence& seq);

struct StackedInput {
  std::string utterance_id;
  FeatureMatrix frames;
  std::uint32_t frame_period_ms = 10;
  int context = 0;
  int base_dim = 0;
  int aux_dim = 0;

  int width() const { return static_cast<int>(frames.cols()); }
};

// Row t holds frames t-c..t+c (clamped to the utterance) followed by aux.
StackedInput stack(const FeatureSequence& seq, int context,
                   std::span<const float> aux = {});

// Stacks a whole corpus; every aux vector must have the same length, and
// an utterance missing from a non-empty aux map is an error.
std::vector<StackedInput> stack_corpus(
    const Corpus& corpus, int context,
    const std::map<std::string, std::vector<float>>& aux = {});

// Column-wise concatenation of two sequences of equal length. An empty
// second argument returns the first unchanged.
FeatureSequence concat_features(const FeatureSequence& a, const FeatureSequence& b);

// Side-by-side concatenation of stacks built from the same utterance.
StackedInput concat_stacks(const StackedInput& a, const StackedInput& b);

inline int stacked_width(int dim, int context, int aux_dim) {
  return dim * (2 * context + 1) + aux_dim;
}

}  // namespace zrmat

#endif  // ZRMAT_FRONTEND_HPP_
