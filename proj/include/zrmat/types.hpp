// zrmat/types.hpp

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

// Data types shared by every stage of the toolkit.

#ifndef ZRMAT_TYPES_HPP_
#define ZRMAT_TYPES_HPP_

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace zrmat {

// Frames are rows. Stored as float because that is what goes to disk;
// arithmetic that accumulates is done in double by the consumers.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSequence {
  std::string utterance_id;
  FeatureMatrix frames;
  std::uint32_t frame_period_ms = 10;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }

  bool operator==(const FeatureSequence& o) const {
    return utterance_id == o.utterance_id &&
           frame_period_ms == o.frame_period_ms &&
           frames.rows() == o.frames.rows() &&
           frames.cols() == o.frames.cols() && frames == o.frames;
  }
};

// A corpus is an ordered list of utterances; order follows the manifest.
using Corpus = std::vector<FeatureSequence>;

// Tokenizer hyperparameters: m states per token HMM, n distinct tokens.
struct LayerId {
  int m = 0;
  int n = 0;

  auto operator<=>(const LayerId&) const = default;
  std::string str() const { return std::to_string(m) + "," + std::to_string(n); }
};

// Half-open frame interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

struct Segment {
  int token = 0;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const Segment&) const = default;
};

using SegmentSeq = std::vector<Segment>;

// One layer's labels, keyed by utterance id.
using Labeling = std::map<std::string, SegmentSeq>;

// Labels for several layers at once, as stored in a label file.
using LayeredLabeling = std::map<LayerId, Labeling>;

// A segmentation without token ids, keyed by utterance id.
using Segmentation = std::map<std::string, std::vector<Span>>;

}  // namespace zrmat

#endif  // ZRMAT_TYPES_HPP_
