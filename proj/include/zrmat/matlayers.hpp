// zrmat/matlayers.hpp

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

// The multi-layered tokenizer: an M x N grid of (m, n) layers fitted
// independently, mutual reinforcement across them, and the feedback loop
// through the multi-target network.

#ifndef ZRMAT_MATLAYERS_HPP_
#define ZRMAT_MATLAYERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/frontend.hpp"
#include "zrmat/hmmtok.hpp"
#include "zrmat/mdnn.hpp"
#include "zrmat/reinforce.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct GranularityGrid {
  std::vector<int> m;
  std::vector<int> n;

  // {3,5,7} x {4,8,16}
  static GranularityGrid desk();
  // {3,5,7,9} x {50,100,300,500}
  static GranularityGrid paper();

  // m >= 2 and n >= 2, each list strictly increasing and non-empty.
  void validate() const;
  // Row-major over (m, n), which is also LayerId order.
  std::vector<LayerId> layers() const;
  int size() const { return static_cast<int>(m.size() * n.size()); }
};

std::uint64_t layer_seed(std::uint64_t seed, const LayerId& layer);

struct LayerState {
  TokenSet tokens;
  Labeling labels;
  std::vector<double> epoch_log_likelihoods;
};

struct IterationState {
  int iteration = 1;
  std::string input_feature = "mfcc";
  int mr_rounds = 0;
  std::map<LayerId, LayerState> layers;

  LayeredLabeling labels() const;
  std::vector<LayerId> layer_ids() const;
};

// Fits every layer from its own k-means initialization.
IterationState run_mat(const Corpus& features, const GranularityGrid& grid, std::uint64_t seed,
                       const TokenizerOptions& opts = {});

// One layer, as run_mat fits it.
LayerState fit_grid_layer(const Corpus& features, const LayerId& layer, std::uint64_t seed,
                          const TokenizerOptions& opts = {});

struct MrAudit {
  int round = 0;
  int fused_segments = 0;
  std::map<LayerId, int> epochs;
};

// rounds x (fuse, LDA re-initialization, refit every layer from omega_0).
IterationState apply_mr(IterationState state, const Corpus& features, int rounds,
                        const ReinitOptions& reinit, const TokenizerOptions& opts = {},
                        std::vector<MrAudit>* audit = nullptr);

// One refinement round; also returns the re-initialization it used.
IterationState mr_round(const IterationState& state, const Corpus& features,
                        const ReinitOptions& reinit, const TokenizerOptions& opts,
                        Reinitialization* used = nullptr);

// Inputs to the net at some iteration: the stacked initial features, one
// stack per earlier bottleneck feature set, one stack per frame-level
// auxiliary feature set, then the utterance-level aux vector.
struct NetInputs {
  const Corpus* initial = nullptr;
  std::vector<const Corpus*> bnf;        // iterations 1..k-1
  std::vector<const Corpus*> frame_aux;  // e.g. posteriorgrams
  std::map<std::string, std::vector<float>> aux;
  int context = 4;
};

std::vector<StackedInput> build_net_inputs(const NetInputs& in);

// Width of build_net_inputs' rows from dimensions alone.
int net_input_width(int initial_dim, const std::vector<int>& bnf_dims,
                    const std::vector<int>& frame_aux_dims, int aux_dim, int context);

struct NetIteration {
  MultiTargetNet net;
  std::vector<double> epoch_losses;
  Corpus bnf;
};

// Trains the net on every layer's labels and extracts its bottleneck
// features. The config's input width and groups are filled in here.
NetIteration run_iteration(const IterationState& state, const std::vector<StackedInput>& inputs,
                           NetConfig config);

// State directory: layer_<m>_<n>.model, labels.tsv and log.jsonl (one
// object per layer epoch).
void save_iteration(const IterationState& state, const fs::path& dir);
IterationState load_iteration(const fs::path& dir);

}  // namespace zrmat

#endif  // ZRMAT_MATLAYERS_HPP_
