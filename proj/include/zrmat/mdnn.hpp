// zrmat/mdnn.hpp

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

// Feed-forward network with one softmax output group per tokenizer layer.
// Sigmoid hidden and bottleneck layers; the bottleneck activations are the
// features handed to the next iteration.

#ifndef ZRMAT_MDNN_HPP_
#define ZRMAT_MDNN_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "zrmat/corpusio.hpp"
#include "zrmat/frontend.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct NetConfig {
  int input_width = 0;
  std::vector<int> hidden = {256, 256};
  int bottleneck = 39;
  std::vector<int> groups;  // output group sizes, one per layer
  double learning_rate = 0.1;
  int minibatch = 64;
  int epochs = 100;
  std::uint64_t seed = 1;

  // Throws ValidationError on widths < 1, group sizes < 2 or a
  // non-positive learning rate.
  void validate() const;
};

// All parameters live in one flat vector; weights(i) and bias(i) are views
// into it. Affine layer i < num_trunk() maps the previous trunk layer
// (or the input) forward; the remaining layers are the output heads, all
// reading the bottleneck.
class MultiTargetNet {
 public:
  MultiTargetNet() = default;
  // All parameters zero.
  explicit MultiTargetNet(NetConfig config);

  // Uniform in +-1/sqrt(fan_in), seeded from config.seed.
  static MultiTargetNet random(NetConfig config);

  const NetConfig& config() const { return config_; }
  int num_trunk() const { return static_cast<int>(config_.hidden.size()) + 1; }
  int num_groups() const { return static_cast<int>(config_.groups.size()); }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  int head(int group) const { return num_trunk() + group; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // out x in
  Eigen::Map<Eigen::MatrixXd> weights(int layer);
  Eigen::Map<const Eigen::MatrixXd> weights(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  int fan_in(int layer) const { return layers_[layer].in; }
  int fan_out(int layer) const { return layers_[layer].out; }

 private:
  struct Affine {
    int in = 0;
    int out = 0;
    std::size_t offset = 0;
  };

  NetConfig config_;
  std::vector<Affine> layers_;
  std::vector<double> params_;
};

struct NetOutput {
  Eigen::MatrixXd bottleneck;          // B x bottleneck
  std::vector<Eigen::MatrixXd> probs;  // per group, B x n_g
};

NetOutput forward(const MultiTargetNet& net, const Eigen::MatrixXd& batch);

// targets[g][row] is the token id of row in group g.
using FrameTargets = std::vector<std::vector<int>>;

// Mean over rows of sum_g w_g * CE_g. Weights default to 1/G each. When
// grad is given it receives d loss / d params, same layout as params().
double loss_and_gradient(const MultiTargetNet& net, const Eigen::MatrixXd& batch,
                         const FrameTargets& targets,
                         const std::optional<std::vector<double>>& group_weights,
                         std::vector<double>* grad);

// Per-frame token ids of one utterance for each layer, in the given layer
// order. The segments must tile all num_frames frames.
FrameTargets frame_targets(const LayeredLabeling& labels,
                           const std::vector<LayerId>& layers,
                           const std::string& utterance_id, int num_frames);

struct TrainResult {
  MultiTargetNet net;
  std::vector<double> epoch_losses;  // mean minibatch loss per epoch
};

// Minibatch SGD with the config's learning rate, minibatch size and epoch
// count. inputs[i] and targets[i] belong to the same utterance.
TrainResult train(MultiTargetNet net, const std::vector<StackedInput>& inputs,
                  const std::vector<FrameTargets>& targets);

// Max over parameters of |a - n| / max(|a|, |n|, floor), analytic gradient
// a against central differences n with step h. Nets above 1e4 parameters
// are rejected.
double gradient_check(const MultiTargetNet& net, const Eigen::MatrixXd& batch,
                      const FrameTargets& targets, double h = 1e-5,
                      double floor = 1e-6);

Corpus extract_bnf(const MultiTargetNet& net, const std::vector<StackedInput>& inputs);

ModelFile net_to_model(const MultiTargetNet& net);
MultiTargetNet net_from_model(const ModelFile& model);

}  // namespace zrmat

#endif  // ZRMAT_MDNN_HPP_
