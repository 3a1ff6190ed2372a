// src/mdnn.cpp

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

#include "zrmat/mdnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// Row-wise softmax, shifted by the row max.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Eigen::MatrixXd affine(const MultiTargetNet& net, int layer, const Eigen::MatrixXd& a) {
  return (a * net.weights(layer).transpose()).rowwise() + net.bias(layer).transpose();
}

// Activations of every trunk layer; acts[0] is the input.
std::vector<Eigen::MatrixXd> trunk_forward(const MultiTargetNet& net,
                                           const Eigen::MatrixXd& batch) {
  if (batch.cols() != net.config().input_width)
    throw ValidationError("input width " + std::to_string(batch.cols()) +
                          " does not match net input width " +
                          std::to_string(net.config().input_width));
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.num_trunk() + 1);
  acts.push_back(batch);
  for (int l = 0; l < net.num_trunk(); ++l) acts.push_back(sigmoid(affine(net, l, acts.back())));
  return acts;
}

Eigen::MatrixXd to_double(const FeatureMatrix& m) { return m.cast<double>(); }

}  // namespace

void NetConfig::validate() const {
  if (input_width < 1) throw ValidationError("net input width must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ValidationError("hidden widths must be >= 1");
  if (bottleneck < 1) throw ValidationError("bottleneck width must be >= 1");
  if (groups.empty()) throw ValidationError("net needs at least one output group");
  for (int g : groups)
    if (g < 2) throw ValidationError("output group sizes must be >= 2, got " + std::to_string(g));
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (minibatch < 1) throw ValidationError("minibatch size must be >= 1");
  if (epochs < 0) throw ValidationError("epoch count must be >= 0");
}

MultiTargetNet::MultiTargetNet(NetConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  int prev = config_.input_width;
  auto add = [&](int in, int out) {
    layers_.push_back({in, out, offset});
    offset += static_cast<std::size_t>(in) * out + out;
  };
  for (int h : config_.hidden) {
    add(prev, h);
    prev = h;
  }
  add(prev, config_.bottleneck);
  for (int g : config_.groups) add(config_.bottleneck, g);
  params_.assign(offset, 0.0);
}

MultiTargetNet MultiTargetNet::random(NetConfig config) {
  MultiTargetNet net(std::move(config));
  Rng rng(derive_seed(net.config_.seed, {0x1e7}));
  for (const Affine& l : net.layers_) {
    const double r = 1.0 / std::sqrt(static_cast<double>(l.in));
    const std::size_t count = static_cast<std::size_t>(l.in) * l.out + l.out;
    for (std::size_t i = 0; i < count; ++i) net.params_[l.offset + i] = rng.uniform(-r, r);
  }
  return net;
}

Eigen::Map<Eigen::MatrixXd> MultiTargetNet::weights(int layer) {
  const Affine& l = layers_.at(layer);
  return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<const Eigen::MatrixXd> MultiTargetNet::weights(int layer) const {
  const Affine& l = layers_.at(layer);
  return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<Eigen::VectorXd> MultiTargetNet::bias(int layer) {
  const Affine& l = layers_.at(layer);
  return {params_.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out};
}

Eigen::Map<const Eigen::VectorXd> MultiTargetNet::bias(int layer) const {
  const Affine& l = layers_.at(layer);
  return {params_.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out};
}

NetOutput forward(const MultiTargetNet& net, const Eigen::MatrixXd& batch) {
  auto acts = trunk_forward(net, batch);
  NetOutput out;
  out.bottleneck = std::move(acts.back());
  for (int g = 0; g < net.num_groups(); ++g)
    out.probs.push_back(softmax_rows(affine(net, net.head(g), out.bottleneck)));
  return out;
}

double loss_and_gradient(const MultiTargetNet& net, const Eigen::MatrixXd& batch,
                         const FrameTargets& targets,
                         const std::optional<std::vector<double>>& group_weights,
                         std::vector<double>* grad) {
  const int G = net.num_groups();
  const auto B = batch.rows();
  if (static_cast<int>(targets.size()) != G)
    throw ValidationError("expected targets for " + std::to_string(G) + " groups, got " +
                          std::to_string(targets.size()));
  for (int g = 0; g < G; ++g) {
    if (static_cast<Eigen::Index>(targets[g].size()) != B)
      throw ValidationError("target rows do not match batch rows");
    for (int y : targets[g])
      if (y < 0 || y >= net.config().groups[g])
        throw ValidationError("target " + std::to_string(y) + " out of range for group " +
                              std::to_string(g));
  }
  std::vector<double> w(G, 1.0 / G);
  if (group_weights) {
    if (static_cast<int>(group_weights->size()) != G)
      throw ValidationError("one weight per output group is required");
    w = *group_weights;
  }
  if (B == 0) {
    if (grad) grad->assign(net.params().size(), 0.0);
    return 0.0;
  }

  auto acts = trunk_forward(net, batch);
  const Eigen::MatrixXd& bn = acts.back();
  double loss = 0.0;
  Eigen::MatrixXd d_bn = Eigen::MatrixXd::Zero(B, bn.cols());
  MultiTargetNet grads;
  if (grad) grads = MultiTargetNet(net.config());

  for (int g = 0; g < G; ++g) {
    const int layer = net.head(g);
    const Eigen::MatrixXd z = affine(net, layer, bn);
    Eigen::MatrixXd d_z(B, z.cols());
    double ce = 0.0;
    for (Eigen::Index r = 0; r < B; ++r) {
      const double mx = z.row(r).maxCoeff();
      const Eigen::RowVectorXd e = (z.row(r).array() - mx).exp().matrix();
      const double sum = e.sum();
      const int y = targets[g][r];
      ce += std::log(sum) + mx - z(r, y);
      d_z.row(r) = e / sum;
      d_z(r, y) -= 1.0;
    }
    loss += w[g] * ce / static_cast<double>(B);
    if (!grad) continue;
    d_z *= w[g] / static_cast<double>(B);
    grads.weights(layer) = d_z.transpose() * bn;
    grads.bias(layer) = d_z.colwise().sum().transpose();
    d_bn += d_z * net.weights(layer);
  }
  if (!grad) return loss;

  Eigen::MatrixXd delta = d_bn;
  for (int l = net.num_trunk() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_out = acts[l + 1];
    delta = (delta.array() * a_out.array() * (1.0 - a_out.array())).matrix();
    grads.weights(l) = delta.transpose() * acts[l];
    grads.bias(l) = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * net.weights(l);
  }
  *grad = std::move(grads.params());
  return loss;
}

FrameTargets frame_targets(const LayeredLabeling& labels, const std::vector<LayerId>& layers,
                           const std::string& utterance_id, int num_frames) {
  FrameTargets out;
  for (const LayerId& layer : layers) {
    auto lit = labels.find(layer);
    if (lit == labels.end()) throw ValidationError("no labels for layer " + layer.str());
    auto uit = lit->second.find(utterance_id);
    if (uit == lit->second.end())
      throw ValidationError("layer " + layer.str() + " has no labels for '" + utterance_id + "'");
    validate_tiling(utterance_id, uit->second, num_frames);
    std::vector<int> ids(num_frames);
    for (const Segment& s : uit->second) std::fill(ids.begin() + s.start, ids.begin() + s.end, s.token);
    out.push_back(std::move(ids));
  }
  return out;
}

TrainResult train(MultiTargetNet net, const std::vector<StackedInput>& inputs,
                  const std::vector<FrameTargets>& targets) {
  const NetConfig& cfg = net.config();
  if (inputs.size() != targets.size())
    throw ValidationError("inputs and targets cover different utterance counts");
  const int G = net.num_groups();
  Eigen::Index total = 0;
  for (std::size_t u = 0; u < inputs.size(); ++u) {
    if (inputs[u].width() != cfg.input_width)
      throw ValidationError("'" + inputs[u].utterance_id + "' has input width " +
                            std::to_string(inputs[u].width()) + ", net expects " +
                            std::to_string(cfg.input_width));
    if (static_cast<int>(targets[u].size()) != G)
      throw ValidationError("'" + inputs[u].utterance_id + "' has targets for " +
                            std::to_string(targets[u].size()) + " groups, net has " +
                            std::to_string(G));
    for (const auto& t : targets[u])
      if (static_cast<Eigen::Index>(t.size()) != inputs[u].frames.rows())
        throw ValidationError("'" + inputs[u].utterance_id +
                              "': target rows do not match input rows");
    total += inputs[u].frames.rows();
  }

  Eigen::MatrixXd x(total, cfg.input_width);
  FrameTargets y(G, std::vector<int>(total));
  Eigen::Index row = 0;
  for (std::size_t u = 0; u < inputs.size(); ++u) {
    const auto rows = inputs[u].frames.rows();
    x.middleRows(row, rows) = to_double(inputs[u].frames);
    for (int g = 0; g < G; ++g)
      std::copy(targets[u][g].begin(), targets[u][g].end(), y[g].begin() + row);
    row += rows;
  }

  TrainResult result;
  std::vector<Eigen::Index> order(total);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, {0x5bd, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
    double sum = 0.0;
    for (Eigen::Index begin = 0; begin < total; begin += cfg.minibatch) {
      const Eigen::Index size = std::min<Eigen::Index>(cfg.minibatch, total - begin);
      Eigen::MatrixXd xb(size, cfg.input_width);
      FrameTargets yb(G, std::vector<int>(size));
      for (Eigen::Index i = 0; i < size; ++i) {
        xb.row(i) = x.row(order[begin + i]);
        for (int g = 0; g < G; ++g) yb[g][i] = y[g][order[begin + i]];
      }
      const double loss = loss_and_gradient(net, xb, yb, std::nullopt, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", rows " << begin << ".."
            << begin + size << " (learning rate " << cfg.learning_rate
            << "); lower net.learning_rate or check the input features for NaN/Inf";
        throw Error(msg.str());
      }
      sum += loss * static_cast<double>(size);
      auto& p = net.params();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * grad[i];
    }
    const double mean = total > 0 ? sum / static_cast<double>(total) : 0.0;
    result.epoch_losses.push_back(mean);
    spdlog::debug("mdnn epoch {} loss {:.6f}", epoch, mean);
  }
  result.net = std::move(net);
  return result;
}

double gradient_check(const MultiTargetNet& net, const Eigen::MatrixXd& batch,
                      const FrameTargets& targets, double h, double floor) {
  if (net.params().size() > 10000)
    throw ValidationError("gradient check is limited to nets with at most 1e4 parameters");
  std::vector<double> analytic;
  loss_and_gradient(net, batch, targets, std::nullopt, &analytic);
  MultiTargetNet probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.params().size(); ++i) {
    const double saved = probe.params()[i];
    probe.params()[i] = saved + h;
    const double up = loss_and_gradient(probe, batch, targets, std::nullopt, nullptr);
    probe.params()[i] = saved - h;
    const double down = loss_and_gradient(probe, batch, targets, std::nullopt, nullptr);
    probe.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

Corpus extract_bnf(const MultiTargetNet& net, const std::vector<StackedInput>& inputs) {
  Corpus out;
  out.reserve(inputs.size());
  for (const StackedInput& in : inputs) {
    const auto acts = trunk_forward(net, to_double(in.frames));
    FeatureSequence seq;
    seq.utterance_id = in.utterance_id;
    seq.frame_period_ms = in.frame_period_ms;
    seq.frames = acts.back().cast<float>();
    out.push_back(std::move(seq));
  }
  return out;
}

ModelFile net_to_model(const MultiTargetNet& net) {
  const NetConfig& c = net.config();
  ModelFile m;
  m.kind = "mdnn";
  m.set("input_width", static_cast<long long>(c.input_width));
  m.set_list("hidden", c.hidden);
  m.set("bottleneck", static_cast<long long>(c.bottleneck));
  m.set_list("groups", c.groups);
  m.set("learning_rate", c.learning_rate);
  m.set("minibatch", static_cast<long long>(c.minibatch));
  m.set("epochs", static_cast<long long>(c.epochs));
  m.set("seed", std::to_string(c.seed));
  m.payload = net.params();
  return m;
}

MultiTargetNet net_from_model(const ModelFile& model) {
  if (model.kind != "mdnn") throw FormatError("expected an mdnn model, got '" + model.kind + "'");
  NetConfig c;
  c.input_width = static_cast<int>(model.get_int("input_width"));
  c.hidden = model.get_list("hidden");
  c.bottleneck = static_cast<int>(model.get_int("bottleneck"));
  c.groups = model.get_list("groups");
  c.learning_rate = model.get_double("learning_rate");
  c.minibatch = static_cast<int>(model.get_int("minibatch"));
  c.epochs = static_cast<int>(model.get_int("epochs"));
  c.seed = std::stoull(model.get("seed"));
  MultiTargetNet net(c);
  if (model.payload.size() != net.params().size())
    throw FormatError("mdnn payload has " + std::to_string(model.payload.size()) +
                      " values, expected " + std::to_string(net.params().size()));
  net.params() = model.payload;
  return net;
}

}  // namespace zrmat
