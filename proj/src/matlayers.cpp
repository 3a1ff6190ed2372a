// src/matlayers.cpp

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

#include "zrmat/matlayers.hpp"

#include <sstream>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

using json = nlohmann::json;

void check_increasing(const std::vector<int>& v, const char* name) {
  if (v.empty()) throw ValidationError(std::string("grid.") + name + " is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 2)
      throw ValidationError(std::string("grid.") + name + " values must be >= 2, got " +
                            std::to_string(v[i]));
    if (i > 0 && v[i] <= v[i - 1])
      throw ValidationError(std::string("grid.") + name + " must be strictly increasing");
  }
}

std::string layer_file(const LayerId& layer) {
  return "layer_" + std::to_string(layer.m) + "_" + std::to_string(layer.n) + ".model";
}

}  // namespace

GranularityGrid GranularityGrid::desk() { return {{3, 5, 7}, {4, 8, 16}}; }

GranularityGrid GranularityGrid::paper() { return {{3, 5, 7, 9}, {50, 100, 300, 500}}; }

void GranularityGrid::validate() const {
  check_increasing(m, "m");
  check_increasing(n, "n");
}

std::vector<LayerId> GranularityGrid::layers() const {
  std::vector<LayerId> out;
  for (int mi : m)
    for (int ni : n) out.push_back({mi, ni});
  return out;
}

std::uint64_t layer_seed(std::uint64_t seed, const LayerId& layer) {
  return derive_seed(seed, {static_cast<std::uint64_t>(layer.m), static_cast<std::uint64_t>(layer.n)});
}

LayeredLabeling IterationState::labels() const {
  LayeredLabeling out;
  for (const auto& [id, layer] : layers) out[id] = layer.labels;
  return out;
}

std::vector<LayerId> IterationState::layer_ids() const {
  std::vector<LayerId> out;
  for (const auto& [id, layer] : layers) out.push_back(id);
  return out;
}

LayerState fit_grid_layer(const Corpus& features, const LayerId& layer, std::uint64_t seed,
                          const TokenizerOptions& opts) {
  try {
    const Labeling init = initialize(features, layer, layer_seed(seed, layer), opts);
    LayerFit fit = fit_layer(features, layer, init, opts);
    return {std::move(fit.tokens), std::move(fit.labels), std::move(fit.epoch_log_likelihoods)};
  } catch (const Error& e) {
    throw Error("layer " + layer.str() + ": " + e.what());
  }
}

IterationState run_mat(const Corpus& features, const GranularityGrid& grid, std::uint64_t seed,
                       const TokenizerOptions& opts) {
  grid.validate();
  if (features.empty()) throw ValidationError("cannot tokenize an empty corpus");
  IterationState state;
  for (const LayerId& layer : grid.layers()) {
    spdlog::info("fitting layer {}", layer.str());
    state.layers[layer] = fit_grid_layer(features, layer, seed, opts);
  }
  return state;
}

IterationState mr_round(const IterationState& state, const Corpus& features,
                        const ReinitOptions& reinit, const TokenizerOptions& opts,
                        Reinitialization* used) {
  if (state.layers.empty()) throw ValidationError("reinforcement needs at least one layer");
  ReinitOptions round_opts = reinit;
  round_opts.seed = derive_seed(reinit.seed, {0x3a, static_cast<std::uint64_t>(state.mr_rounds)});
  Reinitialization re = reinitialize(state.labels(), round_opts);
  IterationState next;
  next.iteration = state.iteration;
  next.input_feature = state.input_feature;
  next.mr_rounds = state.mr_rounds + 1;
  for (const auto& [layer, old] : state.layers) {
    try {
      LayerFit fit = fit_layer(features, layer, re.initial_labels.at(layer), opts);
      next.layers[layer] = {std::move(fit.tokens), std::move(fit.labels),
                            std::move(fit.epoch_log_likelihoods)};
    } catch (const Error& e) {
      throw Error("layer " + layer.str() + " (reinforcement round " +
                  std::to_string(next.mr_rounds) + "): " + e.what());
    }
  }
  if (used) *used = std::move(re);
  return next;
}

IterationState apply_mr(IterationState state, const Corpus& features, int rounds,
                        const ReinitOptions& reinit, const TokenizerOptions& opts,
                        std::vector<MrAudit>* audit) {
  if (rounds < 0) throw ValidationError("reinforcement rounds must be >= 0");
  for (int r = 0; r < rounds; ++r) {
    Reinitialization re;
    state = mr_round(state, features, reinit, opts, &re);
    if (audit) {
      MrAudit a;
      a.round = state.mr_rounds;
      for (const auto& [utt, spans] : re.fused) a.fused_segments += static_cast<int>(spans.size());
      for (const auto& [layer, ls] : state.layers)
        a.epochs[layer] = static_cast<int>(ls.epoch_log_likelihoods.size());
      audit->push_back(std::move(a));
    }
  }
  return state;
}

std::vector<StackedInput> build_net_inputs(const NetInputs& in) {
  if (!in.initial) throw ValidationError("net inputs need the initial features");
  std::vector<StackedInput> out = stack_corpus(*in.initial, in.context);
  auto append = [&](const Corpus& extra, const char* what) {
    if (extra.size() != out.size())
      throw ValidationError(std::string(what) + " features cover " +
                            std::to_string(extra.size()) + " utterances, expected " +
                            std::to_string(out.size()));
    const auto stacks = stack_corpus(extra, in.context);
    for (std::size_t u = 0; u < out.size(); ++u) {
      if (stacks[u].utterance_id != out[u].utterance_id)
        throw ValidationError(std::string(what) + " features are not in corpus order at '" +
                              out[u].utterance_id + "'");
      out[u] = concat_stacks(out[u], stacks[u]);
    }
  };
  for (const Corpus* b : in.bnf) append(*b, "bottleneck");
  for (const Corpus* f : in.frame_aux) append(*f, "frame-level aux");
  if (!in.aux.empty()) {
    for (auto& s : out) {
      auto it = in.aux.find(s.utterance_id);
      if (it == in.aux.end())
        throw ValidationError("no aux vector for utterance '" + s.utterance_id + "'");
      StackedInput a;
      a.utterance_id = s.utterance_id;
      a.aux_dim = static_cast<int>(it->second.size());
      a.frames.resize(s.frames.rows(), a.aux_dim);
      for (Eigen::Index t = 0; t < s.frames.rows(); ++t)
        for (int j = 0; j < a.aux_dim; ++j) a.frames(t, j) = it->second[j];
      const int base = s.base_dim;
      s = concat_stacks(s, a);
      s.base_dim = base;
    }
    const auto width = out.front().aux_dim;
    for (const auto& s : out)
      if (s.aux_dim != width) throw ValidationError("aux vectors differ in length");
  }
  return out;
}

int net_input_width(int initial_dim, const std::vector<int>& bnf_dims,
                    const std::vector<int>& frame_aux_dims, int aux_dim, int context) {
  int w = stacked_width(initial_dim, context, 0);
  for (int d : bnf_dims) w += stacked_width(d, context, 0);
  for (int d : frame_aux_dims) w += stacked_width(d, context, 0);
  return w + aux_dim;
}

NetIteration run_iteration(const IterationState& state, const std::vector<StackedInput>& inputs,
                           NetConfig config) {
  if (state.layers.empty()) throw ValidationError("the iteration state has no layers");
  if (inputs.empty()) throw ValidationError("no net inputs");
  const auto layers = state.layer_ids();
  config.input_width = inputs.front().width();
  config.groups.clear();
  for (const LayerId& l : layers) config.groups.push_back(l.n);
  const LayeredLabeling labels = state.labels();
  std::vector<FrameTargets> targets;
  targets.reserve(inputs.size());
  for (const auto& in : inputs)
    targets.push_back(
        frame_targets(labels, layers, in.utterance_id, static_cast<int>(in.frames.rows())));
  TrainResult trained = train(MultiTargetNet::random(config), inputs, targets);
  NetIteration out;
  out.bnf = extract_bnf(trained.net, inputs);
  out.net = std::move(trained.net);
  out.epoch_losses = std::move(trained.epoch_losses);
  return out;
}

void save_iteration(const IterationState& state, const fs::path& dir) {
  fs::create_directories(dir);
  std::string log;
  json layers = json::array();
  for (const auto& [id, layer] : state.layers) {
    write_model(token_set_to_model(layer.tokens), dir / layer_file(id));
    for (std::size_t e = 0; e < layer.epoch_log_likelihoods.size(); ++e)
      log += json{{"layer", id.str()}, {"epoch", e + 1},
                  {"log_likelihood", layer.epoch_log_likelihoods[e]}}.dump() + "\n";
    layers.push_back(id.str());
  }
  write_labels(state.labels(), dir / "labels.tsv");
  write_text_file(dir / "log.jsonl", log);
  const json meta = {{"iteration", state.iteration},
                     {"input_feature", state.input_feature},
                     {"mr_rounds", state.mr_rounds},
                     {"layers", layers}};
  write_text_file(dir / "state.json", meta.dump(2) + "\n");
}

IterationState load_iteration(const fs::path& dir) {
  IterationState state;
  json meta;
  try {
    meta = json::parse(read_text_file(dir / "state.json"));
    state.iteration = meta.at("iteration").get<int>();
    state.input_feature = meta.at("input_feature").get<std::string>();
    state.mr_rounds = meta.at("mr_rounds").get<int>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "state.json").string() + ": " + e.what());
  }
  const LayeredLabeling labels = read_labels(dir / "labels.tsv");
  for (const auto& name : meta.at("layers")) {
    const LayerId id = parse_layer_id(name.get<std::string>());
    LayerState ls;
    ls.tokens = token_set_from_model(read_model(dir / layer_file(id)));
    auto it = labels.find(id);
    if (it == labels.end()) throw FormatError("labels.tsv lacks layer " + id.str());
    ls.labels = it->second;
    state.layers[id] = std::move(ls);
  }
  std::istringstream log(read_text_file(dir / "log.jsonl"));
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    auto it = state.layers.find(parse_layer_id(j.at("layer").get<std::string>()));
    if (it != state.layers.end())
      it->second.epoch_log_likelihoods.push_back(j.at("log_likelihood").get<double>());
  }
  return state;
}

}  // namespace zrmat
