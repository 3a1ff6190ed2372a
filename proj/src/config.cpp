// src/config.cpp

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

#include "zrmat/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      "corpus.manifest",      "corpus.gold",          "corpus.gold_words",
      "corpus.queries",       "corpus.relevance",     "corpus.aux_dir",
      "corpus.frame_aux_dir", "corpus.frame_aux_from", "features.cmvn",
      "grid.preset",          "grid.m",               "grid.n",
      "mat.max_epochs",       "mat.realign_passes",   "mat.init_segment_frames",
      "mat.iteration_input",  "iterations",           "mr.rounds",
      "mr.threshold",         "mr.merge_distance",    "mr.min_segment",
      "mr.lda_sweeps",        "mr.lda_beta",          "net.context",
      "net.hidden",           "net.bottleneck",       "net.learning_rate",
      "net.minibatch",        "net.epochs",           "search.metric",
      "search.znorm",         "search.normalize",     "eval.boundary_tolerance",
      "eval.abx_metric",      "eval.abx_max_triples", "seed",
      "output",
  };
  return keys;
}

Config Config::parse(const std::string& text, const fs::path& base_dir) {
  Config c;
  c.base_ = base_dir;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& known = known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (c.values_.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse(text, path.parent_path());
}

void Config::set(const std::string& key, const std::string& value) {
  const auto& known = known_keys();
  if (std::find(known.begin(), known.end(), key) == known.end())
    throw ConfigError("unknown key '" + key + "'");
  values_[key] = value;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key '" + key + "' must be an integer, got '" + s + "'");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key '" + key + "' must be a non-negative integer, got '" + s + "'");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("config key '" + key + "' must be a number, got '" + s + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config key '" + key + "' must be true or false, got '" + s + "'");
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_int_list(it->second);
  } catch (const Error&) {
    throw ConfigError("config key '" + key + "' must be a comma-separated integer list");
  }
}

fs::path Config::get_path(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) return {};
  fs::path p(it->second);
  return p.is_relative() && !base_.empty() ? base_ / p : p;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

PipelineConfig PipelineConfig::from(const Config& c) {
  PipelineConfig p;
  p.source = c;
  p.manifest = c.get_path("corpus.manifest");
  if (p.manifest.empty()) throw ConfigError("corpus.manifest is required");
  p.gold = c.get_path("corpus.gold");
  p.gold_words = c.get_path("corpus.gold_words");
  p.queries = c.get_path("corpus.queries");
  p.relevance = c.get_path("corpus.relevance");
  p.aux_dir = c.get_path("corpus.aux_dir");
  p.frame_aux_dir = c.get_path("corpus.frame_aux_dir");
  p.frame_aux_from = c.get_int("corpus.frame_aux_from", 2);
  if (p.queries.empty() != p.relevance.empty())
    throw ConfigError("corpus.queries and corpus.relevance go together");
  for (const fs::path* path : {&p.manifest, &p.gold, &p.gold_words, &p.queries, &p.relevance,
                               &p.aux_dir, &p.frame_aux_dir})
    if (!path->empty() && !fs::exists(*path))
      throw ConfigError("configured path does not exist: " + path->string());

  p.cmvn = c.get_bool("features.cmvn", true);

  const std::string preset = c.get("grid.preset", "desk");
  if (preset == "desk")
    p.grid = GranularityGrid::desk();
  else if (preset == "paper")
    p.grid = GranularityGrid::paper();
  else
    throw ConfigError("grid.preset must be desk or paper, got '" + preset + "'");
  p.grid.m = c.get_ints("grid.m", p.grid.m);
  p.grid.n = c.get_ints("grid.n", p.grid.n);
  try {
    p.grid.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }

  p.tokenizer.max_epochs = c.get_int("mat.max_epochs", p.tokenizer.max_epochs);
  p.tokenizer.realign_passes = c.get_int("mat.realign_passes", p.tokenizer.realign_passes);
  p.tokenizer.init_segment_frames =
      c.get_int("mat.init_segment_frames", p.tokenizer.init_segment_frames);
  if (p.tokenizer.max_epochs < 1) throw ConfigError("mat.max_epochs must be >= 1");
  if (p.tokenizer.realign_passes < 0) throw ConfigError("mat.realign_passes must be >= 0");
  const std::string mat_input = c.get("mat.iteration_input", "bnf");
  if (mat_input == "bnf")
    p.mat_tandem_input = false;
  else if (mat_input == "tandem")
    p.mat_tandem_input = true;
  else
    throw ConfigError("mat.iteration_input must be bnf or tandem, got '" + mat_input + "'");

  p.iterations = c.get_int("iterations", 1);
  if (p.iterations < 1) throw ConfigError("iterations must be >= 1");
  p.mr_rounds = c.get_int("mr.rounds", 1);
  if (p.mr_rounds < 0) throw ConfigError("mr.rounds must be >= 0");
  p.reinit.fusion.threshold = c.get_double("mr.threshold", p.reinit.fusion.threshold);
  p.reinit.fusion.merge_distance = c.get_int("mr.merge_distance", p.reinit.fusion.merge_distance);
  p.reinit.fusion.min_segment = c.get_int("mr.min_segment", p.reinit.fusion.min_segment);
  p.reinit.sweeps = c.get_int("mr.lda_sweeps", p.reinit.sweeps);
  p.reinit.beta = c.get_double("mr.lda_beta", p.reinit.beta);

  p.net_context = c.get_int("net.context", 4);
  if (p.net_context < 0) throw ConfigError("net.context must be >= 0");
  p.net.hidden = c.get_ints("net.hidden", p.net.hidden);
  p.net.bottleneck = c.get_int("net.bottleneck", p.net.bottleneck);
  p.net.learning_rate = c.get_double("net.learning_rate", p.net.learning_rate);
  p.net.minibatch = c.get_int("net.minibatch", p.net.minibatch);
  p.net.epochs = c.get_int("net.epochs", p.net.epochs);
  for (int h : p.net.hidden)
    if (h < 1) throw ConfigError("net.hidden widths must be >= 1");
  if (p.net.bottleneck < 1) throw ConfigError("net.bottleneck must be >= 1");
  if (!(p.net.learning_rate > 0.0)) throw ConfigError("net.learning_rate must be > 0");
  if (p.net.minibatch < 1) throw ConfigError("net.minibatch must be >= 1");
  if (p.net.epochs < 0) throw ConfigError("net.epochs must be >= 0");

  try {
    p.search_metric = parse_frame_metric(c.get("search.metric", "cosine"));
    p.abx_metric = parse_frame_metric(c.get("eval.abx_metric", "cosine"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  p.search_znorm = c.get_bool("search.znorm", true);
  p.search_normalize = c.get_bool("search.normalize", true);
  p.boundary_tolerance = c.get_int("eval.boundary_tolerance", 2);
  if (p.boundary_tolerance < 0) throw ConfigError("eval.boundary_tolerance must be >= 0");
  p.abx_max_triples = c.get_int("eval.abx_max_triples", 50);
  if (p.abx_max_triples < 1) throw ConfigError("eval.abx_max_triples must be >= 1");

  if (!c.has("seed")) throw ConfigError("seed is required (no clock-based default)");
  p.seed = c.get_u64("seed", 1);
  p.output = c.get_path("output");
  if (p.output.empty()) throw ConfigError("output is required");
  p.net.seed = derive_seed(p.seed, {0x4e7});
  p.reinit.seed = derive_seed(p.seed, {0x3e1});
  return p;
}

}  // namespace zrmat
