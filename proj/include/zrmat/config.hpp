// zrmat/config.hpp

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

// Pipeline configuration: a flat "key = value" text file with dotted keys.
// '#' starts a comment. Relative paths resolve against the file's
// directory.

#ifndef ZRMAT_CONFIG_HPP_
#define ZRMAT_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zrmat/corpusio.hpp"
#include "zrmat/matlayers.hpp"
#include "zrmat/match.hpp"

namespace zrmat {

class Config {
 public:
  // Unknown keys and duplicate keys are ConfigErrors.
  static Config parse(const std::string& text, const fs::path& base_dir = {});
  static Config load(const fs::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  // Empty when the key is absent.
  fs::path get_path(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const fs::path& base_dir() const { return base_; }

  // Canonical text: one "key = value" line per key, sorted.
  std::string dump() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
  fs::path base_;
};

struct PipelineConfig {
  fs::path manifest;
  fs::path gold;        // phone-level gold alignment (optional)
  fs::path gold_words;  // word-level gold alignment (optional)
  fs::path queries;     // optional; search needs queries and relevance
  fs::path relevance;
  fs::path aux_dir;        // <utt>.zrf, one row: utterance-level aux vector
  fs::path frame_aux_dir;  // <utt>.zrf, frame-level aux features
  int frame_aux_from = 2;  // first iteration that uses frame-level aux

  bool cmvn = true;
  GranularityGrid grid = GranularityGrid::desk();
  TokenizerOptions tokenizer;
  bool mat_tandem_input = false;  // iteration >= 2 MAT input: BNF, or BNF + initial
  int iterations = 1;
  int mr_rounds = 1;
  ReinitOptions reinit;
  NetConfig net;
  int net_context = 4;

  FrameMetric search_metric = FrameMetric::kCosine;
  bool search_znorm = true;
  bool search_normalize = true;

  int boundary_tolerance = 2;
  FrameMetric abx_metric = FrameMetric::kCosine;
  int abx_max_triples = 50;

  std::uint64_t seed = 1;
  fs::path output;

  // The source config, kept for the report.
  Config source;

  // Reads and checks every key; throws ConfigError.
  static PipelineConfig from(const Config& config);
};

}  // namespace zrmat

#endif  // ZRMAT_CONFIG_HPP_
