// zrmat/corpusio.hpp

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

// On-disk artifacts: manifests, ZRF1 feature files, label files and the
// generic model container used by tokenizers, networks and LDA models.
//
//   Manifest    TSV  utt <TAB> path <TAB> speaker
//   Features    "ZRF1" | frames u32 | dim u32 | period_ms u32 | f32 payload
//               (all little-endian, payload row-major)
//   Labels      TSV  utt <TAB> m,n <TAB> token <TAB> start <TAB> end
//   Model       text header terminated by "payload <count>\n", followed by
//               <count> little-endian float64 values

#ifndef ZRMAT_CORPUSIO_HPP_
#define ZRMAT_CORPUSIO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zrmat/types.hpp"

namespace zrmat {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string utterance_id;
  std::string path;
  std::string speaker;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const Manifest&) const = default;
};

// Relative paths in the manifest are returned as written; callers resolve
// them against the manifest's directory when needed.
Manifest read_manifest(const fs::path& path);
void write_manifest(const Manifest& manifest, const fs::path& path);

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
// The utterance id is not part of the binary format; pass it in.
FeatureSequence decode_features(const std::vector<std::uint8_t>& bytes,
                                std::string utterance_id = {});

void write_features(const FeatureSequence& seq, const fs::path& path);
// Utterance id defaults to the file stem.
FeatureSequence read_features(const fs::path& path);

// Checks start_0 == 0, end_k == start_{k+1}, start < end, and, when given,
// end_last == frame count. Throws ValidationError naming the utterance.
void validate_tiling(const std::string& utterance_id, const SegmentSeq& segs,
                     std::optional<int> num_frames = std::nullopt);

// Lines are ordered by utterance id, then layer, then start frame.
void write_labels(const LayeredLabeling& labels, const fs::path& path);
LayeredLabeling read_labels(const fs::path& path);

// Single-layer helpers.
void write_labels(const LayerId& layer, const Labeling& labels,
                  const fs::path& path);
Labeling read_layer_labels(const fs::path& path, const LayerId& layer);

LayerId parse_layer_id(std::string_view text);

// Versioned container: ordered key/value header plus a float64 payload.
struct ModelFile {
  static constexpr int kVersion = 1;

  std::string kind;
  int version = kVersion;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<double> payload;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, double value);
  void set_list(const std::string& key, const std::vector<int>& values);

  const std::string& get(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<int> get_list(const std::string& key) const;
};

void write_model(const ModelFile& model, const fs::path& path);
ModelFile read_model(const fs::path& path);

// Small text helpers shared by the TSV readers.
std::vector<std::string> split(std::string_view line, char sep);
std::vector<int> parse_int_list(std::string_view text);
std::string join_ints(const std::vector<int>& values, char sep = ',');

// Round-trippable decimal form of a double.
std::string format_double(double v);

// Integer field of a text file; ParseError carries the line number.
int parse_int_field(std::string_view text, const char* what, int line);

// Tab-separated rows with their 1-based line numbers; blank lines and
// lines starting with '#' are skipped.
struct TsvRow {
  int line = 0;
  std::vector<std::string> fields;
};
std::vector<TsvRow> read_tsv(const fs::path& path);

// Writes the whole string; creates parent directories.
void write_text_file(const fs::path& path, const std::string& text);
std::string read_text_file(const fs::path& path);

}  // namespace zrmat

#endif  // ZRMAT_CORPUSIO_HPP_
