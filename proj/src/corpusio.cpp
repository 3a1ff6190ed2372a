// src/corpusio.cpp

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

#include "zrmat/corpusio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "zrmat/error.hpp"

namespace zrmat {

namespace {

constexpr char kFeatureMagic[4] = {'Z', 'R', 'F', '1'};
constexpr std::size_t kFeatureHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

int to_int(std::string_view s, const char* what, int line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line);
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int_field(std::string_view text, const char* what, int line) {
  return to_int(text, what, line);
}

std::vector<TsvRow> read_tsv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<TsvRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    rows.push_back({lineno, split(line, '\t')});
  }
  return rows;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    std::size_t pos = line.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(begin));
      return out;
    }
    out.emplace_back(line.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  for (auto& tok : split(text, ',')) {
    std::string t = tok;
    t.erase(std::remove_if(t.begin(), t.end(), [](char c) { return c == ' ' || c == '\t'; }),
            t.end());
    if (t.empty()) {
      if (text.find_first_not_of(" \t,") == std::string_view::npos) break;
      throw ParseError("empty field in integer list '" + std::string(text) + "'", 0);
    }
    out.push_back(to_int(t, "integer", 0));
  }
  return out;
}

std::string join_ints(const std::vector<int>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(sep);
    out += std::to_string(values[i]);
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- manifest

Manifest read_manifest(const fs::path& path) {
  auto in = open_in(path);
  Manifest manifest;
  std::unordered_map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw ParseError("manifest line needs 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    for (const auto& f : fields)
      if (f.empty()) throw ParseError("empty manifest field", lineno);
    auto [it, inserted] = seen.emplace(fields[0], lineno);
    if (!inserted)
      throw ValidationError("duplicate utterance id '" + fields[0] + "' on line " +
                            std::to_string(lineno) + " (first seen on line " +
                            std::to_string(it->second) + ")");
    manifest.entries.push_back({fields[0], fields[1], fields[2]});
  }
  return manifest;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::string text;
  for (const auto& e : manifest.entries)
    text += e.utterance_id + "\t" + e.path + "\t" + e.speaker + "\n";
  write_text_file(path, text);
}

// ---------------------------------------------------------------- features

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  if (seq.num_frames() < 1 || seq.dim() < 1)
    throw ValidationError("cannot write empty feature sequence '" + seq.utterance_id + "'");
  if (seq.frame_period_ms < 1) throw ValidationError("frame period must be >= 1 ms");
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderBytes + 4 * seq.frames.size());
  out.insert(out.end(), kFeatureMagic, kFeatureMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(seq.num_frames()));
  put_u32(out, static_cast<std::uint32_t>(seq.dim()));
  put_u32(out, seq.frame_period_ms);
  const float* data = seq.frames.data();
  for (Eigen::Index i = 0; i < seq.frames.size(); ++i)
    put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
  return out;
}

FeatureSequence decode_features(const std::vector<std::uint8_t>& bytes,
                                std::string utterance_id) {
  if (bytes.size() < kFeatureHeaderBytes)
    throw FormatError("feature file truncated: header needs 16 bytes, got " +
                      std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0)
    throw FormatError("bad feature file magic (expected ZRF1)");
  const std::uint32_t frames = get_u32(bytes.data() + 4);
  const std::uint32_t dim = get_u32(bytes.data() + 8);
  const std::uint32_t period = get_u32(bytes.data() + 12);
  if (dim < 1) throw FormatError("feature dimension must be >= 1");
  if (period < 1) throw FormatError("frame period must be >= 1 ms");
  const std::uint64_t expected =
      kFeatureHeaderBytes + 4ULL * static_cast<std::uint64_t>(frames) * dim;
  if (bytes.size() < expected)
    throw FormatError("feature file truncated: header promises " +
                      std::to_string(frames) + "x" + std::to_string(dim) +
                      " floats, payload has " +
                      std::to_string((bytes.size() - kFeatureHeaderBytes) / 4));
  if (bytes.size() > expected) throw FormatError("trailing bytes after feature payload");
  FeatureSequence seq;
  seq.utterance_id = std::move(utterance_id);
  seq.frame_period_ms = period;
  seq.frames.resize(frames, dim);
  float* data = seq.frames.data();
  const std::uint8_t* p = bytes.data() + kFeatureHeaderBytes;
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(frames) * dim; ++i, p += 4)
    data[i] = std::bit_cast<float>(get_u32(p));
  return seq;
}

void write_features(const FeatureSequence& seq, const fs::path& path) {
  auto bytes = encode_features(seq);
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

FeatureSequence read_features(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_features(bytes, path.stem().string());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------ labels

void validate_tiling(const std::string& utterance_id, const SegmentSeq& segs,
                     std::optional<int> num_frames) {
  if (segs.empty()) throw ValidationError("utterance '" + utterance_id + "' has no segments");
  int expect = 0;
  for (const auto& s : segs) {
    if (s.start != expect)
      throw ValidationError("utterance '" + utterance_id + "': segment starting at " +
                            std::to_string(s.start) + " should start at " +
                            std::to_string(expect) +
                            (s.start < expect ? " (overlap)" : " (gap)"));
    if (s.end <= s.start)
      throw ValidationError("utterance '" + utterance_id + "': empty segment at " +
                            std::to_string(s.start));
    if (s.token < 0)
      throw ValidationError("utterance '" + utterance_id + "': negative token id");
    expect = s.end;
  }
  if (num_frames && expect != *num_frames)
    throw ValidationError("utterance '" + utterance_id + "': segments end at " +
                          std::to_string(expect) + " but utterance has " +
                          std::to_string(*num_frames) + " frames");
}

LayerId parse_layer_id(std::string_view text) {
  auto parts = split(text, ',');
  if (parts.size() != 2) throw ValidationError("layer id must be 'm,n': " + std::string(text));
  LayerId id{to_int(parts[0], "m", 0), to_int(parts[1], "n", 0)};
  if (id.m < 1 || id.n < 1) throw ValidationError("layer id must be positive: " + std::string(text));
  return id;
}

void write_labels(const LayeredLabeling& labels, const fs::path& path) {
  // Regroup as utterance -> layer so lines come out utterance-major.
  std::map<std::string, std::map<LayerId, const SegmentSeq*>> by_utt;
  for (const auto& [layer, lab] : labels) {
    for (const auto& [utt, segs] : lab) {
      validate_tiling(utt, segs);
      for (const auto& s : segs)
        if (s.token >= layer.n)
          throw ValidationError("utterance '" + utt + "': token " + std::to_string(s.token) +
                                " out of range for layer " + layer.str());
      by_utt[utt][layer] = &segs;
    }
  }
  std::string text;
  for (const auto& [utt, layers] : by_utt)
    for (const auto& [layer, segs] : layers)
      for (const auto& s : *segs)
        text += utt + "\t" + layer.str() + "\t" + std::to_string(s.token) + "\t" +
                std::to_string(s.start) + "\t" + std::to_string(s.end) + "\n";
  write_text_file(path, text);
}

void write_labels(const LayerId& layer, const Labeling& labels, const fs::path& path) {
  write_labels(LayeredLabeling{{layer, labels}}, path);
}

LayeredLabeling read_labels(const fs::path& path) {
  auto in = open_in(path);
  LayeredLabeling out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 5) throw ParseError("label line needs 5 fields", lineno);
    LayerId layer;
    try {
      layer = parse_layer_id(f[1]);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
    Segment s{to_int(f[2], "token", lineno), to_int(f[3], "start", lineno),
              to_int(f[4], "end", lineno)};
    if (s.token >= layer.n) throw ParseError("token id out of range", lineno);
    out[layer][f[0]].push_back(s);
  }
  for (auto& [layer, lab] : out)
    for (auto& [utt, segs] : lab) {
      std::sort(segs.begin(), segs.end(),
                [](const Segment& a, const Segment& b) { return a.start < b.start; });
      validate_tiling(utt, segs);
    }
  return out;
}

Labeling read_layer_labels(const fs::path& path, const LayerId& layer) {
  auto all = read_labels(path);
  auto it = all.find(layer);
  if (it == all.end()) throw ValidationError(path.string() + " has no layer " + layer.str());
  return it->second;
}

// ------------------------------------------------------------------- model

void ModelFile::set(const std::string& key, const std::string& value) {
  if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
    throw ValidationError("model header key/value may not contain newlines: " + key);
  for (auto& kv : header)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  header.emplace_back(key, value);
}

void ModelFile::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

void ModelFile::set(const std::string& key, double value) { set(key, format_double(value)); }

void ModelFile::set_list(const std::string& key, const std::vector<int>& values) {
  set(key, join_ints(values));
}

const std::string& ModelFile::get(const std::string& key) const {
  for (const auto& kv : header)
    if (kv.first == key) return kv.second;
  throw FormatError("model (" + kind + ") header missing key '" + key + "'");
}

long long ModelFile::get_int(const std::string& key) const {
  const auto& v = get(key);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw FormatError("model header '" + key + "' is not an integer");
  return out;
}

double ModelFile::get_double(const std::string& key) const {
  const auto& v = get(key);
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) throw FormatError("model header '" + key + "' is not a number");
  return out;
}

std::vector<int> ModelFile::get_list(const std::string& key) const {
  return parse_int_list(get(key));
}

void write_model(const ModelFile& model, const fs::path& path) {
  std::string out = "zrmat-model " + std::to_string(model.version) + "\n";
  out += "kind " + model.kind + "\n";
  for (const auto& [k, v] : model.header) out += k + " " + v + "\n";
  out += "payload " + std::to_string(model.payload.size()) + "\n";
  out.reserve(out.size() + 8 * model.payload.size());
  for (double v : model.payload) put_u64(out, std::bit_cast<std::uint64_t>(v));
  write_text_file(path, out);
}

ModelFile read_model(const fs::path& path) {
  const std::string data = read_text_file(path);
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) throw FormatError(path.string() + ": truncated model header");
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  std::string first = next_line();
  if (first.rfind("zrmat-model ", 0) != 0) throw FormatError(path.string() + ": not a model file");
  ModelFile model;
  model.version = std::atoi(first.c_str() + 12);
  if (model.version != ModelFile::kVersion)
    throw FormatError(path.string() + ": unsupported model version " +
                      std::to_string(model.version));
  std::string kind = next_line();
  if (kind.rfind("kind ", 0) != 0) throw FormatError(path.string() + ": missing kind");
  model.kind = kind.substr(5);
  while (true) {
    std::string line = next_line();
    std::size_t sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError(path.string() + ": bad header line");
    std::string key = line.substr(0, sp);
    std::string value = line.substr(sp + 1);
    if (key == "payload") {
      const std::size_t count = std::stoull(value);
      if (data.size() - pos != 8 * count)
        throw FormatError(path.string() + ": payload size mismatch");
      model.payload.resize(count);
      const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos);
      for (std::size_t i = 0; i < count; ++i)
        model.payload[i] = std::bit_cast<double>(get_u64(p + 8 * i));
      break;
    }
    model.header.emplace_back(std::move(key), std::move(value));
  }
  return model;
}

}  // namespace zrmat
