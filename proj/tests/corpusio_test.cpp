// tests/corpusio_test.cpp

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

#include <cstring>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "zrmat/corpusio.hpp"
#include "zrmat/error.hpp"

using namespace zrmat;
using zrmat::testing::TempDir;

TEST_CASE("manifest keeps file order") {
  TempDir dir("manifest");
  write_text_file(dir / "m.tsv", "u1\ta.zrf\ts1\nu2\tb.zrf\ts2\nu3\tc.zrf\ts1\n");
  Manifest m = read_manifest(dir / "m.tsv");
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].utterance_id == "u1");
  CHECK(m.entries[1].utterance_id == "u2");
  CHECK(m.entries[2].utterance_id == "u3");
  CHECK(m.entries[1].speaker == "s2");

  write_manifest(m, dir / "m2.tsv");
  CHECK(read_manifest(dir / "m2.tsv") == m);
}

TEST_CASE("empty manifest") {
  TempDir dir("manifest");
  write_text_file(dir / "m.tsv", "");
  CHECK(read_manifest(dir / "m.tsv").entries.empty());
}

TEST_CASE("duplicate manifest id names the second line") {
  TempDir dir("manifest");
  write_text_file(dir / "m.tsv", "u1\ta\ts\nu2\tb\ts\nu3\tc\ts\nu1\td\ts\n");
  try {
    read_manifest(dir / "m.tsv");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("malformed manifest line is a parse error with its line number") {
  TempDir dir("manifest");
  write_text_file(dir / "m.tsv", "u1\ta\ts\nu2 b s\n");
  try {
    read_manifest(dir / "m.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("features round-trip bit-exactly") {
  TempDir dir("feat");
  FeatureSequence s;
  s.utterance_id = "x";
  s.frames.resize(2, 3);
  s.frames << 1, 2, 3, 4, 5, 6;
  s.frame_period_ms = 10;
  write_features(s, dir / "x.zrf");
  FeatureSequence r = read_features(dir / "x.zrf");
  CHECK(r == s);
  CHECK(r.frame_period_ms == 10u);
  CHECK(std::memcmp(r.frames.data(), s.frames.data(), 6 * sizeof(float)) == 0);

  s.frames(0, 0) = -0.0f;
  s.frames(1, 2) = 1.0e-42f;  // denormal
  s.frame_period_ms = 25;
  CHECK(decode_features(encode_features(s), "x") == s);
}

TEST_CASE("feature payload is little-endian row-major") {
  FeatureSequence s = zrmat::testing::make_seq("a", 2, 2, 1.0f);
  std::vector<std::uint8_t> b = encode_features(s);
  REQUIRE(b.size() == 16u + 4u * 4u);
  CHECK(std::string(b.begin(), b.begin() + 4) == "ZRF1");
  CHECK(b[4] == 2);
  CHECK(b[8] == 2);
  CHECK(b[12] == 10);
  float second;
  std::memcpy(&second, &b[20], 4);
  CHECK(second == 2.0f);
}

TEST_CASE("truncated or foreign feature files are rejected") {
  FeatureSequence s = zrmat::testing::make_seq("a", 3, 2);
  std::vector<std::uint8_t> b = encode_features(s);
  std::vector<std::uint8_t> cut(b.begin(), b.end() - 4);
  CHECK_THROWS_AS(decode_features(cut), FormatError);
  std::vector<std::uint8_t> header_only(b.begin(), b.begin() + 10);
  CHECK_THROWS_AS(decode_features(header_only), FormatError);
  std::vector<std::uint8_t> bad = b;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_features(bad), FormatError);

  TempDir dir("feat");
  std::ofstream(dir / "t.zrf", std::ios::binary)
      .write(reinterpret_cast<const char*>(cut.data()), static_cast<std::streamsize>(cut.size()));
  CHECK_THROWS_AS(read_features(dir / "t.zrf"), FormatError);
}

TEST_CASE("empty sequences are not written") {
  FeatureSequence s;
  s.utterance_id = "e";
  CHECK_THROWS_AS(encode_features(s), ValidationError);
}

TEST_CASE("single segment label round-trip") {
  TempDir dir("labels");
  LayeredLabeling l;
  l[{3, 50}]["u1"] = {{7, 0, 42}};
  write_labels(l, dir / "l.tsv");
  CHECK(read_text_file(dir / "l.tsv") == "u1\t3,50\t7\t0\t42\n");
  CHECK(read_labels(dir / "l.tsv") == l);
}

TEST_CASE("tiling: touching segments pass, overlaps fail") {
  CHECK_NOTHROW(validate_tiling("u", {{0, 0, 10}, {1, 10, 20}}, 20));
  CHECK_THROWS_AS(validate_tiling("u", {{0, 0, 10}, {1, 9, 20}}), ValidationError);
  CHECK_THROWS_AS(validate_tiling("u", {{0, 0, 10}, {1, 11, 20}}), ValidationError);
  CHECK_THROWS_AS(validate_tiling("u", {{0, 1, 10}}), ValidationError);
  CHECK_THROWS_AS(validate_tiling("u", {{0, 0, 10}}, 12), ValidationError);
  CHECK_THROWS_AS(validate_tiling("u", {{0, 0, 0}}), ValidationError);

  TempDir dir("labels");
  LayeredLabeling l;
  l[{3, 4}]["u"] = {{0, 0, 10}, {1, 9, 20}};
  CHECK_THROWS_AS(write_labels(l, dir / "l.tsv"), ValidationError);
  l[{3, 4}]["u"] = {{0, 0, 10}, {4, 10, 20}};
  CHECK_THROWS_AS(write_labels(l, dir / "l.tsv"), ValidationError);
}

TEST_CASE("sixteen layers come out grouped and sorted by layer") {
  TempDir dir("labels");
  LayeredLabeling l;
  const int ms[] = {9, 3, 7, 5};
  const int ns[] = {500, 50, 300, 100};
  for (int m : ms)
    for (int n : ns) l[{m, n}]["u1"] = {{n - 1, 0, 5}, {0, 5, 12}};
  write_labels(l, dir / "l.tsv");

  std::vector<LayerId> seen;
  std::ifstream in(dir / "l.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    LayerId id = parse_layer_id(split(line, '\t')[1]);
    if (seen.empty() || !(seen.back() == id)) seen.push_back(id);
  }
  CHECK(lines == 32);
  REQUIRE(seen.size() == 16);
  for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i - 1] < seen[i]);
  CHECK(read_labels(dir / "l.tsv") == l);
}

TEST_CASE("label lines out of file order are accepted and re-sorted") {
  TempDir dir("labels");
  write_text_file(dir / "l.tsv", "u2\t3,4\t1\t5\t9\nu2\t3,4\t0\t0\t5\nu1\t3,4\t3\t0\t2\n");
  LayeredLabeling l = read_labels(dir / "l.tsv");
  const SegmentSeq want = {{0, 0, 5}, {1, 5, 9}};
  CHECK(l.at({3, 4}).at("u2") == want);
  write_text_file(dir / "bad.tsv", "u1\t3,4\t4\t0\t2\n");
  CHECK_THROWS_AS(read_labels(dir / "bad.tsv"), ParseError);
}

TEST_CASE("model container round-trip") {
  TempDir dir("model");
  ModelFile m;
  m.kind = "test";
  m.set("name", "abc def");
  m.set("count", 12LL);
  m.set("scale", 0.1);
  m.set_list("dims", {3, 5, 7});
  m.payload = {1.0, -2.5, 1e-300, 0.1};
  write_model(m, dir / "m.model");
  ModelFile r = read_model(dir / "m.model");
  CHECK(r.kind == "test");
  CHECK(r.get("name") == "abc def");
  CHECK(r.get_int("count") == 12);
  CHECK(r.get_double("scale") == 0.1);
  CHECK(r.get_list("dims") == std::vector<int>{3, 5, 7});
  CHECK(r.payload == m.payload);
  CHECK_THROWS(r.get("missing"));

  std::string text = read_text_file(dir / "m.model");
  write_text_file(dir / "cut.model", text.substr(0, text.size() - 3));
  CHECK_THROWS_AS(read_model(dir / "cut.model"), FormatError);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 123456789.123456789})
    CHECK(std::stod(format_double(v)) == v);
}
