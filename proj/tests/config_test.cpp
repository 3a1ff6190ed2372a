// tests/config_test.cpp

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

#include "doctest.h"

#include <fstream>

#include "test_util.hpp"
#include "zrmat/config.hpp"
#include "zrmat/error.hpp"

using namespace zrmat;
using zrmat::testing::TempDir;

TEST_CASE("config: comments, blank lines and whitespace") {
  const Config c = Config::parse(
      "# leading comment\n"
      "\n"
      "  grid.m = 3,5 # trailing\n"
      "seed=7\n"
      "features.cmvn =   false  \n");
  CHECK(c.get("grid.m", "") == "3,5");
  CHECK(c.get_u64("seed", 0) == 7);
  CHECK_FALSE(c.get_bool("features.cmvn", true));
  CHECK(c.get_ints("grid.m", {}) == std::vector<int>{3, 5});
  CHECK(c.get_int("iterations", 4) == 4);
  CHECK(c.values().size() == 3);
}

TEST_CASE("config: unknown, duplicate and malformed lines name the line") {
  auto message = [](const std::string& text) {
    try {
      Config::parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("seed = 1\ngrid.q = 3\n").find("line 2") != std::string::npos);
  CHECK(message("seed = 1\ngrid.q = 3\n").find("grid.q") != std::string::npos);
  CHECK(message("seed = 1\n\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(message("seed = 1\n\nseed = 2\n").find("line 3") != std::string::npos);
  CHECK(message("just words\n").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(Config().set("nope", "1"), ConfigError);
}

TEST_CASE("config: typed getters reject bad values") {
  const Config c = Config::parse(
      "iterations = two\nseed = -1\nmr.threshold = 0.5x\nsearch.znorm = maybe\ngrid.n = 4,,8\n");
  CHECK_THROWS_AS(c.get_int("iterations", 1), ConfigError);
  CHECK_THROWS_AS(c.get_u64("seed", 1), ConfigError);
  CHECK_THROWS_AS(c.get_double("mr.threshold", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("search.znorm", true), ConfigError);
  CHECK_THROWS_AS(c.get_ints("grid.n", {}), ConfigError);
}

TEST_CASE("config: relative paths resolve against the config directory") {
  TempDir dir("config");
  {
    std::ofstream out(dir / "p.cfg");
    out << "corpus.manifest = data/manifest.tsv\noutput = /abs/run\nseed = 3\n";
  }
  const Config c = Config::load(dir / "p.cfg");
  CHECK(c.get_path("corpus.manifest") == dir.path() / "data/manifest.tsv");
  CHECK(c.get_path("output") == fs::path("/abs/run"));
  CHECK(c.get_path("corpus.gold").empty());
  CHECK_THROWS_AS(Config::load(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("config: dump is sorted and re-parses to the same values") {
  Config c = Config::parse("seed = 2\ngrid.m = 3\niterations = 1\n");
  const std::string text = c.dump();
  CHECK(text == "grid.m = 3\niterations = 1\nseed = 2\n");
  CHECK(Config::parse(text).values() == c.values());
}

namespace {

Config base_config(const TempDir& dir) {
  std::ofstream(dir / "manifest.tsv") << "u1\tu1.zrf\ts0\n";
  Config c = Config::parse("corpus.manifest = manifest.tsv\nseed = 5\noutput = run\n", dir.path());
  return c;
}

}  // namespace

TEST_CASE("pipeline config: defaults and resolution") {
  TempDir dir("pcfg");
  const PipelineConfig p = PipelineConfig::from(base_config(dir));
  CHECK(p.manifest == dir / "manifest.tsv");
  CHECK(p.output == dir / "run");
  CHECK(p.seed == 5);
  CHECK(p.iterations == 1);
  CHECK(p.mr_rounds == 1);
  CHECK(p.cmvn);
  CHECK(p.grid.m == GranularityGrid::desk().m);
  CHECK(p.grid.n == GranularityGrid::desk().n);
  CHECK(p.net.epochs == 100);
  CHECK(p.net_context == 4);
  CHECK(p.net.seed != p.reinit.seed);
}

TEST_CASE("pipeline config: derived seeds follow the master seed") {
  TempDir dir("pseed");
  Config a = base_config(dir);
  Config b = base_config(dir);
  b.set("seed", "6");
  const PipelineConfig pa = PipelineConfig::from(a);
  const PipelineConfig pb = PipelineConfig::from(b);
  CHECK(pa.net.seed == PipelineConfig::from(a).net.seed);
  CHECK(pa.net.seed != pb.net.seed);
  CHECK(pa.reinit.seed != pb.reinit.seed);
}

TEST_CASE("pipeline config: validation failures are config errors") {
  TempDir dir("pbad");
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"grid.preset", "huge"},      {"grid.m", "0"},           {"grid.n", "1"},
      {"iterations", "0"},          {"mr.rounds", "-1"},       {"net.bottleneck", "0"},
      {"net.learning_rate", "0"},   {"net.minibatch", "0"},    {"net.hidden", "8,0"},
      {"search.metric", "manhattan"}, {"eval.abx_max_triples", "0"},
      {"mat.iteration_input", "raw"}, {"mat.max_epochs", "0"}, {"corpus.gold", "nowhere.tsv"},
      {"corpus.queries", "manifest.tsv"},
  };
  for (const auto& [key, value] : bad) {
    CAPTURE(key);
    Config c = base_config(dir);
    c.set(key, value);
    CHECK_THROWS_AS(PipelineConfig::from(c), ConfigError);
  }
}

TEST_CASE("pipeline config: required keys") {
  TempDir dir("preq");
  std::ofstream(dir / "manifest.tsv") << "u1\tu1.zrf\ts0\n";
  CHECK_THROWS_AS(PipelineConfig::from(Config::parse("seed = 1\noutput = r\n", dir.path())),
                  ConfigError);
  CHECK_THROWS_AS(
      PipelineConfig::from(Config::parse("corpus.manifest = manifest.tsv\noutput = r\n", dir.path())),
      ConfigError);
  CHECK_THROWS_AS(
      PipelineConfig::from(Config::parse("corpus.manifest = manifest.tsv\nseed = 1\n", dir.path())),
      ConfigError);
}

TEST_CASE("pipeline config: grid override") {
  TempDir dir("pgrid");
  Config c = base_config(dir);
  c.set("grid.m", "3");
  c.set("grid.n", "4,8");
  const PipelineConfig p = PipelineConfig::from(c);
  CHECK(p.grid.m == std::vector<int>{3});
  CHECK(p.grid.n == std::vector<int>{4, 8});
}
