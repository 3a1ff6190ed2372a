// tests/hmmtok_test.cpp

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

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"
#include "zrmat/error.hpp"
#include "zrmat/hmmtok.hpp"
#include "zrmat/rng.hpp"
#include "zrmat/synth.hpp"

using namespace zrmat;
using zrmat::testing::TempDir;

namespace {

TokenSet random_tokens(Rng& rng, int m, int n, int d) {
  TokenSet ts;
  ts.layer = {m, n};
  ts.dim = d;
  for (int k = 0; k < n; ++k) {
    TokenHmm h;
    h.means.resize(m, d);
    h.variances.resize(m, d);
    h.self_loop.resize(m);
    for (int s = 0; s < m; ++s) {
      for (int c = 0; c < d; ++c) {
        h.means(s, c) = 2.0 * rng.normal();
        h.variances(s, c) = rng.uniform(0.3, 2.0);
      }
      h.self_loop(s) = rng.uniform(0.05, 0.95);
    }
    ts.models.push_back(h);
  }
  return ts;
}

FeatureMatrix random_frames(Rng& rng, int T, int d) {
  FeatureMatrix x(T, d);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < d; ++c) x(t, c) = static_cast<float>(2.5 * rng.normal());
  return x;
}

bool tiles(const SegmentSeq& s, int T) {
  try {
    validate_tiling("u", s, T);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

void check_model_invariants(const TokenSet& ts, const TokenizerOptions& o) {
  for (const TokenHmm& h : ts.models) {
    CHECK(h.num_states() == ts.layer.m);
    CHECK(h.dim() == ts.dim);
    CHECK(h.means.allFinite());
    CHECK(h.variances.minCoeff() >= o.variance_floor);
    CHECK(h.self_loop.minCoeff() >= o.min_self_loop);
    CHECK(h.self_loop.maxCoeff() <= o.max_self_loop);
  }
}

SyntheticCorpus small_synth(std::uint64_t seed, int utterances = 50) {
  SyntheticLanguageSpec spec;
  return gen_synth(spec, utterances, seed);
}

}  // namespace

TEST_CASE("initialize cuts and clusters") {
  Rng rng(5);
  Corpus c = {FeatureSequence{"a", random_frames(rng, 100, 3)},
              FeatureSequence{"b", random_frames(rng, 100, 3)}};
  Labeling l = initialize(c, {5, 4}, 17);
  int segments = 0;
  std::set<int> used;
  for (const auto& [u, segs] : l) {
    CHECK(tiles(segs, 100));
    for (const Segment& s : segs) {
      CHECK(s.length() == 10);
      CHECK(s.token >= 0);
      CHECK(s.token < 4);
      used.insert(s.token);
      ++segments;
    }
  }
  CHECK(segments == 20);
  CHECK(used.size() == 4u);

  // Lloyd fixed point: each segment mean is nearest its own cluster centroid.
  std::vector<Eigen::RowVectorXd> mean_of;
  std::vector<int> label_of;
  for (const auto& seq : c)
    for (const Segment& s : l.at(seq.utterance_id)) {
      mean_of.push_back(seq.frames.middleRows(s.start, s.length()).cast<double>().colwise().mean());
      label_of.push_back(s.token);
    }
  std::vector<Eigen::RowVectorXd> centroid(4, Eigen::RowVectorXd::Zero(3));
  std::vector<int> count(4, 0);
  for (std::size_t i = 0; i < mean_of.size(); ++i) {
    centroid[label_of[i]] += mean_of[i];
    ++count[label_of[i]];
  }
  for (int k = 0; k < 4; ++k) centroid[k] /= count[k];
  for (std::size_t i = 0; i < mean_of.size(); ++i)
    for (int k = 0; k < 4; ++k)
      CHECK((mean_of[i] - centroid[label_of[i]]).squaredNorm() <=
            (mean_of[i] - centroid[k]).squaredNorm() + 1e-9);

  CHECK(initialize(c, {5, 4}, 17) == l);
}

TEST_CASE("initialize remainder and preconditions") {
  Rng rng(6);
  Corpus c = {FeatureSequence{"a", random_frames(rng, 105, 2)}};
  Labeling l = initialize(c, {12, 2}, 1);
  REQUIRE(l.at("a").size() == 8u);
  CHECK(l.at("a").back().length() == 21);

  CHECK_THROWS_AS(initialize(c, {3, 1}, 1), ValidationError);
  CHECK_THROWS_AS(initialize(c, {3, 20}, 1), ValidationError);
  Corpus tiny = {FeatureSequence{"a", random_frames(rng, 2, 2)}};
  CHECK_THROWS_AS(initialize(tiny, {3, 2}, 1), ValidationError);
}

TEST_CASE("initialize separates two distant populations") {
  Rng rng(9);
  Corpus c;
  std::map<std::pair<std::string, int>, int> truth;
  for (int u = 0; u < 6; ++u) {
    FeatureSequence s;
    s.utterance_id = "u" + std::to_string(u);
    s.frames.resize(80, 2);
    for (int seg = 0; seg < 8; ++seg) {
      const int cls = rng.range(0, 1);
      truth[{s.utterance_id, seg * 10}] = cls;
      for (int t = 0; t < 10; ++t)
        for (int d = 0; d < 2; ++d)
          s.frames(seg * 10 + t, d) = static_cast<float>((cls ? 20.0 : -20.0) + rng.normal());
    }
    c.push_back(s);
  }
  Labeling l = initialize(c, {3, 2}, 4);
  std::map<int, std::set<int>> clusters_per_class;
  for (const auto& [u, segs] : l)
    for (const Segment& s : segs) clusters_per_class[truth.at({u, s.start})].insert(s.token);
  REQUIRE(clusters_per_class.size() == 2u);
  CHECK(clusters_per_class[0].size() == 1u);
  CHECK(clusters_per_class[1].size() == 1u);
  CHECK(*clusters_per_class[0].begin() != *clusters_per_class[1].begin());
}

TEST_CASE("uniform state partition on the first pass") {
  FeatureSequence s;
  s.utterance_id = "u";
  s.frames.resize(6, 1);
  s.frames << 1, 3, 10, 20, -4, -6;
  Labeling l = {{"u", {{0, 0, 6}}}};
  TokenizerOptions o;
  o.realign_passes = 0;
  TokenSet ts = train_models({s}, l, {3, 2}, o);
  const TokenHmm& h = ts.models[0];
  CHECK(h.means(0, 0) == doctest::Approx(2.0));
  CHECK(h.means(1, 0) == doctest::Approx(15.0));
  CHECK(h.means(2, 0) == doctest::Approx(-5.0));
  CHECK(h.variances(0, 0) == doctest::Approx(1.0));
  // Two frames per state, one exit each: (2 - 1) / 2.
  CHECK(h.self_loop(0) == doctest::Approx(0.5));
}

TEST_CASE("recover a known three-state model") {
  Rng rng(21);
  const double truth[3][2] = {{0, 0}, {3, -3}, {-3, 3}};
  Corpus c;
  Labeling l;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> states;
    for (int s = 0; s < 3; ++s) {
      const int dur = rng.range(2, 6);
      for (int k = 0; k < dur; ++k) states.push_back(s);
    }
    FeatureSequence f;
    f.utterance_id = "u" + std::to_string(i);
    f.frames.resize(static_cast<int>(states.size()), 2);
    for (std::size_t t = 0; t < states.size(); ++t)
      for (int d = 0; d < 2; ++d)
        f.frames(static_cast<int>(t), d) = static_cast<float>(truth[states[t]][d] + 0.5 * rng.normal());
    l[f.utterance_id] = {{0, 0, f.num_frames()}};
    c.push_back(f);
  }
  TokenSet ts = train_models(c, l, {3, 2});
  for (int s = 0; s < 3; ++s)
    for (int d = 0; d < 2; ++d) CHECK(std::abs(ts.models[0].means(s, d) - truth[s][d]) < 0.1);
}

TEST_CASE("starved token is reseeded") {
  Rng rng(8);
  Corpus c;
  Labeling l;
  for (int u = 0; u < 4; ++u) {
    FeatureSequence f{"u" + std::to_string(u), random_frames(rng, 70, 3)};
    SegmentSeq segs;
    int k = 0;
    for (int t = 0; t < 70; t += 10, ++k) {
      int tok = (u * 7 + k) % 8;
      if (tok == 5) tok = 4;
      segs.push_back({tok, t, t + 10});
    }
    l[f.utterance_id] = segs;
    c.push_back(f);
  }
  TokenizerOptions o;
  TokenSet ts = train_models(c, l, {3, 8}, o);
  REQUIRE(ts.num_tokens() == 8);
  check_model_invariants(ts, o);
  CHECK(ts.models[5].means != ts.models[4].means);
  CHECK(!decode(c[0].frames, ts).segments.empty());
}

TEST_CASE("decode two well separated one-state tokens") {
  TokenSet ts;
  ts.layer = {1, 2};
  ts.dim = 1;
  for (double mu : {0.0, 5.0}) {
    TokenHmm h;
    h.means = Eigen::MatrixXd::Constant(1, 1, mu);
    h.variances = Eigen::MatrixXd::Ones(1, 1);
    h.self_loop = Eigen::VectorXd::Constant(1, 0.5);
    ts.models.push_back(h);
  }
  FeatureMatrix x(4, 1);
  x << 0, 0, 5, 5;
  DecodeResult r = decode(x, ts);
  const SegmentSeq want = {{0, 0, 2}, {1, 2, 4}};
  CHECK(r.segments == want);
  zrmat::oracles::Best b = zrmat::oracles::brute_force_decode(x, ts);
  CHECK(b.segs == want);
  CHECK(r.log_likelihood == doctest::Approx(b.score).epsilon(1e-12));
}

TEST_CASE("decode recovers the generating token") {
  Rng rng(12);
  TokenSet ts = random_tokens(rng, 3, 4, 2);
  for (auto& h : ts.models) h.variances.setConstant(0.01);
  for (int k = 0; k < 4; ++k)
    for (int s = 0; s < 3; ++s) ts.models[k].means.row(s) << 10.0 * k, 10.0 * s;
  FeatureMatrix x(9, 2);
  for (int t = 0; t < 9; ++t) {
    x(t, 0) = 20.0f + 0.01f * static_cast<float>(rng.normal());
    x(t, 1) = 10.0f * static_cast<float>(t / 3);
  }
  DecodeResult r = decode(x, ts);
  REQUIRE(r.segments.size() == 1u);
  CHECK(r.segments[0].token == 2);
}

TEST_CASE("decode equals exhaustive search on small instances") {
  Rng rng(77);
  int instances = 0;
  for (int m = 1; m <= 2; ++m)
    for (int n = 2; n <= 3; ++n)
      for (int T = m; T <= 8; ++T)
        for (int rep = 0; rep < 5; ++rep) {
          TokenSet ts = random_tokens(rng, m, n, rng.range(1, 2));
          FeatureMatrix x = random_frames(rng, T, ts.dim);
          DecodeResult r = decode(x, ts);
          zrmat::oracles::Best b = zrmat::oracles::brute_force_decode(x, ts);
          CHECK(tiles(r.segments, T));
          CHECK(r.log_likelihood == doctest::Approx(b.score).epsilon(1e-12));
          CHECK(r.segments == b.segs);
          CHECK(score_labeling(x, r.segments, ts) == doctest::Approx(r.log_likelihood).epsilon(1e-12));
          ++instances;
        }
  CHECK(instances > 100);
}

TEST_CASE("decode rejects short or mismatched input") {
  Rng rng(1);
  TokenSet ts = random_tokens(rng, 3, 2, 2);
  CHECK_THROWS_AS(decode(random_frames(rng, 2, 2), ts), ValidationError);
  CHECK_THROWS_AS(decode(random_frames(rng, 5, 3), ts), ValidationError);
}

TEST_CASE("align_segment path shape") {
  Rng rng(2);
  TokenSet ts = random_tokens(rng, 4, 2, 2);
  FeatureMatrix x = random_frames(rng, 12, 2);
  double score = 0.0;
  std::vector<int> path = align_segment(x, 2, 11, ts.models[1], &score);
  REQUIRE(path.size() == 9u);
  CHECK(path.front() == 0);
  CHECK(path.back() == 3);
  for (std::size_t i = 1; i < path.size(); ++i) {
    CHECK(path[i] >= path[i - 1]);
    CHECK(path[i] - path[i - 1] <= 1);
  }
  CHECK(score == doctest::Approx(zrmat::oracles::segment_score(x, 2, 11, ts.models[1])).epsilon(1e-12));
}

TEST_CASE("gaussian_log_density") {
  Eigen::RowVectorXf x(2);
  x << 1.0f, -1.0f;
  Eigen::RowVectorXd mu(2), var(2);
  mu << 0.0, 0.0;
  var << 1.0, 4.0;
  const double want = -std::log(2 * std::numbers::pi) - 0.5 * std::log(4.0) - 0.5 - 0.125;
  CHECK(gaussian_log_density(x, mu, var) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("enforce_min_length") {
  SegmentSeq s = {{0, 0, 2}, {1, 2, 10}, {2, 10, 11}, {0, 11, 20}};
  SegmentSeq r = enforce_min_length(s, 3);
  CHECK(tiles(r, 20));
  for (const Segment& g : r) CHECK(g.length() >= 3);
  CHECK(enforce_min_length({{0, 0, 5}, {1, 5, 9}}, 3) == SegmentSeq{{0, 0, 5}, {1, 5, 9}});
}

TEST_CASE("fit_layer on a synthetic language") {
  SyntheticCorpus sc = small_synth(4, 30);
  for (LayerId id : {LayerId{3, 4}, LayerId{5, 8}}) {
    TokenizerOptions o;
    Labeling init = initialize(sc.features, id, 99, o);
    std::vector<double> seen;
    LayerFit fit = fit_layer(sc.features, id, init, o, [&](int, double ll) { seen.push_back(ll); });
    CHECK(fit.epochs >= 1);
    CHECK(fit.epochs <= o.max_epochs);
    CHECK(seen == fit.epoch_log_likelihoods);
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] >= seen[i - 1] - 1e-6);
    check_model_invariants(fit.tokens, o);
    for (const auto& seq : sc.features) {
      const auto& segs = fit.labels.at(seq.utterance_id);
      CHECK(tiles(segs, seq.num_frames()));
      for (const Segment& g : segs) {
        CHECK(g.length() >= id.m);
        CHECK(g.token < id.n);
      }
      // Decoding dominates the labels the models were trained on.
      CHECK(decode(seq.frames, fit.tokens).log_likelihood >=
            score_labeling(seq.frames, init.at(seq.utterance_id), fit.tokens) - 1e-9);
    }

    LayerFit twin = fit_layer(sc.features, id, init, o);
    CHECK(twin.labels == fit.labels);
    CHECK(twin.epoch_log_likelihoods == fit.epoch_log_likelihoods);
  }
}

TEST_CASE("a converged labeling takes one epoch") {
  SyntheticCorpus sc = small_synth(4, 30);
  const LayerId id{3, 4};
  TokenizerOptions o;
  // Iterate the first-epoch map (train from scratch, decode) to a fixed point.
  Labeling l = initialize(sc.features, id, 99, o);
  bool converged = false;
  for (int it = 0; it < 100 && !converged; ++it) {
    TokenSet ts = train_models(sc.features, l, id, o);
    Labeling next;
    for (const auto& seq : sc.features) next[seq.utterance_id] = decode(seq.frames, ts).segments;
    converged = next == l;
    l = next;
  }
  REQUIRE(converged);
  LayerFit fit = fit_layer(sc.features, id, l, o);
  CHECK(fit.epochs == 1);
  CHECK(fit.labels == l);
}


TEST_CASE("fit_layer respects max_epochs") {
  SyntheticCorpus sc = small_synth(5, 10);
  TokenizerOptions o;
  o.max_epochs = 1;
  Labeling init = initialize(sc.features, {3, 4}, 1, o);
  LayerFit fit = fit_layer(sc.features, {3, 4}, init, o);
  CHECK(fit.epochs == 1);
  CHECK(fit.epoch_log_likelihoods.size() == 1u);
  CHECK(fit.labels.size() == sc.features.size());
  o.max_epochs = 0;
  CHECK_THROWS_AS(fit_layer(sc.features, {3, 4}, init, o), ValidationError);
}

TEST_CASE("token set serialization") {
  Rng rng(3);
  TokenSet ts = random_tokens(rng, 3, 4, 5);
  TempDir dir("tok");
  write_model(token_set_to_model(ts), dir / "t.model");
  TokenSet r = token_set_from_model(read_model(dir / "t.model"));
  CHECK(r.layer == ts.layer);
  CHECK(r.dim == ts.dim);
  for (int k = 0; k < 4; ++k) {
    CHECK(r.models[k].means == ts.models[k].means);
    CHECK(r.models[k].variances == ts.models[k].variances);
    CHECK(r.models[k].self_loop == ts.models[k].self_loop);
  }
}
