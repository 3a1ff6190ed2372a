// src/pipeline.cpp

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

#include "zrmat/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "zrmat/error.hpp"
#include "zrmat/evalkit.hpp"
#include "zrmat/frontend.hpp"
#include "zrmat/match.hpp"
#include "zrmat/matlayers.hpp"
#include "zrmat/mdnn.hpp"
#include "zrmat/reinforce.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

using json = nlohmann::json;

fs::path iter_dir(const PipelineConfig& c, int k) { return c.output / ("iter" + std::to_string(k)); }
fs::path bnf_dir(const PipelineConfig& c, int k) { return iter_dir(c, k) / "bnf"; }
fs::path marker(const PipelineConfig& c, const std::string& stage) {
  return c.output / "stages" / (stage + ".done");
}
fs::path report_path(const PipelineConfig& c) { return c.output / "report.json"; }

std::string layer_stem(const LayerId& l) {
  return "layer_" + std::to_string(l.m) + "_" + std::to_string(l.n);
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  for (const auto& seq : corpus) write_features(seq, dir / (seq.utterance_id + ".zrf"));
}

Corpus initial_features(const PipelineConfig& c) {
  return load_feature_dir(c.output / "features", corpus_order(c));
}

Corpus bnf_features(const PipelineConfig& c, int k) {
  return load_feature_dir(bnf_dir(c, k), corpus_order(c));
}

// What the tokenizers of iteration k see.
Corpus mat_input(const PipelineConfig& c, int k) {
  Corpus initial = initial_features(c);
  if (k == 1) return initial;
  Corpus bnf = bnf_features(c, k - 1);
  if (!c.mat_tandem_input) return bnf;
  for (std::size_t u = 0; u < bnf.size(); ++u) bnf[u] = concat_features(bnf[u], initial[u]);
  return bnf;
}

std::string mat_input_name(const PipelineConfig& c, int k) {
  if (k == 1) return "initial";
  return (c.mat_tandem_input ? "tandem-" : "bnf-") + std::to_string(k - 1);
}

std::map<std::string, std::vector<float>> load_aux(const PipelineConfig& c,
                                                   const std::vector<std::string>& ids) {
  std::map<std::string, std::vector<float>> aux;
  if (c.aux_dir.empty()) return aux;
  for (const auto& id : ids) {
    const FeatureSequence seq = read_features(c.aux_dir / (id + ".zrf"));
    if (seq.num_frames() != 1)
      throw ValidationError("aux file for '" + id + "' must hold exactly one row");
    aux[id].assign(seq.frames.data(), seq.frames.data() + seq.frames.size());
  }
  return aux;
}

std::vector<StackedInput> net_inputs(const PipelineConfig& c, int k) {
  const auto ids = corpus_order(c);
  const Corpus initial = initial_features(c);
  std::vector<Corpus> bnfs;
  for (int j = 1; j < k; ++j) bnfs.push_back(bnf_features(c, j));
  Corpus frame_aux;
  const bool use_frame_aux = !c.frame_aux_dir.empty() && k >= c.frame_aux_from;
  if (use_frame_aux) frame_aux = load_feature_dir(c.frame_aux_dir, ids);
  NetInputs in;
  in.initial = &initial;
  for (const auto& b : bnfs) in.bnf.push_back(&b);
  if (use_frame_aux) in.frame_aux.push_back(&frame_aux);
  in.aux = load_aux(c, ids);
  in.context = c.net_context;
  return build_net_inputs(in);
}

ReinitOptions reinit_for(const PipelineConfig& c, int k) {
  ReinitOptions r = c.reinit;
  r.seed = derive_seed(c.reinit.seed, {static_cast<std::uint64_t>(k)});
  return r;
}

// ------------------------------------------------------------- stages

void stage_features(const PipelineConfig& c) {
  const Manifest manifest = read_manifest(c.manifest);
  if (manifest.entries.empty()) throw ValidationError("the manifest lists no utterances");
  const fs::path base = c.manifest.parent_path();
  Manifest out;
  for (const auto& e : manifest.entries) {
    fs::path src(e.path);
    if (src.is_relative()) src = base / src;
    FeatureSequence seq;
    if (src.extension() == ".wav") {
      const PcmAudio audio = read_wav(src);
      seq = mfcc39(audio.samples, audio.sample_rate);
    } else {
      seq = read_features(src);
    }
    seq.utterance_id = e.utterance_id;
    if (c.cmvn) seq = cmvn(seq);
    write_features(seq, c.output / "features" / (e.utterance_id + ".zrf"));
    out.entries.push_back({e.utterance_id, "features/" + e.utterance_id + ".zrf", e.speaker});
  }
  write_manifest(out, c.output / "manifest.tsv");
}

void stage_mat(const PipelineConfig& c, int k) {
  const Corpus input = mat_input(c, k);
  IterationState state =
      run_mat(input, c.grid, derive_seed(c.seed, {0x3a7, static_cast<std::uint64_t>(k)}),
              c.tokenizer);
  state.iteration = k;
  state.input_feature = mat_input_name(c, k);
  save_iteration(state, iter_dir(c, k));
}

void stage_mr(const PipelineConfig& c, int k) {
  if (c.mr_rounds == 0) return;
  const Corpus input = mat_input(c, k);
  IterationState state = load_iteration(iter_dir(c, k));
  std::string audit;
  for (int r = 1; r <= c.mr_rounds; ++r) {
    Reinitialization re;
    state = mr_round(state, input, reinit_for(c, k), c.tokenizer, &re);
    const fs::path dir = state_dir(c, k, r);
    save_iteration(state, dir);
    write_labels(re.initial_labels, dir / "omega0.tsv");
    for (const auto& [n, lda] : re.lda)
      write_model(lda_to_model(lda), dir / ("lda_" + std::to_string(n) + ".model"));
    int fused = 0;
    for (const auto& [utt, spans] : re.fused) fused += static_cast<int>(spans.size());
    json layers = json::object();
    for (const auto& [id, ls] : state.layers)
      layers[id.str()] = static_cast<int>(ls.epoch_log_likelihoods.size());
    audit += json{{"round", r}, {"fused_segments", fused}, {"epochs", layers}}.dump() + "\n";
  }
  write_text_file(iter_dir(c, k) / "mr_audit.jsonl", audit);
}

void stage_net(const PipelineConfig& c, int k) {
  const IterationState state = load_iteration(state_dir(c, k, c.mr_rounds));
  NetConfig cfg = c.net;
  cfg.seed = derive_seed(c.net.seed, {static_cast<std::uint64_t>(k)});
  const auto inputs = net_inputs(c, k);
  const NetIteration it = run_iteration(state, inputs, cfg);
  write_model(net_to_model(it.net), iter_dir(c, k) / "net.model");
  std::string log;
  for (std::size_t e = 0; e < it.epoch_losses.size(); ++e)
    log += json{{"epoch", e + 1}, {"loss", it.epoch_losses[e]}}.dump() + "\n";
  write_text_file(iter_dir(c, k) / "net_log.jsonl", log);
}

void stage_bnf(const PipelineConfig& c, int k) {
  const MultiTargetNet net = net_from_model(read_model(iter_dir(c, k) / "net.model"));
  const Corpus bnf = extract_bnf(net, net_inputs(c, k));
  fs::remove_all(bnf_dir(c, k));
  write_corpus(bnf, bnf_dir(c, k));
}

std::vector<std::string> search_streams(const PipelineConfig& c) {
  std::vector<std::string> s = {"feature-initial"};
  for (int k = 1; k <= c.iterations; ++k) s.push_back("feature-bnf-" + std::to_string(k));
  for (int k = 1; k <= c.iterations; ++k)
    for (int r = 0; r <= c.mr_rounds; ++r)
      s.push_back("token-iter" + std::to_string(k) + "-mr" + std::to_string(r));
  s.push_back("fused");
  return s;
}

void stage_search(const PipelineConfig& c) {
  if (c.queries.empty()) {
    spdlog::info("no queries configured; search skipped");
    return;
  }
  const auto queries = read_queries(c.queries);
  const auto ids = corpus_order(c);
  std::vector<ScoreTable> streams;
  std::vector<std::string> names;
  auto add = [&](std::string name, ScoreTable t) {
    write_results(rank(t), c.output / "search" / (name + ".tsv"));
    names.push_back(std::move(name));
    streams.push_back(std::move(t));
  };
  add("feature-initial",
      feature_scores(initial_features(c), queries, c.search_metric, c.search_normalize));
  for (int k = 1; k <= c.iterations; ++k)
    add("feature-bnf-" + std::to_string(k),
        feature_scores(bnf_features(c, k), queries, c.search_metric, c.search_normalize));
  for (int k = 1; k <= c.iterations; ++k) {
    const Corpus input = mat_input(c, k);
    std::map<std::string, const FeatureSequence*> by_id;
    for (const auto& seq : input) by_id[seq.utterance_id] = &seq;
    for (int r = 0; r <= c.mr_rounds; ++r) {
      const std::string name = "token-iter" + std::to_string(k) + "-mr" + std::to_string(r);
      const IterationState state = load_iteration(state_dir(c, k, r));
      TokenCollection col;
      col.name = name;
      for (const auto& [layer, ls] : state.layers) {
        col.distances[layer] = kl_matrix(ls.tokens);
        write_model(kl_to_model(col.distances[layer]),
                    c.output / "search" / "kl" / name / (layer_stem(layer) + ".model"));
        auto& docs = col.documents[layer];
        for (const auto& [utt, segs] : ls.labels) {
          auto& seq = docs[utt];
          for (const auto& s : segs) seq.push_back(s.token);
        }
        auto& qs = col.queries[layer];
        for (const Query& q : queries) {
          auto it = by_id.find(q.utterance_id);
          if (it == by_id.end())
            throw ValidationError("query '" + q.id + "' refers to unknown utterance '" +
                                  q.utterance_id + "'");
          if (q.span.end > it->second->num_frames())
            throw ValidationError("query '" + q.id + "' runs past the end of its utterance");
          const FeatureMatrix frames = it->second->frames.middleRows(q.span.start, q.span.length());
          auto& seq = qs[q.id];
          for (const auto& s : decode(frames, ls.tokens).segments) seq.push_back(s.token);
        }
      }
      add(name, token_scores(col, queries, ids, c.search_normalize));
    }
  }
  add("fused", fuse_scores(streams, c.search_znorm));
}

json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f", p.f},
          {"matched", p.matched},     {"discovered", p.discovered}, {"gold", p.gold}};
}

void stage_eval(const PipelineConfig& c) {
  json report;
  json cfg = json::object();
  for (const auto& [k, v] : c.source.values())
    if (k != "output") cfg[k] = v;
  report["config"] = cfg;

  const auto ids = corpus_order(c);
  const Corpus initial = initial_features(c);
  long frames = 0;
  for (const auto& s : initial) frames += s.num_frames();
  report["corpus"] = {{"utterances", initial.size()},
                      {"frames", frames},
                      {"dim", initial.empty() ? 0 : initial.front().dim()}};

  GoldAlignment gold, gold_words;
  if (!c.gold.empty()) gold = read_gold(c.gold);
  if (!c.gold_words.empty()) gold_words = read_gold(c.gold_words);

  json iterations = json::array();
  for (int k = 1; k <= c.iterations; ++k) {
    json it;
    it["iteration"] = k;
    it["mat_input"] = mat_input_name(c, k);
    json rounds = json::array();
    for (int r = 0; r <= c.mr_rounds; ++r) {
      const IterationState state = load_iteration(state_dir(c, k, r));
      json layers = json::object();
      double sum_bf = 0, sum_wbf = 0, sum_tok = 0, sum_type = 0, sum_ned = 0, sum_cov = 0;
      int ned_layers = 0;
      bool monotone = true;
      for (const auto& [id, ls] : state.layers) {
        json l;
        l["epochs"] = ls.epoch_log_likelihoods.size();
        l["log_likelihoods"] = ls.epoch_log_likelihoods;
        for (std::size_t e = 1; e < ls.epoch_log_likelihoods.size(); ++e)
          if (ls.epoch_log_likelihoods[e] < ls.epoch_log_likelihoods[e - 1] - 1e-6) monotone = false;
        if (!gold.empty()) {
          const Prf b = boundary_scores(ls.labels, gold, c.boundary_tolerance);
          const TokenTypeScores tt = token_type_prf(ls.labels, gold, c.boundary_tolerance);
          const auto pairs = ned_pairs(ls.labels, gold);
          l["boundary"] = prf_json(b);
          l["token"] = prf_json(tt.token);
          l["type"] = prf_json(tt.type);
          l["coverage"] = coverage(ls.labels, gold);
          sum_bf += b.f;
          sum_tok += tt.token.f;
          sum_type += tt.type.f;
          sum_cov += l["coverage"].get<double>();
          if (!pairs.empty()) {
            l["ned"] = ned(pairs);
            sum_ned += l["ned"].get<double>();
            ++ned_layers;
          }
        }
        if (!gold_words.empty()) {
          const Prf wb = boundary_scores(ls.labels, gold_words, c.boundary_tolerance);
          l["word_boundary"] = prf_json(wb);
          sum_wbf += wb.f;
        }
        layers[id.str()] = l;
      }
      const double L = static_cast<double>(state.layers.size());
      json mean;
      if (!gold.empty()) {
        mean["boundary_f"] = sum_bf / L;
        mean["token_f"] = sum_tok / L;
        mean["type_f"] = sum_type / L;
        mean["coverage"] = sum_cov / L;
        if (ned_layers) mean["ned"] = sum_ned / ned_layers;
      }
      if (!gold_words.empty()) mean["word_boundary_f"] = sum_wbf / L;
      rounds.push_back({{"round", r}, {"layers", layers}, {"mean", mean},
                        {"log_likelihood_non_decreasing", monotone}});
    }
    it["mr"] = rounds;
    json losses = json::array();
    for (const auto& line : split(read_text_file(iter_dir(c, k) / "net_log.jsonl"), '\n'))
      if (!line.empty()) losses.push_back(json::parse(line).at("loss"));
    const MultiTargetNet net = net_from_model(read_model(iter_dir(c, k) / "net.model"));
    it["net"] = {{"input_width", net.config().input_width},
                 {"bottleneck", net.config().bottleneck},
                 {"groups", net.config().groups},
                 {"epoch_losses", losses}};
    iterations.push_back(it);
  }
  report["iterations"] = iterations;

  if (!gold.empty()) {
    json abx;
    std::vector<std::pair<std::string, Corpus>> sets;
    sets.emplace_back("initial", initial);
    for (int k = 1; k <= c.iterations; ++k)
      sets.emplace_back("bnf-" + std::to_string(k), bnf_features(c, k));
    for (AbxCondition cond : {AbxCondition::kWithin, AbxCondition::kAcross}) {
      const AbxTask task = build_abx_task(gold, cond, c.abx_max_triples,
                                          derive_seed(c.seed, {0xab7, static_cast<std::uint64_t>(cond)}));
      if (task.triples.empty()) continue;
      for (const auto& [name, feats] : sets) abx[name][to_string(cond)] = abx_error(feats, task, c.abx_metric);
      abx["triples"][to_string(cond)] = task.triples.size();
    }
    abx["note"] = "proxy: label-pair macro average, not the official challenge stratification";
    report["abx"] = abx;
  }

  if (!c.queries.empty()) {
    const Relevance rel = read_relevance(c.relevance);
    json maps = json::object();
    for (const auto& name : search_streams(c))
      maps[name] = mean_average_precision(read_results(c.output / "search" / (name + ".tsv")), rel);
    report["search"] = {{"map", maps}, {"queries", rel.size()}};
  }
  write_text_file(report_path(c), report.dump(2) + "\n");
}

int stage_iteration(const std::string& stage) {
  return std::stoi(stage.substr(stage.find('-') + 1));
}

void run_stage(const PipelineConfig& c, const std::string& stage) {
  if (stage == "features") return stage_features(c);
  if (stage == "search") return stage_search(c);
  if (stage == "eval") return stage_eval(c);
  const int k = stage_iteration(stage);
  if (stage.rfind("mat-", 0) == 0) return stage_mat(c, k);
  if (stage.rfind("mr-", 0) == 0) return stage_mr(c, k);
  if (stage.rfind("net-", 0) == 0) return stage_net(c, k);
  if (stage.rfind("bnf-", 0) == 0) return stage_bnf(c, k);
  throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace

std::vector<std::string> pipeline_stages(const PipelineConfig& c) {
  std::vector<std::string> s = {"features"};
  for (int k = 1; k <= c.iterations; ++k)
    for (const char* name : {"mat-", "mr-", "net-", "bnf-"}) s.push_back(name + std::to_string(k));
  s.push_back("search");
  s.push_back("eval");
  return s;
}

fs::path state_dir(const PipelineConfig& c, int k, int r) {
  return r == 0 ? iter_dir(c, k) : iter_dir(c, k) / ("mr" + std::to_string(r));
}

std::vector<std::string> corpus_order(const PipelineConfig& c) {
  std::vector<std::string> ids;
  for (const auto& e : read_manifest(c.output / "manifest.tsv").entries)
    ids.push_back(e.utterance_id);
  return ids;
}

Corpus load_feature_dir(const fs::path& dir, const std::vector<std::string>& ids) {
  Corpus out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    FeatureSequence seq = read_features(dir / (id + ".zrf"));
    seq.utterance_id = id;
    out.push_back(std::move(seq));
  }
  return out;
}

bool stage_done(const PipelineConfig& c, const std::string& stage) {
  if (stage == "eval") return fs::exists(report_path(c));
  return fs::exists(marker(c, stage));
}

PipelineRun run_pipeline(const PipelineConfig& c, const std::string& through) {
  const auto stages = pipeline_stages(c);
  auto last = stages.end();
  if (!through.empty()) {
    last = std::find(stages.begin(), stages.end(), through);
    if (last == stages.end()) throw ConfigError("unknown stage '" + through + "'");
    ++last;
  }
  fs::create_directories(c.output);
  const fs::path snapshot = c.output / "config.snapshot";
  const std::string cfg_text = c.source.dump();
  if (fs::exists(snapshot) && read_text_file(snapshot) != cfg_text) {
    spdlog::warn("configuration changed since the last run in {}; starting over",
                 c.output.string());
    fs::remove_all(c.output / "stages");
    fs::remove(report_path(c));
  }
  write_text_file(snapshot, cfg_text);

  PipelineRun run;
  bool invalidated = false;
  for (auto it = stages.begin(); it != last; ++it) {
    const std::string& stage = *it;
    if (!invalidated && stage_done(c, stage)) {
      run.skipped.push_back(stage);
      continue;
    }
    if (!invalidated) {
      for (auto later = it; later != stages.end(); ++later) fs::remove(marker(c, *later));
      fs::remove(report_path(c));
      invalidated = true;
    }
    spdlog::info("stage {}", stage);
    try {
      run_stage(c, stage);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, std::string(e.what()) + " (artifacts under " + c.output.string() + ")");
    }
    if (stage != "eval") write_text_file(marker(c, stage), "ok\n");
    run.executed.push_back(stage);
  }
  if (fs::exists(report_path(c))) run.report = report_path(c);
  return run;
}

}  // namespace zrmat
