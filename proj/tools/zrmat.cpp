// tools/zrmat.cpp

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

// Command-line driver. Every stage subcommand runs the pipeline up to and
// including that stage, resuming from whatever is already on disk.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "zrmat/config.hpp"
#include "zrmat/error.hpp"
#include "zrmat/frontend.hpp"
#include "zrmat/pipeline.hpp"
#include "zrmat/synth.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

zrmat::PipelineConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  zrmat::Config cfg = zrmat::Config::load(path);
  if (seed) cfg.set("seed", std::to_string(*seed));
  return zrmat::PipelineConfig::from(cfg);
}

int run_through(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::string& stage) {
  const auto cfg = load_config(config_path, seed);
  const auto run = zrmat::run_pipeline(cfg, stage);
  for (const auto& s : run.skipped) spdlog::info("stage {} already done", s);
  if (!run.report.empty()) std::cout << run.report.string() << "\n";
  return 0;
}

void write_synth_config(const zrmat::fs::path& dir, std::uint64_t seed) {
  std::string text =
      "# synthetic corpus\n"
      "corpus.manifest = manifest.tsv\n"
      "corpus.gold = gold.tsv\n"
      "corpus.gold_words = gold_words.tsv\n"
      "corpus.queries = queries.tsv\n"
      "corpus.relevance = relevance.tsv\n"
      "features.cmvn = false\n"
      "grid.preset = desk\n"
      "iterations = 1\n"
      "mr.rounds = 1\n"
      "seed = " + std::to_string(seed) + "\n"
      "output = run\n";
  zrmat::write_text_file(dir / "pipeline.cfg", text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zrmat: zero-resource acoustic token discovery and search"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string stage;
  int iteration = 1;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Pipeline config file")->required();
    sub->add_option("--seed", seed, "Override the config seed");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_out;
  int utterances = 50;
  std::uint64_t synth_seed = 1;
  zrmat::SyntheticLanguageSpec spec;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--utterances", utterances, "Utterance count")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--phones", spec.num_phones)->capture_default_str();
  synth->add_option("--words", spec.num_words)->capture_default_str();
  synth->add_option("--dim", spec.dim)->capture_default_str();
  synth->add_option("--speakers", spec.num_speakers)->capture_default_str();
  synth->add_option("--noise", spec.noise)->capture_default_str();
  synth->add_option("--speaker-shift", spec.speaker_shift)->capture_default_str();
  synth->add_option("--queries", spec.num_queries)->capture_default_str();
  synth->add_option("--min-duration", spec.min_duration, "Frames per phone, lower bound")
      ->capture_default_str();
  synth->add_option("--max-duration", spec.max_duration, "Frames per phone, upper bound")
      ->capture_default_str();

  // mfcc
  auto* mfcc = app.add_subcommand("mfcc", "Compute features (one wav, or the corpus stage)");
  std::string wav_in, zrf_out;
  mfcc->add_option("--config", config_path, "Pipeline config file");
  mfcc->add_option("--seed", seed, "Override the config seed");
  mfcc->add_option("--wav", wav_in, "Single 16-bit mono wav");
  mfcc->add_option("--out", zrf_out, "Output feature file for --wav");

  struct IterStage {
    const char* name;
    const char* help;
    const char* prefix;
  };
  const IterStage iter_stages[] = {
      {"tokenize", "Fit the tokenizer grid", "mat-"},
      {"reinforce", "Run mutual reinforcement rounds", "mr-"},
      {"nnet-train", "Train the multi-target network", "net-"},
      {"bnf", "Extract bottleneck features", "bnf-"},
  };
  std::vector<std::pair<CLI::App*, const char*>> iter_subs;
  for (const auto& s : iter_stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_config(sub);
    sub->add_option("--iteration", iteration, "Iteration index")->capture_default_str();
    iter_subs.emplace_back(sub, s.prefix);
  }
  auto* iterate = app.add_subcommand("iterate", "Run every iteration through feature extraction");
  add_config(iterate);
  auto* search = app.add_subcommand("search", "Query-by-example search over all streams");
  add_config(search);
  auto* eval = app.add_subcommand("eval", "Write the evaluation report");
  add_config(eval);
  auto* pipeline = app.add_subcommand("pipeline", "Run the whole pipeline");
  add_config(pipeline);
  pipeline->add_option("--stage", stage, "Stop after this stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (synth->parsed()) {
      const auto corpus = zrmat::gen_synth(spec, utterances, synth_seed);
      zrmat::write_synth(corpus, synth_out);
      write_synth_config(synth_out, synth_seed);
      std::cout << synth_out << "\n";
      return 0;
    }
    if (mfcc->parsed()) {
      if (!wav_in.empty()) {
        if (zrf_out.empty()) throw zrmat::ConfigError("--wav needs --out");
        const auto audio = zrmat::read_wav(wav_in);
        auto seq = zrmat::mfcc39(audio.samples, audio.sample_rate);
        zrmat::write_features(seq, zrf_out);
        return 0;
      }
      if (config_path.empty()) throw zrmat::ConfigError("mfcc needs --wav or --config");
      return run_through(config_path, seed, "features");
    }
    for (const auto& [sub, prefix] : iter_subs)
      if (sub->parsed()) return run_through(config_path, seed, prefix + std::to_string(iteration));
    if (iterate->parsed()) {
      const auto cfg = load_config(config_path, seed);
      return run_through(config_path, seed, "bnf-" + std::to_string(cfg.iterations));
    }
    if (search->parsed()) return run_through(config_path, seed, "search");
    if (eval->parsed()) return run_through(config_path, seed, "eval");
    if (pipeline->parsed()) return run_through(config_path, seed, stage);
  } catch (const zrmat::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const zrmat::StageError& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return 0;
}
