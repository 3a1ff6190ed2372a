// zrmat/pipeline.hpp

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

// End-to-end driver. Stages run in order, each reading its inputs from the
// output directory and leaving a marker in <output>/stages when done, so a
// rerun picks up after the last completed stage:
//
//   features                     features/<utt>.zrf, manifest.tsv
//   mat-k, mr-k, net-k, bnf-k    iter<k>/...  for k = 1..iterations
//   search                       search/<stream>.tsv, search/kl/...
//   eval                         report.json

#ifndef ZRMAT_PIPELINE_HPP_
#define ZRMAT_PIPELINE_HPP_

#include <string>
#include <vector>

#include "zrmat/config.hpp"
#include "zrmat/corpusio.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

std::vector<std::string> pipeline_stages(const PipelineConfig& config);

struct PipelineRun {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  fs::path report;  // empty unless eval ran or was already done
};

// Runs every stage through `through` (all stages when empty). A stage is
// skipped when its marker exists; eval is done when report.json exists.
// Running a stage clears the markers of every later stage. Failures are
// rethrown as StageError.
PipelineRun run_pipeline(const PipelineConfig& config, const std::string& through = {});

bool stage_done(const PipelineConfig& config, const std::string& stage);

// Directory holding the final tokenizer state of iteration k after r
// refinement rounds.
fs::path state_dir(const PipelineConfig& config, int iteration, int round);

// Utterance ids in manifest order, as written by the features stage.
std::vector<std::string> corpus_order(const PipelineConfig& config);

// Reads <dir>/<id>.zrf for every id, in order.
Corpus load_feature_dir(const fs::path& dir, const std::vector<std::string>& ids);

}  // namespace zrmat

#endif  // ZRMAT_PIPELINE_HPP_
