// zrmat/match.hpp

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

// Distances and query-by-example search: symmetric-KL token distances,
// token-level and frame-level DTW, and score fusion across streams.

#ifndef ZRMAT_MATCH_HPP_
#define ZRMAT_MATCH_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zrmat/corpusio.hpp"
#include "zrmat/hmmtok.hpp"
#include "zrmat/types.hpp"

namespace zrmat {

struct TokenDistanceMatrix {
  LayerId layer;
  Eigen::MatrixXd S;  // n x n
};

// KL(p || q) for diagonal Gaussians.
double gaussian_kl(const Eigen::Ref<const Eigen::RowVectorXd>& mean_p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& var_p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& mean_q,
                   const Eigen::Ref<const Eigen::RowVectorXd>& var_q);

// S(i,j) = sum over states s of KL(i_s || j_s) + KL(j_s || i_s).
TokenDistanceMatrix kl_matrix(const TokenSet& tokens);

ModelFile kl_to_model(const TokenDistanceMatrix& kl);
TokenDistanceMatrix kl_from_model(const ModelFile& model);

enum class Alignment {
  kFull,         // both sequences aligned end to end
  kSubsequence,  // the query (columns) fully, the document (rows) freely
};

struct DtwPath {
  double cost = 0.0;
  int length = 0;
  double distance = 0.0;  // cost / length, or cost when not normalized
};

// DTW over a cost matrix W (document rows x query columns) with steps
// (i-1,j), (i,j-1), (i-1,j-1), each adding W(i,j). Among minimal-cost
// paths the longest is taken.
DtwPath dtw(const Eigen::MatrixXd& W, Alignment alignment, bool normalize = true);

// W(i,j) = S(doc_i, query_j); subsequence alignment.
double token_dtw(const std::vector<int>& doc, const std::vector<int>& query,
                 const Eigen::MatrixXd& S, bool normalize = true);

enum class FrameMetric { kEuclidean, kCosine };

FrameMetric parse_frame_metric(const std::string& name);

// 1 - cos; a zero vector is at distance 1 from anything non-zero and 0
// from another zero vector.
double frame_distance(const Eigen::Ref<const Eigen::RowVectorXf>& a,
                      const Eigen::Ref<const Eigen::RowVectorXf>& b, FrameMetric metric);

double feature_dtw(const FeatureMatrix& a, const FeatureMatrix& b, FrameMetric metric,
                   Alignment alignment = Alignment::kFull, bool normalize = true);

// A spoken query: a span cut out of one corpus utterance.
struct Query {
  std::string id;
  std::string utterance_id;
  Span span;
  std::string word;  // reference only
};

// TSV: query_id <TAB> utt <TAB> start <TAB> end [<TAB> word]
std::vector<Query> read_queries(const fs::path& path);
void write_queries(const std::vector<Query>& queries, const fs::path& path);

// query id -> document id -> distance
using ScoreTable = std::map<std::string, std::map<std::string, double>>;

// One collection of token layers (e.g. the full grid of one iteration).
struct TokenCollection {
  std::string name;
  std::map<LayerId, TokenDistanceMatrix> distances;
  std::map<LayerId, std::map<std::string, std::vector<int>>> documents;
  std::map<LayerId, std::map<std::string, std::vector<int>>> queries;
};

// Token mode: per-layer token_dtw averaged over the collection's layers.
// A query is never scored against its own source utterance.
ScoreTable token_scores(const TokenCollection& collection, const std::vector<Query>& queries,
                        const std::vector<std::string>& documents, bool normalize = true);

// Feature mode: subsequence feature DTW of the query frames against each
// document.
ScoreTable feature_scores(const Corpus& features, const std::vector<Query>& queries,
                          FrameMetric metric, bool normalize = true);

// Each stream is standardized per query over documents (when znorm), then
// streams are averaged. All streams must cover the same query/doc pairs.
ScoreTable fuse_scores(const std::vector<ScoreTable>& streams, bool znorm = true);

struct RankedDoc {
  std::string doc;
  double distance = 0.0;
};

struct SearchResult {
  std::string query;
  std::vector<RankedDoc> ranking;  // ascending distance, ties by doc id
};

std::vector<SearchResult> rank(const ScoreTable& scores);

// query <TAB> doc <TAB> rank <TAB> distance, rank from 1.
void write_results(const std::vector<SearchResult>& results, const fs::path& path);
std::vector<SearchResult> read_results(const fs::path& path);

}  // namespace zrmat

#endif  // ZRMAT_MATCH_HPP_
