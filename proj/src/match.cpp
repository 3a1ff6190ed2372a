// src/match.cpp

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

#include "zrmat/match.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zrmat/error.hpp"

namespace zrmat {

namespace {

struct Cell {
  double cost = std::numeric_limits<double>::infinity();
  int length = 0;
};

// Lower cost wins; equal cost goes to the longer path.
bool better(const Cell& a, const Cell& b) {
  return a.cost < b.cost || (a.cost == b.cost && a.length > b.length);
}

const std::vector<int>& layer_tokens(
    const std::map<LayerId, std::map<std::string, std::vector<int>>>& table,
    const LayerId& layer, const std::string& id, const char* what) {
  auto lit = table.find(layer);
  if (lit == table.end())
    throw ValidationError(std::string("layer ") + layer.str() + " has no " + what + " tokens");
  auto it = lit->second.find(id);
  if (it == lit->second.end())
    throw ValidationError(std::string("layer ") + layer.str() + " does not cover " + what +
                          " '" + id + "'");
  return it->second;
}

}  // namespace

double gaussian_kl(const Eigen::Ref<const Eigen::RowVectorXd>& mean_p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& var_p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& mean_q,
                   const Eigen::Ref<const Eigen::RowVectorXd>& var_q) {
  double kl = 0.0;
  for (Eigen::Index d = 0; d < mean_p.size(); ++d) {
    const double diff = mean_p[d] - mean_q[d];
    kl += std::log(var_q[d] / var_p[d]) + (var_p[d] + diff * diff) / var_q[d] - 1.0;
  }
  return 0.5 * kl;
}

TokenDistanceMatrix kl_matrix(const TokenSet& tokens) {
  const int n = tokens.num_tokens();
  TokenDistanceMatrix out;
  out.layer = tokens.layer;
  out.S = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const TokenHmm& a = tokens.models[i];
      const TokenHmm& b = tokens.models[j];
      if (a.num_states() != b.num_states() || a.dim() != b.dim())
        throw ValidationError("token models of layer " + tokens.layer.str() +
                              " differ in shape");
      double s = 0.0;
      for (int st = 0; st < a.num_states(); ++st)
        s += gaussian_kl(a.means.row(st), a.variances.row(st), b.means.row(st),
                         b.variances.row(st)) +
             gaussian_kl(b.means.row(st), b.variances.row(st), a.means.row(st),
                         a.variances.row(st));
      out.S(i, j) = s;
      out.S(j, i) = s;
    }
  }
  return out;
}

ModelFile kl_to_model(const TokenDistanceMatrix& kl) {
  ModelFile m;
  m.kind = "kl_matrix";
  m.set("layer", kl.layer.str());
  m.set("tokens", static_cast<long long>(kl.S.rows()));
  m.payload.assign(kl.S.data(), kl.S.data() + kl.S.size());
  return m;
}

TokenDistanceMatrix kl_from_model(const ModelFile& model) {
  if (model.kind != "kl_matrix")
    throw FormatError("expected a kl_matrix model, got '" + model.kind + "'");
  TokenDistanceMatrix kl;
  kl.layer = parse_layer_id(model.get("layer"));
  const auto n = static_cast<Eigen::Index>(model.get_int("tokens"));
  if (static_cast<Eigen::Index>(model.payload.size()) != n * n)
    throw FormatError("kl_matrix payload size mismatch");
  kl.S = Eigen::Map<const Eigen::MatrixXd>(model.payload.data(), n, n);
  return kl;
}

DtwPath dtw(const Eigen::MatrixXd& W, Alignment alignment, bool normalize) {
  const auto D = W.rows();
  const auto Q = W.cols();
  if (D == 0 || Q == 0) throw ValidationError("DTW needs two non-empty sequences");
  std::vector<Cell> prev(D), cur(D);
  for (Eigen::Index j = 0; j < Q; ++j) {
    for (Eigen::Index i = 0; i < D; ++i) {
      Cell best;
      if (j == 0 && (i == 0 || alignment == Alignment::kSubsequence)) best = {0.0, 0};
      if (i > 0) {
        if (better(cur[i - 1], best)) best = cur[i - 1];
        if (j > 0 && better(prev[i - 1], best)) best = prev[i - 1];
      }
      if (j > 0 && better(prev[i], best)) best = prev[i];
      cur[i] = {best.cost + W(i, j), best.length + 1};
    }
    std::swap(prev, cur);
  }
  Cell end = prev[D - 1];
  if (alignment == Alignment::kSubsequence)
    for (Eigen::Index i = 0; i < D; ++i)
      if (better(prev[i], end)) end = prev[i];
  DtwPath out;
  out.cost = end.cost;
  out.length = end.length;
  out.distance = normalize ? end.cost / end.length : end.cost;
  return out;
}

double token_dtw(const std::vector<int>& doc, const std::vector<int>& query,
                 const Eigen::MatrixXd& S, bool normalize) {
  if (doc.empty() || query.empty()) throw ValidationError("token DTW on an empty sequence");
  Eigen::MatrixXd W(doc.size(), query.size());
  for (std::size_t i = 0; i < doc.size(); ++i)
    for (std::size_t j = 0; j < query.size(); ++j) {
      if (doc[i] < 0 || doc[i] >= S.rows() || query[j] < 0 || query[j] >= S.rows())
        throw ValidationError("token id outside the distance matrix");
      W(i, j) = S(doc[i], query[j]);
    }
  return dtw(W, Alignment::kSubsequence, normalize).distance;
}

FrameMetric parse_frame_metric(const std::string& name) {
  if (name == "euclidean") return FrameMetric::kEuclidean;
  if (name == "cosine") return FrameMetric::kCosine;
  throw ConfigError("unknown frame metric '" + name + "' (expected euclidean or cosine)");
}

double frame_distance(const Eigen::Ref<const Eigen::RowVectorXf>& a,
                      const Eigen::Ref<const Eigen::RowVectorXf>& b, FrameMetric metric) {
  const Eigen::RowVectorXd x = a.cast<double>();
  const Eigen::RowVectorXd y = b.cast<double>();
  if (metric == FrameMetric::kEuclidean) return (x - y).norm();
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return (nx == 0.0 && ny == 0.0) ? 0.0 : 1.0;
  return std::max(0.0, 1.0 - x.dot(y) / (nx * ny));
}

double feature_dtw(const FeatureMatrix& a, const FeatureMatrix& b, FrameMetric metric,
                   Alignment alignment, bool normalize) {
  if (a.cols() != b.cols())
    throw ValidationError("feature DTW dimension mismatch: " + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.cols()));
  Eigen::MatrixXd W(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) W(i, j) = frame_distance(a.row(i), b.row(j), metric);
  return dtw(W, alignment, normalize).distance;
}

std::vector<Query> read_queries(const fs::path& path) {
  std::vector<Query> out;
  std::set<std::string> seen;
  for (const auto& row : read_tsv(path)) {
    if (row.fields.size() != 4 && row.fields.size() != 5)
      throw ParseError("query line needs 4 or 5 tab-separated fields", row.line);
    Query q;
    q.id = row.fields[0];
    q.utterance_id = row.fields[1];
    q.span = {parse_int_field(row.fields[2], "start", row.line),
              parse_int_field(row.fields[3], "end", row.line)};
    if (row.fields.size() == 5) q.word = row.fields[4];
    if (q.span.start < 0 || q.span.start >= q.span.end)
      throw ParseError("query span must satisfy 0 <= start < end", row.line);
    if (!seen.insert(q.id).second) throw ParseError("duplicate query id '" + q.id + "'", row.line);
    out.push_back(std::move(q));
  }
  return out;
}

void write_queries(const std::vector<Query>& queries, const fs::path& path) {
  std::string out;
  for (const Query& q : queries)
    out += q.id + "\t" + q.utterance_id + "\t" + std::to_string(q.span.start) + "\t" +
           std::to_string(q.span.end) + "\t" + q.word + "\n";
  write_text_file(path, out);
}

ScoreTable token_scores(const TokenCollection& collection, const std::vector<Query>& queries,
                        const std::vector<std::string>& documents, bool normalize) {
  if (collection.distances.empty())
    throw ValidationError("token collection '" + collection.name + "' has no layers");
  ScoreTable out;
  for (const Query& q : queries) {
    auto& row = out[q.id];
    for (const std::string& doc : documents) {
      if (doc == q.utterance_id) continue;
      double sum = 0.0;
      for (const auto& [layer, kl] : collection.distances)
        sum += token_dtw(layer_tokens(collection.documents, layer, doc, "document"),
                         layer_tokens(collection.queries, layer, q.id, "query"), kl.S,
                         normalize);
      row[doc] = sum / static_cast<double>(collection.distances.size());
    }
  }
  return out;
}

ScoreTable feature_scores(const Corpus& features, const std::vector<Query>& queries,
                          FrameMetric metric, bool normalize) {
  std::map<std::string, const FeatureSequence*> by_id;
  for (const auto& seq : features) by_id[seq.utterance_id] = &seq;
  ScoreTable out;
  for (const Query& q : queries) {
    auto it = by_id.find(q.utterance_id);
    if (it == by_id.end())
      throw ValidationError("query '" + q.id + "' refers to unknown utterance '" +
                            q.utterance_id + "'");
    const FeatureMatrix& src = it->second->frames;
    if (q.span.end > src.rows())
      throw ValidationError("query '" + q.id + "' runs past the end of its utterance");
    const FeatureMatrix frames = src.middleRows(q.span.start, q.span.length());
    auto& row = out[q.id];
    for (const auto& [doc, seq] : by_id) {
      if (doc == q.utterance_id) continue;
      row[doc] = feature_dtw(seq->frames, frames, metric, Alignment::kSubsequence, normalize);
    }
  }
  return out;
}

ScoreTable fuse_scores(const std::vector<ScoreTable>& streams, bool znorm) {
  if (streams.empty()) throw ValidationError("nothing to fuse");
  ScoreTable out;
  for (const auto& [query, docs] : streams.front()) {
    auto& row = out[query];
    for (const auto& [doc, v] : docs) row[doc] = 0.0;
  }
  for (const ScoreTable& stream : streams) {
    if (stream.size() != out.size())
      throw ValidationError("score streams cover different query sets");
    for (const auto& [query, docs] : stream) {
      auto it = out.find(query);
      if (it == out.end() || it->second.size() != docs.size())
        throw ValidationError("score streams differ for query '" + query + "'");
      double mean = 0.0, sd = 1.0;
      if (znorm && !docs.empty()) {
        for (const auto& [doc, v] : docs) mean += v;
        mean /= static_cast<double>(docs.size());
        double var = 0.0;
        for (const auto& [doc, v] : docs) var += (v - mean) * (v - mean);
        var /= static_cast<double>(docs.size());
        sd = var > 0.0 ? std::sqrt(var) : 0.0;
      }
      for (const auto& [doc, v] : docs) {
        auto dit = it->second.find(doc);
        if (dit == it->second.end())
          throw ValidationError("score streams differ for query '" + query + "'");
        dit->second += znorm ? (sd > 0.0 ? (v - mean) / sd : 0.0) : v;
      }
    }
  }
  for (auto& [query, docs] : out)
    for (auto& [doc, v] : docs) v /= static_cast<double>(streams.size());
  return out;
}

std::vector<SearchResult> rank(const ScoreTable& scores) {
  std::vector<SearchResult> out;
  for (const auto& [query, docs] : scores) {
    SearchResult r;
    r.query = query;
    for (const auto& [doc, v] : docs) r.ranking.push_back({doc, v});
    // docs arrive in id order, so a stable sort breaks ties by id
    std::stable_sort(r.ranking.begin(), r.ranking.end(),
                     [](const RankedDoc& a, const RankedDoc& b) { return a.distance < b.distance; });
    out.push_back(std::move(r));
  }
  return out;
}

void write_results(const std::vector<SearchResult>& results, const fs::path& path) {
  std::string out;
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.ranking.size(); ++i)
      out += r.query + "\t" + r.ranking[i].doc + "\t" + std::to_string(i + 1) + "\t" +
             format_double(r.ranking[i].distance) + "\n";
  write_text_file(path, out);
}

std::vector<SearchResult> read_results(const fs::path& path) {
  std::vector<SearchResult> out;
  for (const auto& row : read_tsv(path)) {
    if (row.fields.size() != 4)
      throw ParseError("result line needs 4 tab-separated fields", row.line);
    if (out.empty() || out.back().query != row.fields[0]) out.push_back({row.fields[0], {}});
    const int rank_field = parse_int_field(row.fields[2], "rank", row.line);
    if (rank_field != static_cast<int>(out.back().ranking.size()) + 1)
      throw ParseError("ranks must be consecutive from 1", row.line);
    out.back().ranking.push_back({row.fields[1], std::stod(row.fields[3])});
  }
  return out;
}

}  // namespace zrmat
