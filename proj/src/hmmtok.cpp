// src/hmmtok.cpp

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

#include "zrmat/hmmtok.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "zrmat/error.hpp"
#include "zrmat/rng.hpp"

namespace zrmat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-model constants for fast emission scoring.
struct ScoredModel {
  const TokenHmm* model = nullptr;
  Eigen::MatrixXd inv_var;       // m x d
  Eigen::VectorXd log_norm;      // m
  Eigen::VectorXd log_stay;      // m
  Eigen::VectorXd log_advance;   // m

  explicit ScoredModel(const TokenHmm& hmm) : model(&hmm) {
    const int m = hmm.num_states();
    inv_var = hmm.variances.cwiseInverse();
    log_norm.resize(m);
    log_stay.resize(m);
    log_advance.resize(m);
    for (int s = 0; s < m; ++s) {
      log_norm[s] = -0.5 * (hmm.variances.row(s).array() * (2.0 * std::numbers::pi)).log().sum();
      log_stay[s] = std::log(hmm.self_loop[s]);
      log_advance[s] = std::log(1.0 - hmm.self_loop[s]);
    }
  }

  double emission(const FeatureMatrix& frames, int t, int s) const {
    const auto x = frames.row(t);
    const auto mu = model->means.row(s);
    const auto iv = inv_var.row(s);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < mu.size(); ++c) {
      const double diff = static_cast<double>(x[c]) - mu[c];
      acc += diff * diff * iv[c];
    }
    return log_norm[s] - 0.5 * acc;
  }
};

void check_dims(const FeatureMatrix& frames, const TokenSet& tokens) {
  if (frames.cols() != tokens.dim)
    throw ValidationError("feature dimension " + std::to_string(frames.cols()) +
                          " does not match token set dimension " + std::to_string(tokens.dim));
}

// Viterbi state path inside one segment; returns score without the token prior.
double align_impl(const FeatureMatrix& frames, int start, int end, const ScoredModel& sm,
                  std::vector<int>* path) {
  const int m = sm.model->num_states();
  const int L = end - start;
  if (L < m)
    throw ValidationError("segment of " + std::to_string(L) + " frames cannot host " +
                          std::to_string(m) + " states");
  std::vector<double> prev(m, kNegInf), cur(m);
  std::vector<std::uint8_t> back(static_cast<std::size_t>(L) * m, 0);
  prev[0] = sm.emission(frames, start, 0);
  for (int i = 1; i < L; ++i) {
    for (int s = 0; s < m; ++s) {
      double stay = prev[s] + sm.log_stay[s];
      double adv = s > 0 ? prev[s - 1] + sm.log_advance[s - 1] : kNegInf;
      std::uint8_t bp = 0;
      if (adv > stay) {
        stay = adv;
        bp = 1;
      }
      cur[s] = stay == kNegInf ? kNegInf : stay + sm.emission(frames, start + i, s);
      back[static_cast<std::size_t>(i) * m + s] = bp;
    }
    std::swap(prev, cur);
  }
  const double score = prev[m - 1] + sm.log_advance[m - 1];
  if (path) {
    path->assign(L, 0);
    int s = m - 1;
    for (int i = L - 1; i >= 0; --i) {
      (*path)[i] = s;
      if (i > 0 && back[static_cast<std::size_t>(i) * m + s]) --s;
    }
  }
  return score;
}

struct SegmentRef {
  int utt = 0;
  int start = 0;
  int end = 0;
};

// Sufficient statistics for one token's states.
struct StateStats {
  Eigen::MatrixXd sum;    // m x d
  Eigen::MatrixXd sumsq;  // m x d
  Eigen::VectorXd frames; // m
  int occurrences = 0;

  StateStats(int m, int d)
      : sum(Eigen::MatrixXd::Zero(m, d)),
        sumsq(Eigen::MatrixXd::Zero(m, d)),
        frames(Eigen::VectorXd::Zero(m)) {}

  void add(const FeatureMatrix& x, int start, const std::vector<int>& path) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      const int s = path[i];
      const Eigen::RowVectorXd row = x.row(start + static_cast<int>(i)).cast<double>();
      sum.row(s) += row;
      sumsq.row(s) += row.cwiseProduct(row);
      frames[s] += 1.0;
    }
    ++occurrences;
  }
};

TokenHmm estimate(const StateStats& st, const TokenizerOptions& opts) {
  const int m = static_cast<int>(st.sum.rows());
  const int d = static_cast<int>(st.sum.cols());
  TokenHmm hmm;
  hmm.means.resize(m, d);
  hmm.variances.resize(m, d);
  hmm.self_loop.resize(m);
  for (int s = 0; s < m; ++s) {
    const double n = st.frames[s];
    hmm.means.row(s) = st.sum.row(s) / n;
    for (int c = 0; c < d; ++c) {
      const double mu = hmm.means(s, c);
      const double var = st.sumsq(s, c) / n - mu * mu;
      hmm.variances(s, c) = std::max(var, opts.variance_floor);
    }
    const double loop = (n - st.occurrences) / n;
    hmm.self_loop[s] = std::clamp(loop, opts.min_self_loop, opts.max_self_loop);
  }
  return hmm;
}

std::vector<int> uniform_path(int length, int m) {
  std::vector<int> path(length);
  for (int i = 0; i < length; ++i)
    path[i] = static_cast<int>(static_cast<long long>(i) * m / length);
  return path;
}

}  // namespace

double gaussian_log_density(const Eigen::Ref<const Eigen::RowVectorXf>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& mean,
                            const Eigen::Ref<const Eigen::RowVectorXd>& var) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < mean.size(); ++c) {
    const double diff = static_cast<double>(x[c]) - mean[c];
    acc += std::log(2.0 * std::numbers::pi * var[c]) + diff * diff / var[c];
  }
  return -0.5 * acc;
}

SegmentSeq enforce_min_length(const SegmentSeq& segments, int min_length) {
  SegmentSeq out = segments;
  while (out.size() > 1) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const Segment& s) { return s.length() < min_length; });
    if (it == out.end()) break;
    const std::size_t i = static_cast<std::size_t>(it - out.begin());
    const std::size_t j = i > 0 ? i - 1 : i + 1;  // neighbour absorbing it
    Segment merged;
    merged.start = std::min(out[i].start, out[j].start);
    merged.end = std::max(out[i].end, out[j].end);
    merged.token = out[i].length() > out[j].length() ? out[i].token : out[j].token;
    const std::size_t lo = std::min(i, j);
    out[lo] = merged;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(lo + 1));
  }
  return out;
}

// ------------------------------------------------------------ initialize

Labeling initialize(const Corpus& corpus, const LayerId& layer, std::uint64_t seed,
                    const TokenizerOptions& opts) {
  if (layer.n < 2) throw ValidationError("a layer needs n >= 2 tokens, got " + layer.str());
  if (layer.m < 1) throw ValidationError("a layer needs m >= 1 states, got " + layer.str());
  if (corpus.empty()) throw ValidationError("cannot initialize an empty corpus");
  const int target = std::max(layer.m, opts.init_segment_frames);
  const int d = corpus.front().dim();

  struct Cut {
    int utt, start, end;
  };
  std::vector<Cut> cuts;
  for (int u = 0; u < static_cast<int>(corpus.size()); ++u) {
    const auto& seq = corpus[u];
    if (seq.dim() != d) throw ValidationError("inconsistent feature dimension at " + seq.utterance_id);
    const int T = seq.num_frames();
    if (T < layer.m)
      throw ValidationError("utterance '" + seq.utterance_id + "' has " + std::to_string(T) +
                            " frames, fewer than m=" + std::to_string(layer.m));
    const int count = std::max(1, T / target);
    for (int i = 0; i < count; ++i)
      cuts.push_back({u, i * target, i + 1 == count ? T : (i + 1) * target});
  }
  const int N = static_cast<int>(cuts.size());
  if (N < layer.n)
    throw ValidationError("only " + std::to_string(N) + " initial segments for n=" +
                          std::to_string(layer.n) + " tokens; use a smaller n");

  Eigen::MatrixXd points(N, d);
  for (int i = 0; i < N; ++i) {
    const auto& c = cuts[i];
    points.row(i) = corpus[c.utt]
                        .frames.middleRows(c.start, c.end - c.start)
                        .cast<double>()
                        .colwise()
                        .mean();
  }

  // k-means++ seeding.
  Rng rng(seed);
  const int K = layer.n;
  Eigen::MatrixXd centers(K, d);
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(N)));
  Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < K; ++k) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total;
      pick = N - 1;
      for (int i = 0; i < N; ++i) {
        r -= d2[i];
        if (r < 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(N));
    }
    centers.row(k) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }

  // Lloyd iterations.
  std::vector<int> assign(N, -1);
  for (int iter = 0; iter < opts.kmeans_iterations; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centers.row(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        const double dist = (points.row(i) - centers.row(k)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
    std::vector<int> counts(K, 0);
    for (int i = 0; i < N; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int k = 0; k < K; ++k)
      if (counts[k] > 0) centers.row(k) = sums.row(k) / counts[k];
  }

  Labeling labels;
  for (int i = 0; i < N; ++i)
    labels[corpus[cuts[i].utt].utterance_id].push_back({assign[i], cuts[i].start, cuts[i].end});
  return labels;
}

// ---------------------------------------------------------- train_models

std::vector<int> align_segment(const FeatureMatrix& frames, int start, int end,
                               const TokenHmm& model, double* score) {
  ScoredModel sm(model);
  std::vector<int> path;
  const double s = align_impl(frames, start, end, sm, &path);
  if (score) *score = s;
  return path;
}

TokenSet train_models(const Corpus& corpus, const Labeling& labels, const LayerId& layer,
                      const TokenizerOptions& opts, const TokenSet* warm_start) {
  if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");
  const int m = layer.m;
  const int n = layer.n;
  const int d = corpus.front().dim();
  if (warm_start && (warm_start->layer != layer || warm_start->dim != d))
    throw ValidationError("warm start models do not match layer " + layer.str());

  std::vector<std::vector<SegmentRef>> by_token(n);
  for (int u = 0; u < static_cast<int>(corpus.size()); ++u) {
    const auto& seq = corpus[u];
    auto it = labels.find(seq.utterance_id);
    if (it == labels.end())
      throw ValidationError("no labels for utterance '" + seq.utterance_id + "'");
    validate_tiling(seq.utterance_id, it->second, seq.num_frames());
    for (const auto& s : it->second) {
      if (s.token >= n)
        throw ValidationError("token " + std::to_string(s.token) + " out of range for layer " +
                              layer.str());
      if (s.length() < m)
        throw ValidationError("utterance '" + seq.utterance_id + "': segment [" +
                              std::to_string(s.start) + "," + std::to_string(s.end) +
                              ") shorter than m=" + std::to_string(m));
      by_token[s.token].push_back({u, s.start, s.end});
    }
  }

  TokenSet out;
  out.layer = layer;
  out.dim = d;
  out.models.resize(n);

  for (int k = 0; k < n; ++k) {
    const auto& segs = by_token[k];
    if (segs.empty()) continue;
    // First alignment: uniform split, or Viterbi under the previous model.
    StateStats stats(m, d);
    if (warm_start) {
      ScoredModel sm(warm_start->models[k]);
      std::vector<int> path;
      for (const auto& r : segs) {
        align_impl(corpus[r.utt].frames, r.start, r.end, sm, &path);
        stats.add(corpus[r.utt].frames, r.start, path);
      }
    } else {
      for (const auto& r : segs)
        stats.add(corpus[r.utt].frames, r.start, uniform_path(r.end - r.start, m));
    }
    TokenHmm model = estimate(stats, opts);
    for (int pass = 0; pass < opts.realign_passes; ++pass) {
      ScoredModel sm(model);
      StateStats next(m, d);
      std::vector<int> path;
      for (const auto& r : segs) {
        align_impl(corpus[r.utt].frames, r.start, r.end, sm, &path);
        next.add(corpus[r.utt].frames, r.start, path);
      }
      model = estimate(next, opts);
    }
    out.models[k] = std::move(model);
  }

  // Starved tokens: copy the most-populated token and shift the copy's
  // means by a multiple of 0.1 sigma. The donor itself is left untouched so
  // the labels' likelihood under the new models is unaffected.
  int donor = 0;
  for (int k = 1; k < n; ++k)
    if (by_token[k].size() > by_token[donor].size()) donor = k;
  if (by_token[donor].empty()) throw ValidationError("no segments to train layer " + layer.str());
  int reseeded = 0;
  for (int k = 0; k < n; ++k) {
    if (!by_token[k].empty()) continue;
    TokenHmm copy = out.models[donor];
    const double sign = reseeded % 2 == 0 ? 1.0 : -1.0;
    const double scale = 0.1 * (1 + reseeded / 2);
    copy.means += sign * scale * copy.variances.cwiseSqrt();
    out.models[k] = std::move(copy);
    spdlog::debug("layer {}: token {} has no segments, reseeded from token {}", layer.str(), k,
                  donor);
    ++reseeded;
  }
  if (reseeded > 0)
    spdlog::info("layer {}: reseeded {} empty token(s) from token {}", layer.str(), reseeded,
                 donor);
  return out;
}

// ---------------------------------------------------------------- decode

DecodeResult decode(const FeatureMatrix& frames, const TokenSet& tokens) {
  check_dims(frames, tokens);
  const int T = static_cast<int>(frames.rows());
  const int n = tokens.num_tokens();
  const int m = tokens.layer.m;
  if (n < 1) throw ValidationError("empty token set");
  if (T < m)
    throw ValidationError("utterance of " + std::to_string(T) + " frames is shorter than m=" +
                          std::to_string(m));
  const double log_prior = -std::log(static_cast<double>(n));

  std::vector<ScoredModel> models;
  models.reserve(n);
  for (const auto& h : tokens.models) models.emplace_back(h);

  const int S = n * m;
  std::vector<double> prev(S, kNegInf), cur(S);
  // back: 0 = stay, 1 = advance within token / enter from the best exit.
  std::vector<std::uint8_t> back(static_cast<std::size_t>(T) * S, 0);
  std::vector<int> exit_token(T, 0);

  for (int k = 0; k < n; ++k) prev[k * m] = log_prior + models[k].emission(frames, 0, 0);

  for (int t = 1; t < T; ++t) {
    // Best token to leave at t-1.
    double best_exit = kNegInf;
    int best_k = 0;
    for (int k = 0; k < n; ++k) {
      const double v = prev[k * m + m - 1] + models[k].log_advance[m - 1];
      if (v > best_exit) {
        best_exit = v;
        best_k = k;
      }
    }
    exit_token[t - 1] = best_k;
    const double enter = best_exit + log_prior;
    std::uint8_t* bp = back.data() + static_cast<std::size_t>(t) * S;
    for (int k = 0; k < n; ++k) {
      const auto& sm = models[k];
      for (int s = 0; s < m; ++s) {
        const int idx = k * m + s;
        double v = prev[idx] + sm.log_stay[s];
        const double alt = s == 0 ? enter : prev[idx - 1] + sm.log_advance[s - 1];
        std::uint8_t b = 0;
        if (alt > v) {
          v = alt;
          b = 1;
        }
        bp[idx] = b;
        cur[idx] = v == kNegInf ? kNegInf : v + sm.emission(frames, t, s);
      }
    }
    std::swap(prev, cur);
  }

  double best = kNegInf;
  int k_end = 0;
  for (int k = 0; k < n; ++k) {
    const double v = prev[k * m + m - 1] + models[k].log_advance[m - 1];
    if (v > best) {
      best = v;
      k_end = k;
    }
  }
  if (!std::isfinite(best)) throw Error("decode produced a non-finite likelihood");

  DecodeResult result;
  result.log_likelihood = best;
  int k = k_end, s = m - 1, seg_end = T;
  for (int t = T - 1; t >= 0; --t) {
    const bool moved = t > 0 && back[static_cast<std::size_t>(t) * S + k * m + s];
    if (t == 0 || (s == 0 && moved)) {
      result.segments.push_back({k, t, seg_end});
      seg_end = t;
      if (t > 0) {
        k = exit_token[t - 1];
        s = m - 1;
      }
    } else if (moved) {
      --s;
    }
  }
  std::reverse(result.segments.begin(), result.segments.end());
  return result;
}

double score_labeling(const FeatureMatrix& frames, const SegmentSeq& segments,
                      const TokenSet& tokens) {
  check_dims(frames, tokens);
  const double log_prior = -std::log(static_cast<double>(tokens.num_tokens()));
  double total = 0.0;
  for (const auto& seg : segments) {
    ScoredModel sm(tokens.models.at(seg.token));
    total += log_prior + align_impl(frames, seg.start, seg.end, sm, nullptr);
  }
  return total;
}

// ------------------------------------------------------------- fit_layer

LayerFit fit_layer(const Corpus& corpus, const LayerId& layer, const Labeling& init,
                   const TokenizerOptions& opts, const EpochCallback& on_epoch) {
  if (opts.max_epochs < 1) throw ValidationError("max epochs must be >= 1");
  LayerFit fit;
  Labeling labels = init;
  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    fit.tokens = train_models(corpus, labels, layer, opts, epoch > 1 ? &fit.tokens : nullptr);
    Labeling next;
    double total = 0.0;
    for (const auto& seq : corpus) {
      auto r = decode(seq.frames, fit.tokens);
      total += r.log_likelihood;
      next[seq.utterance_id] = std::move(r.segments);
    }
    fit.epoch_log_likelihoods.push_back(total);
    fit.epochs = epoch;
    if (on_epoch) on_epoch(epoch, total);
    const bool converged = next == labels;
    labels = std::move(next);
    if (converged) break;
  }
  fit.labels = std::move(labels);
  return fit;
}

// --------------------------------------------------------- serialization

ModelFile token_set_to_model(const TokenSet& tokens) {
  ModelFile f;
  f.kind = "token_set";
  f.set("m", static_cast<long long>(tokens.layer.m));
  f.set("n", static_cast<long long>(tokens.layer.n));
  f.set("dim", static_cast<long long>(tokens.dim));
  f.set("layout", std::string("per token: means[m*d] variances[m*d] self_loop[m], row-major"));
  for (const auto& h : tokens.models) {
    for (int s = 0; s < h.num_states(); ++s)
      for (int c = 0; c < h.dim(); ++c) f.payload.push_back(h.means(s, c));
    for (int s = 0; s < h.num_states(); ++s)
      for (int c = 0; c < h.dim(); ++c) f.payload.push_back(h.variances(s, c));
    for (int s = 0; s < h.num_states(); ++s) f.payload.push_back(h.self_loop[s]);
  }
  return f;
}

TokenSet token_set_from_model(const ModelFile& f) {
  if (f.kind != "token_set") throw FormatError("expected a token_set model, got " + f.kind);
  TokenSet t;
  t.layer = {static_cast<int>(f.get_int("m")), static_cast<int>(f.get_int("n"))};
  t.dim = static_cast<int>(f.get_int("dim"));
  const int m = t.layer.m, d = t.dim;
  const std::size_t per = static_cast<std::size_t>(m) * d * 2 + m;
  if (f.payload.size() != per * t.layer.n) throw FormatError("token_set payload size mismatch");
  std::size_t p = 0;
  for (int k = 0; k < t.layer.n; ++k) {
    TokenHmm h;
    h.means.resize(m, d);
    h.variances.resize(m, d);
    h.self_loop.resize(m);
    for (int s = 0; s < m; ++s)
      for (int c = 0; c < d; ++c) h.means(s, c) = f.payload[p++];
    for (int s = 0; s < m; ++s)
      for (int c = 0; c < d; ++c) h.variances(s, c) = f.payload[p++];
    for (int s = 0; s < m; ++s) h.self_loop[s] = f.payload[p++];
    t.models.push_back(std::move(h));
  }
  return t;
}

}  // namespace zrmat
