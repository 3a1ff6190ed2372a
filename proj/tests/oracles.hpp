// tests/oracles.hpp

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

#ifndef ZRMAT_TESTS_ORACLES_HPP_
#define ZRMAT_TESTS_ORACLES_HPP_

// Slow, direct reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "zrmat/hmmtok.hpp"
#include "zrmat/types.hpp"

namespace zrmat::oracles {

// ------------------------------------------------------------------ decode

const double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_gauss(const FeatureMatrix& x, int t, const TokenHmm& h, int s) {
  double acc = 0.0;
  for (int c = 0; c < h.dim(); ++c) {
    const double v = h.variances(s, c), d = x(t, c) - h.means(s, c);
    acc += -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * d * d / v;
  }
  return acc;
}

// Best score of frames [s, e) under one model, over every split of the
// segment into m non-empty runs.
inline double segment_score(const FeatureMatrix& x, int s, int e, const TokenHmm& h) {
  const int m = h.num_states();
  double best = kNegInf;
  std::function<void(int, int, double)> rec = [&](int state, int t, double acc) {
    if (state == m) {
      if (t == e) best = std::max(best, acc);
      return;
    }
    const int left = m - state - 1;
    for (int len = 1; t + len + left <= e; ++len) {
      double a = acc;
      for (int k = 0; k < len; ++k) a += log_gauss(x, t + k, h, state);
      a += (len - 1) * std::log(h.self_loop(state)) + std::log(1 - h.self_loop(state));
      rec(state + 1, t + len, a);
    }
  };
  rec(0, s, 0.0);
  return best;
}

struct Best {
  double score = kNegInf;
  SegmentSeq segs;
};

// Enumerates every segmentation and every token assignment.
inline Best brute_force_decode(const FeatureMatrix& x, const TokenSet& ts) {
  const int T = static_cast<int>(x.rows()), n = ts.num_tokens();
  Best best;
  SegmentSeq cur;
  std::function<void(int, double)> rec = [&](int t, double acc) {
    if (t == T) {
      if (acc > best.score) best = {acc, cur};
      return;
    }
    for (int e = t + 1; e <= T; ++e)
      for (int k = 0; k < n; ++k) {
        const double s = segment_score(x, t, e, ts.models[k]);
        if (s == kNegInf) continue;
        cur.push_back({k, t, e});
        rec(e, acc + std::log(1.0 / n) + s);
        cur.pop_back();
      }
  };
  rec(0, 0.0);
  return best;
}

// --------------------------------------------------------------------- dtw

struct PathScore {
  double cost = std::numeric_limits<double>::infinity();
  int length = 0;
};

// Walks every monotone path with steps (1,0), (0,1), (1,1). Full paths run
// from (0,0) to (D-1,Q-1); subsequence paths may start in any row of
// column 0 and end in any row of column Q-1. Keeps the cheapest path,
// the longest among equal costs.
inline PathScore enumerate_paths(const Eigen::MatrixXd& W, bool subsequence) {
  const int D = static_cast<int>(W.rows()), Q = static_cast<int>(W.cols());
  PathScore best;
  auto offer = [&](double cost, int len) {
    const double tol = 1e-12 * std::max(1.0, std::abs(cost));
    if (cost < best.cost - tol || (std::abs(cost - best.cost) <= tol && len > best.length))
      best = {cost, len};
  };
  std::function<void(int, int, double, int)> walk = [&](int i, int j, double cost, int len) {
    cost += W(i, j);
    ++len;
    if (j == Q - 1 && (subsequence || i == D - 1)) offer(cost, len);
    if (i + 1 < D) walk(i + 1, j, cost, len);
    if (j + 1 < Q) walk(i, j + 1, cost, len);
    if (i + 1 < D && j + 1 < Q) walk(i + 1, j + 1, cost, len);
  };
  const int starts = subsequence ? D : 1;
  for (int i = 0; i < starts; ++i) walk(i, 0, 0.0, 0);
  return best;
}

inline double path_distance(const PathScore& p, bool normalize) {
  return normalize ? p.cost / p.length : p.cost;
}

inline double euclidean(const Eigen::RowVectorXf& a, const Eigen::RowVectorXf& b) {
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) s += (double(a[k]) - b[k]) * (double(a[k]) - b[k]);
  return std::sqrt(s);
}

inline double cosine_distance(const Eigen::RowVectorXf& a, const Eigen::RowVectorXf& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (int k = 0; k < a.size(); ++k) {
    ab += double(a[k]) * b[k];
    aa += double(a[k]) * a[k];
    bb += double(b[k]) * b[k];
  }
  if (aa == 0.0 && bb == 0.0) return 0.0;
  if (aa == 0.0 || bb == 0.0) return 1.0;
  return std::max(0.0, 1.0 - ab / std::sqrt(aa * bb));
}

// ---------------------------------------------------------------------- kl

// KL(N(m1,v1) || N(m2,v2)) by composite Simpson quadrature over a wide
// interval around p.
inline double quadrature_kl(double m1, double v1, double m2, double v2) {
  const double s1 = std::sqrt(v1);
  const double lo = m1 - 14 * s1, hi = m1 + 14 * s1;
  const int n = 20000;
  const double h = (hi - lo) / n;
  auto logpdf = [](double x, double m, double v) {
    return -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
  };
  auto f = [&](double x) {
    const double lp = logpdf(x, m1, v1);
    return std::exp(lp) * (lp - logpdf(x, m2, v2));
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return acc * h / 3.0;
}

}  // namespace zrmat::oracles

#endif  // ZRMAT_TESTS_ORACLES_HPP_
