// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. They are written from the
// definitions, independently of the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Euclidean projection onto the probability simplex by enumerating every
// support set, projecting onto its affine hull, and keeping the closest
// feasible candidate.
inline Vec simplex_projection(const Vec& z) {
  const std::size_t k = z.size();
  Vec best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (1u << i)) sum += z[i], ++n;
    const double tau = (sum - 1.0) / static_cast<double>(n);
    Vec p(k, 0.0);
    bool feasible = true;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(mask & (1u << i))) continue;
      p[i] = z[i] - tau;
      if (p[i] < 0) feasible = false;
    }
    if (!feasible) continue;
    double dist = 0;
    for (std::size_t i = 0; i < k; ++i) dist += (p[i] - z[i]) * (p[i] - z[i]);
    if (dist < best_dist) best_dist = dist, best = p;
  }
  return best;
}

struct Box {
  double x1, y1, x2, y2;
};

inline double box_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct Gt {
  int image;
  Box h, o;
};

struct Pred {
  int image;
  Box h, o;
  double score;
};

// All-points AP from the explicit PR curve: rank by score (ties by input
// order), mark each prediction TP if it overlaps (min IoU > 0.5) the
// best-overlapping GT of its image not yet claimed, then sum over each TP's
// recall increment the maximum precision at that rank or later.
inline double average_precision(const std::vector<Pred>& preds, const std::vector<Gt>& gts) {
  if (gts.empty()) return 0.0;
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::vector<bool> claimed(gts.size(), false), tp(order.size(), false);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Pred& p = preds[order[r]];
    double best = 0.5;
    long pick = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || gts[g].image != p.image) continue;
      const double ov = std::min(box_iou(p.h, gts[g].h), box_iou(p.o, gts[g].o));
      if (ov > best) best = ov, pick = static_cast<long>(g);
    }
    if (pick >= 0) claimed[pick] = true, tp[r] = true;
  }
  std::vector<double> precision(order.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    hits += tp[r];
    precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  double ap = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!tp[r]) continue;
    double pmax = 0;
    for (std::size_t s = r; s < order.size(); ++s) pmax = std::max(pmax, precision[s]);
    ap += pmax / static_cast<double>(gts.size());
  }
  return ap;
}

inline double harmonic_mean(double a, double b) { return (a + b) == 0 ? 0.0 : 2 * a * b / (a + b); }

inline double cosine(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return (aa == 0 || bb == 0) ? 0.0 : ab / std::sqrt(aa * bb);
}

// Central-difference gradient of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|)
inline double relative_error(const Vec& analytic, const Vec& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i])));
  return worst;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -sum_v alpha_t (1 - p_t)^gamma log p_t
inline double focal(const Vec& logits, const Vec& targets, double gamma, double alpha) {
  double loss = 0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    const double p = sigmoid(logits[v]);
    const double pt = targets[v] > 0.5 ? p : 1 - p;
    const double at = targets[v] > 0.5 ? alpha : 1 - alpha;
    loss += -at * std::pow(1 - pt, gamma) * std::log(pt);
  }
  return loss;
}

inline Vec matmul(const Vec& a, const Vec& b, std::size_t n, std::size_t k, std::size_t m) {
  Vec c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * m + j] += a[i * k + t] * b[t * m + j];
  return c;
}

// Fixed-seed generator for test inputs, independent of the library RNG.
class Random {
 public:
  explicit Random(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  Vec normals(std::size_t n, double scale = 1.0) {
    Vec v(n);
    for (auto& x : v) x = scale * normal();
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace oracle
