// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "vdrp/error.hpp"

namespace vdrp::hoi {

std::vector<CandidatePair> generate_pairs(std::span<const region::DetectionInstance> detections, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ParameterError("detection threshold must lie in [0, 1]");
  std::vector<CandidatePair> pairs;
  for (std::size_t h = 0; h < detections.size(); ++h) {
    if (detections[h].class_id != kPersonClass || detections[h].score < theta) continue;
    for (std::size_t o = 0; o < detections.size(); ++o) {
      if (o == h || detections[o].score < theta) continue;
      pairs.push_back({h, o, union_box(detections[h].box, detections[o].box)});
    }
  }
  return pairs;
}

Branches Branches::parse(const std::string& spec) {
  Branches b{false, false, false};
  for (char c : spec) {
    switch (c) {
      case 'h': b.human = true; break;
      case 'o': b.object = true; break;
      case 'u': b.union_ = true; break;
      default: throw ValidationError("unknown branch '" + std::string(1, c) + "' in '" + spec + "'");
    }
  }
  if (b.count() == 0) throw ValidationError("at least one branch must be active");
  return b;
}

std::string Branches::to_string() const {
  std::string s;
  if (human) s += 'h';
  if (object) s += 'o';
  if (union_) s += 'u';
  return s;
}

namespace {

Tensor matvec(const Tensor& t, std::span<const double> x) {
  if (t.rank() != 2 || t.dim(1) != x.size()) {
    throw DimensionError("prompt width " + std::to_string(t.rank() == 2 ? t.dim(1) : 0) +
                         " differs from region feature size " + std::to_string(x.size()));
  }
  Tensor out({t.dim(0)});
  for (std::size_t v = 0; v < t.dim(0); ++v) out[v] = dot(t.row(v), x);
  return out;
}

}  // namespace

LogitBundle region_logits(std::span<const double> x_h, std::span<const double> x_o, std::span<const double> x_u,
                          const Tensor& t_h, const Tensor& t_o, const Tensor& t_u, const Branches& branches) {
  if (t_h.shape() != t_o.shape() || t_h.shape() != t_u.shape()) {
    throw DimensionError("region prompt sets have different shapes");
  }
  LogitBundle b{matvec(t_h, x_h), matvec(t_o, x_o), matvec(t_u, x_u), Tensor({t_h.dim(0)})};
  const double n = static_cast<double>(branches.count());
  if (n == 0) throw ValidationError("at least one branch must be active");
  for (std::size_t v = 0; v < b.hoi.size(); ++v) {
    double s = 0.0;
    if (branches.human) s += b.human[v];
    if (branches.object) s += b.object[v];
    if (branches.union_) s += b.union_[v];
    b.hoi[v] = s / n;
  }
  return b;
}

FocalResult focal_loss(std::span<const double> logits, std::span<const double> targets, double gamma,
                       double alpha) {
  if (!(gamma >= 0.0)) throw ParameterError("focal gamma must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("focal alpha must lie in (0, 1]");
  if (logits.size() != targets.size()) throw DimensionError("logits and targets differ in size");
  constexpr double kClamp = 1e-12;
  FocalResult r{0.0, Tensor({logits.size()})};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool positive = targets[i] > 0.5;
    const double z = logits[i];
    // p_t = sigmoid(+z) for positives, sigmoid(-z) for negatives.
    const double sign = positive ? 1.0 : -1.0;
    const double p_t = std::max(sigmoid(sign * z), kClamp);
    const double a_t = positive ? alpha : 1.0 - alpha;
    const double log_p = std::max(log_sigmoid(sign * z), std::log(kClamp));
    const double one_minus = 1.0 - p_t;
    const double mod = gamma == 0.0 ? 1.0 : std::pow(one_minus, gamma);
    r.loss += -a_t * mod * log_p;
    // d/dz: sign * a_t * (1-p)^g * (g p log p - (1-p))
    r.grad[i] = sign * a_t * mod * (gamma * p_t * log_p - one_minus);
  }
  return r;
}

double hoi_score(double human_score, double object_score, double logit, const ScoreWeights& w) {
  return std::pow(human_score, w.human) * std::pow(object_score, w.object) * std::pow(sigmoid(logit), w.interaction);
}

}  // namespace vdrp::hoi
