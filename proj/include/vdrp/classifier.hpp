// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vdrp/geometry.hpp"
#include "vdrp/region.hpp"
#include "vdrp/tensor.hpp"

namespace vdrp::hoi {

inline constexpr std::size_t kPersonClass = 0;

// Indices into the image's detection list.
struct CandidatePair {
  std::size_t human = 0;
  std::size_t object = 0;
  Box union_box;
};

// Every ordered (person, other instance) pair among detections scoring >= theta.
std::vector<CandidatePair> generate_pairs(std::span<const region::DetectionInstance> detections, double theta);

// Which region branches feed the fused logit, e.g. "hou", "h", "ou".
struct Branches {
  bool human = true, object = true, union_ = true;

  static Branches parse(const std::string& spec);
  std::string to_string() const;
  std::size_t count() const { return std::size_t{human} + object + union_; }
};

struct LogitBundle {
  Tensor human, object, union_, hoi;
};

// Logit_r = T_r x_r for each region (T_r is V x d); hoi = mean of the active branches.
LogitBundle region_logits(std::span<const double> x_h, std::span<const double> x_o, std::span<const double> x_u,
                          const Tensor& t_h, const Tensor& t_o, const Tensor& t_u,
                          const Branches& branches = {});

struct FocalResult {
  double loss = 0.0;
  Tensor grad;  // dloss/dlogits
};

// Sum over verbs of -alpha_t (1 - p_t)^gamma log p_t.
FocalResult focal_loss(std::span<const double> logits, std::span<const double> targets, double gamma, double alpha);

struct ScoreWeights {
  double human = 1.0, object = 1.0, interaction = 1.0;  // exponents
};

// s_h^a * s_o^b * sigmoid(logit)^c
double hoi_score(double human_score, double object_score, double logit, const ScoreWeights& weights = {});

}  // namespace vdrp::hoi
