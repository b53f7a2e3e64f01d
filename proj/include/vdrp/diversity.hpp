// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vdrp/tensor.hpp"

namespace vdrp::stats {

// Per-verb mean and population variance of union-region features.
struct VerbStats {
  std::size_t verb_id = 0;
  std::size_t sample_count = 0;  // 0 only for verbs without training samples
  Tensor mean;
  Tensor variance;
};

struct VerbGroup {
  std::size_t verb_id = 0;
  std::vector<std::size_t> members;  // always starts with verb_id
  std::size_t group_size = 0;
};

enum class StatsMode { kVarianceOnly, kMeanAndVariance };

StatsMode parse_stats_mode(const std::string& name);
std::string to_string(StatsMode mode);

struct GroupVariance {
  std::size_t verb_id = 0;
  Tensor variance;
  std::optional<Tensor> mean;  // kMeanAndVariance only
};

// With `cap` set, the samples are shuffled by Rng(seed) and only the first
// min(N, cap) are used.
VerbStats verb_stats(std::size_t verb_id, std::span<const Tensor> features,
                     std::optional<std::size_t> cap = std::nullopt, std::uint64_t seed = 0);

// Stats for a verb that never occurs in training: zero mean and variance.
VerbStats empty_verb_stats(std::size_t verb_id, std::size_t dim);

// Each group is {v} plus its group_size - 1 nearest verbs by cosine of the
// text embeddings (rows of `text_embeddings`), skipping ids in exclusion[v].
// Ties go to the lower verb id. group_size > V is clamped with a warning.
std::vector<VerbGroup> build_groups(const Tensor& text_embeddings, std::size_t group_size,
                                    const std::vector<std::set<std::size_t>>* exclusion = nullptr);

// The n nearest other verbs of `verb` by text-embedding cosine.
std::vector<std::size_t> nearest_verbs(const Tensor& text_embeddings, std::size_t verb, std::size_t n);

std::vector<GroupVariance> group_variance(std::span<const VerbStats> stats,
                                          std::span<const VerbGroup> groups, StatsMode mode);

// Mean of (1 - cos) over unordered distinct pairs.
double diversity_score(std::span<const Tensor> features);
// Mean of (1 - cos) over pairs of distinct rows.
double interclass_distance(const Tensor& prototypes);
// Index minimizing the mean cosine distance to all others (lowest on ties).
std::size_t medoid(std::span<const Tensor> features);

}  // namespace vdrp::stats
