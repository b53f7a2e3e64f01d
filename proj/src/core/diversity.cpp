// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/diversity.hpp"

#include <algorithm>
#include <numeric>

#include "vdrp/diag.hpp"
#include "vdrp/error.hpp"
#include "vdrp/rng.hpp"

namespace vdrp::stats {

StatsMode parse_stats_mode(const std::string& name) {
  if (name == "variance_only") return StatsMode::kVarianceOnly;
  if (name == "mean_and_variance") return StatsMode::kMeanAndVariance;
  throw ParameterError("unknown stats mode '" + name + "'");
}

std::string to_string(StatsMode mode) {
  return mode == StatsMode::kVarianceOnly ? "variance_only" : "mean_and_variance";
}

VerbStats verb_stats(std::size_t verb_id, std::span<const Tensor> features,
                     std::optional<std::size_t> cap, std::uint64_t seed) {
  if (features.empty()) {
    throw ValidationError("verb_stats: no samples for verb " + std::to_string(verb_id));
  }
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw DimensionError("verb_stats: feature dimension " + std::to_string(f.size()) +
                           " differs from " + std::to_string(dim) + " for verb " +
                           std::to_string(verb_id));
    }
  }
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cap) {
    if (*cap == 0) throw ParameterError("verb_stats: cap must be positive");
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(std::min(order.size(), *cap));
  }
  const double n = static_cast<double>(order.size());
  VerbStats out{verb_id, order.size(), Tensor({dim}), Tensor({dim})};
  for (auto i : order) axpy(1.0 / n, features[i].data(), out.mean.data());
  for (auto i : order) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double c = features[i][k] - out.mean[k];
      out.variance[k] += c * c / n;
    }
  }
  if (order.size() == 1) out.variance.fill(0.0);
  return out;
}

VerbStats empty_verb_stats(std::size_t verb_id, std::size_t dim) {
  return VerbStats{verb_id, 0, Tensor({dim}), Tensor({dim})};
}

namespace {

std::vector<std::size_t> ranked_neighbors(const Tensor& emb, std::size_t v) {
  const std::size_t count = emb.dim(0);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t u = 0; u < count; ++u) {
    if (u == v) continue;
    scored.emplace_back(cosine(emb.row(v), emb.row(u)).value, u);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (auto& [_, u] : scored) out.push_back(u);
  return out;
}

}  // namespace

std::vector<std::size_t> nearest_verbs(const Tensor& text_embeddings, std::size_t verb, std::size_t n) {
  auto ranked = ranked_neighbors(text_embeddings, verb);
  ranked.resize(std::min(n, ranked.size()));
  return ranked;
}

std::vector<VerbGroup> build_groups(const Tensor& text_embeddings, std::size_t group_size,
                                    const std::vector<std::set<std::size_t>>* exclusion) {
  if (text_embeddings.rank() != 2) throw DimensionError("build_groups expects a V x d matrix");
  const std::size_t verbs = text_embeddings.dim(0);
  if (group_size == 0) throw ParameterError("group_size must be >= 1");
  if (group_size > verbs) {
    warn("group_size " + std::to_string(group_size) + " exceeds verb count " +
         std::to_string(verbs) + "; clamping");
    group_size = verbs;
  }
  if (exclusion && exclusion->size() != verbs) {
    throw DimensionError("exclusion list must have one entry per verb");
  }
  std::vector<VerbGroup> groups;
  groups.reserve(verbs);
  for (std::size_t v = 0; v < verbs; ++v) {
    VerbGroup g{v, {v}, group_size};
    for (auto u : ranked_neighbors(text_embeddings, v)) {
      if (g.members.size() >= group_size) break;
      if (exclusion && (*exclusion)[v].count(u)) continue;
      g.members.push_back(u);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<GroupVariance> group_variance(std::span<const VerbStats> stats,
                                          std::span<const VerbGroup> groups, StatsMode mode) {
  auto find = [&](std::size_t id) -> const VerbStats& {
    for (const auto& s : stats) {
      if (s.verb_id == id) return s;
    }
    throw ValidationError("group_variance: no statistics for verb " + std::to_string(id));
  };
  std::vector<GroupVariance> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.members.empty()) throw ValidationError("group for verb " + std::to_string(g.verb_id) + " is empty");
    const std::size_t dim = find(g.members[0]).variance.size();
    GroupVariance gv{g.verb_id, Tensor({dim}), std::nullopt};
    if (mode == StatsMode::kMeanAndVariance) gv.mean = Tensor({dim});
    const double w = 1.0 / static_cast<double>(g.members.size());
    for (auto m : g.members) {
      const VerbStats& s = find(m);
      if (s.variance.size() != dim) throw DimensionError("group_variance: mixed feature dimensions");
      axpy(w, s.variance.data(), gv.variance.data());
      if (gv.mean) axpy(w, s.mean.data(), gv.mean->data());
    }
    out.push_back(std::move(gv));
  }
  return out;
}

double diversity_score(std::span<const Tensor> features) {
  if (features.size() < 2) throw ValidationError("diversity_score needs at least two features");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      total += 1.0 - cosine(features[i].data(), features[j].data()).value;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double interclass_distance(const Tensor& prototypes) {
  if (prototypes.rank() != 2 || prototypes.dim(0) < 2) {
    throw ValidationError("interclass_distance needs at least two prototypes");
  }
  const std::size_t v = prototypes.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t j = i + 1; j < v; ++j) total += 1.0 - cosine(prototypes.row(i), prototypes.row(j)).value;
  }
  return total / static_cast<double>(v * (v - 1) / 2);
}

std::size_t medoid(std::span<const Tensor> features) {
  if (features.empty()) throw ValidationError("medoid of an empty set");
  std::size_t best = 0;
  double best_cost = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double cost = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
      if (j != i) cost += 1.0 - cosine(features[i].data(), features[j].data()).value;
    }
    if (i == 0 || cost < best_cost) {
      best = i;
      best_cost = cost;
    }
  }
  return best;
}

}  // namespace vdrp::stats
