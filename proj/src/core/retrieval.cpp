// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vdrp/error.hpp"

namespace vdrp::retrieval {
namespace {

void require_nonempty(std::span<const double> s, const char* op) {
  if (s.empty()) throw DimensionError(std::string(op) + ": empty score vector");
}

std::size_t count_positive(const Tensor& w) {
  return static_cast<std::size_t>(
      std::count_if(w.data().begin(), w.data().end(), [](double v) { return v > 0.0; }));
}

// Threshold tau and support size of the simplex projection.
std::pair<double, std::size_t> sparsemax_threshold(std::span<const double> s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double cumsum = 0.0, support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const double z = s[order[j]];
    cumsum += z;
    if (1.0 + static_cast<double>(j + 1) * z > cumsum) {
      support = j + 1;
      support_sum = cumsum;
    } else {
      break;
    }
  }
  return {(support_sum - 1.0) / static_cast<double>(support), support};
}

std::vector<std::size_t> top_indices(std::span<const double> s, std::size_t k) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  order.resize(k);
  return order;
}

}  // namespace

RetrievalMode RetrievalMode::parse(const std::string& name, double tau_cut, double temperature,
                                   std::size_t k) {
  if (name == "sparsemax") return sparsemax();
  if (name == "tau_sparsemax") return tau_sparsemax(tau_cut);
  if (name == "softmax") return softmax(temperature);
  if (name == "top_k") return top_k(k);
  throw ParameterError("unknown retrieval mode '" + name + "'");
}

std::string RetrievalMode::name() const {
  switch (kind_) {
    case Kind::kSparsemax: return "sparsemax";
    case Kind::kTauSparsemax: return "tau_sparsemax";
    case Kind::kSoftmax: return "softmax";
    case Kind::kTopK: return "top_k";
  }
  return "?";
}

void RetrievalMode::validate(std::size_t num_scores) const {
  switch (kind_) {
    case Kind::kSparsemax: break;
    case Kind::kTauSparsemax:
      if (!(param_ >= 0.0 && param_ < 1.0)) throw ParameterError("tau_cut must lie in [0, 1)");
      break;
    case Kind::kSoftmax:
      if (!(param_ > 0.0)) throw ParameterError("softmax temperature must be positive");
      break;
    case Kind::kTopK:
      if (param_ < 1.0 || static_cast<std::size_t>(param_) > num_scores) {
        throw ParameterError("top_k requires 1 <= k <= " + std::to_string(num_scores));
      }
      break;
  }
}

WeightVector sparsemax(std::span<const double> scores) {
  require_nonempty(scores, "sparsemax");
  const auto [tau, support] = sparsemax_threshold(scores);
  Tensor w({scores.size()});
  for (std::size_t i = 0; i < scores.size(); ++i) w[i] = std::max(scores[i] - tau, 0.0);
  (void)support;
  return {w, count_positive(w)};
}

WeightVector tau_sparsemax(std::span<const double> scores, double tau_cut) {
  if (!(tau_cut >= 0.0 && tau_cut < 1.0)) throw ParameterError("tau_cut must lie in [0, 1)");
  WeightVector out = sparsemax(scores);
  if (tau_cut == 0.0) return out;
  for (auto& v : out.weights.data()) {
    if (v < tau_cut) v = 0.0;
  }
  out.support_size = count_positive(out.weights);
  return out;
}

WeightVector softmax(std::span<const double> scores, double temperature) {
  require_nonempty(scores, "softmax");
  if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Tensor w({scores.size()});
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp((scores[i] - mx) / temperature);
    total += w[i];
  }
  w *= 1.0 / total;
  return {w, count_positive(w)};
}

WeightVector top_k(std::span<const double> scores, std::size_t k) {
  require_nonempty(scores, "top_k");
  if (k < 1 || k > scores.size()) {
    throw ParameterError("top_k requires 1 <= k <= " + std::to_string(scores.size()));
  }
  const auto kept = top_indices(scores, k);
  std::vector<double> kept_scores;
  for (auto i : kept) kept_scores.push_back(scores[i]);
  const WeightVector restricted = softmax(kept_scores, 1.0);
  Tensor w({scores.size()});
  for (std::size_t j = 0; j < kept.size(); ++j) w[kept[j]] = restricted.weights[j];
  return {w, count_positive(w)};
}

WeightVector retrieve_weights(std::span<const double> scores, const RetrievalMode& mode) {
  require_nonempty(scores, "retrieve_weights");
  mode.validate(scores.size());
  switch (mode.kind()) {
    case RetrievalMode::Kind::kSparsemax: return sparsemax(scores);
    case RetrievalMode::Kind::kTauSparsemax: return tau_sparsemax(scores, mode.tau_cut());
    case RetrievalMode::Kind::kSoftmax: return softmax(scores, mode.temperature());
    case RetrievalMode::Kind::kTopK: return top_k(scores, mode.k());
  }
  throw ParameterError("unhandled retrieval mode");
}

Tensor retrieve_weights_vjp(std::span<const double> scores, const RetrievalMode& mode,
                            std::span<const double> grad_weights) {
  if (grad_weights.size() != scores.size()) throw DimensionError("retrieve_weights_vjp length mismatch");
  const std::size_t n = scores.size();
  Tensor g({n});
  switch (mode.kind()) {
    case RetrievalMode::Kind::kSparsemax:
    case RetrievalMode::Kind::kTauSparsemax: {
      // On the support S the map is w_i = s_i - mean_S(s) + 1/|S|; entries
      // zeroed by the tau cut are locally constant.
      const WeightVector plain = sparsemax(scores);
      const WeightVector out = retrieve_weights(scores, mode);
      std::size_t support = 0;
      double kept_grad_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (plain.weights[i] > 0.0) ++support;
        if (out.weights[i] > 0.0) kept_grad_sum += grad_weights[i];
      }
      const double shift = kept_grad_sum / static_cast<double>(support);
      for (std::size_t i = 0; i < n; ++i) {
        if (plain.weights[i] > 0.0) g[i] = (out.weights[i] > 0.0 ? grad_weights[i] : 0.0) - shift;
      }
      break;
    }
    case RetrievalMode::Kind::kSoftmax:
    case RetrievalMode::Kind::kTopK: {
      const WeightVector out = retrieve_weights(scores, mode);
      const double temp = mode.kind() == RetrievalMode::Kind::kSoftmax ? mode.temperature() : 1.0;
      const double inner = dot(out.weights.data(), grad_weights);
      for (std::size_t i = 0; i < n; ++i) g[i] = out.weights[i] * (grad_weights[i] - inner) / temp;
      break;
    }
  }
  return g;
}

}  // namespace vdrp::retrieval
