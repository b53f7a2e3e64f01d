// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "vdrp/tensor.hpp"

namespace vdrp::retrieval {

// Concept weights produced from similarity scores.
struct WeightVector {
  Tensor weights;
  std::size_t support_size = 0;  // strictly positive entries
};

class RetrievalMode {
 public:
  enum class Kind { kSparsemax, kTauSparsemax, kSoftmax, kTopK };

  static RetrievalMode sparsemax() { return {Kind::kSparsemax, 0.0}; }
  static RetrievalMode tau_sparsemax(double tau_cut) { return {Kind::kTauSparsemax, tau_cut}; }
  static RetrievalMode softmax(double temperature) { return {Kind::kSoftmax, temperature}; }
  static RetrievalMode top_k(std::size_t k) { return {Kind::kTopK, static_cast<double>(k)}; }
  // Accepts "sparsemax", "tau_sparsemax", "softmax", "top_k".
  static RetrievalMode parse(const std::string& name, double tau_cut, double temperature,
                             std::size_t k);

  Kind kind() const noexcept { return kind_; }
  double tau_cut() const noexcept { return param_; }
  double temperature() const noexcept { return param_; }
  std::size_t k() const noexcept { return static_cast<std::size_t>(param_); }
  std::string name() const;

  // Throws ParameterError if the mode cannot be applied to K scores.
  void validate(std::size_t num_scores) const;

 private:
  RetrievalMode(Kind kind, double param) : kind_(kind), param_(param) {}
  Kind kind_;
  double param_;
};

// Euclidean projection onto the probability simplex (sort and threshold).
WeightVector sparsemax(std::span<const double> scores);
// Sparsemax, then entries below tau_cut set to zero without renormalizing.
WeightVector tau_sparsemax(std::span<const double> scores, double tau_cut);
WeightVector softmax(std::span<const double> scores, double temperature = 1.0);
// Keeps the k largest scores (ties to lower index), weights them by a softmax
// restricted to the kept set.
WeightVector top_k(std::span<const double> scores, std::size_t k);

WeightVector retrieve_weights(std::span<const double> scores, const RetrievalMode& mode);

// Vector-Jacobian product: gradient w.r.t. scores given the gradient w.r.t.
// the weights that retrieve_weights(scores, mode) produced.
Tensor retrieve_weights_vjp(std::span<const double> scores, const RetrievalMode& mode,
                            std::span<const double> grad_weights);

}  // namespace vdrp::retrieval
