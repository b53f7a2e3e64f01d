// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdrp/rng.hpp"
#include "vdrp/tensor.hpp"

namespace vdrp {

// Named pointers to the tensors of a trainable component, in a fixed order.
using ParamList = std::vector<std::pair<std::string, Tensor*>>;

// y = x W + b with W stored in x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight({in, out}), bias({out}) {}

  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }

  // Weights ~ N(0, scale^2), bias zero.
  void init_normal(Rng& rng, double scale);

  Tensor forward(std::span<const double> x) const;
  // Rows of x (n x in) -> n x out.
  Tensor forward_rows(const Tensor& x) const;
  // Accumulates dW, db into `grad` and returns dL/dx.
  Tensor backward(std::span<const double> x, std::span<const double> grad_y, Linear& grad) const;
  Tensor backward_rows(const Tensor& x, const Tensor& grad_y, Linear& grad) const;

  void collect(const std::string& prefix, ParamList& out);
};

double silu(double x);
double silu_grad(double x);

}  // namespace vdrp
