// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/layers.hpp"

#include "vdrp/error.hpp"

namespace vdrp {

void Linear::init_normal(Rng& rng, double scale) {
  for (auto& w : weight.data()) w = scale * rng.normal();
  bias.fill(0.0);
}

Tensor Linear::forward(std::span<const double> x) const {
  if (x.size() != in_dim()) {
    throw DimensionError("linear layer expects input of size " + std::to_string(in_dim()) +
                         ", got " + std::to_string(x.size()));
  }
  Tensor y = bias;
  for (std::size_t i = 0; i < x.size(); ++i) axpy(x[i], weight.row(i), y.data());
  return y;
}

Tensor Linear::forward_rows(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_dim()) throw DimensionError("linear layer: bad input rows");
  Tensor y = matmul(x, weight);
  for (std::size_t r = 0; r < y.dim(0); ++r) axpy(1.0, bias.data(), y.row(r));
  return y;
}

Tensor Linear::backward(std::span<const double> x, std::span<const double> grad_y, Linear& grad) const {
  Tensor gx({in_dim()});
  for (std::size_t i = 0; i < in_dim(); ++i) {
    axpy(x[i], grad_y, grad.weight.row(i));
    gx[i] = dot(weight.row(i), grad_y);
  }
  axpy(1.0, grad_y, grad.bias.data());
  return gx;
}

Tensor Linear::backward_rows(const Tensor& x, const Tensor& grad_y, Linear& grad) const {
  grad.weight += matmul(transpose(x), grad_y);
  for (std::size_t r = 0; r < grad_y.dim(0); ++r) axpy(1.0, grad_y.row(r), grad.bias.data());
  return matmul(grad_y, transpose(weight));
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.emplace_back(prefix + ".weight", &weight);
  out.emplace_back(prefix + ".bias", &bias);
}

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace vdrp
