// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace vdrp {

// Dense row-major array of doubles. Rank-1 tensors are vectors, rank-2 are
// matrices stored row by row, rank-3 feature maps are H x W x C.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 access.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  // Rank-3 access.
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Reinterprets the buffer under a new shape with the same element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const noexcept;
  void fill(double v);

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

struct Similarity {
  double value = 0.0;
  bool degenerate = false;  // an input had zero norm; value is 0
};

Similarity cosine(std::span<const double> a, std::span<const double> b);

// Gradient of cosine(a, b) with respect to a, scaled by `upstream` and added
// into `grad_a`. No-op for degenerate inputs.
void cosine_grad_a(std::span<const double> a, std::span<const double> b, double upstream,
                   std::span<double> grad_a);

double sigmoid(double x);
// log(sigmoid(x)) without overflow.
double log_sigmoid(double x);

}  // namespace vdrp
