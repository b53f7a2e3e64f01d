// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "vdrp/geometry.hpp"
#include "vdrp/tensor.hpp"

namespace vdrp {

struct RoiAlignConfig {
  std::size_t grid = 7;             // G x G output bins
  std::size_t samples = 2;          // samples x samples points per bin
  double spatial_scale = 1.0;       // image coordinates -> feature-map cells
  bool half_pixel = true;           // shift by -0.5 so cell centers sit at integers
};

// RoIAlign collapsed to one pooled vector is a fixed linear combination of
// feature-map cells; `taps` holds (cell index y*W + x, weight) pairs.
struct RoiSampling {
  std::vector<std::pair<std::size_t, double>> taps;
  bool degenerate = false;  // zero-area box, sampled at a single point
};

// Bilinear taps for `box` on an H x W grid. Sample coordinates are clamped
// to the map extent (border replication), so constant maps stay constant.
RoiSampling roi_sampling(std::size_t height, std::size_t width, const Box& box,
                         const RoiAlignConfig& config);

// Pools a d-vector from a feature map of shape H x W x d.
Tensor roi_align(const Tensor& feature_map, const Box& box, const RoiAlignConfig& config,
                 bool* degenerate = nullptr);

// Same pooling for a map stored as (H*W) x d rows.
Tensor apply_sampling(const Tensor& rows, const RoiSampling& sampling);
// Adds the pooled-vector gradient back onto the (H*W) x d rows gradient.
void apply_sampling_backward(const RoiSampling& sampling, std::span<const double> grad_pooled,
                             Tensor& grad_rows);

}  // namespace vdrp
