// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/roi_align.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vdrp/error.hpp"

namespace vdrp {
namespace {

// Adds weight * bilinear(y, x) taps into `acc`.
void bilinear_taps(std::size_t height, std::size_t width, double y, double x, double weight,
                   std::map<std::size_t, double>& acc) {
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, height - 1);
  const std::size_t x1 = std::min(x0 + 1, width - 1);
  const double ly = y - static_cast<double>(y0), lx = x - static_cast<double>(x0);
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  acc[y0 * width + x0] += weight * hy * hx;
  acc[y0 * width + x1] += weight * hy * lx;
  acc[y1 * width + x0] += weight * ly * hx;
  acc[y1 * width + x1] += weight * ly * lx;
}

}  // namespace

RoiSampling roi_sampling(std::size_t height, std::size_t width, const Box& box,
                         const RoiAlignConfig& config) {
  if (height == 0 || width == 0) throw DimensionError("roi_align on an empty feature map");
  if (config.grid == 0 || config.samples == 0) throw ParameterError("roi_align grid and samples must be >= 1");
  if (!box.valid()) throw ValidationError("roi_align: invalid box");
  const double offset = config.half_pixel ? 0.5 : 0.0;
  const double x_start = box.x1 * config.spatial_scale - offset;
  const double y_start = box.y1 * config.spatial_scale - offset;
  const double roi_w = box.width() * config.spatial_scale;
  const double roi_h = box.height() * config.spatial_scale;

  std::map<std::size_t, double> acc;
  RoiSampling out;
  if (roi_w <= 0.0 || roi_h <= 0.0) {
    out.degenerate = true;
    bilinear_taps(height, width, y_start, x_start, 1.0, acc);
  } else {
    const double bin_w = roi_w / static_cast<double>(config.grid);
    const double bin_h = roi_h / static_cast<double>(config.grid);
    const double s = static_cast<double>(config.samples);
    const double weight = 1.0 / (static_cast<double>(config.grid * config.grid) * s * s);
    for (std::size_t gy = 0; gy < config.grid; ++gy) {
      for (std::size_t gx = 0; gx < config.grid; ++gx) {
        for (std::size_t iy = 0; iy < config.samples; ++iy) {
          const double y = y_start + bin_h * (static_cast<double>(gy) + (static_cast<double>(iy) + 0.5) / s);
          for (std::size_t ix = 0; ix < config.samples; ++ix) {
            const double x = x_start + bin_w * (static_cast<double>(gx) + (static_cast<double>(ix) + 0.5) / s);
            bilinear_taps(height, width, y, x, weight, acc);
          }
        }
      }
    }
  }
  for (auto& [cell, w] : acc) {
    if (w != 0.0) out.taps.emplace_back(cell, w);
  }
  return out;
}

Tensor apply_sampling(const Tensor& rows, const RoiSampling& sampling) {
  Tensor out({rows.dim(1)});
  for (const auto& [cell, w] : sampling.taps) axpy(w, rows.row(cell), out.data());
  return out;
}

void apply_sampling_backward(const RoiSampling& sampling, std::span<const double> grad_pooled,
                             Tensor& grad_rows) {
  for (const auto& [cell, w] : sampling.taps) axpy(w, grad_pooled, grad_rows.row(cell));
}

Tensor roi_align(const Tensor& feature_map, const Box& box, const RoiAlignConfig& config,
                 bool* degenerate) {
  if (feature_map.rank() != 3) throw DimensionError("roi_align expects an H x W x d feature map");
  const std::size_t h = feature_map.dim(0), w = feature_map.dim(1), d = feature_map.dim(2);
  const RoiSampling s = roi_sampling(h, w, box, config);
  if (degenerate) *degenerate = s.degenerate;
  return apply_sampling(feature_map.reshaped({h * w, d}), s);
}

}  // namespace vdrp
