// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "vdrp/geometry.hpp"
#include "vdrp/layers.hpp"
#include "vdrp/tensor.hpp"

namespace vdrp::region {

// One detected object: confidence, class, label embedding and box.
struct DetectionInstance {
  double score = 0.0;
  std::size_t class_id = 0;
  Tensor label;  // d_l
  Box box;
};

// [s; l; x1/W; y1/H; x2/W; y2/H] -- the projection input for one instance.
Tensor prior_input(const DetectionInstance& inst, double image_width, double image_height);

// Affine projection of prior_input to d_down.
Tensor prior_embedding(const DetectionInstance& inst, const Linear& projection, double image_width,
                       double image_height);

// Bottleneck adapter: patches are projected down, attend to the prior tokens
// (single head, keys = values = priors), and the result is projected back up
// and added residually.
struct AdapterBlock {
  Linear down;   // d_up -> d_down
  Tensor query;  // d_down x d_down
  Tensor key;    // d_down x d_down
  Tensor value;  // d_down x d_down
  Linear up;     // d_down -> d_up, zero at init

  AdapterBlock() = default;
  AdapterBlock(std::size_t d_up, std::size_t d_down);
  void init(Rng& rng);  // up projection stays zero
  void collect(const std::string& prefix, ParamList& out);
};

struct AdapterCache {
  Tensor input;     // N x d_up
  Tensor priors;    // M x d_down
  Tensor down;      // N x d_down
  Tensor q, k, v;
  Tensor attention; // N x M
  Tensor attended;  // N x d_down
  bool identity = false;
};

// X (N x d_up), priors (M x d_down). With M == 0 the block is the identity
// and `identity` is set.
Tensor adapter_forward(const Tensor& x, const Tensor& priors, const AdapterBlock& block,
                       AdapterCache* cache = nullptr, bool* identity = nullptr);

// Accumulates parameter gradients into `grad`; returns dL/dX and adds dL/dP
// into `grad_priors` when it is non-null.
Tensor adapter_backward(const AdapterCache& cache, const AdapterBlock& block, const Tensor& grad_out,
                        AdapterBlock& grad, Tensor* grad_priors);

// Geometric relation of a human box and an object box. Order:
//  0-3  centers (h.cx/W, h.cy/H, o.cx/W, o.cy/H)
//  4-7  sizes   (h.w/W, h.h/H, o.w/W, o.h/H)
//  8-10 areas   (h/(WH), o/(WH), o/(h + eps))
//  11-12 aspect (h.w/(h.h + eps), o.w/(o.h + eps))
//  13   IoU
//  14-15 |dcx|/(h.w + eps), |dcy|/(h.h + eps)
//  16-17 signed dcx/(h.w + eps), dcy/(h.h + eps)
inline constexpr std::size_t kSpatialFeatureDim = 18;
Tensor spatial_features(const Box& human, const Box& object, double image_width, double image_height,
                        double eps);

struct SpatialHeadParams {
  Linear ffn1;   // d_geo -> d_s
  Linear ffn2;   // d_s -> d_s  (E_S)
  Linear fuse;   // 2d -> d, applied to [x_h; x_o]
  Linear gate;   // d_s -> d
  Linear proj;   // 2d -> d, applied to [x_union; f_S]

  SpatialHeadParams() = default;
  SpatialHeadParams(std::size_t d, std::size_t d_s);
  // Random fusion; projection starts as the pass-through [I; 0].
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);
};

struct SpatialHeadCache {
  Tensor geo, a1, h1, encoding, fuse_in, fused, gate_pre, gate, f_s, proj_in;
};

Tensor spatial_head(std::span<const double> x_union, std::span<const double> x_human,
                    std::span<const double> x_object, const Tensor& geo, const SpatialHeadParams& params,
                    SpatialHeadCache* cache = nullptr);

struct SpatialHeadInputGrads {
  Tensor x_union, x_human, x_object;
};

SpatialHeadInputGrads spatial_head_backward(const SpatialHeadCache& cache, const SpatialHeadParams& params,
                                            std::span<const double> grad_out, SpatialHeadParams& grad);

}  // namespace vdrp::region
