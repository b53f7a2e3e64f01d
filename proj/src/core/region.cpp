// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/region.hpp"

#include <algorithm>
#include <cmath>

#include "vdrp/error.hpp"

namespace vdrp::region {

Tensor prior_input(const DetectionInstance& inst, double image_width, double image_height) {
  if (!(image_width > 0 && image_height > 0)) throw ParameterError("image size must be positive");
  std::vector<double> v;
  v.reserve(5 + inst.label.size());
  v.push_back(inst.score);
  v.insert(v.end(), inst.label.data().begin(), inst.label.data().end());
  v.push_back(inst.box.x1 / image_width);
  v.push_back(inst.box.y1 / image_height);
  v.push_back(inst.box.x2 / image_width);
  v.push_back(inst.box.y2 / image_height);
  return Tensor::vector(std::move(v));
}

Tensor prior_embedding(const DetectionInstance& inst, const Linear& projection, double image_width,
                       double image_height) {
  const Tensor in = prior_input(inst, image_width, image_height);
  if (in.size() != projection.in_dim()) {
    throw DimensionError("prior projection expects " + std::to_string(projection.in_dim()) +
                         " inputs ([s; l; b]), got " + std::to_string(in.size()));
  }
  return projection.forward(in.data());
}

AdapterBlock::AdapterBlock(std::size_t d_up, std::size_t d_down)
    : down(d_up, d_down),
      query({d_down, d_down}),
      key({d_down, d_down}),
      value({d_down, d_down}),
      up(d_down, d_up) {}

void AdapterBlock::init(Rng& rng) {
  const double d_up = static_cast<double>(down.in_dim());
  const double d_down = static_cast<double>(down.out_dim());
  down.init_normal(rng, 1.0 / std::sqrt(d_up));
  for (Tensor* t : {&query, &key, &value}) {
    for (auto& w : t->data()) w = rng.normal() / std::sqrt(d_down);
  }
  up.weight.fill(0.0);
  up.bias.fill(0.0);
}

void AdapterBlock::collect(const std::string& prefix, ParamList& out) {
  down.collect(prefix + ".down", out);
  out.emplace_back(prefix + ".query", &query);
  out.emplace_back(prefix + ".key", &key);
  out.emplace_back(prefix + ".value", &value);
  up.collect(prefix + ".up", out);
}

Tensor adapter_forward(const Tensor& x, const Tensor& priors, const AdapterBlock& block,
                       AdapterCache* cache, bool* identity) {
  if (x.rank() != 2 || x.dim(1) != block.down.in_dim()) {
    throw DimensionError("adapter input must be N x " + std::to_string(block.down.in_dim()));
  }
  const bool no_priors = priors.empty();
  if (identity) *identity = no_priors;
  if (no_priors) {
    if (cache) {
      *cache = AdapterCache{};
      cache->identity = true;
    }
    return x;
  }
  if (priors.rank() != 2 || priors.dim(1) != block.down.out_dim()) {
    throw DimensionError("adapter priors must be M x " + std::to_string(block.down.out_dim()));
  }
  const Tensor down = block.down.forward_rows(x);
  const Tensor q = matmul(down, block.query);
  const Tensor k = matmul(priors, block.key);
  const Tensor v = matmul(priors, block.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(block.query.dim(1)));
  Tensor att = matmul(q, transpose(k));
  for (std::size_t n = 0; n < att.dim(0); ++n) {
    auto row = att.row(n);
    double mx = row[0] * scale;
    for (double s : row) mx = std::max(mx, s * scale);
    double total = 0.0;
    for (auto& s : row) {
      s = std::exp(s * scale - mx);
      total += s;
    }
    for (auto& s : row) s /= total;
  }
  Tensor attended = matmul(att, v);
  Tensor out = x;
  out += block.up.forward_rows(attended);
  if (cache) {
    *cache = AdapterCache{x, priors, down, q, k, v, att, attended, false};
  }
  return out;
}

Tensor adapter_backward(const AdapterCache& cache, const AdapterBlock& block, const Tensor& grad_out,
                        AdapterBlock& grad, Tensor* grad_priors) {
  if (cache.identity) return grad_out;
  Tensor grad_x = grad_out;
  const Tensor g_att_out = block.up.backward_rows(cache.attended, grad_out, grad.up);
  const Tensor g_a = matmul(g_att_out, transpose(cache.v));
  const Tensor g_v = matmul(transpose(cache.attention), g_att_out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(block.query.dim(1)));
  Tensor g_s = Tensor::zeros_like(cache.attention);
  for (std::size_t n = 0; n < g_s.dim(0); ++n) {
    const auto a = cache.attention.row(n);
    const auto ga = g_a.row(n);
    const double inner = dot(a, ga);
    auto gs = g_s.row(n);
    for (std::size_t m = 0; m < gs.size(); ++m) gs[m] = a[m] * (ga[m] - inner) * scale;
  }
  const Tensor g_q = matmul(g_s, cache.k);
  const Tensor g_k = matmul(transpose(g_s), cache.q);
  grad.query += matmul(transpose(cache.down), g_q);
  grad.key += matmul(transpose(cache.priors), g_k);
  grad.value += matmul(transpose(cache.priors), g_v);
  if (grad_priors) {
    *grad_priors += matmul(g_k, transpose(block.key));
    *grad_priors += matmul(g_v, transpose(block.value));
  }
  const Tensor g_down = matmul(g_q, transpose(block.query));
  grad_x += block.down.backward_rows(cache.input, g_down, grad.down);
  return grad_x;
}

Tensor spatial_features(const Box& h, const Box& o, double image_width, double image_height, double eps) {
  if (!(eps > 0.0)) throw ParameterError("spatial eps must be positive");
  if (!(image_width > 0 && image_height > 0)) throw ParameterError("image size must be positive");
  const double img_area = image_width * image_height;
  const double dcx = o.cx() - h.cx();
  const double dcy = o.cy() - h.cy();
  return Tensor::vector({
      h.cx() / image_width, h.cy() / image_height, o.cx() / image_width, o.cy() / image_height,
      h.width() / image_width, h.height() / image_height, o.width() / image_width, o.height() / image_height,
      h.area() / img_area, o.area() / img_area, o.area() / (h.area() + eps),
      h.width() / (h.height() + eps), o.width() / (o.height() + eps),
      iou(h, o),
      std::abs(dcx) / (h.width() + eps), std::abs(dcy) / (h.height() + eps),
      dcx / (h.width() + eps), dcy / (h.height() + eps),
  });
}

SpatialHeadParams::SpatialHeadParams(std::size_t d, std::size_t d_s)
    : ffn1(kSpatialFeatureDim, d_s), ffn2(d_s, d_s), fuse(2 * d, d), gate(d_s, d), proj(2 * d, d) {}

void SpatialHeadParams::init(Rng& rng) {
  const double d = static_cast<double>(fuse.out_dim());
  const double d_s = static_cast<double>(ffn2.out_dim());
  ffn1.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(kSpatialFeatureDim)));
  ffn2.init_normal(rng, 1.0 / std::sqrt(d_s));
  fuse.init_normal(rng, 1.0 / std::sqrt(2.0 * d));
  gate.init_normal(rng, 1.0 / std::sqrt(d_s));
  proj.weight.fill(0.0);
  proj.bias.fill(0.0);
  for (std::size_t i = 0; i < proj.out_dim(); ++i) proj.weight.at(i, i) = 1.0;
}

void SpatialHeadParams::collect(const std::string& prefix, ParamList& out) {
  ffn1.collect(prefix + ".ffn1", out);
  ffn2.collect(prefix + ".ffn2", out);
  fuse.collect(prefix + ".fuse", out);
  gate.collect(prefix + ".gate", out);
  proj.collect(prefix + ".proj", out);
}

namespace {

Tensor concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> v(a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return Tensor::vector(std::move(v));
}

}  // namespace

Tensor spatial_head(std::span<const double> x_union, std::span<const double> x_human,
                    std::span<const double> x_object, const Tensor& geo, const SpatialHeadParams& params,
                    SpatialHeadCache* cache) {
  const std::size_t d = params.fuse.out_dim();
  if (x_union.size() != d || x_human.size() != d || x_object.size() != d) {
    throw DimensionError("spatial head expects region features of size " + std::to_string(d));
  }
  SpatialHeadCache c;
  c.geo = geo;
  c.a1 = params.ffn1.forward(geo.data());
  c.h1 = c.a1;
  for (auto& v : c.h1.data()) v = silu(v);
  c.encoding = params.ffn2.forward(c.h1.data());
  c.fuse_in = concat(x_human, x_object);
  c.fused = params.fuse.forward(c.fuse_in.data());
  c.gate_pre = params.gate.forward(c.encoding.data());
  c.gate = c.gate_pre;
  for (auto& v : c.gate.data()) v = sigmoid(v);
  c.f_s = c.fused;
  for (std::size_t i = 0; i < d; ++i) c.f_s[i] *= c.gate[i];
  c.proj_in = concat(x_union, c.f_s.data());
  Tensor out = params.proj.forward(c.proj_in.data());
  if (cache) *cache = std::move(c);
  return out;
}

SpatialHeadInputGrads spatial_head_backward(const SpatialHeadCache& c, const SpatialHeadParams& params,
                                            std::span<const double> grad_out, SpatialHeadParams& grad) {
  const std::size_t d = params.fuse.out_dim();
  const Tensor g_proj_in = params.proj.backward(c.proj_in.data(), grad_out, grad.proj);
  SpatialHeadInputGrads out{Tensor({d}), Tensor({d}), Tensor({d})};
  Tensor g_fs({d});
  for (std::size_t i = 0; i < d; ++i) {
    out.x_union[i] = g_proj_in[i];
    g_fs[i] = g_proj_in[d + i];
  }
  Tensor g_fused({d}), g_gate_pre({d});
  for (std::size_t i = 0; i < d; ++i) {
    g_fused[i] = g_fs[i] * c.gate[i];
    g_gate_pre[i] = g_fs[i] * c.fused[i] * c.gate[i] * (1.0 - c.gate[i]);
  }
  const Tensor g_fuse_in = params.fuse.backward(c.fuse_in.data(), g_fused.data(), grad.fuse);
  for (std::size_t i = 0; i < d; ++i) {
    out.x_human[i] = g_fuse_in[i];
    out.x_object[i] = g_fuse_in[d + i];
  }
  const Tensor g_enc = params.gate.backward(c.encoding.data(), g_gate_pre.data(), grad.gate);
  Tensor g_h1 = params.ffn2.backward(c.h1.data(), g_enc.data(), grad.ffn2);
  for (std::size_t i = 0; i < g_h1.size(); ++i) g_h1[i] *= silu_grad(c.a1[i]);
  params.ffn1.backward(c.geo.data(), g_h1.data(), grad.ffn1);
  return out;
}

}  // namespace vdrp::region
