// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vdrp/diversity.hpp"
#include "vdrp/layers.hpp"
#include "vdrp/rng.hpp"
#include "vdrp/tensor.hpp"
#include "vdrp/text_encoder.hpp"

// Visual-diversity-aware prompts: group variance -> MLP modulation ->
// injection into the shared context -> text encoding -> variance-scaled
// Gaussian perturbation.
namespace vdrp::vdp {

// Shared learnable context tokens, N_ctx x d_t.
struct ContextEmbedding {
  Tensor tokens;

  static ContextEmbedding init(std::size_t n_ctx, std::size_t token_dim, Rng& rng, double stddev = 0.02);
};

struct MlpCache {
  Tensor input, pre, hidden;
};

// Two affine layers with a SiLU between them.
struct ModulationMlp {
  Linear layer1;
  Linear layer2;

  ModulationMlp() = default;
  ModulationMlp(std::size_t in, std::size_t hidden, std::size_t out) : layer1(in, hidden), layer2(hidden, out) {}
  void init(Rng& rng);
  std::size_t in_dim() const { return layer1.in_dim(); }
  std::size_t out_dim() const { return layer2.out_dim(); }

  Tensor forward(std::span<const double> x, MlpCache* cache = nullptr) const;
  void backward(const MlpCache& cache, std::span<const double> grad_out, ModulationMlp& grad) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct BasePrompt {
  std::size_t verb_id = 0;
  Tensor tokens;  // L_v x d_t
  std::string text;
};

// Fills "{verb}" in the template and embeds the sentence.
BasePrompt make_base_prompt(std::size_t verb_id, const std::string& verb_name, const std::string& templ,
                            const TokenEmbedder& embedder);

// The MLP input for a verb: the group variance, or [mean; variance].
Tensor modulation_input(const stats::GroupVariance& gv, stats::StatsMode mode);

// d_v = MLP(variance) or MLP([mean; variance]).
Tensor modulation(const Tensor& group_var, const Tensor* group_mean, const ModulationMlp& mlp,
                  stats::StatsMode mode);

// Every context row shifted by alpha * d_v.
Tensor inject(const Tensor& context, std::span<const double> d_v, double alpha);

// encoder([injected; base tokens]).
Tensor encode_prompt(const Tensor& injected_context, const BasePrompt& prompt, const TextEncoder& encoder);
Tensor prompt_sequence(const Tensor& injected_context, const BasePrompt& prompt);

// sigma_tilde = (sigma / mean(sigma)) * std(t), with std the population
// standard deviation of t's coordinates. All-zero sigma gives zeros and sets
// `degenerate`.
Tensor scaled_sigma(std::span<const double> group_std, std::span<const double> prompt, bool* degenerate = nullptr);

struct Perturbation {
  Tensor prompt;
  Tensor sigma;  // sigma_tilde
  bool degenerate = false;
};

// t + beta * (noise .* sigma_tilde).
Perturbation perturb(std::span<const double> prompt, std::span<const double> group_std, double beta,
                     std::span<const double> noise);
Perturbation perturb(std::span<const double> prompt, std::span<const double> group_std, double beta, Rng& rng);

// dL/dt of perturb() given dL/dt_tilde (sigma_tilde depends on t via std(t)).
Tensor perturb_backward(std::span<const double> prompt, std::span<const double> group_std, double beta,
                        std::span<const double> noise, std::span<const double> grad_out);

struct VdpConfig {
  double alpha = 0.02;
  double beta = 0.1;
  stats::StatsMode mode = stats::StatsMode::kVarianceOnly;
};

struct VdpParams {
  ContextEmbedding context;
  ModulationMlp mlp;

  void collect(ParamList& out);
};

// Diversity-aware prompts, one row per verb (V x d).
struct PromptSet {
  Tensor prompts;
  std::vector<bool> degenerate;  // per verb: zero group variance, no perturbation
};

struct VerbPromptCache {
  MlpCache mlp;
  Tensor sequence;  // [E_hat; P_bar]
  Tensor encoded;   // t^v
  Tensor group_std;
};

// One noise row per verb drawn from rng.child(v); independent of V ordering.
Tensor draw_prompt_noise(std::size_t verbs, std::size_t dim, const Rng& rng);

// Runs modulation -> inject -> encode -> perturb for every verb. `noise` is
// V x d. Prompts and group statistics must be ordered by verb id.
PromptSet build_prompt_set(const VdpParams& params, std::span<const BasePrompt> prompts,
                           std::span<const stats::GroupVariance> group_stats, const TextEncoder& encoder,
                           const VdpConfig& config, const Tensor& noise,
                           std::vector<VerbPromptCache>* caches = nullptr);

// Accumulates gradients for the context and the MLP from dL/dprompts (V x d).
void prompt_set_backward(const std::vector<VerbPromptCache>& caches, const VdpParams& params,
                         const TextEncoder& encoder, const VdpConfig& config, const Tensor& noise,
                         const Tensor& grad_prompts, VdpParams& grad);

}  // namespace vdrp::vdp
