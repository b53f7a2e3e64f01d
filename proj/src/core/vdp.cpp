// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/vdp.hpp"

#include <cmath>

#include "vdrp/error.hpp"

namespace vdrp::vdp {

ContextEmbedding ContextEmbedding::init(std::size_t n_ctx, std::size_t token_dim, Rng& rng, double stddev) {
  ContextEmbedding e{Tensor({n_ctx, token_dim})};
  for (auto& v : e.tokens.data()) v = stddev * rng.normal();
  return e;
}

void ModulationMlp::init(Rng& rng) {
  layer1.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(layer1.in_dim())));
  layer2.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(layer2.in_dim())));
}

Tensor ModulationMlp::forward(std::span<const double> x, MlpCache* cache) const {
  Tensor pre = layer1.forward(x);
  Tensor hidden = pre;
  for (auto& v : hidden.data()) v = silu(v);
  Tensor out = layer2.forward(hidden.data());
  if (cache) *cache = MlpCache{Tensor::vector({x.begin(), x.end()}), std::move(pre), std::move(hidden)};
  return out;
}

void ModulationMlp::backward(const MlpCache& cache, std::span<const double> grad_out, ModulationMlp& grad) const {
  Tensor g_hidden = layer2.backward(cache.hidden.data(), grad_out, grad.layer2);
  for (std::size_t i = 0; i < g_hidden.size(); ++i) g_hidden[i] *= silu_grad(cache.pre[i]);
  layer1.backward(cache.input.data(), g_hidden.data(), grad.layer1);
}

void ModulationMlp::collect(const std::string& prefix, ParamList& out) {
  layer1.collect(prefix + ".layer1", out);
  layer2.collect(prefix + ".layer2", out);
}

BasePrompt make_base_prompt(std::size_t verb_id, const std::string& verb_name, const std::string& templ,
                            const TokenEmbedder& embedder) {
  std::string text = templ;
  const auto at = text.find("{verb}");
  if (at == std::string::npos) throw ParameterError("prompt template must contain {verb}");
  text.replace(at, 6, verb_name);
  return BasePrompt{verb_id, embedder.embed(text), text};
}

Tensor modulation_input(const stats::GroupVariance& gv, stats::StatsMode mode) {
  if (mode == stats::StatsMode::kVarianceOnly) return gv.variance;
  if (!gv.mean) throw ValidationError("mean_and_variance mode requires group means");
  std::vector<double> v(gv.mean->data().begin(), gv.mean->data().end());
  v.insert(v.end(), gv.variance.data().begin(), gv.variance.data().end());
  return Tensor::vector(std::move(v));
}

Tensor modulation(const Tensor& group_var, const Tensor* group_mean, const ModulationMlp& mlp,
                  stats::StatsMode mode) {
  stats::GroupVariance gv{0, group_var, std::nullopt};
  if (group_mean) gv.mean = *group_mean;
  const Tensor in = modulation_input(gv, mode);
  if (in.size() != mlp.in_dim()) {
    throw DimensionError("modulation MLP expects " + std::to_string(mlp.in_dim()) + " inputs, got " +
                         std::to_string(in.size()));
  }
  return mlp.forward(in.data());
}

Tensor inject(const Tensor& context, std::span<const double> d_v, double alpha) {
  if (context.rank() != 2 || context.dim(1) != d_v.size()) {
    throw DimensionError("inject: modulation vector does not match the context width");
  }
  Tensor out = context;
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] + d_v[j] * alpha;
  }
  return out;
}

Tensor prompt_sequence(const Tensor& injected_context, const BasePrompt& prompt) {
  if (injected_context.dim(1) != prompt.tokens.dim(1)) {
    throw DimensionError("context and prompt token widths differ");
  }
  std::vector<double> seq(injected_context.data().begin(), injected_context.data().end());
  seq.insert(seq.end(), prompt.tokens.data().begin(), prompt.tokens.data().end());
  return Tensor({injected_context.dim(0) + prompt.tokens.dim(0), injected_context.dim(1)}, std::move(seq));
}

Tensor encode_prompt(const Tensor& injected_context, const BasePrompt& prompt, const TextEncoder& encoder) {
  return encoder.encode(prompt_sequence(injected_context, prompt));
}

namespace {

struct ScaleParts {
  double mean_sigma = 0.0;
  double prompt_mean = 0.0;
  double prompt_std = 0.0;
};

ScaleParts scale_parts(std::span<const double> group_std, std::span<const double> prompt) {
  ScaleParts p;
  const double n = static_cast<double>(prompt.size());
  for (double s : group_std) p.mean_sigma += s / static_cast<double>(group_std.size());
  for (double t : prompt) p.prompt_mean += t / n;
  double var = 0.0;
  for (double t : prompt) var += (t - p.prompt_mean) * (t - p.prompt_mean) / n;
  p.prompt_std = std::sqrt(var);
  return p;
}

}  // namespace

Tensor scaled_sigma(std::span<const double> group_std, std::span<const double> prompt, bool* degenerate) {
  if (group_std.size() != prompt.size()) throw DimensionError("group std and prompt sizes differ");
  const ScaleParts p = scale_parts(group_std, prompt);
  Tensor out({prompt.size()});
  const bool zero = !(p.mean_sigma > 0.0);
  if (degenerate) *degenerate = zero;
  if (zero) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = group_std[i] / p.mean_sigma * p.prompt_std;
  return out;
}

Perturbation perturb(std::span<const double> prompt, std::span<const double> group_std, double beta,
                     std::span<const double> noise) {
  if (!(beta >= 0.0)) throw ParameterError("perturbation scale beta must be >= 0");
  if (noise.size() != prompt.size()) throw DimensionError("noise and prompt sizes differ");
  Perturbation out;
  out.sigma = scaled_sigma(group_std, prompt, &out.degenerate);
  out.prompt = Tensor::vector({prompt.begin(), prompt.end()});
  for (std::size_t i = 0; i < prompt.size(); ++i) out.prompt[i] = prompt[i] + (noise[i] * out.sigma[i]) * beta;
  return out;
}

Perturbation perturb(std::span<const double> prompt, std::span<const double> group_std, double beta, Rng& rng) {
  const Tensor noise = standard_normal(rng, prompt.size());
  return perturb(prompt, group_std, beta, noise.data());
}

Tensor perturb_backward(std::span<const double> prompt, std::span<const double> group_std, double beta,
                        std::span<const double> noise, std::span<const double> grad_out) {
  Tensor g = Tensor::vector({grad_out.begin(), grad_out.end()});
  const ScaleParts p = scale_parts(group_std, prompt);
  if (!(p.mean_sigma > 0.0) || !(p.prompt_std > 0.0) || beta == 0.0) return g;
  // t_tilde_i = t_i + beta * noise_i * (sigma_i / mean_sigma) * std(t)
  double upstream = 0.0;
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    upstream += grad_out[i] * beta * noise[i] * group_std[i] / p.mean_sigma;
  }
  const double n = static_cast<double>(prompt.size());
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    g[i] += upstream * (prompt[i] - p.prompt_mean) / (n * p.prompt_std);
  }
  return g;
}

void VdpParams::collect(ParamList& out) {
  out.emplace_back("vdp.context", &context.tokens);
  mlp.collect("vdp.mlp", out);
}

Tensor draw_prompt_noise(std::size_t verbs, std::size_t dim, const Rng& rng) {
  Tensor noise({verbs, dim});
  for (std::size_t v = 0; v < verbs; ++v) {
    Rng child = rng.child(v);
    for (auto& x : noise.row(v)) x = child.normal();
  }
  return noise;
}

PromptSet build_prompt_set(const VdpParams& params, std::span<const BasePrompt> prompts,
                           std::span<const stats::GroupVariance> group_stats, const TextEncoder& encoder,
                           const VdpConfig& config, const Tensor& noise, std::vector<VerbPromptCache>* caches) {
  const std::size_t verbs = prompts.size();
  if (group_stats.size() != verbs) {
    throw ValidationError("group statistics cover " + std::to_string(group_stats.size()) + " verbs, prompts " +
                          std::to_string(verbs));
  }
  const std::size_t d = encoder.output_dim();
  if (noise.rank() != 2 || noise.dim(0) != verbs || noise.dim(1) != d) {
    throw DimensionError("prompt noise must be V x d");
  }
  PromptSet out{Tensor({verbs, d}), std::vector<bool>(verbs, false)};
  if (caches) caches->assign(verbs, VerbPromptCache{});
  for (std::size_t v = 0; v < verbs; ++v) {
    if (prompts[v].verb_id != v || group_stats[v].verb_id != v) {
      throw ValidationError("prompts and group statistics must be ordered by verb id");
    }
    const Tensor in = modulation_input(group_stats[v], config.mode);
    if (in.size() != params.mlp.in_dim()) {
      throw DimensionError("modulation MLP expects " + std::to_string(params.mlp.in_dim()) + " inputs, got " +
                           std::to_string(in.size()));
    }
    MlpCache mc;
    const Tensor d_v = params.mlp.forward(in.data(), &mc);
    const Tensor injected = inject(params.context.tokens, d_v.data(), config.alpha);
    Tensor seq = prompt_sequence(injected, prompts[v]);
    Tensor t = encoder.encode(seq);
    if (t.size() != d) throw DimensionError("encoder output size mismatch");
    Tensor gstd = group_stats[v].variance;
    for (auto& s : gstd.data()) s = std::sqrt(std::max(s, 0.0));
    const Perturbation p = perturb(t.data(), gstd.data(), config.beta, noise.row(v));
    std::copy(p.prompt.data().begin(), p.prompt.data().end(), out.prompts.row(v).begin());
    out.degenerate[v] = p.degenerate;
    if (caches) (*caches)[v] = VerbPromptCache{std::move(mc), std::move(seq), std::move(t), std::move(gstd)};
  }
  return out;
}

void prompt_set_backward(const std::vector<VerbPromptCache>& caches, const VdpParams& params,
                         const TextEncoder& encoder, const VdpConfig& config, const Tensor& noise,
                         const Tensor& grad_prompts, VdpParams& grad) {
  const std::size_t n_ctx = params.context.tokens.dim(0);
  for (std::size_t v = 0; v < caches.size(); ++v) {
    const auto& c = caches[v];
    const Tensor g_t = perturb_backward(c.encoded.data(), c.group_std.data(), config.beta, noise.row(v),
                                        grad_prompts.row(v));
    const Tensor g_seq = encoder.encode_vjp(c.sequence, g_t.data());
    Tensor g_dv({params.mlp.out_dim()});
    for (std::size_t r = 0; r < n_ctx; ++r) {
      axpy(1.0, g_seq.row(r), grad.context.tokens.row(r));
      axpy(config.alpha, g_seq.row(r), g_dv.data());
    }
    params.mlp.backward(c.mlp, g_dv.data(), grad.mlp);
  }
}

}  // namespace vdrp::vdp
