// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "vdrp/error.hpp"
#include "vdrp/rng.hpp"
#include "vdrp/text_encoder.hpp"
#include "vdrp/vdp.hpp"

using namespace vdrp;
using namespace vdrp::vdp;

namespace {

oracle::Vec flatten(const ParamList& params) {
  oracle::Vec out;
  for (const auto& [name, t] : params) out.insert(out.end(), t->data().begin(), t->data().end());
  return out;
}

void unflatten(const oracle::Vec& flat, ParamList& params) {
  std::size_t at = 0;
  for (auto& [name, t] : params)
    for (auto& x : t->data()) x = flat[at++];
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

double silu_ref(double x) { return x / (1 + std::exp(-x)); }

struct Toy {
  std::size_t verbs, d_t, d, n_ctx;
  TokenEmbedder embedder;
  ProjectionEncoder encoder;
  std::vector<BasePrompt> prompts;
  std::vector<stats::GroupVariance> stats;
  VdpParams params;
  Tensor noise;

  Toy(std::size_t verbs_, std::size_t d_t_, std::size_t d_, std::uint64_t seed)
      : verbs(verbs_), d_t(d_t_), d(d_), n_ctx(3), embedder(d_t_, seed + 1),
        encoder(ProjectionEncoder::random(d_t_, d_, seed + 2)) {
    const char* names[] = {"riding", "holding", "kicking", "eating", "washing"};
    Rng rng(seed);
    for (std::size_t v = 0; v < verbs; ++v) {
      prompts.push_back(make_base_prompt(v, names[v], "a person is {verb} an object", embedder));
      Tensor var({d});
      for (auto& x : var.data()) x = rng.uniform(0.1, 1.0);
      stats.push_back({v, var, std::nullopt});
    }
    params.context = ContextEmbedding::init(n_ctx, d_t, rng, 0.3);
    params.mlp = ModulationMlp(d, 5, d_t);
    params.mlp.init(rng);
    noise = draw_prompt_noise(verbs, d, rng);
  }
};

}  // namespace

TEST_CASE("modulation with zero weights returns the bias") {
  ModulationMlp mlp(3, 4, 2);
  mlp.layer2.bias = Tensor::vector({0.5, -1.5});
  const Tensor d = modulation(Tensor::vector({1, 2, 3}), nullptr, mlp, stats::StatsMode::kVarianceOnly);
  CHECK(d.values() == std::vector<double>{0.5, -1.5});
  CHECK_THROWS_AS(modulation(Tensor::vector({1, 2}), nullptr, mlp, stats::StatsMode::kVarianceOnly),
                  DimensionError);
}

TEST_CASE("identity-like MLP matches a hand-rolled forward") {
  ModulationMlp mlp(3, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) mlp.layer1.weight.at(i, i) = 1, mlp.layer2.weight.at(i, i) = 1;
  const std::vector<double> x{0.3, -1.0, 2.0};
  const Tensor y = mlp.forward(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(silu_ref(x[i])).epsilon(1e-15));
}

TEST_CASE("mean-and-variance mode concatenates its inputs") {
  ModulationMlp mlp(4, 3, 2);
  Rng rng(1);
  mlp.init(rng);
  const Tensor mean = Tensor::vector({1, 2}), var = Tensor::vector({3, 4});
  const Tensor direct = mlp.forward(std::vector<double>{1, 2, 3, 4});
  CHECK(modulation(var, &mean, mlp, stats::StatsMode::kMeanAndVariance) == direct);
}

TEST_CASE("modulation MLP gradients pass central differences") {
  oracle::Random r(41);
  for (int config = 0; config < 20; ++config) {
    const std::size_t in = r.integer(1, 6), hidden = r.integer(1, 6), out = r.integer(1, 5);
    ModulationMlp mlp(in, hidden, out);
    Rng rng(config);
    mlp.init(rng);
    for (auto& b : mlp.layer1.bias.data()) b = r.normal();
    const auto x = r.normals(in);
    const auto g = r.normals(out);
    ParamList params;
    mlp.collect("mlp", params);
    const auto loss = [&](const oracle::Vec& flat) {
      unflatten(flat, params);
      const Tensor y = mlp.forward(x);
      double acc = 0;
      for (std::size_t i = 0; i < out; ++i) acc += g[i] * y[i];
      return acc;
    };
    const auto p0 = flatten(params);
    const auto numeric = oracle::numeric_gradient(loss, p0);
    unflatten(p0, params);
    ModulationMlp grad(in, hidden, out);
    MlpCache cache;
    mlp.forward(x, &cache);
    mlp.backward(cache, g, grad);
    ParamList grads;
    grad.collect("mlp", grads);
    CHECK(oracle::relative_error(flatten(grads), numeric) < 1e-4);
  }
}

TEST_CASE("inject shifts every context row") {
  Rng rng(2);
  const Tensor e = ContextEmbedding::init(4, 3, rng).tokens;
  const std::vector<double> ones{1, 1, 1};
  CHECK(bitwise_equal(inject(e, ones, 0.0), e));
  const Tensor shifted = inject(e, ones, 0.02);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(shifted[i] == doctest::Approx(e[i] + 0.02).epsilon(1e-15));
  const std::vector<double> dv{0.3, -2, 5};
  const Tensor a = inject(e, dv, 0.1), b = inject(e, dv, 0.2);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(std::abs((b[i] - e[i]) - 2 * (a[i] - e[i])) < 1e-14);
  CHECK_THROWS_AS(inject(e, std::vector<double>{1, 2}, 0.1), DimensionError);
}

TEST_CASE("context initialisation statistics") {
  Rng rng(3);
  const Tensor e = ContextEmbedding::init(24, 512, rng).tokens;
  CHECK(e.shape() == std::vector<std::size_t>{24, 512});
  double ss = 0;
  for (double x : e.data()) ss += x * x;
  CHECK(std::sqrt(ss / e.size()) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("prompt encoding") {
  TokenEmbedder embedder(4, 9);
  const BasePrompt p = make_base_prompt(2, "riding", "a photo of a person is {verb} an object", embedder);
  CHECK(p.text == "a photo of a person is riding an object");
  CHECK(p.tokens.dim(0) == 9);
  CHECK_THROWS_AS(make_base_prompt(0, "riding", "no placeholder", embedder), ParameterError);

  Rng rng(4);
  const Tensor ctx = ContextEmbedding::init(3, 4, rng, 0.5).tokens;
  MeanPoolEncoder mean_pool(4);
  const Tensor t = encode_prompt(ctx, p, mean_pool);
  const Tensor seq = prompt_sequence(ctx, p);
  CHECK(seq.dim(0) == 12);
  for (std::size_t j = 0; j < 4; ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < 12; ++i) acc += seq.at(i, j);
    CHECK(t[j] == doctest::Approx(acc / 12).epsilon(1e-14));
  }

  const ProjectionEncoder enc = ProjectionEncoder::random(4, 6, 5);
  const Tensor t1 = encode_prompt(ctx, p, enc);
  CHECK(bitwise_equal(t1, encode_prompt(ctx, p, enc)));
  Tensor ctx2 = ctx;
  ctx2.at(1, 2) += 1e-3;
  CHECK_FALSE(bitwise_equal(t1, encode_prompt(ctx2, p, enc)));
}

TEST_CASE("perturbation identities") {
  const std::vector<double> t{0.5, -1.0, 2.0, 0.0};
  const std::vector<double> sigma{1.0, 2.0, 0.5, 0.1};
  Rng rng(6);
  CHECK(perturb(t, sigma, 0.0, rng).prompt.values() == t);
  const auto zero = perturb(t, std::vector<double>(4, 0.0), 0.1, rng);
  CHECK(zero.prompt.values() == t);
  CHECK(zero.degenerate);
  CHECK_THROWS_AS(perturb(t, sigma, -0.1, rng), ParameterError);
}

TEST_CASE("perturbation matches a step-by-step recomputation") {
  const std::vector<double> t{0.5, -1.0, 2.0, 0.25};
  const std::vector<double> sigma{1.0, 2.0, 0.5, 0.1};
  const double beta = 0.1;
  Rng a(7), b(7);
  const auto out = perturb(t, sigma, beta, a);
  const Tensor eps = standard_normal(b, 4);
  const double mean_sigma = (1.0 + 2.0 + 0.5 + 0.1) / 4;
  const double mean_t = (0.5 - 1.0 + 2.0 + 0.25) / 4;
  double var_t = 0;
  for (double x : t) var_t += (x - mean_t) * (x - mean_t) / 4;
  for (std::size_t i = 0; i < 4; ++i) {
    const double s = sigma[i] / mean_sigma * std::sqrt(var_t);
    CHECK(out.sigma[i] == doctest::Approx(s).epsilon(1e-14));
    CHECK(out.prompt[i] == doctest::Approx(t[i] + eps[i] * s * beta).epsilon(1e-14));
  }
}

TEST_CASE("perturbation magnitude is bounded and linear in beta") {
  oracle::Random r(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = r.normals(8), noise = r.normals(8);
    oracle::Vec sigma(8);
    for (auto& s : sigma) s = r.uniform(0.0, 2.0);
    const auto p1 = perturb(t, sigma, 0.1, noise), p2 = perturb(t, sigma, 0.2, noise);
    double dist = 0, inf = 0, smax = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      dist += (p1.prompt[i] - t[i]) * (p1.prompt[i] - t[i]);
      inf = std::max(inf, std::abs(noise[i]));
      smax = std::max(smax, p1.sigma[i]);
      CHECK(std::abs((p2.prompt[i] - t[i]) - 2 * (p1.prompt[i] - t[i])) < 1e-12);
    }
    CHECK(std::sqrt(dist) <= 0.1 * inf * smax * std::sqrt(8.0) + 1e-12);
  }
}

TEST_CASE("perturbation backward matches central differences") {
  oracle::Random r(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = r.normals(6), noise = r.normals(6), g = r.normals(6);
    oracle::Vec sigma(6);
    for (auto& s : sigma) s = r.uniform(0.1, 2.0);
    const auto f = [&](const oracle::Vec& x) {
      const auto p = perturb(x, sigma, 0.3, noise);
      double acc = 0;
      for (std::size_t i = 0; i < 6; ++i) acc += g[i] * p.prompt[i];
      return acc;
    };
    const Tensor analytic = perturb_backward(t, sigma, 0.3, noise, g);
    CHECK(oracle::relative_error(analytic.values(), oracle::numeric_gradient(f, t)) < 1e-7);
  }
}

TEST_CASE("noise rows are drawn per verb") {
  const Rng root(8);
  const Tensor n5 = draw_prompt_noise(5, 4, root), n3 = draw_prompt_noise(3, 4, root);
  for (std::size_t i = 0; i < n3.size(); ++i) CHECK(n3[i] == n5[i]);
}

TEST_CASE("prompt set matches composed per-op oracles") {
  Toy toy(3, 5, 4, 10);
  const VdpConfig cfg{0.5, 0.2, stats::StatsMode::kVarianceOnly};
  const PromptSet set = build_prompt_set(toy.params, toy.prompts, toy.stats, toy.encoder, cfg, toy.noise);
  CHECK(set.prompts.shape() == std::vector<std::size_t>{3, 4});
  for (std::size_t v = 0; v < 3; ++v) {
    const Tensor d_v = toy.params.mlp.forward(toy.stats[v].variance.data());
    const Tensor t = encode_prompt(inject(toy.params.context.tokens, d_v.data(), 0.5), toy.prompts[v], toy.encoder);
    oracle::Vec std_v(4);
    for (std::size_t j = 0; j < 4; ++j) std_v[j] = std::sqrt(toy.stats[v].variance[j]);
    const auto p = perturb(t.data(), std_v, 0.2, toy.noise.row(v));
    CHECK(max_abs_diff(set.prompts.row(v), p.prompt.data()) < 1e-14);
  }
}

TEST_CASE("alpha = beta = 0 reproduces static prompts bitwise") {
  Toy toy(4, 6, 5, 11);
  const VdpConfig cfg{0.0, 0.0, stats::StatsMode::kVarianceOnly};
  const PromptSet set = build_prompt_set(toy.params, toy.prompts, toy.stats, toy.encoder, cfg, toy.noise);
  for (std::size_t v = 0; v < 4; ++v) {
    const Tensor s = toy.encoder.encode(prompt_sequence(toy.params.context.tokens, toy.prompts[v]));
    CHECK(std::memcmp(set.prompts.row(v).data(), s.data().data(), 5 * sizeof(double)) == 0);
  }
}

TEST_CASE("prompt set gradients pass central differences") {
  for (std::uint64_t config = 0; config < 20; ++config) {
    Toy toy(2 + config % 3, 4, 3 + config % 2, 100 + config);
    oracle::Random r(config);
    const VdpConfig cfg{r.uniform(0.1, 1.0), r.uniform(0.0, 0.5), stats::StatsMode::kVarianceOnly};
    const Tensor g = Tensor::matrix(toy.verbs, toy.d, r.normals(toy.verbs * toy.d));
    ParamList params;
    toy.params.collect(params);
    const auto loss = [&](const oracle::Vec& flat) {
      unflatten(flat, params);
      const PromptSet s = build_prompt_set(toy.params, toy.prompts, toy.stats, toy.encoder, cfg, toy.noise);
      double acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * s.prompts[i];
      return acc;
    };
    const auto p0 = flatten(params);
    const auto numeric = oracle::numeric_gradient(loss, p0);
    unflatten(p0, params);
    std::vector<VerbPromptCache> caches;
    build_prompt_set(toy.params, toy.prompts, toy.stats, toy.encoder, cfg, toy.noise, &caches);
    VdpParams grad;
    grad.context.tokens = Tensor::zeros_like(toy.params.context.tokens);
    grad.mlp = ModulationMlp(toy.d, 5, toy.d_t);
    prompt_set_backward(caches, toy.params, toy.encoder, cfg, toy.noise, g, grad);
    ParamList grads;
    grad.collect(grads);
    CHECK(oracle::relative_error(flatten(grads), numeric) < 1e-4);
  }
}
