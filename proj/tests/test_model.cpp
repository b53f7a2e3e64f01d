// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <unordered_map>

#include "oracles.hpp"
#include "model_grad.hpp"
#include "vdrp/error.hpp"
#include "vdrp/pipeline.hpp"

using namespace vdrp;

namespace {

struct Fixture {
  RunConfig config;
  pipeline::Experiment exp;
  pipeline::VarianceArtifact variance;
  model::Model model;

  explicit Fixture(RunConfig c)
      : config(c),
        exp(pipeline::synthetic_experiment(c)),
        variance(pipeline::estimate_variance(exp, c)),
        model(pipeline::build_model(exp, c, variance)) {}

};

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Tensor f32(Tensor t) {
  for (auto& x : t.data()) x = static_cast<float>(x);
  return t;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vdrp_test_model_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("prompt-to-loss gradients pass central differences") {
  oracle::Random r(101);
  for (int config = 0; config < 20; ++config) {
    INFO("config " << config);
    CHECK(tiny::prompt_to_loss_error(config, r) < 1e-4);
  }
}

TEST_CASE("cosine schedule") {
  const model::AdamConfig c{.lr = 1e-2, .lr_min = 1e-4};
  CHECK(model::cosine_lr(c, 0, 10) == 1e-2);
  CHECK(model::cosine_lr(c, 9, 10) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(model::cosine_lr(c, 0, 1) == 1e-2);
  for (std::size_t s = 1; s < 10; ++s) CHECK(model::cosine_lr(c, s, 10) <= model::cosine_lr(c, s - 1, 10));
}

TEST_CASE("adamw matches a scalar oracle") {
  model::ModelConfig mc;
  mc.d = mc.d_up = mc.d_t = 4;
  mc.d_down = 2;
  mc.n_ctx = 2;
  mc.mlp_hidden = mc.spatial_hidden = 3;
  auto params = model::init_params(mc, 1);
  auto grad = model::zeros_like(params);
  oracle::Random r(102);
  for (auto& [n, t] : grad.collect())
    for (auto& x : t->data()) x = r.normal();
  const auto before = params.collect()[0].second->values();
  const auto g = grad.collect()[0].second->values();
  model::AdamConfig cfg;
  model::AdamW opt(cfg, params);
  opt.step(params, grad, 0.01);
  const auto after = params.collect()[0].second->values();
  for (std::size_t j = 0; j < before.size(); ++j) {
    const double m = (1 - cfg.beta1) * g[j] / (1 - cfg.beta1), v = (1 - cfg.beta2) * g[j] * g[j] / (1 - cfg.beta2);
    const double expected = before[j] - 0.01 * (m / (std::sqrt(v) + cfg.eps) + cfg.weight_decay * before[j]);
    CHECK(std::abs(after[j] - expected) < 1e-15);
  }
  CHECK(opt.steps() == 1);
}

TEST_CASE("training with zero learning rate leaves parameters unchanged") {
  RunConfig c = tiny::config();
  c.set("optim.lr", "0");
  Fixture f(c);
  std::vector<Tensor> before;
  for (const auto& [n, t] : f.model.params().collect()) before.push_back(*t);
  const auto result = model::train(f.model, f.exp.train, f.exp.taxonomy, f.exp.split, c.train_config());
  CHECK(result.loss_curve.size() == 5);
  auto ps = f.model.params().collect();
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(same_bits(*ps[i].second, before[i]));
}

TEST_CASE("training is deterministic and reduces the loss") {
  RunConfig c = tiny::config(4);
  c.set("optim.lr", "0.01");
  c.set("train.steps", "30");
  c.set("synth.train_images", "12");
  Fixture a(c), b(c);
  const auto ra = model::train(a.model, a.exp.train, a.exp.taxonomy, a.exp.split, c.train_config());
  const auto rb = model::train(b.model, b.exp.train, b.exp.taxonomy, b.exp.split, c.train_config());
  CHECK(ra.loss_curve == rb.loss_curve);
  CHECK(same_bits(a.model.prompt_set().prompts, b.model.prompt_set().prompts));
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 5; ++i) head += ra.loss_curve[i], tail += ra.loss_curve[ra.loss_curve.size() - 1 - i];
  CHECK(tail < head);
  CHECK(ra.pairs_used > 0);
}

TEST_CASE("training targets never use unseen triplets") {
  Fixture f(tiny::config(2));
  std::unordered_map<std::string, std::vector<eval::GroundTruthRecord>> gts;
  for (const auto& g : f.exp.train.ground_truth) gts[g.image_id].push_back(g);
  for (const auto& img : f.exp.train.images) {
    const auto pairs = hoi::generate_pairs(img.detections, f.model.config().theta);
    const auto targets = model::pair_targets(img, pairs, gts[img.image_id], f.exp.taxonomy, f.exp.split);
    REQUIRE(targets.size() == pairs.size());
    CHECK_NOTHROW(model::audit_targets(img, pairs, targets, f.exp.taxonomy, f.exp.split));
  }
  // A target on an unseen triplet is rejected.
  const auto& t = f.exp.taxonomy.triplet(f.exp.split.unseen.front());
  data::Image img;
  img.image_id = "probe";
  img.detections = {{0.9, 0, Tensor::vector({0.0}), make_box(0, 0, 4, 4)},
                    {0.9, t.object, Tensor::vector({0.0}), make_box(2, 2, 6, 6)}};
  const std::vector<hoi::CandidatePair> pairs{{0, 1, make_box(0, 0, 6, 6)}};
  Tensor target({f.exp.taxonomy.num_verbs()});
  target[t.verb] = 1;
  CHECK_THROWS_AS(model::audit_targets(img, pairs, {target}, f.exp.taxonomy, f.exp.split), ValidationError);
}

TEST_CASE("checkpoint round trip") {
  RunConfig c = tiny::config(5);
  c.set("optim.lr", "0.01");
  Fixture f(c);
  model::AdamW opt(c.train_config().adam, f.model.params());
  model::train(f.model, f.exp.train, f.exp.taxonomy, f.exp.split, c.train_config(), &opt);
  const auto dir = scratch_dir("ckpt");
  model::save_checkpoint(dir, f.model, &opt, "{\"note\": \"x\"}");

  RunConfig c2 = c;
  c2.set("dims.mlp_hidden", "5");
  Fixture g(c2);
  model::Model restored(f.model.config(), model::init_params(f.model.config(), 77), f.model.frozen());
  model::AdamW opt2(c.train_config().adam, restored.params());
  load_checkpoint(dir, restored, &opt2);
  // Tensors are stored as f32, so the restored values equal the rounded originals.
  auto ps = f.model.params().collect(), rs = restored.params().collect();
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(same_bits(f32(*ps[i].second), *rs[i].second));
  CHECK(same_bits(f32(f.model.frozen().noise), restored.frozen().noise));
  CHECK(opt2.steps() == opt.steps());
  const auto s1 = opt.state(), s2 = opt2.state();
  for (const auto& [k, v] : s1) CHECK(same_bits(f32(v), s2.at(k)));

  CHECK_THROWS(load_checkpoint(dir, g.model));
  std::filesystem::remove_all(dir);
}

TEST_CASE("predictions are well formed") {
  Fixture f(tiny::config(6));
  const auto preds = pipeline::predict_partition(f.model, f.exp.test, f.exp.taxonomy);
  CHECK_FALSE(preds.empty());
  for (const auto& p : preds) {
    CHECK(p.score >= 0);
    CHECK(p.score <= 1);
    CHECK(p.triplet_id < f.exp.taxonomy.num_triplets());
  }
}
