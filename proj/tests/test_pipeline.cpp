// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include <json.hpp>

#include "tiny_world.hpp"
#include "vdrp/error.hpp"
#include "vdrp/io.hpp"
#include "vdrp/pipeline.hpp"

using namespace vdrp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vdrp_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json outputs(const fs::path& dir) {
  return nlohmann::json::parse(read_file(dir / "manifest.json")).at("outputs");
}

// gen-synth, build-splits, train, predict and evaluate under `root`.
std::map<std::string, nlohmann::json> run_chain(RunConfig c, const fs::path& root) {
  std::map<std::string, nlohmann::json> digests;
  const auto step = [&](const std::string& cmd, const std::string& dir) {
    pipeline::run_command(cmd, c, root / dir);
    digests[cmd] = outputs(root / dir);
  };
  step("gen-synth", "data");
  c.set("paths.data", (root / "data").string());
  step("build-splits", "splits");
  c.set("paths.splits", (root / "splits").string());
  step("estimate-variance", "var");
  c.set("paths.variance", (root / "var").string());
  step("train", "ckpt");
  c.set("paths.checkpoint", (root / "ckpt").string());
  step("predict", "pred");
  c.set("paths.predictions", (root / "pred").string());
  c.set("eval.split", "all");
  step("evaluate", "eval");
  return digests;
}

}  // namespace

TEST_CASE("config keys are typed and closed") {
  RunConfig c;
  CHECK(c.number("optim.lr") == 1e-3);
  c.set("optim.lr", "0.5");
  CHECK(c.number("optim.lr") == 0.5);
  CHECK_THROWS_AS(c.set("optim.lr", "fast"), ValidationError);
  CHECK_THROWS_AS(c.set("no.such.key", "1"), ValidationError);
  CHECK_THROWS_AS(c.set("train.steps", "-3"), ValidationError);
  CHECK_THROWS_AS(c.merge_json_text("{\"bogus\": 1}", "mem"), ValidationError);
  CHECK_THROWS_AS(c.merge_json_text("{", "mem"), ValidationError);
  c.merge_json_text("{\"model.branches\": \"u\"}", "mem");
  CHECK(c.text("model.branches") == "u");

  RunConfig d;
  d.merge_json_text(c.to_json_text(), "round trip");
  CHECK(d.to_json_text() == c.to_json_text());

  RunConfig preset;
  preset.merge_file(fs::path(VDRP_SOURCE_DIR) / "configs" / "synthetic.json");
  CHECK(preset.number("optim.lr") == 0.01);
}

TEST_CASE("arm overrides") {
  const RunConfig base = tiny::config();
  const RunConfig s = pipeline::arm_config(base, "static");
  CHECK(s.number("vdp.alpha") == 0);
  CHECK(s.number("vdp.beta") == 0);
  CHECK(s.number("rap.gamma") == 0);
  CHECK(pipeline::arm_config(base, "vdp").number("rap.gamma") == 0);
  CHECK(pipeline::arm_config(base, "rap.k=2+vdp.alpha=0.5").count("rap.k") == 2);
  CHECK_THROWS_AS(pipeline::arm_config(base, "bogus"), ValidationError);
}

TEST_CASE("zero diversity and refinement reproduce the static prompts bitwise") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunConfig c = pipeline::arm_config(tiny::config(seed), "static");
    const auto exp = pipeline::synthetic_experiment(c);
    auto model = pipeline::build_model(exp, c, pipeline::estimate_variance(exp, c));
    Rng rng(seed);
    for (auto& [name, t] : model.params().collect())
      for (auto& x : t->data()) x = rng.normal();
    const auto& fr = model.frozen();
    const Tensor prompts = model.prompt_set().prompts;
    for (std::size_t v = 0; v < model.num_verbs(); ++v) {
      const Tensor s = fr.encoder->encode(vdp::prompt_sequence(model.params().vdp.context.tokens, fr.base_prompts[v]));
      CHECK(std::memcmp(prompts.row(v).data(), s.data().data(), s.size() * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("the three-branch logits are the mean of the single-branch logits") {
  const RunConfig c = tiny::config(1);
  const auto exp = pipeline::synthetic_experiment(c);
  const auto variance = pipeline::estimate_variance(exp, c);
  const auto full = pipeline::build_model(exp, c, variance);
  std::vector<model::Model> single;
  for (const char* b : {"h", "o", "u"}) {
    auto mc = full.config();
    mc.branches = hoi::Branches::parse(b);
    single.emplace_back(mc, full.params(), full.frozen());
  }
  const Tensor prompts = full.prompt_set().prompts;
  std::size_t checked = 0;
  for (const auto& img : exp.test.images) {
    const auto f = full.forward(img, prompts);
    const auto h = single[0].forward(img, prompts), o = single[1].forward(img, prompts),
               u = single[2].forward(img, prompts);
    REQUIRE(f.size() == h.size());
    for (std::size_t p = 0; p < f.size(); ++p)
      for (std::size_t v = 0; v < f[p].logits.hoi.size(); ++v) {
        const double mean = (h[p].logits.hoi[v] + o[p].logits.hoi[v] + u[p].logits.hoi[v]) / 3;
        CHECK(std::abs(f[p].logits.hoi[v] - mean) < 1e-12);
        ++checked;
      }
  }
  CHECK(checked > 0);
}

TEST_CASE("command chain writes manifests and is deterministic") {
  const RunConfig c = tiny::config(3);
  const fs::path root = scratch("a");
  const auto a = run_chain(c, root);
  const auto b = run_chain(c, scratch("b"));
  CHECK(a.size() == 6);
  for (const auto& [cmd, digests] : a) {
    INFO(cmd);
    CHECK_FALSE(digests.empty());
    CHECK(digests == b.at(cmd));
  }
  for (const char* split : {"NF-UC", "RF-UC", "UO", "UV"})
    CHECK(fs::exists(root / "eval" / (std::string(split) + ".json")));

  RunConfig other = c;
  other.set("seed", "4");
  CHECK(run_chain(other, scratch("c")).at("gen-synth") != a.at("gen-synth"));
  for (const char* d : {"a", "b", "c"}) fs::remove_all(fs::temp_directory_path() / ("vdrp_test_pipeline_" + std::string(d)));
}

TEST_CASE("commands report missing inputs") {
  RunConfig c = tiny::config();
  const auto out = scratch("missing");
  CHECK_THROWS_AS(pipeline::run_command("train", c, out), ValidationError);
  c.set("paths.data", (out / "nowhere").string());
  CHECK_THROWS_AS(pipeline::run_command("train", c, out), IoError);
  CHECK_THROWS_AS(pipeline::run_command("fly", c, out), ValidationError);
  CHECK(pipeline::command_names().size() == 9);
  fs::remove_all(out);
}
