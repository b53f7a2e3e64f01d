// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion with its timing.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "model_grad.hpp"
#include "oracles.hpp"
#include "vdrp/classifier.hpp"
#include "vdrp/diag.hpp"
#include "vdrp/eval.hpp"
#include "vdrp/io.hpp"
#include "vdrp/region.hpp"
#include "vdrp/retrieval.hpp"
#include "vdrp/vdp.hpp"

using namespace vdrp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

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

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}

// One triplet whose first `hits` of `total` ground truths are found, in order,
// by the top-ranked predictions: its AP is hits / total.
void planted_triplet(std::size_t triplet, std::size_t hits, std::size_t total,
                     std::vector<eval::PredictionRecord>& preds, std::vector<eval::GroundTruthRecord>& gts) {
  const Box h = make_box(0, 0, 10, 10), o = make_box(20, 20, 30, 30);
  for (std::size_t i = 0; i < total; ++i) {
    const std::string img = "t" + std::to_string(triplet) + "_" + std::to_string(i);
    gts.push_back({img, h, o, triplet});
    if (i < hits) preds.push_back({img, h, o, triplet, 1.0 - static_cast<double>(i) / static_cast<double>(total)});
  }
}

Outcome criterion1() {
  struct Case {
    std::size_t seen_hits, seen_total, unseen_hits, unseen_total;
    double expected;
  };
  const Case cases[] = {{316, 1000, 729, 2000, 33.85}, {3441, 10000, 3129, 10000, 32.77}};
  Outcome out;
  for (const auto& c : cases) {
    std::vector<eval::PredictionRecord> preds;
    std::vector<eval::GroundTruthRecord> gts;
    planted_triplet(0, c.seen_hits, c.seen_total, preds, gts);
    planted_triplet(1, c.unseen_hits, c.unseen_total, preds, gts);
    const eval::SplitSpec split{"fixture", {0}, {1}};
    const auto rep = eval::map_report(preds, gts, split);
    const double hm = 100.0 * rep.hm.value_or(-1);
    out.pass = out.pass && std::abs(hm - c.expected) <= 0.01;
    out.detail += fixed(100 * rep.seen.value_or(-1), 2) + "/" + fixed(100 * rep.unseen.value_or(-1), 2) + " -> " +
                  fixed(hm, 3) + " (want " + fixed(c.expected, 2) + ") ";
  }
  return out;
}

Outcome criterion2() {
  const auto t = eval::paper_scale_taxonomy();
  const std::pair<eval::SplitName, std::size_t> want[] = {{eval::SplitName::kNfUc, 120},
                                                          {eval::SplitName::kRfUc, 120},
                                                          {eval::SplitName::kUo, 100},
                                                          {eval::SplitName::kUv, 84}};
  Outcome out;
  for (const auto& [name, unseen] : want) {
    const auto s = eval::build_split(t, name);
    out.pass = out.pass && s.unseen.size() == unseen && s.seen.size() == t.num_triplets() - unseen;
    out.detail += s.name + " " + std::to_string(s.unseen.size()) + "/" + std::to_string(s.seen.size()) + " ";
  }
  return out;
}

Outcome criterion3() {
  oracle::Random r(3);
  double worst = 0;
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = r.integer(1, 8);
    auto z = r.normals(k, r.uniform(0.1, 3.0));
    const auto w = retrieval::sparsemax(z);
    worst = std::max(worst, max_abs_diff(w.weights.data(), oracle::simplex_projection(z)));
    double sum = 0;
    for (double x : w.weights.data()) {
      sum += x;
      violations += x < 0;
    }
    violations += std::abs(sum - 1) > 1e-9;
    violations += !same_bits(retrieval::tau_sparsemax(z, 0.0).weights.data(), w.weights.data());
    const double c = r.uniform(-10, 10);
    for (auto& x : z) x += c;
    violations += max_abs_diff(retrieval::sparsemax(z).weights.data(), w.weights.data()) > 1e-9;
  }
  return {worst <= 1e-9 && violations == 0,
          "1000 inputs, max |w - oracle| " + sci(worst) + ", invariant violations " + std::to_string(violations)};
}

Outcome criterion4() {
  Outcome out;
  const Box a = make_box(0, 0, 2, 2);
  const bool spots = iou(a, make_box(1, 0, 3, 2)) == 1.0 / 3.0 && iou(a, a) == 1.0 && iou(a, make_box(4, 4, 5, 5)) == 0.0;
  oracle::Random r(4);
  const auto rbox = [&] {
    const double x1 = r.uniform(0, 40), y1 = r.uniform(0, 40);
    return make_box(x1, y1, x1 + r.uniform(3, 20), y1 + r.uniform(3, 20));
  };
  const auto jitter = [&](const Box& b) {
    const double x1 = b.x1 + r.uniform(-2, 2), y1 = b.y1 + r.uniform(-2, 2);
    return make_box(x1, y1, std::max(x1 + 0.5, b.x2 + r.uniform(-2, 2)), std::max(y1 + 0.5, b.y2 + r.uniform(-2, 2)));
  };
  const auto ob = [](const Box& b) { return oracle::Box{b.x1, b.y1, b.x2, b.y2}; };
  double worst = 0;
  for (int scene = 0; scene < 200; ++scene) {
    const std::size_t n_gt = r.integer(1, 5), n_pred = r.integer(0, 20);
    std::vector<eval::GroundTruthRecord> gt;
    std::vector<oracle::Gt> ogt;
    for (std::size_t i = 0; i < n_gt; ++i) {
      const int img = r.integer(0, 2);
      gt.push_back({"i" + std::to_string(img), rbox(), rbox(), 0});
      ogt.push_back({img, ob(gt.back().human), ob(gt.back().object)});
    }
    std::vector<eval::PredictionRecord> preds;
    std::vector<oracle::Pred> opred;
    for (std::size_t i = 0; i < n_pred; ++i) {
      const std::size_t pick = r.integer(0, static_cast<int>(n_gt) - 1);
      const bool near = r.uniform(0, 1) < 0.7;
      const Box hb = near ? jitter(gt[pick].human) : rbox();
      const Box obx = near ? jitter(gt[pick].object) : rbox();
      const int img = r.uniform(0, 1) < 0.85 ? ogt[pick].image : r.integer(0, 2);
      const double score = r.integer(0, 9) / 10.0;
      preds.push_back({"i" + std::to_string(img), hb, obx, 0, score});
      opred.push_back({img, ob(hb), ob(obx), score});
    }
    worst = std::max(worst, std::abs(eval::average_precision(preds, gt, 0).ap - oracle::average_precision(opred, ogt)));
  }
  out.pass = spots && worst <= 1e-9;
  out.detail = "200 scenes, max |AP - oracle| " + sci(worst) + ", IoU spot values " + (spots ? "exact" : "WRONG");
  return out;
}

template <typename Forward, typename Backward>
double grad_error(ParamList params, const Forward& forward, const Backward& analytic) {
  const auto p0 = flatten(params);
  const auto numeric = oracle::numeric_gradient(
      [&](const oracle::Vec& flat) {
        unflatten(flat, params);
        return forward();
      },
      p0);
  unflatten(p0, params);
  return oracle::relative_error(analytic(), numeric);
}

Outcome criterion5() {
  oracle::Random r(5);
  const int configs = 20;
  double focal = 0, mlp = 0, spatial = 0, adapter = 0, full = 0;
  for (int c = 0; c < configs; ++c) {
    {
      const std::size_t n = r.integer(1, 8);
      const auto z = r.normals(n, 2.0);
      oracle::Vec t(n);
      for (auto& x : t) x = r.integer(0, 1);
      const double g = r.uniform(0, 3), a = r.uniform(0.1, 0.9);
      const auto numeric = oracle::numeric_gradient([&](const oracle::Vec& x) { return hoi::focal_loss(x, t, g, a).loss; }, z);
      focal = std::max(focal, oracle::relative_error(hoi::focal_loss(z, t, g, a).grad.values(), numeric));
    }
    {
      const std::size_t in = r.integer(1, 6), hidden = r.integer(1, 6), out = r.integer(1, 5);
      vdp::ModulationMlp m(in, hidden, out);
      Rng rng(c);
      m.init(rng);
      for (auto& b : m.layer1.bias.data()) b = r.normal();
      const auto x = r.normals(in), g = r.normals(out);
      ParamList params;
      m.collect("mlp", params);
      mlp = std::max(mlp, grad_error(
                              params, [&] { return dot(g, m.forward(x).data()); },
                              [&] {
                                vdp::ModulationMlp grad(in, hidden, out);
                                vdp::MlpCache cache;
                                m.forward(x, &cache);
                                m.backward(cache, g, grad);
                                ParamList gs;
                                grad.collect("mlp", gs);
                                return flatten(gs);
                              }));
    }
    {
      const std::size_t d = r.integer(1, 4), d_s = r.integer(1, 5);
      region::SpatialHeadParams p(d, d_s);
      Rng rng(c);
      p.init(rng);
      p.proj.weight = Tensor::matrix(2 * d, d, r.normals(2 * d * d));
      const auto xu = r.normals(d), xh = r.normals(d), xo = r.normals(d), g = r.normals(d);
      const Tensor geo = region::spatial_features(make_box(1, 2, 9, 12), make_box(r.uniform(0, 8), 3, 15, 14), 20, 20, 1e-6);
      ParamList params;
      p.collect("s", params);
      spatial = std::max(spatial, grad_error(
                                      params, [&] { return dot(g, region::spatial_head(xu, xh, xo, geo, p).data()); },
                                      [&] {
                                        region::SpatialHeadCache cache;
                                        region::spatial_head(xu, xh, xo, geo, p, &cache);
                                        region::SpatialHeadParams grad(d, d_s);
                                        region::spatial_head_backward(cache, p, g, grad);
                                        ParamList gs;
                                        grad.collect("s", gs);
                                        return flatten(gs);
                                      }));
    }
    {
      const std::size_t n = r.integer(1, 4), d_up = r.integer(2, 5), d_down = r.integer(1, 3), m = r.integer(1, 3);
      region::AdapterBlock block(d_up, d_down);
      Rng rng(c);
      block.init(rng);
      block.up.weight = Tensor::matrix(d_down, d_up, r.normals(d_down * d_up));
      const Tensor x = Tensor::matrix(n, d_up, r.normals(n * d_up));
      const Tensor pr = Tensor::matrix(m, d_down, r.normals(m * d_down));
      const auto g = r.normals(n * d_up);
      ParamList params;
      block.collect("a", params);
      adapter = std::max(adapter, grad_error(
                                      params, [&] { return dot(g, region::adapter_forward(x, pr, block).data()); },
                                      [&] {
                                        region::AdapterCache cache;
                                        region::adapter_forward(x, pr, block, &cache);
                                        region::AdapterBlock grad(d_up, d_down);
                                        region::adapter_backward(cache, block, Tensor::matrix(n, d_up, g), grad, nullptr);
                                        ParamList gs;
                                        grad.collect("a", gs);
                                        return flatten(gs);
                                      }));
    }
    full = std::max(full, tiny::prompt_to_loss_error(c, r));
  }
  const double worst = std::max({focal, mlp, spatial, adapter, full});
  return {worst < 1e-4, std::to_string(configs) + " configs each, worst relative error: focal " + sci(focal) + ", mlp " +
                            sci(mlp) + ", spatial " + sci(spatial) + ", adapter " + sci(adapter) + ", prompt-to-loss " +
                            sci(full)};
}

Outcome criterion6() {
  Outcome out;
  // Static baseline.
  bool static_ok = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunConfig c = pipeline::arm_config(tiny::config(seed), "static");
    const auto exp = pipeline::synthetic_experiment(c);
    auto model = pipeline::build_model(exp, c, pipeline::estimate_variance(exp, c));
    Rng rng(seed);
    for (auto& [name, t] : model.params().collect())
      for (auto& x : t->data()) x = rng.normal();
    const Tensor prompts = model.prompt_set().prompts;
    for (std::size_t v = 0; v < model.num_verbs(); ++v) {
      const Tensor s = model.frozen().encoder->encode(
          vdp::prompt_sequence(model.params().vdp.context.tokens, model.frozen().base_prompts[v]));
      static_ok = static_ok && same_bits(prompts.row(v), s.data());
    }
  }
  // Zero-initialised adapter.
  bool adapter_ok = true;
  oracle::Random r(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = r.integer(1, 6), d_up = r.integer(1, 8), d_down = r.integer(1, 4), m = r.integer(0, 4);
    region::AdapterBlock block(d_up, d_down);
    Rng rng(trial);
    block.init(rng);
    const Tensor x = Tensor::matrix(n, d_up, r.normals(n * d_up, 10.0));
    const Tensor p = m ? Tensor::matrix(m, d_down, r.normals(m * d_down)) : Tensor();
    adapter_ok = adapter_ok && same_bits(region::adapter_forward(x, p, block).data(), x.data());
  }
  // Logit fusion.
  double fusion = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t v = r.integer(1, 8), d = r.integer(1, 16);
    const Tensor th = Tensor::matrix(v, d, r.normals(v * d)), to = Tensor::matrix(v, d, r.normals(v * d)),
                 tu = Tensor::matrix(v, d, r.normals(v * d));
    const auto b = hoi::region_logits(r.normals(d), r.normals(d), r.normals(d), th, to, tu);
    for (std::size_t i = 0; i < v; ++i)
      fusion = std::max(fusion, std::abs(b.hoi[i] - (b.human[i] + b.object[i] + b.union_[i]) / 3));
  }
  out.pass = static_ok && adapter_ok && fusion <= 1e-12;
  out.detail = std::string("static baseline ") + (static_ok ? "bitwise" : "DIFFERS") + ", zero-init adapter " +
               (adapter_ok ? "identity" : "NOT identity") + ", max |fused - mean| " + sci(fusion);
  return out;
}

Outcome criterion7() {
  Outcome out;
  std::size_t full_wins = 0;
  std::size_t max_steps = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RunConfig c;
    c.merge_file(fs::path(VDRP_SOURCE_DIR) / "configs" / "synthetic.json");
    c.set("seed", std::to_string(seed));
    c.set("split.name", "NF-UC");
    max_steps = std::max(max_steps, c.count("train.steps"));
    const auto exp = pipeline::synthetic_experiment(c);
    const auto full = pipeline::run_arm(exp, "full");
    const auto base = pipeline::run_arm(exp, "static");
    const double seen = full.report.seen.value_or(0), unseen = full.report.unseen.value_or(0);
    const double chance = full.chance.unseen.value_or(1);
    const bool ok = seen > 0.8 && unseen >= 5 * chance;
    const bool wins = unseen >= base.report.unseen.value_or(1);
    full_wins += wins;
    out.pass = out.pass && ok;
    out.detail += "seed " + std::to_string(seed) + ": seen " + fixed(seen, 3) + ", unseen " + fixed(unseen, 3) +
                  " (chance " + fixed(chance, 3) + ", static " + fixed(base.report.unseen.value_or(-1), 3) + "); ";
  }
  out.pass = out.pass && full_wins == 3 && max_steps <= 200;
  out.detail += "full >= static on " + std::to_string(full_wins) + "/3, " + std::to_string(max_steps) + " steps";
  return out;
}

nlohmann::json chain_digests(RunConfig c, const fs::path& root) {
  nlohmann::json all;
  const auto step = [&](const std::string& cmd, const std::string& dir) {
    pipeline::run_command(cmd, c, root / dir);
    all[cmd] = nlohmann::json::parse(read_file(root / dir / "manifest.json")).at("outputs");
  };
  step("gen-synth", "data");
  c.set("paths.data", (root / "data").string());
  step("build-splits", "splits");
  c.set("paths.splits", (root / "splits").string());
  step("estimate-variance", "var");
  c.set("paths.variance", (root / "var").string());
  step("build-prompts", "prompts");
  step("train", "ckpt");
  c.set("paths.checkpoint", (root / "ckpt").string());
  step("predict", "pred");
  c.set("paths.predictions", (root / "pred").string());
  c.set("eval.split", "all");
  step("evaluate", "eval");
  step("analyze", "analysis");
  c.set("ablate.arms", "static,full");
  step("ablate", "ablate");
  return all;
}

Outcome criterion8() {
  RunConfig c = tiny::config(8);
  c.set("train.steps", "20");
  const auto base = fs::temp_directory_path() / "vdrp_acceptance_determinism";
  fs::remove_all(base);
  const auto a = chain_digests(c, base);
  fs::remove_all(base);
  const auto b = chain_digests(c, base);
  std::size_t files = 0, differing = 0;
  for (const auto& [cmd, outputs] : a.items()) {
    for (const auto& [file, digest] : outputs.items()) {
      ++files;
      differing += !b[cmd].contains(file) || b[cmd][file] != digest;
    }
    differing += b[cmd].size() != outputs.size();
  }
  fs::remove_all(base);
  return {files > 0 && differing == 0, std::to_string(a.size()) + " commands, " + std::to_string(files) +
                                           " output digests, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  set_warning_handler([](const std::string&) {});
  struct Criterion {
    int id;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {{1, 1, criterion1},  {2, 1, criterion2},  {3, 5, criterion3},   {4, 10, criterion4},
                                {5, 30, criterion5}, {6, 60, criterion6}, {7, 120, criterion7}, {8, 60, criterion8}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %d: %s (%.2fs, budget %.0fs%s) %s\n", c.id, pass ? "PASS" : "FAIL", secs, c.budget_seconds,
                in_time ? "" : ", OVER BUDGET", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
