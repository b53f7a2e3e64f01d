// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/config.hpp"

#include <cmath>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"

namespace vdrp {

using nlohmann::json;

const json& RunConfig::defaults() {
  static const json kDefaults = {
      {"seed", 0},
      {"dims.d", 32},
      {"dims.d_down", 8},
      {"dims.d_up", 32},
      {"dims.d_t", 32},
      {"dims.n_ctx", 24},
      {"dims.mlp_hidden", 64},
      {"dims.spatial_hidden", 16},
      {"vdp.alpha", 0.02},
      {"vdp.beta", 0.1},
      {"vdp.stats_mode", "variance_only"},
      {"vdp.resample_noise", false},
      {"vdp.group_size", 3},
      {"vdp.variance_cap", 0},
      {"vdp.exclude_top_neighbors", 0},
      {"rap.gamma", 0.2},
      {"rap.retrieval", "sparsemax"},
      {"rap.tau", 0.0},
      {"rap.temperature", 1.0},
      {"rap.top_k", 3},
      {"rap.k", 10},
      {"detect.theta", 0.2},
      {"spatial.eps", 1e-6},
      {"model.adapter_layers", 1},
      {"model.branches", "hou"},
      {"roi.grid", 7},
      {"roi.samples", 2},
      {"roi.spatial_scale", 0.125},
      {"loss.gamma", 2.0},
      {"loss.alpha", 0.5},
      {"optim.lr", 1e-3},
      {"optim.lr_min", 1e-4},
      {"optim.weight_decay", 1e-2},
      {"optim.beta1", 0.9},
      {"optim.beta2", 0.999},
      {"optim.eps", 1e-8},
      {"train.steps", 200},
      {"train.batch_images", 4},
      {"score.human_exp", 1.0},
      {"score.object_exp", 1.0},
      {"score.interaction_exp", 1.0},
      {"encoder.kind", "projection"},
      {"encoder.seed", 7},
      {"encoder.gain", 3.0},
      {"encoder.path", ""},
      {"prompt.template", "a photo of a person is {verb} an object"},
      {"split.name", "NF-UC"},
      {"split.nf_unseen", 0},
      {"split.uo_unseen_objects", 0},
      {"split.uv_withheld_verbs", 0},
      {"synth.verbs", 10},
      {"synth.objects", 20},
      {"synth.valid_fraction", 0.5},
      {"synth.train_images", 240},
      {"synth.test_images", 200},
      {"synth.image_size", 64},
      {"synth.map_size", 8},
      {"synth.noise", 0.3},
      {"synth.diversity", 0.3},
      {"synth.jitter", 1.5},
      {"synth.concepts_relevant", 3},
      {"synth.distractors", 4},
      {"synth.bystanders", 4},
      {"synth.latent_scale", 2.0},
      {"paths.data", ""},
      {"paths.splits", ""},
      {"paths.variance", ""},
      {"paths.checkpoint", ""},
      {"paths.predictions", ""},
      {"paths.concepts", ""},
      {"eval.permutations", 5},
      {"eval.split", "all"},
      {"ablate.arms", "static,vdp,rap,full"},
  };
  return kDefaults;
}

RunConfig::RunConfig() : values_(defaults()) {}

namespace {

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer() && !(v.is_number_integer() && v.get<std::int64_t>() < 0);
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  return false;
}

}  // namespace

void RunConfig::set_json(const std::string& key, const json& value) {
  const auto& def = defaults();
  if (!def.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  if (!same_kind(def[key], value)) {
    throw ValidationError("config key '" + key + "' expects " + std::string(def[key].type_name()) + ", got " +
                          value.dump());
  }
  values_[key] = def[key].is_number_float() ? json(value.get<double>()) : value;
}

void RunConfig::merge_json_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(origin + ": config must be a JSON object");
  std::vector<std::string> unknown;
  for (auto& [k, v] : doc.items()) {
    if (!defaults().contains(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = origin + ": unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  for (auto& [k, v] : doc.items()) {
    try {
      set_json(k, v);
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  merge_json_text(read_file(path), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& def = defaults();
  if (!def.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  const json& d = def[key];
  try {
    if (d.is_boolean()) {
      if (value == "true" || value == "1") return set_json(key, true);
      if (value == "false" || value == "0") return set_json(key, false);
      throw ValidationError("expected true or false");
    }
    if (d.is_number_integer()) {
      std::size_t pos = 0;
      const long long v = std::stoll(value, &pos);
      if (pos != value.size() || v < 0) throw ValidationError("expected a non-negative integer");
      return set_json(key, json(static_cast<std::int64_t>(v)));
    }
    if (d.is_number()) {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size() || !std::isfinite(v)) throw ValidationError("expected a finite number");
      return set_json(key, json(v));
    }
    set_json(key, json(value));
  } catch (const std::logic_error&) {
    throw ValidationError("config key '" + key + "': cannot parse '" + value + "'");
  } catch (const ValidationError& e) {
    throw ValidationError("config key '" + key + "': " + e.what());
  }
}

const json& RunConfig::at(const std::string& key) const {
  if (!values_.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  return values_[key];
}

double RunConfig::number(const std::string& key) const { return at(key).get<double>(); }
std::int64_t RunConfig::integer(const std::string& key) const { return at(key).get<std::int64_t>(); }
std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }
bool RunConfig::flag(const std::string& key) const { return at(key).get<bool>(); }
std::string RunConfig::text(const std::string& key) const { return at(key).get<std::string>(); }
std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(integer("seed")); }

std::string RunConfig::to_json_text() const { return values_.dump(1); }

retrieval::RetrievalMode RunConfig::retrieval_mode() const {
  return retrieval::RetrievalMode::parse(text("rap.retrieval"), number("rap.tau"), number("rap.temperature"),
                                         count("rap.top_k"));
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig c;
  c.d = count("dims.d");
  c.d_down = count("dims.d_down");
  c.d_up = count("dims.d_up");
  c.d_t = count("dims.d_t");
  c.n_ctx = count("dims.n_ctx");
  c.mlp_hidden = count("dims.mlp_hidden");
  c.spatial_hidden = count("dims.spatial_hidden");
  c.adapter_layers = count("model.adapter_layers");
  for (auto [k, v] : {std::pair{"dims.d", c.d}, {"dims.d_down", c.d_down}, {"dims.d_up", c.d_up}, {"dims.d_t", c.d_t},
                      {"dims.n_ctx", c.n_ctx}, {"dims.mlp_hidden", c.mlp_hidden},
                      {"dims.spatial_hidden", c.spatial_hidden}}) {
    if (v == 0) throw ValidationError(std::string(k) + " must be positive");
  }
  c.vdp.alpha = number("vdp.alpha");
  c.vdp.beta = number("vdp.beta");
  if (c.vdp.beta < 0) throw ValidationError("vdp.beta must be >= 0");
  c.vdp.mode = stats::parse_stats_mode(text("vdp.stats_mode"));
  c.resample_noise = flag("vdp.resample_noise");
  c.rap.gamma = number("rap.gamma");
  c.rap.mode = retrieval_mode();
  c.theta = number("detect.theta");
  if (!(c.theta >= 0 && c.theta <= 1)) throw ValidationError("detect.theta must lie in [0, 1]");
  c.spatial_eps = number("spatial.eps");
  if (!(c.spatial_eps > 0)) throw ValidationError("spatial.eps must be > 0");
  c.roi.grid = count("roi.grid");
  c.roi.samples = count("roi.samples");
  c.roi.spatial_scale = number("roi.spatial_scale");
  if (c.roi.grid == 0 || c.roi.samples == 0 || !(c.roi.spatial_scale > 0)) {
    throw ValidationError("roi.grid, roi.samples and roi.spatial_scale must be positive");
  }
  c.branches = hoi::Branches::parse(text("model.branches"));
  c.focal_gamma = number("loss.gamma");
  c.focal_alpha = number("loss.alpha");
  if (c.focal_gamma < 0 || !(c.focal_alpha > 0 && c.focal_alpha <= 1)) {
    throw ValidationError("loss.gamma must be >= 0 and loss.alpha in (0, 1]");
  }
  c.score = {number("score.human_exp"), number("score.object_exp"), number("score.interaction_exp")};
  return c;
}

model::TrainConfig RunConfig::train_config() const {
  model::TrainConfig t;
  t.steps = count("train.steps");
  t.batch_images = count("train.batch_images");
  if (t.batch_images == 0) throw ValidationError("train.batch_images must be positive");
  t.adam = {number("optim.lr"), number("optim.lr_min"), number("optim.weight_decay"),
            number("optim.beta1"), number("optim.beta2"), number("optim.eps")};
  if (t.adam.lr < 0 || t.adam.lr_min < 0 || t.adam.weight_decay < 0) {
    throw ValidationError("optimizer rates must be >= 0");
  }
  if (!(t.adam.beta1 >= 0 && t.adam.beta1 < 1 && t.adam.beta2 >= 0 && t.adam.beta2 < 1 && t.adam.eps > 0)) {
    throw ValidationError("optimizer betas must lie in [0, 1) and eps must be > 0");
  }
  t.seed = seed();
  return t;
}

eval::SplitParams RunConfig::split_params(const eval::Taxonomy& taxonomy) const {
  eval::SplitParams p;
  if (count("split.nf_unseen") > 0) p.composition_unseen = count("split.nf_unseen");
  auto last = [](std::size_t total, std::size_t n, const char* key) {
    if (n >= total) throw ValidationError(std::string(key) + " must be smaller than the inventory");
    std::vector<std::size_t> ids;
    for (std::size_t i = total - n; i < total; ++i) ids.push_back(i);
    return ids;
  };
  if (const auto n = count("split.uo_unseen_objects"); n > 0) {
    p.unseen_objects = last(taxonomy.num_objects(), n, "split.uo_unseen_objects");
  }
  if (const auto n = count("split.uv_withheld_verbs"); n > 0) {
    p.withheld_verbs = last(taxonomy.num_verbs(), n, "split.uv_withheld_verbs");
  }
  return p;
}

std::unique_ptr<TextEncoder> RunConfig::make_encoder() const {
  const std::string kind = text("encoder.kind");
  const std::size_t d_t = count("dims.d_t"), d = count("dims.d");
  if (kind == "projection") {
    return std::make_unique<ProjectionEncoder>(
        ProjectionEncoder::random(d_t, d, static_cast<std::uint64_t>(integer("encoder.seed")), number("encoder.gain")));
  }
  if (kind == "mean_pool") {
    if (d_t != d) throw ValidationError("mean_pool encoder needs dims.d_t == dims.d");
    return std::make_unique<MeanPoolEncoder>(d);
  }
  if (kind == "file") {
    if (text("encoder.path").empty()) throw ValidationError("encoder.kind=file needs encoder.path");
    auto enc = std::make_unique<ProjectionEncoder>(ProjectionEncoder::from_file(text("encoder.path")));
    if (enc->token_dim() != d_t || enc->output_dim() != d) {
      throw DimensionError("encoder file must hold a dims.d_t x dims.d matrix");
    }
    return enc;
  }
  throw ValidationError("unknown encoder.kind '" + kind + "' (expected projection, mean_pool or file)");
}

TokenEmbedder RunConfig::make_embedder() const {
  return TokenEmbedder(count("dims.d_t"), static_cast<std::uint64_t>(integer("encoder.seed")) ^ 0x5EEDull);
}

}  // namespace vdrp
