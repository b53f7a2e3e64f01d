// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/model.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include <json.hpp>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"

namespace vdrp::model {

using nlohmann::json;

ParamList Params::collect() {
  ParamList out;
  vdp.collect(out);
  prior_proj.collect("prior_proj", out);
  for (std::size_t l = 0; l < adapters.size(); ++l) adapters[l].collect("adapter" + std::to_string(l), out);
  spatial.collect("spatial", out);
  return out;
}

std::size_t Params::count() {
  std::size_t n = 0;
  for (const auto& [name, t] : collect()) n += t->size();
  return n;
}

Params make_params(const ModelConfig& c) {
  Params p;
  p.vdp.context.tokens = Tensor({c.n_ctx, c.d_t});
  const std::size_t mlp_in = c.vdp.mode == stats::StatsMode::kVarianceOnly ? c.d : 2 * c.d;
  p.vdp.mlp = vdp::ModulationMlp(mlp_in, c.mlp_hidden, c.d_t);
  p.prior_proj = Linear(1 + c.d + 4, c.d_down);
  for (std::size_t l = 0; l < c.adapter_layers; ++l) p.adapters.emplace_back(c.d_up, c.d_down);
  p.spatial = region::SpatialHeadParams(c.d, c.spatial_hidden);
  return p;
}

Params init_params(const ModelConfig& c, std::uint64_t seed) {
  Params p = make_params(c);
  const Rng root(seed);
  Rng r1 = root.child(1), r2 = root.child(2), r3 = root.child(3), r4 = root.child(4);
  p.vdp.context = vdp::ContextEmbedding::init(c.n_ctx, c.d_t, r1);
  p.vdp.mlp.init(r2);
  p.prior_proj.init_normal(r3, 1.0 / std::sqrt(static_cast<double>(p.prior_proj.in_dim())));
  for (std::size_t l = 0; l < p.adapters.size(); ++l) {
    Rng r = root.child(10 + l);
    p.adapters[l].init(r);
  }
  p.spatial.init(r4);
  return p;
}

Params zeros_like(Params& p) {
  Params z = p;
  for (auto& [name, t] : z.collect()) t->fill(0.0);
  return z;
}

Tensor output_projection(std::size_t d_up, std::size_t d, std::uint64_t seed) {
  Tensor w({d_up, d});
  if (d_up == d) {
    for (std::size_t i = 0; i < d; ++i) w.at(i, i) = 1.0;
    return w;
  }
  Rng rng(seed);
  for (auto& x : w.data()) x = rng.normal() / std::sqrt(static_cast<double>(d_up));
  return w;
}

Model::Model(ModelConfig config, Params params, Frozen frozen)
    : config_(std::move(config)), params_(std::move(params)), frozen_(std::move(frozen)) {
  if (!frozen_.encoder) throw ValidationError("model needs a text encoder");
  if (frozen_.encoder->output_dim() != config_.d) throw DimensionError("text encoder output must equal d");
  if (frozen_.encoder->token_dim() != config_.d_t) throw DimensionError("text encoder token width must equal d_t");
  if (frozen_.w_out.rank() != 2 || frozen_.w_out.dim(0) != config_.d_up || frozen_.w_out.dim(1) != config_.d) {
    throw DimensionError("output projection must be d_up x d");
  }
  const std::size_t verbs = frozen_.base_prompts.size();
  if (verbs == 0) throw ValidationError("model needs at least one verb prompt");
  if (frozen_.concepts.verbs() < verbs) throw ValidationError("concept pool covers fewer verbs than the taxonomy");
  if (frozen_.concepts.dim() != config_.d) throw DimensionError("concept embeddings must have dimension d");
  if (frozen_.noise.empty()) frozen_.noise = Tensor({verbs, config_.d});
}

vdp::PromptSet Model::prompt_set(std::vector<vdp::VerbPromptCache>* caches) const {
  return vdp::build_prompt_set(params_.vdp, frozen_.base_prompts, frozen_.group_stats, *frozen_.encoder,
                               config_.vdp, frozen_.noise, caches);
}

namespace {

Tensor grid_rows(const Tensor& features) {
  return features.reshaped({features.dim(0) * features.dim(1), features.dim(2)});
}

struct PairState {
  hoi::CandidatePair pair;
  RoiSampling sh, so, su;
  Tensor xh, xo, xut, xu;
  region::SpatialHeadCache spatial;
  rap::RegionAwarePromptSet prompts;
  hoi::LogitBundle logits;
};

struct ImageState {
  std::vector<std::size_t> kept;
  std::vector<Tensor> prior_inputs;
  Tensor priors;
  std::vector<region::AdapterCache> adapters;
  Tensor rows;  // (H*W) x d
  std::vector<PairState> pairs;
};

ImageState run_image(const ModelConfig& c, const Params& p, const Frozen& f, const data::Image& image,
                     const Tensor& prompts) {
  if (image.features.rank() != 3 || image.features.dim(2) != c.d_up) {
    throw DimensionError("image " + image.image_id + ": feature grid must be H x W x " + std::to_string(c.d_up));
  }
  ImageState s;
  for (std::size_t i = 0; i < image.detections.size(); ++i) {
    if (image.detections[i].score >= c.theta) s.kept.push_back(i);
  }
  s.priors = s.kept.empty() ? Tensor() : Tensor({s.kept.size(), c.d_down});
  for (std::size_t m = 0; m < s.kept.size(); ++m) {
    s.prior_inputs.push_back(region::prior_input(image.detections[s.kept[m]], image.width, image.height));
    const Tensor e = p.prior_proj.forward(s.prior_inputs.back().data());
    std::copy(e.data().begin(), e.data().end(), s.priors.row(m).begin());
  }
  Tensor x = grid_rows(image.features);
  s.adapters.resize(p.adapters.size());
  const Tensor no_priors({1, c.d_down});
  for (std::size_t l = 0; l < p.adapters.size(); ++l) {
    if (s.kept.empty()) {
      s.adapters[l].identity = true;
      continue;
    }
    x = region::adapter_forward(x, s.priors, p.adapters[l], &s.adapters[l]);
  }
  s.rows = matmul(x, f.w_out);

  const std::size_t h = image.features.dim(0), w = image.features.dim(1);
  for (const auto& pair : hoi::generate_pairs(image.detections, c.theta)) {
    PairState ps;
    ps.pair = pair;
    const auto& hd = image.detections[pair.human];
    const auto& od = image.detections[pair.object];
    ps.sh = roi_sampling(h, w, hd.box, c.roi);
    ps.so = roi_sampling(h, w, od.box, c.roi);
    ps.su = roi_sampling(h, w, pair.union_box, c.roi);
    ps.xh = apply_sampling(s.rows, ps.sh);
    ps.xo = apply_sampling(s.rows, ps.so);
    ps.xut = apply_sampling(s.rows, ps.su);
    const Tensor geo = region::spatial_features(hd.box, od.box, image.width, image.height, c.spatial_eps);
    ps.xu = region::spatial_head(ps.xut.data(), ps.xh.data(), ps.xo.data(), geo, p.spatial, &ps.spatial);
    ps.prompts = rap::build_region_prompts(prompts, f.concepts, {ps.xh.data(), ps.xo.data(), ps.xu.data()}, c.rap);
    ps.logits = hoi::region_logits(ps.xh.data(), ps.xo.data(), ps.xu.data(), ps.prompts[rap::Region::kHuman].prompts,
                                   ps.prompts[rap::Region::kObject].prompts, ps.prompts[rap::Region::kUnion].prompts,
                                   c.branches);
    s.pairs.push_back(std::move(ps));
  }
  return s;
}

}  // namespace

Tensor Model::backbone_rows(const data::Image& image) const {
  return matmul(grid_rows(image.features), frozen_.w_out);
}

std::vector<PairOutput> Model::forward(const data::Image& image, const Tensor& prompts) const {
  ImageState s = run_image(config_, params_, frozen_, image, prompts);
  std::vector<PairOutput> out;
  for (auto& ps : s.pairs) out.push_back({ps.pair, std::move(ps.logits)});
  return out;
}

double Model::loss_and_backward(const data::Image& image, const Tensor& prompts, const std::vector<Tensor>& targets,
                                double scale, Params& grad, Tensor& grad_prompts) const {
  ImageState s = run_image(config_, params_, frozen_, image, prompts);
  if (targets.size() != s.pairs.size()) throw DimensionError("one target per candidate pair is required");
  const std::size_t verbs = prompts.dim(0);
  const double nb = static_cast<double>(config_.branches.count());
  Tensor g_rows = Tensor::zeros_like(s.rows);
  bool any = false;
  double loss = 0.0;
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    if (targets[i].empty()) continue;
    const PairState& ps = s.pairs[i];
    const auto fl = hoi::focal_loss(ps.logits.hoi.data(), targets[i].data(), config_.focal_gamma, config_.focal_alpha);
    loss += fl.loss;
    any = true;

    std::array<Tensor, 3> g_x{Tensor({config_.d}), Tensor({config_.d}), Tensor({config_.d})};
    const std::array<const Tensor*, 3> xs{&ps.xh, &ps.xo, &ps.xu};
    const std::array<bool, 3> active{config_.branches.human, config_.branches.object, config_.branches.union_};
    for (rap::Region r : rap::kRegions) {
      const auto ri = static_cast<std::size_t>(r);
      if (!active[ri]) continue;
      const Tensor& t_r = ps.prompts[r].prompts;
      Tensor g_t({verbs, config_.d});
      for (std::size_t v = 0; v < verbs; ++v) {
        const double g = fl.grad[v] * scale / nb;
        if (g == 0.0) continue;
        axpy(g, xs[ri]->data(), g_t.row(v));
        axpy(g, t_r.row(v), g_x[ri].data());
      }
      const auto rg = rap::region_prompts_backward(prompts, frozen_.concepts, r, xs[ri]->data(), config_.rap, g_t);
      grad_prompts += rg.base;
      g_x[ri] += rg.feature;
    }
    const auto sg = region::spatial_head_backward(ps.spatial, params_.spatial, g_x[2].data(), grad.spatial);
    g_x[0] += sg.x_human;
    g_x[1] += sg.x_object;
    apply_sampling_backward(ps.sh, g_x[0].data(), g_rows);
    apply_sampling_backward(ps.so, g_x[1].data(), g_rows);
    apply_sampling_backward(ps.su, sg.x_union.data(), g_rows);
  }
  if (!any) return 0.0;

  Tensor g_x = matmul(g_rows, transpose(frozen_.w_out));
  if (s.kept.empty()) return loss;
  Tensor g_priors({s.kept.size(), config_.d_down});
  for (std::size_t l = params_.adapters.size(); l-- > 0;) {
    g_x = region::adapter_backward(s.adapters[l], params_.adapters[l], g_x, grad.adapters[l], &g_priors);
  }
  for (std::size_t m = 0; m < s.kept.size(); ++m) {
    params_.prior_proj.backward(s.prior_inputs[m].data(), g_priors.row(m), grad.prior_proj);
  }
  return loss;
}

double Model::batch_loss(const std::vector<BatchItem>& batch, Params* grad) const {
  std::size_t pairs = 0;
  for (const auto& item : batch) {
    for (const auto& t : item.targets) pairs += t.empty() ? 0 : 1;
  }
  if (pairs == 0) return 0.0;
  std::vector<vdp::VerbPromptCache> caches;
  const vdp::PromptSet ps = prompt_set(&caches);
  const double scale = 1.0 / static_cast<double>(pairs);
  Tensor g_prompts = Tensor::zeros_like(ps.prompts);
  Params scratch;
  Params* g = grad;
  if (!g) {
    scratch = make_params(config_);
    g = &scratch;
  }
  double total = 0.0;
  for (const auto& item : batch) {
    total += loss_and_backward(*item.image, ps.prompts, item.targets, scale, *g, g_prompts);
  }
  if (grad) {
    vdp::prompt_set_backward(caches, params_.vdp, *frozen_.encoder, config_.vdp, frozen_.noise, g_prompts, grad->vdp);
  }
  return total * scale;
}

std::vector<eval::PredictionRecord> Model::predict(const data::Image& image, const Tensor& prompts,
                                                   const eval::Taxonomy& taxonomy) const {
  std::vector<eval::PredictionRecord> out;
  for (const auto& po : forward(image, prompts)) {
    const auto& hd = image.detections[po.pair.human];
    const auto& od = image.detections[po.pair.object];
    for (std::size_t v = 0; v < po.logits.hoi.size(); ++v) {
      const auto triplet = taxonomy.find(v, od.class_id);
      if (!triplet) continue;
      out.push_back({image.image_id, hd.box, od.box, *triplet,
                     hoi::hoi_score(hd.score, od.score, po.logits.hoi[v], config_.score)});
    }
  }
  return out;
}

std::vector<Tensor> pair_targets(const data::Image& image, const std::vector<hoi::CandidatePair>& pairs,
                                 const std::vector<eval::GroundTruthRecord>& ground_truth,
                                 const eval::Taxonomy& taxonomy, const eval::SplitSpec& split) {
  std::vector<Tensor> out;
  for (const auto& pair : pairs) {
    Tensor t({taxonomy.num_verbs()});
    bool drop = false;
    for (const auto& g : ground_truth) {
      if (g.image_id != image.image_id) continue;
      const double overlap = std::min(iou(image.detections[pair.human].box, g.human),
                                      iou(image.detections[pair.object].box, g.object));
      if (overlap < 0.5) continue;
      if (split.is_unseen(g.triplet_id)) drop = true;
      t[taxonomy.triplet(g.triplet_id).verb] = 1.0;
    }
    out.push_back(drop ? Tensor() : std::move(t));
  }
  return out;
}

void audit_targets(const data::Image& image, const std::vector<hoi::CandidatePair>& pairs,
                   const std::vector<Tensor>& targets, const eval::Taxonomy& taxonomy, const eval::SplitSpec& split) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (targets[i].empty()) continue;
    const std::size_t object = image.detections[pairs[i].object].class_id;
    for (std::size_t v = 0; v < targets[i].size(); ++v) {
      if (targets[i][v] == 0.0) continue;
      const auto t = taxonomy.find(v, object);
      if (t && split.is_unseen(*t)) {
        throw ValidationError("image " + image.image_id + ": training target uses unseen triplet " +
                              std::to_string(*t));
      }
    }
  }
}

double cosine_lr(const AdamConfig& c, std::size_t step, std::size_t total_steps) {
  const double lo = std::min(c.lr_min, c.lr);
  if (total_steps <= 1) return c.lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lo + 0.5 * (c.lr - lo) * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamW::AdamW(AdamConfig config, Params& params) : config_(config) {
  for (const auto& [name, t] : params.collect()) {
    names_.push_back(name);
    m_.push_back(Tensor::zeros_like(*t));
    v_.push_back(Tensor::zeros_like(*t));
  }
}

void AdamW::step(Params& params, Params& grad, double lr) {
  auto ps = params.collect();
  auto gs = grad.collect();
  if (ps.size() != names_.size() || gs.size() != names_.size()) throw ValidationError("optimizer census mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i].second->data();
    auto g = gs[i].second->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config_.eps);
      p[j] -= lr * (update + config_.weight_decay * p[j]);
    }
  }
}

std::map<std::string, Tensor> AdamW::state() const {
  std::map<std::string, Tensor> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out["adam.m." + names_[i]] = m_[i];
    out["adam.v." + names_[i]] = v_[i];
  }
  return out;
}

void AdamW::load_state(const std::map<std::string, Tensor>& state, std::size_t steps) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    for (auto [prefix, vec] : {std::pair{"adam.m.", &m_}, std::pair{"adam.v.", &v_}}) {
      const auto it = state.find(prefix + names_[i]);
      if (it == state.end()) throw ValidationError("checkpoint lacks optimizer state for " + names_[i]);
      if (it->second.shape() != (*vec)[i].shape()) throw DimensionError("optimizer state shape mismatch");
      (*vec)[i] = it->second;
    }
  }
  t_ = steps;
}

TrainResult train(Model& model, const data::Partition& data, const eval::Taxonomy& taxonomy,
                  const eval::SplitSpec& split, const TrainConfig& config, AdamW* optimizer) {
  if (data.images.empty()) throw ValidationError("training partition has no images");
  if (config.batch_images == 0) throw ParameterError("batch size must be positive");
  if (taxonomy.num_verbs() != model.num_verbs()) throw ValidationError("taxonomy and prompt verb counts differ");

  std::unordered_map<std::string, std::vector<eval::GroundTruthRecord>> gts;
  for (const auto& g : data.ground_truth) gts[g.image_id].push_back(g);

  TrainResult result;
  std::vector<Model::BatchItem> items;
  for (const auto& img : data.images) {
    const auto pairs = hoi::generate_pairs(img.detections, model.config().theta);
    auto targets = pair_targets(img, pairs, gts[img.image_id], taxonomy, split);
    audit_targets(img, pairs, targets, taxonomy, split);
    std::size_t used = 0;
    for (const auto& t : targets) used += t.empty() ? 0 : 1;
    result.pairs_used += used;
    result.pairs_dropped += targets.size() - used;
    if (used) items.push_back({&img, std::move(targets)});
  }
  if (items.empty()) throw ValidationError("no training pairs survive the seen-split filter");
  result.images_used = items.size();

  std::optional<AdamW> local;
  if (!optimizer) {
    local.emplace(config.adam, model.params());
    optimizer = &*local;
  }
  const Rng root(config.seed);
  const std::size_t d = model.config().d;
  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<Model::BatchItem> batch;
    while (batch.size() < std::min(config.batch_images, items.size())) {
      if (cursor >= order.size()) {
        order.resize(items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle = root.child(epoch++);
        shuffle.shuffle(order);
        cursor = 0;
      }
      batch.push_back(items[order[cursor++]]);
    }
    if (model.config().resample_noise) {
      model.frozen().noise = vdp::draw_prompt_noise(model.num_verbs(), d, root.child(0x9E3779B9ull + step));
    }
    Params grad = zeros_like(model.params());
    const double loss = model.batch_loss(batch, &grad);
    if (!std::isfinite(loss)) {
      if (config.dump_dir) {
        json ids = json::array();
        for (const auto& b : batch) ids.push_back(b.image->image_id);
        write_file_atomic(*config.dump_dir / "nonfinite_batch.json",
                          json{{"step", step}, {"images", ids}}.dump(1));
      }
      std::string msg = "non-finite loss at step " + std::to_string(step) + " on images";
      for (const auto& b : batch) msg += " " + b.image->image_id;
      throw NumericError(msg);
    }
    optimizer->step(model.params(), grad, cosine_lr(config.adam, step, config.steps));
    result.loss_curve.push_back(loss);
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& dir, Model& model, const AdamW* optimizer,
                     const std::string& extra_manifest_json) {
  std::map<std::string, Tensor> tensors;
  for (const auto& [name, t] : model.params().collect()) tensors[name] = *t;
  tensors["frozen.noise"] = model.frozen().noise;
  const auto& gs = model.frozen().group_stats;
  if (!gs.empty()) {
    const std::size_t dim = gs.front().variance.size();
    Tensor var({gs.size(), dim});
    Tensor mean({gs.size(), dim});
    for (std::size_t v = 0; v < gs.size(); ++v) {
      std::copy(gs[v].variance.data().begin(), gs[v].variance.data().end(), var.row(v).begin());
      if (gs[v].mean) std::copy(gs[v].mean->data().begin(), gs[v].mean->data().end(), mean.row(v).begin());
    }
    tensors["frozen.group_variance"] = var;
    if (gs.front().mean) tensors["frozen.group_mean"] = mean;
  }
  if (optimizer) {
    for (auto& [name, t] : optimizer->state()) tensors[name] = t;
  }
  json entries = json::object();
  for (const auto& [name, t] : tensors) {
    const std::string file = "tensors/" + name + ".vdt";
    const std::string bytes = encode_vdt1(t);
    write_file_atomic(dir / file, bytes);
    entries[name] = {{"file", file}, {"shape", t.shape()}, {"digest", digest_hex(bytes)}};
  }
  json manifest{{"format", "vdrp-checkpoint-1"},
                {"tensors", entries},
                {"optimizer_steps", optimizer ? optimizer->steps() : 0},
                {"parameter_count", model.params().count()},
                {"run", json::parse(extra_manifest_json.empty() ? "{}" : extra_manifest_json)}};
  write_file_atomic(dir / "checkpoint.json", manifest.dump(1) + "\n");
}

std::string load_checkpoint(const std::filesystem::path& dir, Model& model, AdamW* optimizer) {
  const auto path = dir / "checkpoint.json";
  if (!std::filesystem::exists(path)) throw IoError("missing checkpoint index " + path.string());
  const std::string text = read_file(path);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const auto& entries = manifest.at("tensors");
  auto load = [&](const std::string& name) {
    if (!entries.contains(name)) throw ValidationError("checkpoint lacks tensor " + name);
    return read_vdt1(dir / entries[name].at("file").get<std::string>());
  };
  for (auto& [name, t] : model.params().collect()) {
    Tensor v = load(name);
    if (v.shape() != t->shape()) {
      throw ValidationError("checkpoint tensor " + name + " does not match the configured architecture");
    }
    *t = std::move(v);
  }
  Tensor noise = load("frozen.noise");
  if (noise.shape() != model.frozen().noise.shape()) throw ValidationError("checkpoint noise shape mismatch");
  model.frozen().noise = std::move(noise);
  const Tensor var = load("frozen.group_variance");
  if (var.rank() != 2 || var.dim(0) != model.num_verbs() || var.dim(1) != model.config().d) {
    throw ValidationError("checkpoint group variance must be V x d");
  }
  const bool with_mean = model.config().vdp.mode == stats::StatsMode::kMeanAndVariance;
  const Tensor mean = with_mean ? load("frozen.group_mean") : Tensor();
  auto& gs = model.frozen().group_stats;
  gs.clear();
  for (std::size_t v = 0; v < var.dim(0); ++v) {
    stats::GroupVariance g{v, Tensor::vector({var.row(v).begin(), var.row(v).end()}), std::nullopt};
    if (with_mean) g.mean = Tensor::vector({mean.row(v).begin(), mean.row(v).end()});
    gs.push_back(std::move(g));
  }
  if (optimizer) {
    std::map<std::string, Tensor> state;
    for (auto& [name, e] : entries.items()) {
      if (name.rfind("adam.", 0) == 0) state[name] = load(name);
    }
    optimizer->load_state(state, manifest.value("optimizer_steps", std::size_t{0}));
  }
  return text;
}

}  // namespace vdrp::model
