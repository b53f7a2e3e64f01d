// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "vdrp/diag.hpp"
#include "vdrp/error.hpp"
#include "vdrp/io.hpp"
#include "vdrp/version.hpp"

namespace vdrp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kProjectionSalt = 0x0B7E15162628AED2ull;
constexpr std::uint64_t kNoiseStream = 0xB00;
constexpr std::uint64_t kVarianceStream = 0xC0FFEE;
constexpr std::uint64_t kChanceStream = 0xC4A7CE;

// Digest of a file, or of every file below a directory (manifest excluded).
std::string path_digest(const fs::path& p) {
  if (fs::is_regular_file(p)) return file_digest(p);
  if (!fs::is_directory(p)) throw IoError("missing input " + p.string());
  std::vector<std::string> lines;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), p).generic_string();
    if (rel == "manifest.json" || rel.ends_with(".tmp")) continue;
    lines.push_back(rel + " " + file_digest(e.path()));
  }
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l + "\n";
  return digest_hex(all);
}

json output_digests(const fs::path& dir) {
  json out = json::object();
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json" || rel.ends_with(".tmp")) continue;
    out[rel] = file_digest(e.path());
  }
  return out;
}

// Warns when files recorded by an upstream manifest changed since it was written.
void check_stale(const fs::path& dir) {
  const fs::path m = dir / "manifest.json";
  if (!fs::exists(m)) return;
  json doc;
  try {
    doc = json::parse(read_file(m));
  } catch (const json::exception&) {
    warn("stale input: unreadable manifest " + m.string());
    return;
  }
  if (doc.contains("outputs")) {
    for (auto& [rel, digest] : doc["outputs"].items()) {
      const fs::path f = dir / rel;
      if (!fs::exists(f)) {
        warn("stale input: " + f.string() + " listed in " + m.string() + " is missing");
      } else if (file_digest(f) != digest.get<std::string>()) {
        warn("stale input: " + f.string() + " changed after " + m.string() + " was written");
      }
    }
  }
  if (doc.contains("inputs")) {
    for (auto& [path, digest] : doc["inputs"].items()) {
      if (!fs::exists(path)) continue;
      if (path_digest(path) != digest.get<std::string>()) {
        warn("stale input: " + path + " changed since " + m.string() + " was produced");
      }
    }
  }
}

class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config) : command_(std::move(command)), config_(config) {}
  void input(const fs::path& p) { inputs_[p.generic_string()] = path_digest(p); }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }
  void write(const fs::path& out) const {
    json doc{{"command", command_},
             {"tool_version", VDRP_VERSION_STRING},
             {"seed", config_.seed()},
             {"config", config_.values()},
             {"inputs", inputs_},
             {"notes", notes_},
             {"outputs", output_digests(out)}};
    write_file_atomic(out / "manifest.json", doc.dump(1) + "\n");
  }

 private:
  std::string command_;
  const RunConfig& config_;
  json inputs_ = json::object();
  json notes_ = json::object();
};

fs::path required_path(const RunConfig& c, const std::string& key, const std::string& hint) {
  const std::string p = c.text(key);
  if (p.empty()) throw ValidationError(key + " is not set; " + hint);
  if (!fs::exists(p)) throw IoError(key + " = " + p + " does not exist; " + hint);
  return p;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

fs::path concepts_path(const RunConfig& c) {
  const std::string p = c.text("paths.concepts");
  return p.empty() ? fs::path(c.text("paths.data")) / "concepts.json" : fs::path(p);
}

eval::SplitSpec resolve_split(const RunConfig& c, const eval::Taxonomy& taxonomy) {
  const auto name = eval::parse_split_name(c.text("split.name"));
  const std::string dir = c.text("paths.splits");
  if (!dir.empty()) {
    const fs::path f = fs::path(dir) / (eval::to_string(name) + ".json");
    if (!fs::exists(f)) throw IoError("missing split file " + f.string() + "; run build-splits");
    auto s = eval::SplitSpec::from_json_text(read_file(f), f.string());
    if (s.seen.size() + s.unseen.size() != taxonomy.num_triplets()) {
      throw ValidationError(f.string() + " does not cover the taxonomy");
    }
    return s;
  }
  return eval::build_split(taxonomy, name, c.split_params(taxonomy));
}

void check_roi_scale(const RunConfig& c, const data::Partition& part) {
  if (part.images.empty()) return;
  const auto& img = part.images.front();
  const double expected = img.width * c.number("roi.spatial_scale");
  if (std::abs(expected - static_cast<double>(img.features.dim(1))) > 1.0) {
    warn("roi.spatial_scale maps image width " + std::to_string(img.width) + " to " + std::to_string(expected) +
         " cells but feature maps are " + std::to_string(img.features.dim(1)) + " wide");
  }
}

}  // namespace

synth::SynthConfig synth_config(const RunConfig& c) {
  synth::SynthConfig s;
  s.verbs = c.count("synth.verbs");
  s.objects = c.count("synth.objects");
  s.valid_fraction = c.number("synth.valid_fraction");
  s.train_images = c.count("synth.train_images");
  s.test_images = c.count("synth.test_images");
  s.image_size = c.count("synth.image_size");
  s.map_size = c.count("synth.map_size");
  s.noise = c.number("synth.noise");
  s.diversity = c.number("synth.diversity");
  s.jitter = c.number("synth.jitter");
  s.concepts_per_region = c.count("rap.k");
  s.concepts_relevant = c.count("synth.concepts_relevant");
  s.distractors = c.count("synth.distractors");
  s.bystanders = c.count("synth.bystanders");
  s.latent_scale = c.number("synth.latent_scale");
  s.d_up = c.count("dims.d_up");
  s.prompt_template = c.text("prompt.template");
  s.seed = c.seed();
  return s;
}

Tensor frozen_output_projection(const RunConfig& c) {
  return model::output_projection(c.count("dims.d_up"), c.count("dims.d"),
                                  static_cast<std::uint64_t>(c.integer("encoder.seed")) ^ kProjectionSalt);
}

namespace {

Experiment base_experiment(const RunConfig& c) {
  Experiment exp;
  exp.config = c;
  exp.encoder = c.make_encoder();
  exp.embedder = std::make_shared<TokenEmbedder>(c.make_embedder());
  exp.w_out = frozen_output_projection(c);
  return exp;
}

}  // namespace

Experiment load_experiment(const RunConfig& c, bool need_train, bool need_test) {
  Experiment exp = base_experiment(c);
  const fs::path data = required_path(c, "paths.data", "run gen-synth or point it at a dataset directory");
  check_stale(data);
  const fs::path tax = data / "taxonomy.json";
  if (!fs::exists(tax)) throw IoError("missing " + tax.string());
  exp.taxonomy = eval::Taxonomy::load(tax);
  const fs::path cp = concepts_path(c);
  if (!fs::exists(cp)) throw IoError("missing concept pool " + cp.string());
  exp.concepts = rap::ConceptPool::load(cp, exp.embedder.get(), exp.encoder.get());
  if (exp.concepts.k() != c.count("rap.k")) {
    throw ValidationError(cp.string() + " holds " + std::to_string(exp.concepts.k()) + " concepts per region but rap.k = " +
                          std::to_string(c.count("rap.k")));
  }
  if (exp.concepts.verbs() < exp.taxonomy.num_verbs()) {
    throw ValidationError(cp.string() + " does not cover every verb of the taxonomy");
  }
  if (need_train) {
    exp.train = data::load_partition(data / "train", exp.taxonomy, *exp.embedder, *exp.encoder);
    check_roi_scale(c, exp.train);
  }
  if (need_test) exp.test = data::load_partition(data / "test", exp.taxonomy, *exp.embedder, *exp.encoder);
  exp.split = resolve_split(c, exp.taxonomy);
  return exp;
}

Experiment synthetic_experiment(const RunConfig& c) {
  Experiment exp = base_experiment(c);
  synth::World w = synth::generate(synth_config(c), *exp.encoder, *exp.embedder, exp.w_out);
  exp.taxonomy = std::move(w.taxonomy);
  exp.concepts = std::move(w.concepts);
  exp.train = std::move(w.train);
  exp.test = std::move(w.test);
  exp.split = eval::build_split(exp.taxonomy, eval::parse_split_name(c.text("split.name")), c.split_params(exp.taxonomy));
  return exp;
}

std::string VarianceArtifact::to_json_text() const {
  json verbs = json::array();
  for (const auto& s : stats) {
    verbs.push_back({{"verb_id", s.verb_id},
                     {"sample_count", s.sample_count},
                     {"mean", s.mean.values()},
                     {"variance", s.variance.values()}});
  }
  json gs = json::array();
  for (const auto& g : groups) gs.push_back({{"verb_id", g.verb_id}, {"members", g.members}});
  return json{{"verbs", verbs}, {"groups", gs}}.dump(1);
}

VarianceArtifact VarianceArtifact::from_json_text(const std::string& text, const std::string& origin) {
  try {
    const json doc = json::parse(text);
    VarianceArtifact a;
    for (const auto& v : doc.at("verbs")) {
      a.stats.push_back({v.at("verb_id").get<std::size_t>(), v.at("sample_count").get<std::size_t>(),
                         Tensor::vector(v.at("mean").get<std::vector<double>>()),
                         Tensor::vector(v.at("variance").get<std::vector<double>>())});
    }
    for (const auto& g : doc.at("groups")) {
      const auto members = g.at("members").get<std::vector<std::size_t>>();
      a.groups.push_back({g.at("verb_id").get<std::size_t>(), members, members.size()});
    }
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

std::vector<vdp::BasePrompt> base_prompts(const Experiment& exp, const RunConfig& c) {
  std::vector<vdp::BasePrompt> out;
  const auto& verbs = exp.taxonomy.verbs();
  for (std::size_t v = 0; v < verbs.size(); ++v) {
    out.push_back(vdp::make_base_prompt(v, verbs[v], c.text("prompt.template"), *exp.embedder));
  }
  return out;
}

Tensor static_prompt_encodings(const Experiment& exp, const RunConfig& c) {
  const auto prompts = base_prompts(exp, c);
  Tensor out({prompts.size(), exp.encoder->output_dim()});
  for (std::size_t v = 0; v < prompts.size(); ++v) {
    const Tensor t = exp.encoder->encode(prompts[v].tokens);
    std::copy(t.data().begin(), t.data().end(), out.row(v).begin());
  }
  return out;
}

VarianceArtifact estimate_variance(const Experiment& exp, const RunConfig& c) {
  const std::size_t verbs = exp.taxonomy.num_verbs();
  const std::size_t d = c.count("dims.d");
  const auto roi = c.model_config().roi;
  std::unordered_map<std::string, const data::Image*> images;
  for (const auto& img : exp.train.images) images[img.image_id] = &img;
  std::vector<std::vector<Tensor>> feats(verbs);
  std::unordered_map<std::string, Tensor> rows_cache;
  for (const auto& g : exp.train.ground_truth) {
    if (exp.split.is_unseen(g.triplet_id)) continue;
    const auto it = images.find(g.image_id);
    if (it == images.end()) throw ValidationError("ground truth references unknown image " + g.image_id);
    const data::Image& img = *it->second;
    auto [rit, fresh] = rows_cache.try_emplace(img.image_id);
    if (fresh) {
      rit->second = matmul(img.features.reshaped({img.features.dim(0) * img.features.dim(1), img.features.dim(2)}),
                           exp.w_out);
    }
    const auto s = roi_sampling(img.features.dim(0), img.features.dim(1), union_box(g.human, g.object), roi);
    feats[exp.taxonomy.triplet(g.triplet_id).verb].push_back(apply_sampling(rit->second, s));
  }
  VarianceArtifact a;
  const std::size_t cap = c.count("vdp.variance_cap");
  const Rng root(c.seed() ^ kVarianceStream);
  for (std::size_t v = 0; v < verbs; ++v) {
    if (feats[v].empty()) {
      warn("verb " + std::to_string(v) + " has no seen training samples; its variance is zero");
      a.stats.push_back(stats::empty_verb_stats(v, d));
    } else {
      a.stats.push_back(stats::verb_stats(v, feats[v], cap ? std::optional<std::size_t>(cap) : std::nullopt,
                                          root.child(v).next_u64()));
    }
  }
  const Tensor text = static_prompt_encodings(exp, c);
  const std::size_t excl = c.count("vdp.exclude_top_neighbors");
  std::vector<std::set<std::size_t>> exclusion;
  if (excl > 0) {
    for (std::size_t v = 0; v < verbs; ++v) {
      const auto n = stats::nearest_verbs(text, v, std::min(excl, verbs - 1));
      exclusion.emplace_back(n.begin(), n.end());
    }
  }
  a.groups = stats::build_groups(text, c.count("vdp.group_size"), excl > 0 ? &exclusion : nullptr);
  return a;
}

model::Model build_model(const Experiment& exp, const RunConfig& c, const VarianceArtifact& variance) {
  const auto mc = c.model_config();
  model::Frozen f;
  f.encoder = exp.encoder;
  f.base_prompts = base_prompts(exp, c);
  f.group_stats = stats::group_variance(variance.stats, variance.groups, mc.vdp.mode);
  f.concepts = exp.concepts;
  f.w_out = exp.w_out;
  f.noise = vdp::draw_prompt_noise(exp.taxonomy.num_verbs(), mc.d, Rng(c.seed()).child(kNoiseStream));
  return model::Model(mc, model::init_params(mc, c.seed()), std::move(f));
}

std::vector<eval::PredictionRecord> predict_partition(const model::Model& model, const data::Partition& part,
                                                      const eval::Taxonomy& taxonomy) {
  const Tensor prompts = model.prompt_set().prompts;
  std::vector<eval::PredictionRecord> out;
  for (const auto& img : part.images) {
    auto p = model.predict(img, prompts, taxonomy);
    out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return out;
}

ChanceLevel permutation_chance(std::vector<eval::PredictionRecord> predictions,
                               std::span<const eval::GroundTruthRecord> ground_truth, const eval::SplitSpec& split,
                               std::size_t permutations, std::uint64_t seed) {
  ChanceLevel out;
  if (permutations == 0 || predictions.empty()) return out;
  std::vector<double> scores;
  for (const auto& p : predictions) scores.push_back(p.score);
  double full = 0, seen = 0, unseen = 0;
  bool has_full = false, has_seen = false, has_unseen = false;
  const Rng root(seed ^ kChanceStream);
  for (std::size_t k = 0; k < permutations; ++k) {
    Rng rng = root.child(k);
    rng.shuffle(scores);
    for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i].score = scores[i];
    const auto r = eval::map_report(predictions, ground_truth, split);
    if (r.full) full += *r.full, has_full = true;
    if (r.seen) seen += *r.seen, has_seen = true;
    if (r.unseen) unseen += *r.unseen, has_unseen = true;
  }
  const double n = static_cast<double>(permutations);
  if (has_full) out.full = full / n;
  if (has_seen) out.seen = seen / n;
  if (has_unseen) out.unseen = unseen / n;
  return out;
}

RunConfig arm_config(const RunConfig& base, const std::string& arm) {
  RunConfig c = base;
  if (arm == "static") {
    c.set("vdp.alpha", "0");
    c.set("vdp.beta", "0");
    c.set("rap.gamma", "0");
  } else if (arm == "vdp") {
    c.set("rap.gamma", "0");
  } else if (arm == "rap") {
    c.set("vdp.alpha", "0");
    c.set("vdp.beta", "0");
  } else if (arm == "full") {
  } else {
    std::stringstream ss(arm);
    std::string item;
    bool any = false;
    while (std::getline(ss, item, '+')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("unknown arm '" + arm + "' (expected static, vdp, rap, full or key=value[+key=value])");
      }
      c.set(item.substr(0, eq), item.substr(eq + 1));
      any = true;
    }
    if (!any) throw ValidationError("empty arm specification");
  }
  return c;
}

ArmOutcome run_arm(const Experiment& exp, const std::string& arm) {
  ArmOutcome out;
  out.name = arm;
  out.config = arm_config(exp.config, arm);
  const VarianceArtifact variance = estimate_variance(exp, out.config);
  model::Model m = build_model(exp, out.config, variance);
  out.training = model::train(m, exp.train, exp.taxonomy, exp.split, out.config.train_config());
  out.prompts = m.prompt_set().prompts;
  out.predictions = predict_partition(m, exp.test, exp.taxonomy);
  out.report = eval::map_report(out.predictions, exp.test.ground_truth, exp.split);
  out.chance = permutation_chance(out.predictions, exp.test.ground_truth, exp.split,
                                  out.config.count("eval.permutations"), out.config.seed());
  return out;
}

namespace {

using CommandFn = std::string (*)(const RunConfig&, const fs::path&);

std::string cmd_gen_synth(const RunConfig& c, const fs::path& out) {
  Experiment exp = base_experiment(c);
  const synth::World w = synth::generate(synth_config(c), *exp.encoder, *exp.embedder, exp.w_out);
  synth::write_world(out, w);
  Manifest m("gen-synth", c);
  m.note("triplets", w.taxonomy.num_triplets());
  m.note("train_images", w.train.images.size());
  m.note("test_images", w.test.images.size());
  m.write(out);
  std::ostringstream s;
  s << "synthetic world: " << w.taxonomy.num_verbs() << " verbs, " << w.taxonomy.num_objects() << " objects, "
    << w.taxonomy.num_triplets() << " triplets, " << w.train.images.size() << " train / " << w.test.images.size()
    << " test images\n";
  return s.str();
}

std::string cmd_build_splits(const RunConfig& c, const fs::path& out) {
  const fs::path data = required_path(c, "paths.data", "run gen-synth first");
  check_stale(data);
  const fs::path tax = data / "taxonomy.json";
  const auto taxonomy = eval::Taxonomy::load(tax);
  const auto params = c.split_params(taxonomy);
  Manifest m("build-splits", c);
  m.input(tax);
  std::ostringstream s;
  for (auto name : {eval::SplitName::kNfUc, eval::SplitName::kRfUc, eval::SplitName::kUo, eval::SplitName::kUv}) {
    const auto split = eval::build_split(taxonomy, name, params);
    write_file_atomic(out / (split.name + ".json"), split.to_json_text() + "\n");
    s << split.name << ": " << split.unseen.size() << " unseen / " << split.seen.size() << " seen\n";
  }
  m.write(out);
  return s.str();
}

std::string cmd_estimate_variance(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, true, false);
  const VarianceArtifact a = estimate_variance(exp, c);
  write_file_atomic(out / "variance.json", a.to_json_text() + "\n");
  Manifest m("estimate-variance", c);
  m.input(c.text("paths.data"));
  m.note("split", exp.split.name);
  m.write(out);
  std::ostringstream s;
  for (const auto& st : a.stats) {
    double mean_var = 0;
    for (double v : st.variance.data()) mean_var += v / static_cast<double>(st.variance.size());
    s << "verb " << st.verb_id << " (" << exp.taxonomy.verbs()[st.verb_id] << "): " << st.sample_count
      << " samples, mean variance " << fmt(mean_var) << "\n";
  }
  return s.str();
}

VarianceArtifact resolve_variance(const Experiment& exp, const RunConfig& c, Manifest& m) {
  const std::string p = c.text("paths.variance");
  if (p.empty()) {
    m.note("variance", "estimated in-process");
    return estimate_variance(exp, c);
  }
  fs::path f = p;
  if (fs::is_directory(f)) {
    check_stale(f);
    f /= "variance.json";
  }
  if (!fs::exists(f)) throw IoError("missing variance file " + f.string() + "; run estimate-variance");
  m.input(f);
  auto a = VarianceArtifact::from_json_text(read_file(f), f.string());
  if (a.stats.size() != exp.taxonomy.num_verbs()) throw ValidationError(f.string() + " does not cover every verb");
  return a;
}

std::string cmd_build_prompts(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, true, false);
  Manifest m("build-prompts", c);
  m.input(c.text("paths.data"));
  const VarianceArtifact a = resolve_variance(exp, c, m);
  model::Model model = build_model(exp, c, a);
  if (!c.text("paths.checkpoint").empty()) {
    const fs::path ck = required_path(c, "paths.checkpoint", "run train first");
    check_stale(ck);
    model::load_checkpoint(ck, model);
    m.input(ck);
  }
  const auto ps = model.prompt_set();
  write_vdt1(out / "prompts.vdt", ps.prompts);
  write_vdt1(out / "static_prompts.vdt", static_prompt_encodings(exp, c));
  json verbs = json::array();
  for (std::size_t v = 0; v < exp.taxonomy.num_verbs(); ++v) {
    verbs.push_back({{"verb_id", v}, {"name", exp.taxonomy.verbs()[v]}, {"degenerate", static_cast<bool>(ps.degenerate[v])}});
  }
  write_file_atomic(out / "prompts.json", verbs.dump(1) + "\n");
  m.write(out);
  return "wrote " + std::to_string(ps.prompts.dim(0)) + " prompts of dimension " + std::to_string(ps.prompts.dim(1)) +
         "\n";
}

std::string cmd_train(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, true, false);
  Manifest m("train", c);
  m.input(c.text("paths.data"));
  const VarianceArtifact a = resolve_variance(exp, c, m);
  model::Model model = build_model(exp, c, a);
  auto tc = c.train_config();
  tc.dump_dir = out;
  model::AdamW opt(tc.adam, model.params());
  const auto r = model::train(model, exp.train, exp.taxonomy, exp.split, tc, &opt);
  json run{{"split", exp.split.name}, {"pairs_used", r.pairs_used}, {"pairs_dropped", r.pairs_dropped}};
  model::save_checkpoint(out, model, &opt, run.dump());
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, r.loss_curve[i]);
    csv += buf;
  }
  write_file_atomic(out / "loss.csv", csv);
  m.note("split", exp.split.name);
  m.note("pairs_used", r.pairs_used);
  m.note("pairs_dropped_unseen", r.pairs_dropped);
  m.note("parameter_count", model.params().count());
  m.write(out);
  std::ostringstream s;
  s << "trained " << r.loss_curve.size() << " steps on " << r.pairs_used << " pairs (" << r.pairs_dropped
    << " unseen-matched pairs dropped); loss " << fmt(r.loss_curve.empty() ? 0.0 : r.loss_curve.front()) << " -> "
    << fmt(r.loss_curve.empty() ? 0.0 : r.loss_curve.back()) << "; " << model.params().count() << " parameters\n";
  return s.str();
}

std::string cmd_predict(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, false, true);
  const fs::path ck = required_path(c, "paths.checkpoint", "run train first");
  check_stale(ck);
  Manifest m("predict", c);
  m.input(c.text("paths.data"));
  m.input(ck);
  VarianceArtifact placeholder;
  const std::size_t d = c.count("dims.d");
  for (std::size_t v = 0; v < exp.taxonomy.num_verbs(); ++v) {
    placeholder.stats.push_back(stats::empty_verb_stats(v, d));
    placeholder.groups.push_back({v, {v}, 1});
  }
  model::Model model = build_model(exp, c, placeholder);
  model::load_checkpoint(ck, model);
  const auto preds = predict_partition(model, exp.test, exp.taxonomy);
  write_file_atomic(out / "predictions.jsonl", eval::format_predictions(preds));
  m.note("predictions", preds.size());
  m.write(out);
  return "wrote " + std::to_string(preds.size()) + " predictions for " + std::to_string(exp.test.images.size()) +
         " images\n";
}

json report_json(const eval::MapReport& r, const ChanceLevel& chance) {
  return json{{"full", opt_json(r.full)},
              {"seen", opt_json(r.seen)},
              {"unseen", opt_json(r.unseen)},
              {"hm", opt_json(r.hm)},
              {"evaluated", r.evaluated},
              {"evaluated_seen", r.evaluated_seen},
              {"evaluated_unseen", r.evaluated_unseen},
              {"ties", r.ties},
              {"chance", {{"full", opt_json(chance.full)}, {"seen", opt_json(chance.seen)}, {"unseen", opt_json(chance.unseen)}}}};
}

std::string cmd_evaluate(const RunConfig& c, const fs::path& out) {
  fs::path pred = required_path(c, "paths.predictions", "run predict first");
  if (fs::is_directory(pred)) {
    check_stale(pred);
    pred /= "predictions.jsonl";
  }
  const fs::path data = required_path(c, "paths.data", "point it at the dataset directory");
  check_stale(data);
  const auto taxonomy = eval::Taxonomy::load(data / "taxonomy.json");
  const fs::path gt_path = data / "test" / "gts.jsonl";
  const auto preds = eval::read_predictions(pred);
  const auto gts = eval::read_ground_truth(gt_path);
  Manifest m("evaluate", c);
  m.input(pred);
  m.input(gt_path);
  m.input(data / "taxonomy.json");

  std::vector<eval::SplitName> names;
  if (c.text("eval.split") == "all") {
    names = {eval::SplitName::kNfUc, eval::SplitName::kRfUc, eval::SplitName::kUo, eval::SplitName::kUv};
  } else {
    names = {eval::parse_split_name(c.text("eval.split"))};
  }
  json all = json::object();
  std::ostringstream s;
  s << "split   full     seen     unseen   hm       chance(unseen)\n";
  for (auto name : names) {
    RunConfig sc = c;
    sc.set("split.name", eval::to_string(name));
    const auto split = resolve_split(sc, taxonomy);
    const auto rep = eval::map_report(preds, gts, split);
    const auto chance = permutation_chance(preds, gts, split, c.count("eval.permutations"), c.seed());
    if (rep.ties) warn(split.name + ": tied scores were ranked by input order");
    all[split.name] = report_json(rep, chance);
    write_file_atomic(out / (split.name + ".json"), rep.to_json_text() + "\n");
    char line[160];
    std::snprintf(line, sizeof line, "%-7s %-8s %-8s %-8s %-8s %s\n", split.name.c_str(), fmt(rep.full).c_str(),
                  fmt(rep.seen).c_str(), fmt(rep.unseen).c_str(), fmt(rep.hm).c_str(), fmt(chance.unseen).c_str());
    s << line;
  }
  write_file_atomic(out / "report.json", all.dump(1) + "\n");
  m.write(out);
  return s.str();
}

std::string cmd_analyze(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, true, false);
  Manifest m("analyze", c);
  m.input(c.text("paths.data"));
  const auto roi = c.model_config().roi;
  std::unordered_map<std::string, const data::Image*> images;
  for (const auto& img : exp.train.images) images[img.image_id] = &img;
  std::vector<std::vector<Tensor>> feats(exp.taxonomy.num_verbs());
  for (const auto& g : exp.train.ground_truth) {
    const auto it = images.find(g.image_id);
    if (it == images.end()) throw ValidationError("ground truth references unknown image " + g.image_id);
    const auto& img = *it->second;
    const Tensor rows =
        matmul(img.features.reshaped({img.features.dim(0) * img.features.dim(1), img.features.dim(2)}), exp.w_out);
    feats[exp.taxonomy.triplet(g.triplet_id).verb].push_back(
        apply_sampling(rows, roi_sampling(img.features.dim(0), img.features.dim(1), union_box(g.human, g.object), roi)));
  }
  json verbs = json::array();
  std::vector<Tensor> protos;
  std::ostringstream s;
  for (std::size_t v = 0; v < feats.size(); ++v) {
    json e{{"verb_id", v}, {"name", exp.taxonomy.verbs()[v]}, {"samples", feats[v].size()}};
    if (feats[v].size() >= 2) {
      const double div = stats::diversity_score(feats[v]);
      const std::size_t med = stats::medoid(feats[v]);
      e["diversity"] = div;
      e["medoid_index"] = med;
      protos.push_back(feats[v][med]);
      s << "verb " << v << " (" << exp.taxonomy.verbs()[v] << "): diversity " << fmt(div) << " over "
        << feats[v].size() << " samples\n";
    } else {
      e["diversity"] = nullptr;
    }
    verbs.push_back(e);
  }
  json doc{{"verbs", verbs}};
  if (protos.size() >= 2) {
    Tensor p({protos.size(), protos.front().size()});
    for (std::size_t i = 0; i < protos.size(); ++i) std::copy(protos[i].data().begin(), protos[i].data().end(), p.row(i).begin());
    const double dist = stats::interclass_distance(p);
    doc["interclass_distance"] = dist;
    s << "inter-class distance between medoids: " << fmt(dist) << "\n";
  }
  write_file_atomic(out / "analysis.json", doc.dump(1) + "\n");
  m.write(out);
  return s.str();
}

std::string cmd_ablate(const RunConfig& c, const fs::path& out) {
  const Experiment exp = load_experiment(c, true, true);
  Manifest m("ablate", c);
  m.input(c.text("paths.data"));
  std::vector<std::string> arms;
  {
    std::stringstream ss(c.text("ablate.arms"));
    std::string a;
    while (std::getline(ss, a, ',')) {
      if (!a.empty()) arms.push_back(a);
    }
  }
  if (arms.empty()) throw ValidationError("ablate.arms lists no arms");
  json table = json::object();
  std::string csv = "arm,full,seen,unseen,hm,chance_unseen\n";
  std::ostringstream s;
  s << "arm                      full     seen     unseen   hm\n";
  for (const auto& arm : arms) {
    const ArmOutcome r = run_arm(exp, arm);
    std::string slug;
    for (char ch : arm) slug += std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' ? ch : '_';
    const fs::path dir = out / "arms" / slug;
    write_file_atomic(dir / "config.json", r.config.to_json_text() + "\n");
    write_vdt1(dir / "prompts.vdt", r.prompts);
    write_file_atomic(dir / "predictions.jsonl", eval::format_predictions(r.predictions));
    table[arm] = report_json(r.report, r.chance);
    csv += arm + "," + fmt(r.report.full) + "," + fmt(r.report.seen) + "," + fmt(r.report.unseen) + "," +
           fmt(r.report.hm) + "," + fmt(r.chance.unseen) + "\n";
    char line[200];
    std::snprintf(line, sizeof line, "%-24s %-8s %-8s %-8s %s\n", arm.c_str(), fmt(r.report.full).c_str(),
                  fmt(r.report.seen).c_str(), fmt(r.report.unseen).c_str(), fmt(r.report.hm).c_str());
    s << line;
  }
  write_file_atomic(out / "ablation.json", table.dump(1) + "\n");
  write_file_atomic(out / "ablation.csv", csv);
  m.note("split", exp.split.name);
  m.write(out);
  return s.str();
}

const std::vector<std::pair<std::string, CommandFn>>& commands() {
  static const std::vector<std::pair<std::string, CommandFn>> kCommands{
      {"gen-synth", cmd_gen_synth},       {"build-splits", cmd_build_splits}, {"estimate-variance", cmd_estimate_variance},
      {"build-prompts", cmd_build_prompts}, {"train", cmd_train},             {"predict", cmd_predict},
      {"evaluate", cmd_evaluate},         {"analyze", cmd_analyze},           {"ablate", cmd_ablate}};
  return kCommands;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> kNames = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : commands()) n.push_back(name);
    return n;
  }();
  return kNames;
}

std::string run_command(const std::string& command, const RunConfig& config, const fs::path& out) {
  for (const auto& [name, fn] : commands()) {
    if (name == command) {
      fs::create_directories(out);
      return fn(config, out);
    }
  }
  throw ValidationError("unknown command '" + command + "'");
}

}  // namespace vdrp::pipeline
