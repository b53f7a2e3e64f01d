// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"
#include "vdrp/rng.hpp"

namespace vdrp::eval {

using nlohmann::json;

Taxonomy::Taxonomy(std::vector<std::string> verbs, std::vector<std::string> objects, std::vector<Triplet> triplets)
    : verbs_(std::move(verbs)), objects_(std::move(objects)), triplets_(std::move(triplets)) {
  for (std::size_t i = 0; i < triplets_.size(); ++i) {
    const auto& t = triplets_[i];
    if (t.id != i) throw ValidationError("triplet ids must be 0..T-1 in order");
    if (t.verb >= verbs_.size() || t.object >= objects_.size()) {
      throw ValidationError("triplet " + std::to_string(i) + " references an unknown verb or object");
    }
    if (!index_.emplace(std::make_pair(t.verb, t.object), i).second) {
      throw ValidationError("duplicate triplet (" + std::to_string(t.verb) + ", " + std::to_string(t.object) + ")");
    }
  }
}

const Triplet& Taxonomy::triplet(std::size_t id) const {
  if (id >= triplets_.size()) throw ValidationError("unknown triplet id " + std::to_string(id));
  return triplets_[id];
}

std::optional<std::size_t> Taxonomy::find(std::size_t verb, std::size_t object) const {
  auto it = index_.find({verb, object});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Taxonomy::set_frequencies(std::span<const std::size_t> counts) {
  if (counts.size() != triplets_.size()) throw DimensionError("frequency count differs from triplet count");
  for (std::size_t i = 0; i < counts.size(); ++i) triplets_[i].frequency = counts[i];
}

std::string Taxonomy::to_json_text() const {
  json t = json::array();
  for (const auto& x : triplets_) {
    t.push_back({{"id", x.id}, {"verb", x.verb}, {"object", x.object}, {"frequency", x.frequency}});
  }
  return json{{"verbs", verbs_}, {"objects", objects_}, {"triplets", t}}.dump(1);
}

Taxonomy Taxonomy::from_json_text(const std::string& text, const std::string& origin) {
  try {
    const json doc = json::parse(text);
    std::vector<Triplet> triplets;
    for (const auto& t : doc.at("triplets")) {
      triplets.push_back({t.at("id").get<std::size_t>(), t.at("verb").get<std::size_t>(),
                          t.at("object").get<std::size_t>(), t.value("frequency", std::size_t{0})});
    }
    return Taxonomy(doc.at("verbs").get<std::vector<std::string>>(), doc.at("objects").get<std::vector<std::string>>(),
                    std::move(triplets));
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) { return from_json_text(read_file(path), path.string()); }

void Taxonomy::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json_text()); }

namespace {

// n distinct (verb, object) pairs from verbs x objects, spread round-robin.
void fill_block(const std::vector<std::size_t>& verbs, const std::vector<std::size_t>& objects, std::size_t n,
                std::vector<std::pair<std::size_t, std::size_t>>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = verbs.size();
    out.emplace_back(verbs[i % a], objects[(i % a + i / a) % objects.size()]);
  }
}

std::vector<std::size_t> iota_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

}  // namespace

Taxonomy paper_scale_taxonomy(std::uint64_t seed) {
  constexpr std::size_t kVerbs = 117, kObjects = 80;
  std::vector<std::string> verbs, objects;
  for (std::size_t v = 0; v < kVerbs; ++v) verbs.push_back("verb" + std::to_string(v));
  objects.push_back("person");
  for (std::size_t o = 1; o < kObjects; ++o) objects.push_back("object" + std::to_string(o));

  const auto kept_verbs = iota_range(0, 97), withheld_verbs = iota_range(97, kVerbs);
  const auto seen_objects = iota_range(0, 68), unseen_objects = iota_range(68, kObjects);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  fill_block(withheld_verbs, unseen_objects, 14, pairs);
  fill_block(withheld_verbs, seen_objects, 70, pairs);
  fill_block(kept_verbs, unseen_objects, 86, pairs);
  fill_block(kept_verbs, seen_objects, 430, pairs);
  std::sort(pairs.begin(), pairs.end());

  std::vector<std::size_t> freq(pairs.size());
  std::iota(freq.begin(), freq.end(), std::size_t{1});
  Rng rng(seed);
  rng.shuffle(freq);
  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < pairs.size(); ++i) triplets.push_back({i, pairs[i].first, pairs[i].second, freq[i]});
  return Taxonomy(std::move(verbs), std::move(objects), std::move(triplets));
}

SplitName parse_split_name(const std::string& name) {
  std::string n;
  for (char c : name) {
    if (c != '-' && c != '_') n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (n == "nfuc") return SplitName::kNfUc;
  if (n == "rfuc") return SplitName::kRfUc;
  if (n == "uo") return SplitName::kUo;
  if (n == "uv") return SplitName::kUv;
  throw ValidationError("unknown split '" + name + "' (expected NF-UC, RF-UC, UO or UV)");
}

std::string to_string(SplitName name) {
  switch (name) {
    case SplitName::kNfUc: return "NF-UC";
    case SplitName::kRfUc: return "RF-UC";
    case SplitName::kUo: return "UO";
    case SplitName::kUv: return "UV";
  }
  return "?";
}

bool SplitSpec::is_unseen(std::size_t triplet) const {
  return std::binary_search(unseen.begin(), unseen.end(), triplet);
}

std::string SplitSpec::to_json_text() const {
  return json{{"name", name}, {"seen", seen}, {"unseen", unseen}}.dump();
}

SplitSpec SplitSpec::from_json_text(const std::string& text, const std::string& origin) {
  try {
    const json doc = json::parse(text);
    SplitSpec s{doc.at("name").get<std::string>(), doc.at("seen").get<std::vector<std::size_t>>(),
                doc.at("unseen").get<std::vector<std::size_t>>()};
    std::sort(s.seen.begin(), s.seen.end());
    std::sort(s.unseen.begin(), s.unseen.end());
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

namespace {

std::size_t scaled_default(std::size_t n, double num, double den) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * num / den));
}

}  // namespace

SplitSpec build_split(const Taxonomy& taxonomy, SplitName name, const SplitParams& params) {
  const std::size_t total = taxonomy.num_triplets();
  if (total == 0) throw ValidationError("taxonomy has no triplets");
  std::vector<bool> unseen(total, false);
  switch (name) {
    case SplitName::kNfUc:
    case SplitName::kRfUc: {
      const std::size_t n = params.composition_unseen.value_or(total / 5);
      if (n == 0 || n >= total) {
        throw ValidationError("unseen composition count " + std::to_string(n) + " must lie in [1, " +
                              std::to_string(total - 1) + "]");
      }
      std::vector<std::size_t> order(total);
      std::iota(order.begin(), order.end(), std::size_t{0});
      const bool frequent = name == SplitName::kNfUc;
      // Rank by frequency; ties by triplet id.
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto fa = taxonomy.triplets()[a].frequency, fb = taxonomy.triplets()[b].frequency;
        return frequent ? fa > fb : fa < fb;
      });
      for (std::size_t i = 0; i < n; ++i) unseen[order[i]] = true;
      break;
    }
    case SplitName::kUo: {
      const std::size_t objects = taxonomy.num_objects();
      auto chosen = params.unseen_objects;
      if (!chosen) {
        const std::size_t n = scaled_default(objects, 12, 80);
        if (n == 0 || n >= objects) throw ValidationError("taxonomy too small for a UO split");
        chosen = iota_range(objects - n, objects);
      }
      for (std::size_t o : *chosen) {
        if (o >= objects) throw ValidationError("UO: unknown object id " + std::to_string(o));
        if (o == 0) throw ValidationError("UO: the person class cannot be unseen");
      }
      const std::set<std::size_t> set(chosen->begin(), chosen->end());
      for (const auto& t : taxonomy.triplets()) unseen[t.id] = set.contains(t.object);
      break;
    }
    case SplitName::kUv: {
      const std::size_t verbs = taxonomy.num_verbs();
      auto chosen = params.withheld_verbs;
      if (!chosen) {
        const std::size_t n = scaled_default(verbs, 20, 117);
        if (n == 0 || n >= verbs) throw ValidationError("taxonomy too small for a UV split");
        chosen = iota_range(verbs - n, verbs);
      }
      for (std::size_t v : *chosen) {
        if (v >= verbs) throw ValidationError("UV: unknown verb id " + std::to_string(v));
      }
      const std::set<std::size_t> set(chosen->begin(), chosen->end());
      for (const auto& t : taxonomy.triplets()) unseen[t.id] = set.contains(t.verb);
      break;
    }
  }
  SplitSpec spec{to_string(name), {}, {}};
  for (std::size_t i = 0; i < total; ++i) (unseen[i] ? spec.unseen : spec.seen).push_back(i);
  if (spec.seen.empty()) throw ValidationError(spec.name + ": split leaves no seen triplets");
  return spec;
}

namespace {

Box parse_box(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(field + " must be [x1, y1, x2, y2]");
  return make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

template <typename Record, typename Fn>
std::vector<Record> parse_lines(const std::string& text, const std::string& origin, Fn fn) {
  std::vector<Record> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(fn(json::parse(line)));
    } catch (const std::exception& e) {
      problems.push_back(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "malformed records:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return out;
}

GroundTruthRecord gt_from_json(const json& j) {
  std::vector<std::string> missing;
  for (const char* f : {"image_id", "human_box", "object_box", "triplet_id"}) {
    if (!j.contains(f)) missing.emplace_back(f);
  }
  if (!missing.empty()) {
    std::string m = "missing fields:";
    for (const auto& f : missing) m += " " + f;
    throw ValidationError(m);
  }
  return {j.at("image_id").get<std::string>(), parse_box(j.at("human_box"), "human_box"),
          parse_box(j.at("object_box"), "object_box"), j.at("triplet_id").get<std::size_t>()};
}

}  // namespace

std::vector<GroundTruthRecord> parse_ground_truth(const std::string& text, const std::string& origin) {
  return parse_lines<GroundTruthRecord>(text, origin, gt_from_json);
}

std::vector<PredictionRecord> parse_predictions(const std::string& text, const std::string& origin) {
  return parse_lines<PredictionRecord>(text, origin, [](const json& j) {
    if (!j.contains("score")) throw ValidationError("missing fields: score");
    const GroundTruthRecord g = gt_from_json(j);
    const double score = j.at("score").get<double>();
    if (!std::isfinite(score)) throw ValidationError("score is not finite");
    return PredictionRecord{g.image_id, g.human, g.object, g.triplet_id, score};
  });
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path), path.string());
}

std::vector<GroundTruthRecord> read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path), path.string());
}

std::string format_predictions(std::span<const PredictionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"image_id", r.image_id}, {"human_box", box_json(r.human)}, {"object_box", box_json(r.object)},
                {"triplet_id", r.triplet_id}, {"score", r.score}}
               .dump() +
           "\n";
  }
  return out;
}

std::string format_ground_truth(std::span<const GroundTruthRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"image_id", r.image_id}, {"human_box", box_json(r.human)}, {"object_box", box_json(r.object)},
                {"triplet_id", r.triplet_id}}
               .dump() +
           "\n";
  }
  return out;
}

ApResult average_precision(std::span<const PredictionRecord> predictions,
                           std::span<const GroundTruthRecord> ground_truth, std::size_t triplet) {
  ApResult r;
  std::unordered_map<std::string, std::vector<const GroundTruthRecord*>> by_image;
  for (const auto& g : ground_truth) {
    if (g.triplet_id != triplet) continue;
    by_image[g.image_id].push_back(&g);
    ++r.num_gt;
  }
  std::vector<const PredictionRecord*> preds;
  for (const auto& p : predictions) {
    if (p.triplet_id == triplet) preds.push_back(&p);
  }
  r.num_predictions = preds.size();
  if (r.num_gt == 0 || preds.empty()) return r;
  std::stable_sort(preds.begin(), preds.end(),
                   [](const PredictionRecord* a, const PredictionRecord* b) { return a->score > b->score; });
  for (std::size_t i = 1; i < preds.size(); ++i) {
    if (preds[i]->score == preds[i - 1]->score) r.ties = true;
  }

  std::unordered_map<const GroundTruthRecord*, bool> used;
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = *preds[i];
    const GroundTruthRecord* best = nullptr;
    double best_overlap = 0.5;
    if (auto it = by_image.find(p.image_id); it != by_image.end()) {
      for (const auto* g : it->second) {
        if (used[g]) continue;
        const double overlap = std::min(iou(p.human, g->human), iou(p.object, g->object));
        if (overlap > best_overlap) {
          best_overlap = overlap;
          best = g;
        }
      }
    }
    if (best) {
      used[best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(r.num_gt));
  }
  for (std::size_t i = precision.size() - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    r.ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return r;
}

double harmonic_mean(double seen, double unseen) {
  if (seen + unseen == 0.0) return 0.0;
  return 2.0 * seen * unseen / (seen + unseen);
}

std::string MapReport::to_json_text() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per = json::object();
  for (const auto& [t, ap] : per_triplet) {
    per[std::to_string(t)] = {{"ap", ap.ap}, {"num_gt", ap.num_gt}, {"num_predictions", ap.num_predictions}};
  }
  return json{{"full", opt(full)},
              {"seen", opt(seen)},
              {"unseen", opt(unseen)},
              {"hm", opt(hm)},
              {"evaluated", evaluated},
              {"evaluated_seen", evaluated_seen},
              {"evaluated_unseen", evaluated_unseen},
              {"ties", ties},
              {"per_triplet", per}}
      .dump(1);
}

MapReport map_report(std::span<const PredictionRecord> predictions, std::span<const GroundTruthRecord> ground_truth,
                     const SplitSpec& split) {
  std::map<std::size_t, std::vector<PredictionRecord>> preds;
  std::map<std::size_t, std::vector<GroundTruthRecord>> gts;
  for (const auto& p : predictions) preds[p.triplet_id].push_back(p);
  for (const auto& g : ground_truth) gts[g.triplet_id].push_back(g);
  std::set<std::size_t> known(split.seen.begin(), split.seen.end());
  known.insert(split.unseen.begin(), split.unseen.end());

  MapReport rep;
  double sum_all = 0.0, sum_seen = 0.0, sum_unseen = 0.0;
  for (const auto& [t, g] : gts) {
    if (!known.contains(t)) throw ValidationError("ground truth triplet " + std::to_string(t) + " is not in the split");
    static const std::vector<PredictionRecord> kNone;
    const auto it = preds.find(t);
    const auto& p = it == preds.end() ? kNone : it->second;
    const ApResult ap = average_precision(p, g, t);
    rep.per_triplet[t] = ap;
    rep.ties = rep.ties || ap.ties;
    ++rep.evaluated;
    sum_all += ap.ap;
    if (split.is_unseen(t)) {
      ++rep.evaluated_unseen;
      sum_unseen += ap.ap;
    } else {
      ++rep.evaluated_seen;
      sum_seen += ap.ap;
    }
  }
  if (rep.evaluated) rep.full = sum_all / static_cast<double>(rep.evaluated);
  if (rep.evaluated_seen) rep.seen = sum_seen / static_cast<double>(rep.evaluated_seen);
  if (rep.evaluated_unseen) rep.unseen = sum_unseen / static_cast<double>(rep.evaluated_unseen);
  if (rep.seen && rep.unseen) rep.hm = harmonic_mean(*rep.seen, *rep.unseen);
  return rep;
}

}  // namespace vdrp::eval
