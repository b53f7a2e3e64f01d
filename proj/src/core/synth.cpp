// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"
#include "vdrp/rng.hpp"
#include "vdrp/vdp.hpp"

namespace vdrp::synth {

namespace {

constexpr const char* kVerbs[] = {"riding",   "holding",  "carrying", "throwing", "kicking",   "eating",
                                  "pushing",  "pulling",  "washing",  "repairing", "lifting",  "cutting",
                                  "feeding",  "flying",   "opening",  "hugging",  "catching",  "inspecting"};
constexpr const char* kObjects[] = {"bicycle", "cup",   "ball",  "horse",      "kite",  "knife",   "bottle",
                                    "umbrella", "laptop", "dog",  "skateboard", "book",  "chair",   "boat",
                                    "frisbee", "pizza", "phone", "bench",      "car",   "suitcase"};

Tensor random_unit(Rng& rng, std::size_t d) {
  Tensor t = standard_normal(rng, d);
  t *= 1.0 / norm(t.data());
  return t;
}

Tensor unit(Tensor t) {
  const double n = norm(t.data());
  if (n > 0) t *= 1.0 / n;
  return t;
}

// Noisy copy of `base`, renormalized.
Tensor jittered(const Tensor& base, double amount, Rng& rng) {
  Tensor t = base;
  const Tensor n = random_unit(rng, base.size());
  axpy(amount, n.data(), t.data());
  return unit(std::move(t));
}

struct Latents {
  std::vector<Tensor> verb_union, verb_human, verb_object;  // d
  std::vector<double> diversity;
  Tensor person;                 // d
  std::vector<Tensor> object;    // d, per class
};

struct Placed {
  Box box;
  std::size_t class_id;
};

Box random_box(Rng& rng, double size, double wmin, double wmax, double hmin, double hmax) {
  const double w = rng.uniform(wmin, wmax), h = rng.uniform(hmin, hmax);
  const double x = rng.uniform(0.0, size - w), y = rng.uniform(0.0, size - h);
  return make_box(x, y, x + w, y + h);
}

Box clamp_box(Box b, double size) {
  b.x1 = std::clamp(b.x1, 0.0, size);
  b.x2 = std::clamp(b.x2, b.x1, size);
  b.y1 = std::clamp(b.y1, 0.0, size);
  b.y2 = std::clamp(b.y2, b.y1, size);
  return b;
}

bool overlaps(const Box& b, const std::vector<Placed>& placed, double limit) {
  return std::any_of(placed.begin(), placed.end(), [&](const Placed& p) { return iou(b, p.box) > limit; });
}

// Object box beside or overlapping the human box.
Box partner_box(Rng& rng, const Box& h, double size) {
  const double w = rng.uniform(12.0, 22.0), hh = rng.uniform(12.0, 22.0);
  const double side = rng.uniform();
  double x = side < 0.5 ? h.x2 - rng.uniform(0.0, 6.0) : h.x1 - w + rng.uniform(0.0, 6.0);
  double y = rng.uniform(h.y1, std::max(h.y1, h.y2 - hh));
  x = std::clamp(x, 0.0, size - w);
  y = std::clamp(y, 0.0, size - hh);
  return make_box(x, y, x + w, y + hh);
}

// Adds `v` to every cell weighted by the fraction of the cell covered by `b`.
void paint(Tensor& map, const Box& b, std::span<const double> v, double stride) {
  const std::size_t hgt = map.dim(0), wid = map.dim(1), d = map.dim(2);
  for (std::size_t i = 0; i < hgt; ++i) {
    for (std::size_t j = 0; j < wid; ++j) {
      const double cx1 = static_cast<double>(j) * stride, cy1 = static_cast<double>(i) * stride;
      const double ox = std::max(0.0, std::min(b.x2, cx1 + stride) - std::max(b.x1, cx1));
      const double oy = std::max(0.0, std::min(b.y2, cy1 + stride) - std::max(b.y1, cy1));
      const double cover = ox * oy / (stride * stride);
      if (cover <= 0) continue;
      for (std::size_t k = 0; k < d; ++k) map.at(i, j, k) += cover * v[k];
    }
  }
}

std::vector<std::size_t> sample_counts(std::size_t n) { return std::vector<std::size_t>(n, 0); }

}  // namespace

std::vector<std::string> verb_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t v = 0; v < n; ++v) {
    out.push_back(v < std::size(kVerbs) ? kVerbs[v] : "action" + std::to_string(v));
  }
  return out;
}

std::vector<std::string> object_names(std::size_t n) {
  std::vector<std::string> out{"person"};
  for (std::size_t o = 1; o < n; ++o) {
    out.push_back(o - 1 < std::size(kObjects) ? kObjects[o - 1] : "thing" + std::to_string(o));
  }
  return out;
}

World generate(const SynthConfig& c, const TextEncoder& encoder, const TokenEmbedder& embedder, const Tensor& w_out) {
  if (c.verbs < 2 || c.objects < 3) throw ValidationError("synthetic world needs >= 2 verbs and >= 3 objects");
  if (!(c.valid_fraction > 0 && c.valid_fraction <= 1)) throw ValidationError("synth.valid_fraction must lie in (0, 1]");
  if (c.map_size == 0 || c.image_size < 32 || c.image_size % c.map_size != 0) {
    throw ValidationError("synth.image_size must be >= 32 and a multiple of synth.map_size");
  }
  if (c.concepts_relevant > c.concepts_per_region || c.concepts_per_region == 0) {
    throw ValidationError("synth.concepts_relevant must not exceed rap.k");
  }
  const std::size_t d = encoder.output_dim();
  if (w_out.rank() != 2 || w_out.dim(0) != c.d_up || w_out.dim(1) != d) {
    throw DimensionError("output projection must be d_up x d");
  }
  const Rng root(c.seed);
  const auto verbs = verb_names(c.verbs);
  const auto objects = object_names(c.objects);

  // Valid triplets: every non-person object gets at least two verbs.
  std::vector<eval::Triplet> triplets;
  {
    Rng rng = root.child(1);
    for (std::size_t o = 1; o < c.objects; ++o) {
      std::vector<std::size_t> chosen;
      for (std::size_t v = 0; v < c.verbs; ++v) {
        if (rng.uniform() < c.valid_fraction) chosen.push_back(v);
      }
      while (chosen.size() < 2) {
        const std::size_t v = rng.below(c.verbs);
        if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) chosen.push_back(v);
      }
      std::sort(chosen.begin(), chosen.end());
      for (std::size_t v : chosen) triplets.push_back({0, v, o, 0});
    }
    std::sort(triplets.begin(), triplets.end(),
              [](const auto& a, const auto& b) { return std::tie(a.verb, a.object) < std::tie(b.verb, b.object); });
    for (std::size_t i = 0; i < triplets.size(); ++i) triplets[i].id = i;
  }
  eval::Taxonomy taxonomy(verbs, objects, triplets);

  // Latents. Union latents follow the discriminative part of each verb's
  // static prompt encoding.
  Latents lat;
  {
    std::vector<Tensor> enc;
    Tensor mean({d});
    for (std::size_t v = 0; v < c.verbs; ++v) {
      const auto bp = vdp::make_base_prompt(v, verbs[v], c.prompt_template, embedder);
      enc.push_back(encoder.encode(bp.tokens));
      axpy(1.0 / static_cast<double>(c.verbs), enc.back().data(), mean.data());
    }
    Rng rng = root.child(2);
    for (std::size_t v = 0; v < c.verbs; ++v) {
      Tensor u = enc[v];
      axpy(-1.0, mean.data(), u.data());
      if (norm(u.data()) < 1e-9) u = random_unit(rng, d);
      lat.verb_union.push_back(unit(std::move(u)));
      lat.verb_human.push_back(random_unit(rng, d));
      lat.verb_object.push_back(random_unit(rng, d));
      lat.diversity.push_back(c.diversity * rng.uniform(0.5, 1.5));
    }
    lat.person = random_unit(rng, d);
    for (std::size_t o = 0; o < c.objects; ++o) lat.object.push_back(random_unit(rng, d));
  }

  // Concept pools.
  rap::ConceptPool pool(c.verbs, c.concepts_per_region, d);
  {
    Rng rng = root.child(3);
    for (std::size_t v = 0; v < c.verbs; ++v) {
      for (rap::Region r : rap::kRegions) {
        const Tensor& base = r == rap::Region::kHuman    ? lat.verb_human[v]
                             : r == rap::Region::kObject ? lat.verb_object[v]
                                                         : lat.verb_union[v];
        std::vector<std::size_t> slots(c.concepts_per_region);
        std::iota(slots.begin(), slots.end(), std::size_t{0});
        rng.shuffle(slots);
        std::vector<rap::Concept> concepts(c.concepts_per_region);
        for (std::size_t i = 0; i < c.concepts_per_region; ++i) {
          const bool relevant = i < c.concepts_relevant;
          auto& dst = concepts[slots[i]];
          dst.embedding = quantize_f32(relevant ? jittered(base, 0.4, rng) : random_unit(rng, d));
          dst.text = relevant ? verbs[v] + " " + rap::to_string(r) + " cue " + std::to_string(i)
                              : "unrelated " + rap::to_string(r) + " cue " + std::to_string(i);
        }
        pool.set(v, r, std::move(concepts));
      }
    }
  }

  // Triplet sampling weights: a shuffled power law so frequencies differ.
  std::vector<double> weight(taxonomy.num_triplets());
  {
    Rng rng = root.child(4);
    std::vector<std::size_t> rank(weight.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    rng.shuffle(rank);
    for (std::size_t t = 0; t < weight.size(); ++t) weight[t] = 1.0 / std::sqrt(1.0 + static_cast<double>(rank[t]));
  }
  const double total_weight = std::accumulate(weight.begin(), weight.end(), 0.0);
  auto sample_triplet = [&](Rng& rng) {
    double u = rng.uniform() * total_weight;
    for (std::size_t t = 0; t < weight.size(); ++t) {
      if ((u -= weight[t]) < 0) return t;
    }
    return weight.size() - 1;
  };

  const double size = static_cast<double>(c.image_size);
  const double stride = size / static_cast<double>(c.map_size);
  // Painting happens in d_up space: p = W_out u so that p^T W_out ~ u.
  auto lift = [&](const Tensor& u) {
    Tensor p({c.d_up});
    for (std::size_t i = 0; i < c.d_up; ++i) p[i] = dot(w_out.row(i), u.data());
    return p;
  };

  std::vector<Tensor> labels;
  for (const auto& name : objects) labels.push_back(data::class_label(name, embedder, encoder));

  auto make_partition = [&](const std::string& prefix, std::size_t count, Rng rng) {
    data::Partition part;
    for (std::size_t n = 0; n < count; ++n) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", prefix.c_str(), n);
      data::Image img;
      img.image_id = id;
      img.width = img.height = size;
      img.feature_file = "features/" + img.image_id + ".vdt";
      Tensor map({c.map_size, c.map_size, c.d_up});
      for (auto& x : map.data()) x = rng.normal() * c.noise / std::sqrt(static_cast<double>(c.d_up));

      std::vector<Placed> placed;
      const std::size_t interactions = rng.uniform() < 0.3 ? 2 : 1;
      for (std::size_t k = 0; k < interactions; ++k) {
        Box hb, ob;
        bool ok = false;
        for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
          hb = random_box(rng, size, 14.0, 22.0, 20.0, 32.0);
          ob = partner_box(rng, hb, size);
          ok = !overlaps(hb, placed, 0.05) && !overlaps(ob, placed, 0.05) && ob.area() > 0;
        }
        if (!ok) break;
        const std::size_t t = sample_triplet(rng);
        const auto& trip = taxonomy.triplet(t);
        std::vector<std::size_t> pair_verbs{trip.verb};
        if (rng.uniform() < 0.2) {
          const std::size_t v2 = rng.below(c.verbs);
          if (v2 != trip.verb && taxonomy.find(v2, trip.object)) pair_verbs.push_back(v2);
        }
        placed.push_back({hb, 0});
        placed.push_back({ob, trip.object});
        const Box ub = union_box(hb, ob);
        for (std::size_t v : pair_verbs) {
          const double div = lat.diversity[v];
          paint(map, ub, lift(jittered(lat.verb_union[v], div, rng) *= c.latent_scale).data(), stride);
          paint(map, hb, lift(jittered(lat.verb_human[v], div, rng) *= c.latent_scale).data(), stride);
          paint(map, ob, lift(jittered(lat.verb_object[v], div, rng) *= c.latent_scale).data(), stride);
          part.ground_truth.push_back({img.image_id, hb, ob, *taxonomy.find(v, trip.object)});
        }
      }
      const std::size_t extra_people = rng.below(c.bystanders + 1);
      const std::size_t extra_objects = rng.below(c.distractors + 1);
      for (std::size_t k = 0; k < extra_people + extra_objects; ++k) {
        const bool person = k < extra_people;
        for (int attempt = 0; attempt < 50; ++attempt) {
          const Box b = person ? random_box(rng, size, 14.0, 22.0, 20.0, 32.0)
                               : random_box(rng, size, 12.0, 22.0, 12.0, 22.0);
          if (overlaps(b, placed, 0.05)) continue;
          placed.push_back({b, person ? 0 : 1 + rng.below(c.objects - 1)});
          break;
        }
      }
      for (const auto& p : placed) {
        paint(map, p.box, lift(p.class_id == 0 ? lat.person : lat.object[p.class_id]).data(), stride);
      }
      for (const auto& p : placed) {
        region::DetectionInstance det;
        det.class_id = p.class_id;
        det.score = rng.uniform(0.5, 1.0);
        Box b = p.box;
        b.x1 += rng.normal() * c.jitter;
        b.y1 += rng.normal() * c.jitter;
        b.x2 += rng.normal() * c.jitter;
        b.y2 += rng.normal() * c.jitter;
        if (b.x2 < b.x1) std::swap(b.x1, b.x2);
        if (b.y2 < b.y1) std::swap(b.y1, b.y2);
        det.box = clamp_box(b, size);
        det.label = labels[det.class_id];
        img.detections.push_back(std::move(det));
      }
      // A low-confidence false positive that the threshold should discard.
      {
        region::DetectionInstance junk;
        junk.class_id = rng.below(c.objects);
        junk.score = rng.uniform(0.01, 0.15);
        junk.box = random_box(rng, size, 10.0, 20.0, 10.0, 20.0);
        junk.label = labels[junk.class_id];
        img.detections.push_back(std::move(junk));
      }
      img.features = quantize_f32(map);
      part.images.push_back(std::move(img));
    }
    return part;
  };

  World world{taxonomy, std::move(pool), make_partition("train", c.train_images, root.child(5)),
              make_partition("test", c.test_images, root.child(6))};
  std::vector<std::size_t> freq = sample_counts(world.taxonomy.num_triplets());
  for (const auto& g : world.train.ground_truth) ++freq[g.triplet_id];
  world.taxonomy.set_frequencies(freq);
  return world;
}

void write_world(const std::filesystem::path& dir, const World& world) {
  world.taxonomy.save(dir / "taxonomy.json");
  world.concepts.save(dir / "concepts.json");
  data::save_partition(dir / "train", world.train);
  data::save_partition(dir / "test", world.test);
}

}  // namespace vdrp::synth
