// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/rap.hpp"

#include <json.hpp>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"

namespace vdrp::rap {

using nlohmann::json;

std::string to_string(Region r) {
  switch (r) {
    case Region::kHuman: return "human";
    case Region::kObject: return "object";
    case Region::kUnion: return "union";
  }
  return "?";
}

Region parse_region(const std::string& name) {
  if (name == "human") return Region::kHuman;
  if (name == "object") return Region::kObject;
  if (name == "union") return Region::kUnion;
  throw ValidationError("unknown region '" + name + "'");
}

ConceptPool::ConceptPool(std::size_t verbs, std::size_t k, std::size_t dim)
    : verbs_(verbs), k_(k), dim_(dim), emb_(verbs * 3), text_(verbs * 3), filled_(verbs * 3, false) {
  if (k == 0 || dim == 0) throw ParameterError("concept pool needs K > 0 and d > 0");
  for (auto& e : emb_) e = Tensor({k, dim});
  for (auto& t : text_) t.assign(k, "");
}

std::size_t ConceptPool::slot(std::size_t verb, Region region) const {
  if (verb >= verbs_) throw ValidationError("no concepts for verb " + std::to_string(verb));
  return verb * 3 + static_cast<std::size_t>(region);
}

const Tensor& ConceptPool::embeddings(std::size_t verb, Region region) const {
  const std::size_t s = slot(verb, region);
  if (!filled_[s]) {
    throw ValidationError("concept pool is missing (verb " + std::to_string(verb) + ", " + to_string(region) + ")");
  }
  return emb_[s];
}

Tensor& ConceptPool::embeddings(std::size_t verb, Region region) {
  return const_cast<Tensor&>(static_cast<const ConceptPool&>(*this).embeddings(verb, region));
}

const std::vector<std::string>& ConceptPool::texts(std::size_t verb, Region region) const {
  return text_[slot(verb, region)];
}

void ConceptPool::set(std::size_t verb, Region region, std::vector<Concept> concepts) {
  const std::size_t s = slot(verb, region);
  if (concepts.size() != k_) {
    throw ValidationError("(verb " + std::to_string(verb) + ", " + to_string(region) + ") has " +
                          std::to_string(concepts.size()) + " concepts, expected " + std::to_string(k_));
  }
  for (std::size_t i = 0; i < k_; ++i) {
    if (concepts[i].embedding.size() != dim_) throw DimensionError("concept embedding has the wrong dimension");
    if (!concepts[i].embedding.all_finite()) throw NumericError("concept embedding is not finite");
    std::copy(concepts[i].embedding.data().begin(), concepts[i].embedding.data().end(), emb_[s].row(i).begin());
    text_[s][i] = std::move(concepts[i].text);
  }
  filled_[s] = true;
}

void ConceptPool::validate() const {
  for (std::size_t v = 0; v < verbs_; ++v) {
    for (Region r : kRegions) (void)embeddings(v, r);
  }
}

ConceptPool ConceptPool::from_json_text(const std::string& text, const std::string& origin,
                                        const TokenEmbedder* embedder, const TextEncoder* encoder) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(origin + ": " + e.what());
  }
  if (!doc.is_object() || doc.empty()) throw ValidationError(origin + ": expected a non-empty object of verbs");
  std::size_t verbs = 0, k = 0, dim = 0;
  for (auto& [key, regions] : doc.items()) {
    verbs = std::max(verbs, static_cast<std::size_t>(std::stoul(key)) + 1);
    for (auto& [rname, list] : regions.items()) {
      if (k == 0) k = list.size();
      for (auto& c : list) {
        if (c.contains("embedding") && dim == 0) dim = c["embedding"].size();
      }
    }
  }
  if (dim == 0 && encoder) dim = encoder->output_dim();
  if (k == 0 || dim == 0) throw ValidationError(origin + ": cannot infer concept count or dimension");
  ConceptPool pool(verbs, k, dim);
  for (auto& [key, regions] : doc.items()) {
    const std::size_t v = std::stoul(key);
    for (auto& [rname, list] : regions.items()) {
      std::vector<Concept> concepts;
      for (auto& c : list) {
        Concept item{c.value("text", std::string{}), {}};
        if (c.contains("embedding")) {
          item.embedding = Tensor::vector(c["embedding"].get<std::vector<double>>());
        } else if (embedder && encoder) {
          item.embedding = encoder->encode(embedder->embed(item.text));
        } else {
          throw ValidationError(origin + ": concept without embedding for verb " + key + ", " + rname +
                                " and no text encoder configured");
        }
        concepts.push_back(std::move(item));
      }
      pool.set(v, parse_region(rname), std::move(concepts));
    }
  }
  pool.validate();
  return pool;
}

ConceptPool ConceptPool::load(const std::filesystem::path& path, const TokenEmbedder* embedder,
                              const TextEncoder* encoder) {
  return from_json_text(read_file(path), path.string(), embedder, encoder);
}

std::string ConceptPool::to_json_text() const {
  json doc = json::object();
  for (std::size_t v = 0; v < verbs_; ++v) {
    json regions = json::object();
    for (Region r : kRegions) {
      const std::size_t s = slot(v, r);
      if (!filled_[s]) continue;
      json list = json::array();
      for (std::size_t i = 0; i < k_; ++i) {
        std::vector<double> e;
        for (double x : emb_[s].row(i)) e.push_back(static_cast<double>(static_cast<float>(x)));
        list.push_back({{"text", text_[s][i]}, {"embedding", e}});
      }
      regions[to_string(r)] = list;
    }
    doc[std::to_string(v)] = regions;
  }
  return doc.dump();
}

void ConceptPool::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json_text()); }

ConceptScores score_concepts(std::span<const double> x, const Tensor& concepts) {
  if (concepts.rank() != 2 || concepts.dim(1) != x.size()) {
    throw DimensionError("region feature and concept dimensions differ");
  }
  ConceptScores out{Tensor({concepts.dim(0)}), false};
  if (norm(x) == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t k = 0; k < concepts.dim(0); ++k) out.scores[k] = cosine(x, concepts.row(k)).value;
  return out;
}

Tensor concept_vector(std::span<const double> scores, const Tensor& concepts,
                      const retrieval::RetrievalMode& mode) {
  if (scores.size() != concepts.dim(0)) throw DimensionError("score count differs from concept count");
  const auto w = retrieval::retrieve_weights(scores, mode);
  Tensor out({concepts.dim(1)});
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (w.weights[k] != 0.0) axpy(w.weights[k], concepts.row(k), out.data());
  }
  return out;
}

Tensor refine(std::span<const double> prompt, std::span<const double> concept_vec, double gamma) {
  if (prompt.size() != concept_vec.size()) throw DimensionError("prompt and concept vector sizes differ");
  Tensor out = Tensor::vector({prompt.begin(), prompt.end()});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = prompt[i] + concept_vec[i] * gamma;
  return out;
}

RegionPrompts build_region_prompts(const Tensor& base_prompts, const ConceptPool& pool, Region region,
                                   std::span<const double> x, const RapConfig& config) {
  const std::size_t verbs = base_prompts.dim(0);
  if (pool.verbs() < verbs) throw ValidationError("concept pool covers fewer verbs than the prompt set");
  RegionPrompts out{base_prompts, false};
  if (norm(x) == 0.0) {
    out.skipped = true;
    return out;
  }
  for (std::size_t v = 0; v < verbs; ++v) {
    const Tensor& concepts = pool.embeddings(v, region);
    const auto s = score_concepts(x, concepts);
    const Tensor c = concept_vector(s.scores.data(), concepts, config.mode);
    const Tensor t = refine(base_prompts.row(v), c.data(), config.gamma);
    std::copy(t.data().begin(), t.data().end(), out.prompts.row(v).begin());
  }
  return out;
}

RegionAwarePromptSet build_region_prompts(const Tensor& base_prompts, const ConceptPool& pool,
                                          const std::array<std::span<const double>, 3>& features,
                                          const RapConfig& config) {
  RegionAwarePromptSet out;
  for (Region r : kRegions) {
    const auto i = static_cast<std::size_t>(r);
    out.sets[i] = build_region_prompts(base_prompts, pool, r, features[i], config);
  }
  return out;
}

RegionPromptGrads region_prompts_backward(const Tensor& base_prompts, const ConceptPool& pool, Region region,
                                          std::span<const double> x, const RapConfig& config,
                                          const Tensor& grad_prompts) {
  RegionPromptGrads g{grad_prompts, Tensor({x.size()})};
  if (norm(x) == 0.0 || config.gamma == 0.0) return g;
  for (std::size_t v = 0; v < base_prompts.dim(0); ++v) {
    const Tensor& concepts = pool.embeddings(v, region);
    const auto s = score_concepts(x, concepts);
    // dL/dW_k = gamma * <g_v, c_k>
    Tensor g_w({concepts.dim(0)});
    for (std::size_t k = 0; k < concepts.dim(0); ++k) {
      g_w[k] = config.gamma * dot(grad_prompts.row(v), concepts.row(k));
    }
    const Tensor g_s = retrieval::retrieve_weights_vjp(s.scores.data(), config.mode, g_w.data());
    for (std::size_t k = 0; k < concepts.dim(0); ++k) {
      if (g_s[k] != 0.0) cosine_grad_a(x, concepts.row(k), g_s[k], g.feature.data());
    }
  }
  return g;
}

}  // namespace vdrp::rap
