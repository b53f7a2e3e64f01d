// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vdrp/retrieval.hpp"
#include "vdrp/tensor.hpp"
#include "vdrp/text_encoder.hpp"

namespace vdrp::rap {

enum class Region { kHuman = 0, kObject = 1, kUnion = 2 };
inline constexpr std::array<Region, 3> kRegions{Region::kHuman, Region::kObject, Region::kUnion};

std::string to_string(Region r);
Region parse_region(const std::string& name);

struct Concept {
  std::string text;
  Tensor embedding;
};

// Concepts for every (verb, region), K entries each.
class ConceptPool {
 public:
  ConceptPool() = default;
  ConceptPool(std::size_t verbs, std::size_t k, std::size_t dim);

  std::size_t verbs() const noexcept { return verbs_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t dim() const noexcept { return dim_; }

  // K x d embedding matrix for (verb, region).
  const Tensor& embeddings(std::size_t verb, Region region) const;
  Tensor& embeddings(std::size_t verb, Region region);
  const std::vector<std::string>& texts(std::size_t verb, Region region) const;
  void set(std::size_t verb, Region region, std::vector<Concept> concepts);

  void validate() const;

  // Entries without an "embedding" are embedded with `embedder` + `encoder`
  // when provided; otherwise they are an error.
  static ConceptPool load(const std::filesystem::path& path, const TokenEmbedder* embedder = nullptr,
                          const TextEncoder* encoder = nullptr);
  static ConceptPool from_json_text(const std::string& text, const std::string& origin,
                                    const TokenEmbedder* embedder = nullptr, const TextEncoder* encoder = nullptr);
  std::string to_json_text() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t slot(std::size_t verb, Region region) const;

  std::size_t verbs_ = 0, k_ = 0, dim_ = 0;
  std::vector<Tensor> emb_;
  std::vector<std::vector<std::string>> text_;
  std::vector<bool> filled_;
};

struct ConceptScores {
  Tensor scores;
  bool degenerate = false;  // zero-norm feature
};

ConceptScores score_concepts(std::span<const double> x, const Tensor& concepts);

Tensor concept_vector(std::span<const double> scores, const Tensor& concepts,
                      const retrieval::RetrievalMode& mode);

Tensor refine(std::span<const double> prompt, std::span<const double> concept_vec, double gamma);

struct RapConfig {
  double gamma = 0.2;
  retrieval::RetrievalMode mode = retrieval::RetrievalMode::sparsemax();
};

// V x d prompts for one region of one candidate pair.
struct RegionPrompts {
  Tensor prompts;
  bool skipped = false;  // zero-norm region feature, prompts == base
};

RegionPrompts build_region_prompts(const Tensor& base_prompts, const ConceptPool& pool, Region region,
                                   std::span<const double> x, const RapConfig& config);

struct RegionAwarePromptSet {
  std::array<RegionPrompts, 3> sets;  // indexed by Region
  const RegionPrompts& operator[](Region r) const { return sets[static_cast<std::size_t>(r)]; }
};

RegionAwarePromptSet build_region_prompts(const Tensor& base_prompts, const ConceptPool& pool,
                                          const std::array<std::span<const double>, 3>& features,
                                          const RapConfig& config);

struct RegionPromptGrads {
  Tensor base;     // V x d, added to dL/dbase
  Tensor feature;  // d
};

// Backward of build_region_prompts for one region; concepts stay frozen.
RegionPromptGrads region_prompts_backward(const Tensor& base_prompts, const ConceptPool& pool, Region region,
                                          std::span<const double> x, const RapConfig& config,
                                          const Tensor& grad_prompts);

}  // namespace vdrp::rap
