// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdrp/eval.hpp"
#include "vdrp/model.hpp"
#include "vdrp/text_encoder.hpp"

namespace vdrp {

// Flat dotted-key configuration. Every key has a typed default; files and
// overrides may only touch known keys.
class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& defaults();

  void merge_json_text(const std::string& text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);
  // Parses `value` according to the type of the key's default.
  void set(const std::string& key, const std::string& value);
  void set_json(const std::string& key, const nlohmann::json& value);

  const nlohmann::json& values() const noexcept { return values_; }
  double number(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::uint64_t seed() const;

  // Sorted, fully resolved JSON.
  std::string to_json_text() const;

  model::ModelConfig model_config() const;
  model::TrainConfig train_config() const;
  eval::SplitParams split_params(const eval::Taxonomy& taxonomy) const;
  retrieval::RetrievalMode retrieval_mode() const;

  std::unique_ptr<TextEncoder> make_encoder() const;
  TokenEmbedder make_embedder() const;

 private:
  const nlohmann::json& at(const std::string& key) const;
  nlohmann::json values_;
};

}  // namespace vdrp
