// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vdrp/tensor.hpp"

namespace vdrp {

// Hashed-vocabulary token embeddings: every lower-cased alphanumeric word maps
// to a fixed N(0, scale^2) vector seeded by (seed, FNV-1a(word)).
class TokenEmbedder {
 public:
  TokenEmbedder(std::size_t dim, std::uint64_t seed, double scale = 1.0)
      : dim_(dim), seed_(seed), scale_(scale) {}

  static std::vector<std::string> tokenize(const std::string& text);

  std::size_t dim() const noexcept { return dim_; }
  Tensor embed_word(const std::string& word) const;
  // L x dim, one row per token. Throws ValidationError for text without words.
  Tensor embed(const std::string& text) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  double scale_;
};

// Maps a token sequence (L x d_t) to one embedding (d).
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t token_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual std::size_t max_length() const { return 77; }
  virtual bool deterministic() const { return true; }
  virtual Tensor encode(const Tensor& tokens) const = 0;
  // dL/dtokens given dL/doutput.
  virtual Tensor encode_vjp(const Tensor& tokens, std::span<const double> grad_out) const = 0;

 protected:
  void check_input(const Tensor& tokens) const;
};

// Column mean of the token rows; requires d_t == d.
class MeanPoolEncoder final : public TextEncoder {
 public:
  explicit MeanPoolEncoder(std::size_t dim) : dim_(dim) {}
  std::string kind() const override { return "mean_pool"; }
  std::size_t token_dim() const override { return dim_; }
  std::size_t output_dim() const override { return dim_; }
  Tensor encode(const Tensor& tokens) const override;
  Tensor encode_vjp(const Tensor& tokens, std::span<const double> grad_out) const override;

 private:
  std::size_t dim_;
};

// tanh(mean(tokens) W): a fixed projection of the mean-pooled sequence
// followed by a bounded nonlinearity. W is either drawn from a seed or
// loaded from a VDT1 file (d_t x d).
class ProjectionEncoder final : public TextEncoder {
 public:
  explicit ProjectionEncoder(Tensor weight, std::string kind = "projection");
  static ProjectionEncoder random(std::size_t token_dim, std::size_t out_dim, std::uint64_t seed,
                                  double gain = 3.0);
  static ProjectionEncoder from_file(const std::filesystem::path& path);

  std::string kind() const override { return kind_; }
  std::size_t token_dim() const override { return weight_.dim(0); }
  std::size_t output_dim() const override { return weight_.dim(1); }
  const Tensor& weight() const noexcept { return weight_; }
  Tensor encode(const Tensor& tokens) const override;
  Tensor encode_vjp(const Tensor& tokens, std::span<const double> grad_out) const override;

 private:
  Tensor weight_;
  std::string kind_;
};

}  // namespace vdrp
