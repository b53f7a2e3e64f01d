// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/text_encoder.hpp"

#include <cctype>
#include <cmath>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"
#include "vdrp/rng.hpp"

namespace vdrp {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Tensor mean_rows(const Tensor& tokens) {
  Tensor m({tokens.dim(1)});
  const double w = 1.0 / static_cast<double>(tokens.dim(0));
  for (std::size_t r = 0; r < tokens.dim(0); ++r) axpy(w, tokens.row(r), m.data());
  return m;
}

}  // namespace

std::vector<std::string> TokenEmbedder::tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Tensor TokenEmbedder::embed_word(const std::string& word) const {
  Rng rng(mix64(seed_ ^ fnv1a(word)));
  Tensor v({dim_});
  for (auto& x : v.data()) x = scale_ * rng.normal();
  return v;
}

Tensor TokenEmbedder::embed(const std::string& text) const {
  const auto words = tokenize(text);
  if (words.empty()) throw ValidationError("cannot embed text without words: '" + text + "'");
  Tensor out({words.size(), dim_});
  for (std::size_t i = 0; i < words.size(); ++i) {
    const Tensor w = embed_word(words[i]);
    std::copy(w.data().begin(), w.data().end(), out.row(i).begin());
  }
  return out;
}

void TextEncoder::check_input(const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(1) != token_dim()) {
    throw DimensionError(kind() + " encoder expects L x " + std::to_string(token_dim()) + " tokens");
  }
  if (max_length() != 0 && tokens.dim(0) > max_length()) {
    throw ValidationError(kind() + " encoder accepts at most " + std::to_string(max_length()) +
                          " tokens, got " + std::to_string(tokens.dim(0)));
  }
}

Tensor MeanPoolEncoder::encode(const Tensor& tokens) const {
  check_input(tokens);
  return mean_rows(tokens);
}

Tensor MeanPoolEncoder::encode_vjp(const Tensor& tokens, std::span<const double> grad_out) const {
  check_input(tokens);
  Tensor g({tokens.dim(0), dim_});
  const double w = 1.0 / static_cast<double>(tokens.dim(0));
  for (std::size_t r = 0; r < tokens.dim(0); ++r) axpy(w, grad_out, g.row(r));
  return g;
}

ProjectionEncoder::ProjectionEncoder(Tensor weight, std::string kind)
    : weight_(std::move(weight)), kind_(std::move(kind)) {
  if (weight_.rank() != 2) throw DimensionError("projection encoder weight must be d_t x d");
}

ProjectionEncoder ProjectionEncoder::random(std::size_t token_dim, std::size_t out_dim, std::uint64_t seed,
                                            double gain) {
  Rng rng(seed);
  Tensor w({token_dim, out_dim});
  const double s = gain / std::sqrt(static_cast<double>(token_dim));
  for (auto& v : w.data()) v = s * rng.normal();
  return ProjectionEncoder(std::move(w), "projection");
}

ProjectionEncoder ProjectionEncoder::from_file(const std::filesystem::path& path) {
  return ProjectionEncoder(read_vdt1(path), "file");
}

Tensor ProjectionEncoder::encode(const Tensor& tokens) const {
  check_input(tokens);
  const Tensor m = mean_rows(tokens);
  Tensor out({output_dim()});
  for (std::size_t i = 0; i < m.size(); ++i) axpy(m[i], weight_.row(i), out.data());
  for (auto& v : out.data()) v = std::tanh(v);
  return out;
}

Tensor ProjectionEncoder::encode_vjp(const Tensor& tokens, std::span<const double> grad_out) const {
  check_input(tokens);
  const Tensor t = encode(tokens);
  Tensor g_pre({output_dim()});
  for (std::size_t j = 0; j < g_pre.size(); ++j) g_pre[j] = grad_out[j] * (1.0 - t[j] * t[j]);
  Tensor g_mean({token_dim()});
  for (std::size_t i = 0; i < token_dim(); ++i) g_mean[i] = dot(weight_.row(i), g_pre.data());
  Tensor g({tokens.dim(0), token_dim()});
  const double w = 1.0 / static_cast<double>(tokens.dim(0));
  for (std::size_t r = 0; r < tokens.dim(0); ++r) axpy(w, g_mean.data(), g.row(r));
  return g;
}

}  // namespace vdrp
