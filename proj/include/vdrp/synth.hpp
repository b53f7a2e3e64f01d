// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vdrp/dataset.hpp"
#include "vdrp/eval.hpp"
#include "vdrp/rap.hpp"
#include "vdrp/text_encoder.hpp"

// Seeded synthetic benchmark with planted compositional structure. Each verb
// owns a union latent aligned with its prompt encoding plus human- and
// object-region latents shared across objects; concept pools hold noisy copies
// of the region latents among unrelated distractor concepts.
namespace vdrp::synth {

struct SynthConfig {
  std::size_t verbs = 10;
  std::size_t objects = 20;  // including the person class 0
  double valid_fraction = 0.5;
  std::size_t train_images = 240;
  std::size_t test_images = 200;
  std::size_t image_size = 64;
  std::size_t map_size = 8;
  double noise = 0.3;
  double diversity = 0.3;
  double jitter = 1.5;
  std::size_t concepts_per_region = 10;
  std::size_t concepts_relevant = 3;
  std::size_t distractors = 4;
  std::size_t bystanders = 4;
  double latent_scale = 2.0;
  std::size_t d_up = 32;
  std::string prompt_template = "a photo of a person is {verb} an object";
  std::uint64_t seed = 0;
};

struct World {
  eval::Taxonomy taxonomy;
  rap::ConceptPool concepts;
  data::Partition train;
  data::Partition test;
};

std::vector<std::string> verb_names(std::size_t n);
std::vector<std::string> object_names(std::size_t n);

// `w_out` is the d_up x d output projection the model will apply to the maps.
World generate(const SynthConfig& config, const TextEncoder& encoder, const TokenEmbedder& embedder,
               const Tensor& w_out);

// taxonomy.json, concepts.json, train/ and test/.
void write_world(const std::filesystem::path& dir, const World& world);

}  // namespace vdrp::synth
