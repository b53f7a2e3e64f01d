// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "vdrp/eval.hpp"
#include "vdrp/region.hpp"
#include "vdrp/tensor.hpp"
#include "vdrp/text_encoder.hpp"

namespace vdrp::data {

struct Image {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<region::DetectionInstance> detections;
  std::string feature_file;  // relative to the partition directory
  Tensor features;           // H x W x d_up patch grid
};

struct Partition {
  std::vector<Image> images;
  std::vector<eval::GroundTruthRecord> ground_truth;
};

// detections.jsonl: one image per line,
//   {image_id, width, height, features, instances: [{score, class_id, box, label?}]}
// Missing label embeddings are derived from the class name with the text encoder.
std::vector<Image> parse_detections(const std::string& text, const std::string& origin,
                                    const eval::Taxonomy& taxonomy, const TokenEmbedder& embedder,
                                    const TextEncoder& encoder);
std::string format_detections(const std::vector<Image>& images, bool inline_labels = false);

// Reads detections.jsonl, gts.jsonl and the referenced feature files.
Partition load_partition(const std::filesystem::path& dir, const eval::Taxonomy& taxonomy,
                         const TokenEmbedder& embedder, const TextEncoder& encoder);
void save_partition(const std::filesystem::path& dir, const Partition& partition);

// Label embedding of an object class name.
Tensor class_label(const std::string& name, const TokenEmbedder& embedder, const TextEncoder& encoder);

}  // namespace vdrp::data
