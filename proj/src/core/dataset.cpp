// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/dataset.hpp"

#include <sstream>

#include <json.hpp>

#include "vdrp/error.hpp"
#include "vdrp/io.hpp"

namespace vdrp::data {

using nlohmann::json;

Tensor class_label(const std::string& name, const TokenEmbedder& embedder, const TextEncoder& encoder) {
  return encoder.encode(embedder.embed(name));
}

std::vector<Image> parse_detections(const std::string& text, const std::string& origin,
                                    const eval::Taxonomy& taxonomy, const TokenEmbedder& embedder,
                                    const TextEncoder& encoder) {
  std::vector<Tensor> labels;
  for (const auto& name : taxonomy.objects()) labels.push_back(class_label(name, embedder, encoder));

  std::vector<Image> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      Image img;
      img.image_id = j.at("image_id").get<std::string>();
      img.width = j.at("width").get<double>();
      img.height = j.at("height").get<double>();
      if (!(img.width > 0 && img.height > 0)) throw ValidationError("image size must be positive");
      img.feature_file = j.value("features", std::string{});
      for (const auto& d : j.at("instances")) {
        region::DetectionInstance inst;
        inst.score = d.at("score").get<double>();
        if (!(inst.score >= 0.0 && inst.score <= 1.0)) throw ValidationError("detection score outside [0, 1]");
        inst.class_id = d.at("class_id").get<std::size_t>();
        if (inst.class_id >= taxonomy.num_objects()) {
          throw ValidationError("unknown class id " + std::to_string(inst.class_id));
        }
        const auto& b = d.at("box");
        if (!b.is_array() || b.size() != 4) throw ValidationError("box must be [x1, y1, x2, y2]");
        inst.box = make_box(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
        if (d.contains("label")) {
          inst.label = Tensor::vector(d.at("label").get<std::vector<double>>());
          if (inst.label.size() != encoder.output_dim()) throw DimensionError("inline label has the wrong size");
        } else {
          inst.label = labels[inst.class_id];
        }
        img.detections.push_back(std::move(inst));
      }
      out.push_back(std::move(img));
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return out;
}

std::string format_detections(const std::vector<Image>& images, bool inline_labels) {
  std::string out;
  for (const auto& img : images) {
    json inst = json::array();
    for (const auto& d : img.detections) {
      json o{{"score", d.score}, {"class_id", d.class_id}, {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}};
      if (inline_labels) o["label"] = d.label.values();
      inst.push_back(o);
    }
    out += json{{"image_id", img.image_id},
                {"width", img.width},
                {"height", img.height},
                {"features", img.feature_file},
                {"instances", inst}}
               .dump() +
           "\n";
  }
  return out;
}

Partition load_partition(const std::filesystem::path& dir, const eval::Taxonomy& taxonomy,
                         const TokenEmbedder& embedder, const TextEncoder& encoder) {
  const auto det_path = dir / "detections.jsonl";
  const auto gt_path = dir / "gts.jsonl";
  for (const auto& p : {det_path, gt_path}) {
    if (!std::filesystem::exists(p)) throw IoError("missing input " + p.string());
  }
  Partition part;
  part.images = parse_detections(read_file(det_path), det_path.string(), taxonomy, embedder, encoder);
  for (auto& img : part.images) {
    if (img.feature_file.empty()) throw ValidationError("image " + img.image_id + " has no feature file");
    img.features = read_vdt1(dir / img.feature_file);
    if (img.features.rank() != 3) throw DimensionError(img.feature_file + ": feature grid must be H x W x d");
  }
  part.ground_truth = eval::read_ground_truth(gt_path);
  for (const auto& g : part.ground_truth) (void)taxonomy.triplet(g.triplet_id);
  return part;
}

void save_partition(const std::filesystem::path& dir, const Partition& partition) {
  for (const auto& img : partition.images) write_vdt1(dir / img.feature_file, img.features);
  write_file_atomic(dir / "detections.jsonl", format_detections(partition.images));
  write_file_atomic(dir / "gts.jsonl", eval::format_ground_truth(partition.ground_truth));
}

}  // namespace vdrp::data
