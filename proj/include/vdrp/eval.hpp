// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdrp/geometry.hpp"

namespace vdrp::eval {

struct Triplet {
  std::size_t id = 0;
  std::size_t verb = 0;
  std::size_t object = 0;
  std::size_t frequency = 0;  // training instances
};

class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::vector<std::string> verbs, std::vector<std::string> objects, std::vector<Triplet> triplets);

  std::size_t num_verbs() const noexcept { return verbs_.size(); }
  std::size_t num_objects() const noexcept { return objects_.size(); }
  std::size_t num_triplets() const noexcept { return triplets_.size(); }
  const std::vector<std::string>& verbs() const noexcept { return verbs_; }
  const std::vector<std::string>& objects() const noexcept { return objects_; }
  const std::vector<Triplet>& triplets() const noexcept { return triplets_; }
  const Triplet& triplet(std::size_t id) const;
  std::optional<std::size_t> find(std::size_t verb, std::size_t object) const;

  void set_frequencies(std::span<const std::size_t> counts);

  std::string to_json_text() const;
  static Taxonomy from_json_text(const std::string& text, const std::string& origin = "<taxonomy>");
  static Taxonomy load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> verbs_;
  std::vector<std::string> objects_;
  std::vector<Triplet> triplets_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index_;
};

// 117 verbs, 80 objects (object 0 is the person class), 600 triplets with
// distinct frequencies. The last 12 object ids carry exactly 100 triplets and
// the last 20 verb ids exactly 84.
Taxonomy paper_scale_taxonomy(std::uint64_t seed = 0);

enum class SplitName { kNfUc, kRfUc, kUo, kUv };
SplitName parse_split_name(const std::string& name);
std::string to_string(SplitName name);

struct SplitParams {
  std::optional<std::size_t> composition_unseen;       // NF/RF; default T/5
  std::optional<std::vector<std::size_t>> unseen_objects;  // UO; default last round(O*12/80) ids
  std::optional<std::vector<std::size_t>> withheld_verbs;  // UV; default last round(V*20/117) ids
};

struct SplitSpec {
  std::string name;
  std::vector<std::size_t> seen;
  std::vector<std::size_t> unseen;

  bool is_unseen(std::size_t triplet) const;
  std::string to_json_text() const;
  static SplitSpec from_json_text(const std::string& text, const std::string& origin = "<split>");
};

SplitSpec build_split(const Taxonomy& taxonomy, SplitName name, const SplitParams& params = {});

struct GroundTruthRecord {
  std::string image_id;
  Box human;
  Box object;
  std::size_t triplet_id = 0;
};

struct PredictionRecord {
  std::string image_id;
  Box human;
  Box object;
  std::size_t triplet_id = 0;
  double score = 0.0;
};

std::vector<PredictionRecord> parse_predictions(const std::string& text, const std::string& origin);
std::vector<GroundTruthRecord> parse_ground_truth(const std::string& text, const std::string& origin);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
std::vector<GroundTruthRecord> read_ground_truth(const std::filesystem::path& path);
std::string format_predictions(std::span<const PredictionRecord> records);
std::string format_ground_truth(std::span<const GroundTruthRecord> records);

struct ApResult {
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_predictions = 0;
  bool ties = false;  // equal scores ranked by input order
};

// All-points AP for one triplet class. Predictions are ranked by descending
// score (stable) and greedily matched to the best still-unmatched GT of the
// same image with min(IoU_h, IoU_o) > 0.5.
ApResult average_precision(std::span<const PredictionRecord> predictions,
                           std::span<const GroundTruthRecord> ground_truth, std::size_t triplet);

// 2SU / (S + U); 0 when both are 0.
double harmonic_mean(double seen, double unseen);

struct MapReport {
  std::optional<double> full, seen, unseen, hm;
  std::size_t evaluated = 0, evaluated_seen = 0, evaluated_unseen = 0;
  bool ties = false;
  std::map<std::size_t, ApResult> per_triplet;

  std::string to_json_text() const;
};

MapReport map_report(std::span<const PredictionRecord> predictions, std::span<const GroundTruthRecord> ground_truth,
                     const SplitSpec& split);

}  // namespace vdrp::eval
