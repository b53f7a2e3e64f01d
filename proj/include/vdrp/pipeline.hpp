// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vdrp/config.hpp"
#include "vdrp/dataset.hpp"
#include "vdrp/diversity.hpp"
#include "vdrp/eval.hpp"
#include "vdrp/model.hpp"
#include "vdrp/rap.hpp"
#include "vdrp/synth.hpp"

namespace vdrp::pipeline {

// Everything a run reads, resolved from a config.
struct Experiment {
  RunConfig config;
  std::shared_ptr<const TextEncoder> encoder;
  std::shared_ptr<const TokenEmbedder> embedder;
  Tensor w_out;
  eval::Taxonomy taxonomy;
  rap::ConceptPool concepts;
  data::Partition train;
  data::Partition test;
  eval::SplitSpec split;
};

synth::SynthConfig synth_config(const RunConfig& config);
Tensor frozen_output_projection(const RunConfig& config);

// Loads paths.data (and paths.splits when set).
Experiment load_experiment(const RunConfig& config, bool need_train, bool need_test);
// Generates the synthetic world in memory.
Experiment synthetic_experiment(const RunConfig& config);

struct VarianceArtifact {
  std::vector<stats::VerbStats> stats;
  std::vector<stats::VerbGroup> groups;

  std::string to_json_text() const;
  static VarianceArtifact from_json_text(const std::string& text, const std::string& origin);
};

// Per-verb statistics of frozen-backbone union features over seen training
// interactions, plus semantic neighbor groups from static prompt encodings.
VarianceArtifact estimate_variance(const Experiment& exp, const RunConfig& config);

std::vector<vdp::BasePrompt> base_prompts(const Experiment& exp, const RunConfig& config);
Tensor static_prompt_encodings(const Experiment& exp, const RunConfig& config);

model::Model build_model(const Experiment& exp, const RunConfig& config, const VarianceArtifact& variance);

std::vector<eval::PredictionRecord> predict_partition(const model::Model& model, const data::Partition& part,
                                                      const eval::Taxonomy& taxonomy);

struct ChanceLevel {
  std::optional<double> full, seen, unseen;
};
// Mean report under random permutations of the prediction scores.
ChanceLevel permutation_chance(std::vector<eval::PredictionRecord> predictions,
                               std::span<const eval::GroundTruthRecord> ground_truth, const eval::SplitSpec& split,
                               std::size_t permutations, std::uint64_t seed);

struct ArmOutcome {
  std::string name;
  RunConfig config;
  model::TrainResult training;
  eval::MapReport report;
  ChanceLevel chance;
  Tensor prompts;  // final diversity-aware prompts
  std::vector<eval::PredictionRecord> predictions;
};

// Overrides for a named arm: static, vdp, rap, full, or key=value[+key=value].
RunConfig arm_config(const RunConfig& base, const std::string& arm);

ArmOutcome run_arm(const Experiment& exp, const std::string& arm);

// CLI commands. Each writes its outputs plus manifest.json into `out` and
// returns a short human-readable summary.
std::string run_command(const std::string& command, const RunConfig& config, const std::filesystem::path& out);
const std::vector<std::string>& command_names();

}  // namespace vdrp::pipeline
