// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vdrp/classifier.hpp"
#include "vdrp/dataset.hpp"
#include "vdrp/diversity.hpp"
#include "vdrp/eval.hpp"
#include "vdrp/layers.hpp"
#include "vdrp/rap.hpp"
#include "vdrp/region.hpp"
#include "vdrp/roi_align.hpp"
#include "vdrp/text_encoder.hpp"
#include "vdrp/vdp.hpp"

namespace vdrp::model {

struct ModelConfig {
  std::size_t d = 32;
  std::size_t d_down = 8;
  std::size_t d_up = 32;
  std::size_t d_t = 32;
  std::size_t n_ctx = 24;
  std::size_t mlp_hidden = 64;
  std::size_t spatial_hidden = 16;
  std::size_t adapter_layers = 1;
  vdp::VdpConfig vdp;
  rap::RapConfig rap;
  double theta = 0.2;
  double spatial_eps = 1e-6;
  RoiAlignConfig roi{7, 2, 0.125, true};
  hoi::Branches branches;
  double focal_gamma = 2.0;
  double focal_alpha = 0.5;
  hoi::ScoreWeights score;
  bool resample_noise = false;
};

// Every trainable tensor.
struct Params {
  vdp::VdpParams vdp;
  Linear prior_proj;
  std::vector<region::AdapterBlock> adapters;
  region::SpatialHeadParams spatial;

  ParamList collect();
  std::size_t count();
};

// Zero-valued parameters with the architecture of `config`.
Params make_params(const ModelConfig& config);
Params init_params(const ModelConfig& config, std::uint64_t seed);
Params zeros_like(Params& p);

// Inputs held fixed during training.
struct Frozen {
  std::shared_ptr<const TextEncoder> encoder;
  std::vector<vdp::BasePrompt> base_prompts;
  std::vector<stats::GroupVariance> group_stats;
  rap::ConceptPool concepts;
  Tensor w_out;  // d_up x d
  Tensor noise;  // V x d
};

// d_up x d output projection: identity when square, else a seeded random map.
Tensor output_projection(std::size_t d_up, std::size_t d, std::uint64_t seed);

struct PairOutput {
  hoi::CandidatePair pair;
  hoi::LogitBundle logits;
};

class Model {
 public:
  Model(ModelConfig config, Params params, Frozen frozen);

  const ModelConfig& config() const noexcept { return config_; }
  Params& params() noexcept { return params_; }
  const Params& params() const noexcept { return params_; }
  const Frozen& frozen() const noexcept { return frozen_; }
  Frozen& frozen() noexcept { return frozen_; }
  std::size_t num_verbs() const noexcept { return frozen_.base_prompts.size(); }

  // Diversity-aware prompts (V x d) from the current parameters.
  vdp::PromptSet prompt_set(std::vector<vdp::VerbPromptCache>* caches = nullptr) const;

  // Frozen-backbone map rows ((H*W) x d) without adapters.
  Tensor backbone_rows(const data::Image& image) const;

  std::vector<PairOutput> forward(const data::Image& image, const Tensor& prompts) const;

  // Focal loss summed over verbs for the given pairs of one image.
  // `targets[i]` is empty for pairs excluded from the loss. Gradients are
  // scaled by `scale` and accumulated into `grad` and `grad_prompts`.
  double loss_and_backward(const data::Image& image, const Tensor& prompts,
                           const std::vector<Tensor>& targets, double scale, Params& grad,
                           Tensor& grad_prompts) const;

  // Prompt-to-loss gradient for a batch: returns the mean per-pair loss.
  struct BatchItem {
    const data::Image* image;
    std::vector<Tensor> targets;
  };
  double batch_loss(const std::vector<BatchItem>& batch, Params* grad) const;

  std::vector<eval::PredictionRecord> predict(const data::Image& image, const Tensor& prompts,
                                              const eval::Taxonomy& taxonomy) const;

 private:
  ModelConfig config_;
  Params params_;
  Frozen frozen_;
};

// Multi-hot verb targets for each candidate pair of `image`: the union of
// verbs of GTs matched with min(IoU_h, IoU_o) >= 0.5. Pairs matched to an
// unseen triplet get an empty tensor (excluded).
std::vector<Tensor> pair_targets(const data::Image& image, const std::vector<hoi::CandidatePair>& pairs,
                                 const std::vector<eval::GroundTruthRecord>& ground_truth,
                                 const eval::Taxonomy& taxonomy, const eval::SplitSpec& split);

// Throws ValidationError if any positive target names an unseen triplet.
void audit_targets(const data::Image& image, const std::vector<hoi::CandidatePair>& pairs,
                   const std::vector<Tensor>& targets, const eval::Taxonomy& taxonomy,
                   const eval::SplitSpec& split);

struct AdamConfig {
  double lr = 1e-3;
  double lr_min = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

double cosine_lr(const AdamConfig& config, std::size_t step, std::size_t total_steps);

class AdamW {
 public:
  AdamW(AdamConfig config, Params& params);
  void step(Params& params, Params& grad, double lr);
  std::size_t steps() const noexcept { return t_; }
  std::map<std::string, Tensor> state() const;
  void load_state(const std::map<std::string, Tensor>& state, std::size_t steps);

 private:
  AdamConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t steps = 200;
  std::size_t batch_images = 4;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> dump_dir;  // written on a non-finite loss
};

struct TrainResult {
  std::vector<double> loss_curve;
  std::size_t pairs_used = 0;
  std::size_t pairs_dropped = 0;
  std::size_t images_used = 0;
};

TrainResult train(Model& model, const data::Partition& data, const eval::Taxonomy& taxonomy,
                  const eval::SplitSpec& split, const TrainConfig& config, AdamW* optimizer = nullptr);

// Checkpoint layout: checkpoint.json index plus one VDT1 file per tensor.

void save_checkpoint(const std::filesystem::path& dir, Model& model, const AdamW* optimizer,
                     const std::string& extra_manifest_json);
// Restores the parameters and noise of `model` in place; returns the manifest text.
std::string load_checkpoint(const std::filesystem::path& dir, Model& model, AdamW* optimizer = nullptr);

}  // namespace vdrp::model
