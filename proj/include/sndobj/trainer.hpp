// Copyright 2026 The sndobj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sndobj/losses.hpp"
#include "sndobj/synthworld.hpp"

namespace sndobj {

enum class Stage { align, refine, finetune };
enum class OptimizerKind { adam, sgd };

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);

struct TrainConfig {
    std::uint32_t epochs_align = 5;
    std::uint32_t epochs_refine = 5;
    std::uint32_t epochs_finetune = 5;
    std::uint32_t batch_size = 16;
    double lr = 5e-5;
    double tau = 0.07;
    double theta = 0.5;          // objectness threshold for pooling
    double beta_percent = 50.0;  // background sampling percentage
    ConsensusConfig consensus;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    std::uint32_t embed_dim = 32;
    std::uint32_t hidden_dim = 32;
    bool use_object_mask = true;
    bool freeze_language = true;

    std::uint32_t epochs_for(Stage s) const;
    void validate() const;
};

struct EpochRecord {
    std::string stage;
    std::uint32_t epoch = 0;
    double mean_loss = 0.0;
    double max_grad_norm = 0.0;
    std::uint32_t pool_fallbacks = 0;      // samples where masking removed every patch
    std::uint32_t missing_backgrounds = 0; // finetune samples without background patches
    double wall_s = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double wall_s = 0.0;
    std::string final_checkpoint;

    /// Deterministic content only (no wall times); equal strings mean equal runs.
    std::string fingerprint() const;
};

/// Shuffled permutation of [0, n) chunked into batch_size pieces; the last
/// short batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed);

/// Runs one stage of epochs over the dataset, updating params in place.
TrainReport run_stage(const Dataset& dataset, ModelParams& params, const TrainConfig& config,
                      Stage stage);

struct PipelineResult {
    ModelParams after_align;
    ModelParams after_refine;
    ModelParams after_finetune;
    TrainReport align_report;
    TrainReport refine_report;
    TrainReport finetune_report;
};

/// align -> refine on the pretraining set, then finetune on the finetuning
/// set. The refine snapshot feeds action discovery; the finetune snapshot
/// feeds object detection.
PipelineResult run_pipeline(const Dataset& pretrain, const Dataset& finetune_set,
                            ModelParams params, const TrainConfig& config);

/// Fresh model sized for a dataset's feature dims.
ModelParams init_for_dataset(const Dataset& dataset, const TrainConfig& config);

/// Throws when the model's input dims do not match the dataset's.
void check_model_matches(const ModelParams& params, const WorldSpec& spec);

}  // namespace sndobj
