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

#include <optional>
#include <span>
#include <vector>

#include "sndobj/encoders.hpp"

namespace sndobj {

// One training batch in embedding space. All vectors share dim; language may
// be absent (finetuning is audiovisual only) and backgrounds are optional
// per sample.
struct BatchEmbeddings {
    std::vector<std::vector<double>> vision;
    std::vector<std::vector<double>> audio;
    std::vector<std::vector<double>> language;
    std::vector<std::optional<std::vector<double>>> background;

    std::size_t size() const { return audio.size(); }
};

struct LossOutput {
    double value = 0.0;
    std::vector<std::vector<double>> d_vision;
    std::vector<std::vector<double>> d_audio;
    std::vector<std::vector<double>> d_language;
    std::vector<std::optional<std::vector<double>>> d_background;
};

struct ConsensusConfig {
    Modality anchor = Modality::audio;
    double alpha_vision = 0.5;
    double alpha_audio = 1.0;
    double alpha_language = 1.0;
    double tau = 0.07;

    double alpha(Modality m) const;
    void validate() const;
};

struct PairLoss {
    double value = 0.0;
    std::vector<std::vector<double>> d_x;
    std::vector<std::vector<double>> d_y;
};

/// Symmetric InfoNCE over a modality pair: both contrast directions summed,
/// positives on the diagonal, denominators stabilized with log_sum_exp.
PairLoss info_nce_pair(const std::vector<std::vector<double>>& x,
                       const std::vector<std::vector<double>>& y, double tau);

/// Sum of the symmetric InfoNCE losses over the three modality pairs
/// (vision,audio), (vision,language), (audio,language).
LossOutput align_loss(const BatchEmbeddings& batch, double tau);

/// kappa(t) = ((t+1)/2)^alpha, mapping a similarity in [-1,1] to [0,1].
/// Inputs beyond the domain by more than 1e-9 are rejected.
double kappa(double t, double alpha);

/// Inverse of the alpha=1 map: u -> 2u - 1, returning a consensus in [0,1]
/// to the raw similarity range.
double kappa_inv(double u);

/// Per-sample consensus c^i = kappa_inv(min over non-anchor modalities of
/// kappa(e_x^i . e_A^i, alpha_x)).
std::vector<double> consensus_scores(const BatchEmbeddings& batch, const ConsensusConfig& config);

/// (1/|B|) sum_i sum_{x != anchor} |e_x^i . e_A^i - c^i| with c^i treated as
/// a constant target during differentiation.
LossOutput consensus_loss(const BatchEmbeddings& batch, const ConsensusConfig& config);

/// Same loss with externally supplied targets; this is the functional the
/// gradients are exact for, and what a finite-difference probe must hold
/// fixed.
LossOutput consensus_loss_with_targets(const BatchEmbeddings& batch, const ConsensusConfig& config,
                                       std::span<const double> targets);

/// align_loss + consensus_loss, values and gradients summed.
LossOutput refine_loss(const BatchEmbeddings& batch, const ConsensusConfig& config);
LossOutput refine_loss_with_targets(const BatchEmbeddings& batch, const ConsensusConfig& config,
                                    std::span<const double> targets);

/// Audiovisual InfoNCE whose denominators additionally contain every
/// background-pooled visual embedding present in the batch. Samples without
/// a background contribute batch negatives only.
LossOutput finetune_loss(const BatchEmbeddings& batch, double tau);

}  // namespace sndobj
