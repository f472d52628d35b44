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

#include "sndobj/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sndobj {

namespace {

// Subgradient of |d| with a dead zone: the consensus target equals the raw
// score exactly when the min is attained by an alpha=1 modality, so a strict
// sign() would turn rounding noise into an O(1) gradient.
constexpr double kSignTolerance = 1e-12;

double sign_with_tolerance(double d) {
    if (std::fabs(d) <= kSignTolerance) return 0.0;
    return d > 0.0 ? 1.0 : -1.0;
}

void check_batch_dims(const std::vector<std::vector<double>>& xs, const char* what) {
    if (xs.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
    const std::size_t dim = xs[0].size();
    for (const auto& v : xs) {
        if (v.size() != dim || dim == 0) {
            throw std::invalid_argument(std::string(what) + ": inconsistent embedding dims");
        }
    }
}

std::vector<std::vector<double>> zeros_like(const std::vector<std::vector<double>>& xs) {
    std::vector<std::vector<double>> g(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) g[i].assign(xs[i].size(), 0.0);
    return g;
}

void axpy(double a, std::span<const double> x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

const std::vector<std::vector<double>>& modality_of(const BatchEmbeddings& b, Modality m) {
    switch (m) {
        case Modality::vision: return b.vision;
        case Modality::audio: return b.audio;
        case Modality::language: return b.language;
    }
    throw std::invalid_argument("unknown modality");
}

std::vector<std::vector<double>>& grad_of(LossOutput& out, Modality m) {
    switch (m) {
        case Modality::vision: return out.d_vision;
        case Modality::audio: return out.d_audio;
        case Modality::language: return out.d_language;
    }
    throw std::invalid_argument("unknown modality");
}

}  // namespace

double ConsensusConfig::alpha(Modality m) const {
    switch (m) {
        case Modality::vision: return alpha_vision;
        case Modality::audio: return alpha_audio;
        case Modality::language: return alpha_language;
    }
    throw std::invalid_argument("unknown modality");
}

void ConsensusConfig::validate() const {
    if (alpha_vision <= 0.0 || alpha_audio <= 0.0 || alpha_language <= 0.0) {
        throw std::invalid_argument("ConsensusConfig: alphas must be positive");
    }
    if (tau <= 0.0) throw std::invalid_argument("ConsensusConfig: tau must be positive");
}

PairLoss info_nce_pair(const std::vector<std::vector<double>>& x,
                       const std::vector<std::vector<double>>& y, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("info_nce_pair: tau must be positive");
    check_batch_dims(x, "info_nce_pair");
    check_batch_dims(y, "info_nce_pair");
    if (x.size() != y.size() || x[0].size() != y[0].size()) {
        throw std::invalid_argument("info_nce_pair: batch shape mismatch");
    }
    const std::size_t b = x.size();
    const double inv_b = 1.0 / static_cast<double>(b);

    std::vector<double> sim(b * b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < b; ++l) sim[i * b + l] = dot(x[i], y[l]);
    }

    PairLoss out;
    out.d_x = zeros_like(x);
    out.d_y = zeros_like(y);

    std::vector<double> logits(b);
    // x -> y direction: row i of sim contrasts x_i against all y.
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < b; ++l) logits[l] = sim[i * b + l] / tau;
        const double lse = log_sum_exp(logits);
        out.value += inv_b * (lse - logits[i]);
        for (std::size_t l = 0; l < b; ++l) {
            const double p = std::exp(logits[l] - lse);
            const double c = inv_b * (p - (l == i ? 1.0 : 0.0)) / tau;
            axpy(c, y[l], out.d_x[i]);
            axpy(c, x[i], out.d_y[l]);
        }
    }
    // y -> x direction: column i of sim contrasts y_i against all x.
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < b; ++l) logits[l] = sim[l * b + i] / tau;
        const double lse = log_sum_exp(logits);
        out.value += inv_b * (lse - logits[i]);
        for (std::size_t l = 0; l < b; ++l) {
            const double p = std::exp(logits[l] - lse);
            const double c = inv_b * (p - (l == i ? 1.0 : 0.0)) / tau;
            axpy(c, x[l], out.d_y[i]);
            axpy(c, y[i], out.d_x[l]);
        }
    }
    return out;
}

LossOutput align_loss(const BatchEmbeddings& batch, double tau) {
    if (batch.vision.size() != batch.size() || batch.language.size() != batch.size()) {
        throw std::invalid_argument("align_loss: all three modalities required");
    }
    const PairLoss va = info_nce_pair(batch.vision, batch.audio, tau);
    const PairLoss vl = info_nce_pair(batch.vision, batch.language, tau);
    const PairLoss al = info_nce_pair(batch.audio, batch.language, tau);

    LossOutput out;
    out.value = va.value + vl.value + al.value;
    out.d_vision = zeros_like(batch.vision);
    out.d_audio = zeros_like(batch.audio);
    out.d_language = zeros_like(batch.language);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        axpy(1.0, va.d_x[i], out.d_vision[i]);
        axpy(1.0, vl.d_x[i], out.d_vision[i]);
        axpy(1.0, va.d_y[i], out.d_audio[i]);
        axpy(1.0, al.d_x[i], out.d_audio[i]);
        axpy(1.0, vl.d_y[i], out.d_language[i]);
        axpy(1.0, al.d_y[i], out.d_language[i]);
    }
    return out;
}

double kappa(double t, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("kappa: alpha must be positive");
    if (t < -1.0 - 1e-9 || t > 1.0 + 1e-9) {
        throw std::invalid_argument("kappa: t outside [-1,1]");
    }
    t = std::clamp(t, -1.0, 1.0);
    return std::pow((t + 1.0) / 2.0, alpha);
}

double kappa_inv(double u) {
    if (u < -1e-9 || u > 1.0 + 1e-9) throw std::invalid_argument("kappa_inv: u outside [0,1]");
    u = std::clamp(u, 0.0, 1.0);
    return 2.0 * u - 1.0;
}

std::vector<double> consensus_scores(const BatchEmbeddings& batch, const ConsensusConfig& config) {
    config.validate();
    const auto& anchor = modality_of(batch, config.anchor);
    std::vector<double> c(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double lowest = 1.0;
        for (const Modality m : {Modality::vision, Modality::audio, Modality::language}) {
            if (m == config.anchor) continue;
            const double s = dot(modality_of(batch, m)[i], anchor[i]);
            lowest = std::min(lowest, kappa(s, config.alpha(m)));
        }
        c[i] = kappa_inv(lowest);
    }
    return c;
}

LossOutput consensus_loss_with_targets(const BatchEmbeddings& batch, const ConsensusConfig& config,
                                       std::span<const double> targets) {
    config.validate();
    if (batch.vision.size() != batch.size() || batch.language.size() != batch.size()) {
        throw std::invalid_argument("consensus_loss: all three modalities required");
    }
    if (targets.size() != batch.size()) {
        throw std::invalid_argument("consensus_loss: target count mismatch");
    }
    const auto& anchor = modality_of(batch, config.anchor);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    LossOutput out;
    out.d_vision = zeros_like(batch.vision);
    out.d_audio = zeros_like(batch.audio);
    out.d_language = zeros_like(batch.language);
    auto& d_anchor = grad_of(out, config.anchor);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (const Modality m : {Modality::vision, Modality::audio, Modality::language}) {
            if (m == config.anchor) continue;
            const auto& e = modality_of(batch, m)[i];
            const double s = dot(e, anchor[i]);
            const double d = s - targets[i];
            out.value += inv_b * std::fabs(d);
            const double g = inv_b * sign_with_tolerance(d);
            if (g != 0.0) {
                axpy(g, anchor[i], grad_of(out, m)[i]);
                axpy(g, e, d_anchor[i]);
            }
        }
    }
    return out;
}

LossOutput consensus_loss(const BatchEmbeddings& batch, const ConsensusConfig& config) {
    const std::vector<double> c = consensus_scores(batch, config);
    return consensus_loss_with_targets(batch, config, c);
}

namespace {

LossOutput sum_align_and_consensus(const BatchEmbeddings& batch, const ConsensusConfig& config,
                                   const LossOutput& consensus) {
    LossOutput out = align_loss(batch, config.tau);
    out.value += consensus.value;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        axpy(1.0, consensus.d_vision[i], out.d_vision[i]);
        axpy(1.0, consensus.d_audio[i], out.d_audio[i]);
        axpy(1.0, consensus.d_language[i], out.d_language[i]);
    }
    return out;
}

}  // namespace

LossOutput refine_loss(const BatchEmbeddings& batch, const ConsensusConfig& config) {
    return sum_align_and_consensus(batch, config, consensus_loss(batch, config));
}

LossOutput refine_loss_with_targets(const BatchEmbeddings& batch, const ConsensusConfig& config,
                                    std::span<const double> targets) {
    return sum_align_and_consensus(batch, config,
                                   consensus_loss_with_targets(batch, config, targets));
}

LossOutput finetune_loss(const BatchEmbeddings& batch, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("finetune_loss: tau must be positive");
    check_batch_dims(batch.vision, "finetune_loss");
    check_batch_dims(batch.audio, "finetune_loss");
    if (batch.vision.size() != batch.audio.size()) {
        throw std::invalid_argument("finetune_loss: vision/audio batch size mismatch");
    }
    if (!batch.background.empty() && batch.background.size() != batch.size()) {
        throw std::invalid_argument("finetune_loss: background count mismatch");
    }
    const std::size_t b = batch.size();
    const double inv_b = 1.0 / static_cast<double>(b);

    // Background embeddings present in the batch, with their owning sample.
    std::vector<std::size_t> bg_owner;
    for (std::size_t m = 0; m < batch.background.size(); ++m) {
        if (batch.background[m].has_value()) bg_owner.push_back(m);
    }
    const std::size_t nbg = bg_owner.size();

    LossOutput out;
    out.d_vision = zeros_like(batch.vision);
    out.d_audio = zeros_like(batch.audio);
    out.d_background.resize(batch.background.size());
    for (const std::size_t m : bg_owner) {
        out.d_background[m] = std::vector<double>(batch.background[m]->size(), 0.0);
    }

    std::vector<double> logits(b + nbg);
    // a -> v: audio_i against every batch visual plus every background.
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < b; ++l) logits[l] = dot(batch.audio[i], batch.vision[l]) / tau;
        for (std::size_t k = 0; k < nbg; ++k) {
            logits[b + k] = dot(batch.audio[i], *batch.background[bg_owner[k]]) / tau;
        }
        const double lse = log_sum_exp(logits);
        out.value += inv_b * (lse - logits[i]);
        for (std::size_t l = 0; l < b; ++l) {
            const double c = inv_b * (std::exp(logits[l] - lse) - (l == i ? 1.0 : 0.0)) / tau;
            axpy(c, batch.vision[l], out.d_audio[i]);
            axpy(c, batch.audio[i], out.d_vision[l]);
        }
        for (std::size_t k = 0; k < nbg; ++k) {
            const double c = inv_b * std::exp(logits[b + k] - lse) / tau;
            axpy(c, *batch.background[bg_owner[k]], out.d_audio[i]);
            axpy(c, batch.audio[i], *out.d_background[bg_owner[k]]);
        }
    }
    // v -> a: vision_i against every batch audio; backgrounds still contrast
    // against the positive audio of row i.
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < b; ++l) logits[l] = dot(batch.vision[i], batch.audio[l]) / tau;
        for (std::size_t k = 0; k < nbg; ++k) {
            logits[b + k] = dot(*batch.background[bg_owner[k]], batch.audio[i]) / tau;
        }
        const double lse = log_sum_exp(logits);
        out.value += inv_b * (lse - logits[i]);
        for (std::size_t l = 0; l < b; ++l) {
            const double c = inv_b * (std::exp(logits[l] - lse) - (l == i ? 1.0 : 0.0)) / tau;
            axpy(c, batch.audio[l], out.d_vision[i]);
            axpy(c, batch.vision[i], out.d_audio[l]);
        }
        for (std::size_t k = 0; k < nbg; ++k) {
            const double c = inv_b * std::exp(logits[b + k] - lse) / tau;
            axpy(c, batch.audio[i], *out.d_background[bg_owner[k]]);
            axpy(c, *batch.background[bg_owner[k]], out.d_audio[i]);
        }
    }
    return out;
}

}  // namespace sndobj
