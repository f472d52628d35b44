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
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sndobj/maskops.hpp"
#include "sndobj/numerics.hpp"

namespace sndobj {

enum class Modality { vision, audio, language };

std::string modality_name(Modality m);

// Two-layer perceptron x -> W2 tanh(W1 x + b1) + b2 mapping a raw feature
// into the common embedding space. hidden_dim == 0 degenerates to a single
// affine layer z = W2 x + b2, used by tests and identity fixtures.
struct Perceptron {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t output_dim = 0;
    std::vector<double> w1;  // hidden_dim x input_dim
    std::vector<double> b1;  // hidden_dim
    std::vector<double> w2;  // output_dim x (hidden_dim ? hidden_dim : input_dim)
    std::vector<double> b2;  // output_dim
    bool frozen = false;

    static Perceptron random_init(std::size_t input, std::size_t hidden, std::size_t output,
                                  std::uint64_t seed, bool frozen = false);
    static Perceptron identity(std::size_t dim);

    std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
    void validate() const;
};

struct PatchEmbeddings {
    std::size_t frames = 0;
    std::size_t patches = 0;
    std::size_t dim = 0;
    std::vector<double> values;  // frames * patches * dim

    std::span<const double> patch(std::size_t t, std::size_t n) const {
        return {values.data() + (t * patches + n) * dim, dim};
    }
    std::span<double> patch(std::size_t t, std::size_t n) {
        return {values.data() + (t * patches + n) * dim, dim};
    }
};

struct ModalityEmbedding {
    Modality modality = Modality::vision;
    std::vector<double> values;
    bool pooled_fallback = false;  // set when pooling fell back to all patches

    std::size_t dim() const { return values.size(); }
};

// Forward caches keep what the backward pass needs: pre-activation state per
// patch/vector and the pre-normalization output.
struct VisualForward {
    PatchEmbeddings embeddings;
    std::vector<double> hidden;  // frames * patches * hidden_dim (empty for affine)
};

struct VectorForward {
    std::vector<double> input;
    std::vector<double> hidden;     // empty for affine
    std::vector<double> raw;        // pre-normalization output
    std::vector<double> embedding;  // unit norm
    double norm = 0.0;
};

struct PoolForward {
    ModalityEmbedding embedding;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> kept;  // (frame, patch)
    bool fallback = false;
    std::vector<double> pooled;  // pre-normalization mean over kept patches
    double norm = 0.0;
};

/// Applies the perceptron to every patch feature independently. No
/// normalization at patch level.
VisualForward encode_visual(const DenseArray& raw_patches, const Perceptron& params);

VectorForward encode_vector(std::span<const double> feature, const Perceptron& params);
ModalityEmbedding encode_audio(std::span<const double> feature, const Perceptron& params);
ModalityEmbedding encode_language(std::span<const double> feature, const Perceptron& params);

/// Zeroes patch embeddings whose binarized objectness is 0, mean-pools the
/// survivors across frames and patches, and l2-normalizes. When the mask
/// removes every patch, falls back to the mean over all patches and flags
/// the result.
PoolForward object_aware_pool(const PatchEmbeddings& e, const ObjectnessGrid& grid, double theta);

/// Mean over a seeded sample of beta% of the background (objectness < theta)
/// patches, l2-normalized.
PoolForward background_pool(const PatchEmbeddings& e, const ObjectnessGrid& grid, double theta,
                            double beta_percent, std::uint64_t seed);

struct ParamGrads {
    std::vector<double> w1, b1, w2, b2;

    static ParamGrads zeros_like(const Perceptron& p);
    double squared_norm() const;
};

/// Chain-rule gradients for a pooled visual embedding. Accumulates into
/// `grads`; patches outside the kept set contribute nothing. Optionally
/// produces per-patch input gradients (shape of raw_patches).
void backward_visual(const DenseArray& raw_patches, const VisualForward& fwd,
                     const PoolForward& pool, std::span<const double> upstream,
                     const Perceptron& params, ParamGrads& grads,
                     DenseArray* input_grads = nullptr);

void backward_audio(const VectorForward& fwd, std::span<const double> upstream,
                    const Perceptron& params, ParamGrads& grads,
                    std::vector<double>* input_grad = nullptr);
void backward_language(const VectorForward& fwd, std::span<const double> upstream,
                       const Perceptron& params, ParamGrads& grads,
                       std::vector<double>* input_grad = nullptr);

struct ModelParams {
    Perceptron vision;
    Perceptron audio;
    Perceptron language;
};

ModelParams init_model(std::size_t visual_in, std::size_t audio_in, std::size_t language_in,
                       std::size_t hidden, std::size_t embed_dim, std::uint64_t seed,
                       bool freeze_language = true);

// Checkpoint format: magic "SNDCKPT1", version u32, stage (u32 length +
// bytes), epoch u32, then vision/audio/language blocks of shape header and
// 64-bit LE parameters.
struct Checkpoint {
    ModelParams params;
    std::string stage;
    std::uint32_t epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& stage, std::uint32_t epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const ModelParams& params, const std::string& stage,
                                 std::uint32_t epoch);

}  // namespace sndobj
