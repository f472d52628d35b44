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
#include <vector>

#include "sndobj/encoders.hpp"
#include "sndobj/synthworld.hpp"

namespace sndobj {

// Per-patch audio-visual cosine scores for one frame plus their bilinear
// interpolation to pixel resolution.
struct SimilarityMap {
    std::uint32_t grid_h = 0;
    std::uint32_t grid_w = 0;
    std::vector<double> patch_scores;  // grid_h * grid_w
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<double> pixels;  // height * width
    std::uint32_t degenerate_patches = 0;  // zero-norm patch embeddings, scored 0

    double pixel(std::uint32_t y, std::uint32_t x) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

/// Cosine of each patch embedding against the audio embedding, interpolated
/// bilinearly to height x width with patch centers as sample points and edge
/// clamping. Expects single-frame embeddings.
SimilarityMap similarity_map(const PatchEmbeddings& frame_embeddings,
                             const ModalityEmbedding& audio, std::uint32_t height,
                             std::uint32_t width, std::uint32_t patch_size);

/// Bilinear lookup in patch-center coordinates; (u, v) clamp to the grid.
double sample_bilinear(std::span<const double> scores, std::uint32_t grid_h, std::uint32_t grid_w,
                       double u, double v);

/// One frame of a multi-frame embedding block.
PatchEmbeddings frame_slice(const PatchEmbeddings& e, std::size_t frame);

struct DetectionResult {
    std::vector<double> pooled_scores;
    std::size_t predicted = 0;  // argmax, ties to the lowest index
    bool hit = false;
};

/// Mean pixel score under each candidate mask (middle frame); the argmax
/// candidate is the prediction, a hit iff it is one of the positives. Empty
/// candidate masks score -inf and are never selected.
DetectionResult detect_sounding_object(const SimilarityMap& map, const CandidatePool& pool);

double top1_accuracy(std::span<const DetectionResult> results);

struct AucResult {
    double area = 0.0;
    std::vector<double> thresholds;
    std::vector<double> xs;  // FPR for ROC, recall for PR
    std::vector<double> ys;  // TPR for ROC, precision for PR
};

/// Mann-Whitney area: ties between a positive and a negative count 1/2.
AucResult auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Step-wise average precision: precision at each positive weighted by the
/// recall increment, tied scores processed as one group.
AucResult auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct DiscoveryResult {
    AucResult av_roc, av_pr, al_roc, al_pr;
    std::vector<double> av_scores, al_scores;
    std::vector<std::uint8_t> labels;
};

/// Audio-vision and audio-language cosine scores per sample, both scored
/// against the sounding flag.
DiscoveryResult discovery_eval(const ModelParams& params, const Dataset& dataset, double theta,
                               unsigned threads = 1);

struct SampleDetection {
    std::size_t sample_index = 0;
    DetectionResult result;
};

struct DetectionEval {
    std::vector<SampleDetection> detections;  // sounding samples only
    double accuracy = 0.0;
    std::size_t skipped_non_sounding = 0;
};

DetectionEval detection_eval(const ModelParams& params, const Dataset& dataset,
                             unsigned threads = 1);

struct ClusterResult {
    std::vector<std::uint32_t> assignments;              // one label in [0,k) per point
    std::vector<std::pair<std::size_t, std::size_t>> merges;  // merge sequence, (into, absorbed)
};

/// Average-linkage agglomerative clustering under cosine distance, merging
/// until k clusters remain. Ties break on the lowest (i, j) pair.
ClusterResult agglomerative_cluster(const std::vector<std::vector<double>>& points, std::size_t k);

/// Success rule for the detector-only baseline: any (prediction, gt) pair
/// with IoU >= min_iou counts as a hit. At most two predictions.
bool vision_only_baseline(std::span<const BinaryMask> predictions,
                          std::span<const BinaryMask> gts, double min_iou = 0.85);

/// 8-bit binary PGM of the pixel map, scores affinely mapped [-1,1] -> [0,255].
void write_pgm(const std::filesystem::path& path, const SimilarityMap& map);

}  // namespace sndobj
