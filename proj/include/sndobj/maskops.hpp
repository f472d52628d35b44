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
#include <span>
#include <utility>
#include <vector>

#include "sndobj/wire.hpp"

namespace sndobj {

// Per-frame binary segmentation mask, bit per pixel stored as 0/1 bytes.
struct BinaryMask {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> bits;  // frames*height*width, frame-major row-major

    BinaryMask() = default;
    BinaryMask(std::uint32_t t, std::uint32_t h, std::uint32_t w);

    std::uint8_t at(std::uint32_t t, std::uint32_t y, std::uint32_t x) const {
        return bits[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
    void set(std::uint32_t t, std::uint32_t y, std::uint32_t x, bool v) {
        bits[(static_cast<std::size_t>(t) * height + y) * width + x] = v ? 1 : 0;
    }
    bool same_extents(const BinaryMask& other) const {
        return frames == other.frames && height == other.height && width == other.width;
    }
    std::size_t pixel_count() const;
};

// Per-patch fraction of pixels covered by the object, in [0, 1].
struct ObjectnessGrid {
    std::uint32_t frames = 0;
    std::uint32_t patches_y = 0;
    std::uint32_t patches_x = 0;
    std::vector<double> scores;  // frames * patches_y * patches_x

    std::uint32_t patches_per_frame() const { return patches_y * patches_x; }
    double at(std::uint32_t t, std::uint32_t p) const {
        return scores[static_cast<std::size_t>(t) * patches_per_frame() + p];
    }
    double& at(std::uint32_t t, std::uint32_t p) {
        return scores[static_cast<std::size_t>(t) * patches_per_frame() + p];
    }
};

struct CandidatePool {
    std::vector<BinaryMask> candidates;
    std::vector<std::size_t> positive_indices;  // sorted, unique, 1 or 2 entries
};

/// Fraction of each patch_size x patch_size tile covered by the mask.
/// Height and width must divide evenly into patches.
ObjectnessGrid patchify_mask(const BinaryMask& mask, std::uint32_t patch_size);

/// score' = 1 if score >= theta else 0.
ObjectnessGrid binarize(const ObjectnessGrid& grid, double theta);

/// |a AND b| / |a OR b| over all frames; 0 when both masks are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Greedy suppression in input order: a mask is kept iff its IoU with every
/// previously kept mask is below the threshold; the kept list is then
/// truncated to the first `cap` entries. Returns kept input indices
/// (strictly increasing).
std::vector<std::size_t> nms(std::span<const BinaryMask> masks, double iou_threshold,
                             std::size_t cap = 2);

/// For each ground-truth mask, the argmax-IoU candidate with IoU >= min_iou
/// becomes a positive (ties go to the lowest candidate index). When no
/// candidate clears the bar, the ground-truth mask itself is appended to the
/// pool and marked positive.
CandidatePool match_candidates(std::span<const BinaryMask> candidates,
                               std::span<const BinaryMask> gts, double min_iou);

/// Uniformly samples ceil(beta_percent/100 * |background|) distinct patches
/// with objectness below theta. Deterministic given the seed; results sorted
/// by (frame, patch). Throws when no background patch exists.
std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_background(
    const ObjectnessGrid& grid, double theta, double beta_percent, std::uint64_t seed);

/// Pixelwise OR. Masks must share extents.
BinaryMask union_masks(std::span<const BinaryMask> masks);

// Mask record wire format: T, H, W as u32 LE followed by T*H*W bytes (0/1).
void write_mask(wire::Writer& w, const BinaryMask& mask);
BinaryMask read_mask(wire::Reader& r);

}  // namespace sndobj
