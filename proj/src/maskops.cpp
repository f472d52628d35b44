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

#include "sndobj/maskops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sndobj/rng.hpp"

namespace sndobj {

BinaryMask::BinaryMask(std::uint32_t t, std::uint32_t h, std::uint32_t w)
    : frames(t), height(h), width(w),
      bits(static_cast<std::size_t>(t) * h * w, 0) {
    if (t == 0 || h == 0 || w == 0) {
        throw std::invalid_argument("BinaryMask: extents must be positive");
    }
}

std::size_t BinaryMask::pixel_count() const {
    std::size_t n = 0;
    for (const std::uint8_t b : bits) n += b;
    return n;
}

ObjectnessGrid patchify_mask(const BinaryMask& mask, std::uint32_t patch_size) {
    if (patch_size == 0) throw std::invalid_argument("patchify_mask: patch_size must be positive");
    if (mask.height % patch_size != 0 || mask.width % patch_size != 0) {
        throw std::invalid_argument("patchify_mask: extents not divisible by patch_size");
    }
    ObjectnessGrid grid;
    grid.frames = mask.frames;
    grid.patches_y = mask.height / patch_size;
    grid.patches_x = mask.width / patch_size;
    grid.scores.assign(static_cast<std::size_t>(grid.frames) * grid.patches_per_frame(), 0.0);
    const double area = static_cast<double>(patch_size) * patch_size;
    for (std::uint32_t t = 0; t < mask.frames; ++t) {
        for (std::uint32_t py = 0; py < grid.patches_y; ++py) {
            for (std::uint32_t px = 0; px < grid.patches_x; ++px) {
                std::size_t covered = 0;
                for (std::uint32_t dy = 0; dy < patch_size; ++dy) {
                    const std::uint32_t y = py * patch_size + dy;
                    for (std::uint32_t dx = 0; dx < patch_size; ++dx) {
                        covered += mask.at(t, y, px * patch_size + dx);
                    }
                }
                grid.at(t, py * grid.patches_x + px) = static_cast<double>(covered) / area;
            }
        }
    }
    return grid;
}

ObjectnessGrid binarize(const ObjectnessGrid& grid, double theta) {
    if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("binarize: theta must be in [0,1]");
    ObjectnessGrid out = grid;
    for (double& s : out.scores) s = (s >= theta) ? 1.0 : 0.0;
    return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_extents(b)) throw std::invalid_argument("mask_iou: extent mismatch");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        inter += (a.bits[i] & b.bits[i]);
        uni += (a.bits[i] | b.bits[i]);
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::size_t> nms(std::span<const BinaryMask> masks, double iou_threshold,
                             std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("nms: cap must be positive");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        bool suppressed = false;
        for (const std::size_t k : kept) {
            if (mask_iou(masks[i], masks[k]) >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(i);
    }
    if (kept.size() > cap) kept.resize(cap);
    return kept;
}

CandidatePool match_candidates(std::span<const BinaryMask> candidates,
                               std::span<const BinaryMask> gts, double min_iou) {
    if (gts.empty()) throw std::invalid_argument("match_candidates: no ground-truth masks");
    CandidatePool pool;
    pool.candidates.assign(candidates.begin(), candidates.end());
    for (const BinaryMask& gt : gts) {
        double best = -1.0;
        std::size_t best_idx = 0;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double iou = mask_iou(candidates[c], gt);
            if (iou > best) {
                best = iou;
                best_idx = c;
            }
        }
        if (!candidates.empty() && best >= min_iou) {
            pool.positive_indices.push_back(best_idx);
        } else {
            pool.candidates.push_back(gt);
            pool.positive_indices.push_back(pool.candidates.size() - 1);
        }
    }
    std::sort(pool.positive_indices.begin(), pool.positive_indices.end());
    pool.positive_indices.erase(
        std::unique(pool.positive_indices.begin(), pool.positive_indices.end()),
        pool.positive_indices.end());
    return pool;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_background(
    const ObjectnessGrid& grid, double theta, double beta_percent, std::uint64_t seed) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> background;
    for (std::uint32_t t = 0; t < grid.frames; ++t) {
        for (std::uint32_t p = 0; p < grid.patches_per_frame(); ++p) {
            if (grid.at(t, p) < theta) background.emplace_back(t, p);
        }
    }
    if (background.empty()) {
        throw std::runtime_error("sample_background: no background patches below theta");
    }
    const auto want = static_cast<std::size_t>(
        std::ceil(beta_percent / 100.0 * static_cast<double>(background.size())));
    const std::size_t k = std::min(want, background.size());
    Rng rng(seed);
    const std::vector<std::size_t> picks = rng.sample_indices(background.size(), k);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(k);
    for (const std::size_t i : picks) out.push_back(background[i]);
    std::sort(out.begin(), out.end());
    return out;
}

BinaryMask union_masks(std::span<const BinaryMask> masks) {
    if (masks.empty()) throw std::invalid_argument("union_masks: empty input");
    BinaryMask out = masks[0];
    for (std::size_t m = 1; m < masks.size(); ++m) {
        if (!out.same_extents(masks[m])) throw std::invalid_argument("union_masks: extent mismatch");
        for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] |= masks[m].bits[i];
    }
    return out;
}

void write_mask(wire::Writer& w, const BinaryMask& mask) {
    w.u32(mask.frames);
    w.u32(mask.height);
    w.u32(mask.width);
    w.bytes(mask.bits.data(), mask.bits.size());
}

BinaryMask read_mask(wire::Reader& r) {
    const std::uint32_t t = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    if (t == 0 || h == 0 || w == 0) r.fail("mask with zero extent");
    BinaryMask mask(t, h, w);
    r.bytes(mask.bits.data(), mask.bits.size());
    for (const std::uint8_t b : mask.bits) {
        if (b > 1) r.fail("mask byte outside {0,1}");
    }
    return mask;
}

}  // namespace sndobj
