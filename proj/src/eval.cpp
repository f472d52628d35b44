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

#include "sndobj/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sndobj/util.hpp"

namespace sndobj {

namespace {

void check_labels(std::span<const std::uint8_t> labels, std::span<const double> scores,
                  const char* what) {
    if (labels.size() != scores.size() || labels.empty()) {
        throw std::invalid_argument(std::string(what) + ": scores/labels size mismatch");
    }
    std::size_t pos = 0;
    for (const std::uint8_t l : labels) {
        if (l > 1) throw std::invalid_argument(std::string(what) + ": labels must be 0/1");
        pos += l;
    }
    if (pos == 0 || pos == labels.size()) {
        throw std::invalid_argument(std::string(what) + ": need at least one of each class");
    }
}

ObjectnessGrid interaction_grid(const SyntheticSample& s, const WorldSpec& spec) {
    std::vector<BinaryMask> gt;
    for (const PlacedObject& o : s.gt_objects) gt.push_back(o.mask);
    return patchify_mask(union_masks(gt), spec.patch_size);
}

}  // namespace

double sample_bilinear(std::span<const double> scores, std::uint32_t grid_h, std::uint32_t grid_w,
                       double u, double v) {
    u = std::clamp(u, 0.0, static_cast<double>(grid_h - 1));
    v = std::clamp(v, 0.0, static_cast<double>(grid_w - 1));
    const auto i0 = static_cast<std::uint32_t>(u);
    const auto j0 = static_cast<std::uint32_t>(v);
    const std::uint32_t i1 = std::min(i0 + 1, grid_h - 1);
    const std::uint32_t j1 = std::min(j0 + 1, grid_w - 1);
    const double fu = u - i0;
    const double fv = v - j0;
    const double top = scores[i0 * grid_w + j0] * (1.0 - fv) + scores[i0 * grid_w + j1] * fv;
    const double bot = scores[i1 * grid_w + j0] * (1.0 - fv) + scores[i1 * grid_w + j1] * fv;
    return top * (1.0 - fu) + bot * fu;
}

PatchEmbeddings frame_slice(const PatchEmbeddings& e, std::size_t frame) {
    if (frame >= e.frames) throw std::invalid_argument("frame_slice: frame out of range");
    PatchEmbeddings out;
    out.frames = 1;
    out.patches = e.patches;
    out.dim = e.dim;
    out.values.assign(e.values.begin() + static_cast<std::ptrdiff_t>(frame * e.patches * e.dim),
                      e.values.begin() + static_cast<std::ptrdiff_t>((frame + 1) * e.patches * e.dim));
    return out;
}

SimilarityMap similarity_map(const PatchEmbeddings& frame_embeddings,
                             const ModalityEmbedding& audio, std::uint32_t height,
                             std::uint32_t width, std::uint32_t patch_size) {
    if (frame_embeddings.frames != 1) {
        throw std::invalid_argument("similarity_map: expected a single-frame embedding block");
    }
    if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
        throw std::invalid_argument("similarity_map: extents not divisible by patch_size");
    }
    if (audio.dim() != frame_embeddings.dim) {
        throw std::invalid_argument("similarity_map: audio/patch dim mismatch");
    }
    SimilarityMap map;
    map.grid_h = height / patch_size;
    map.grid_w = width / patch_size;
    if (static_cast<std::size_t>(map.grid_h) * map.grid_w != frame_embeddings.patches) {
        throw std::invalid_argument("similarity_map: patch count does not match extents");
    }
    map.height = height;
    map.width = width;
    map.patch_scores.resize(frame_embeddings.patches);
    const double audio_norm = l2_norm(audio.values);
    for (std::size_t p = 0; p < frame_embeddings.patches; ++p) {
        const auto patch = frame_embeddings.patch(0, p);
        const double norm = l2_norm(patch);
        if (norm == 0.0 || audio_norm == 0.0) {
            map.patch_scores[p] = 0.0;
            ++map.degenerate_patches;
        } else {
            map.patch_scores[p] = dot(patch, audio.values) / (norm * audio_norm);
        }
    }
    map.pixels.resize(static_cast<std::size_t>(height) * width);
    const double ps = patch_size;
    for (std::uint32_t y = 0; y < height; ++y) {
        const double u = (y + 0.5) / ps - 0.5;
        for (std::uint32_t x = 0; x < width; ++x) {
            const double v = (x + 0.5) / ps - 0.5;
            map.pixels[static_cast<std::size_t>(y) * width + x] =
                sample_bilinear(map.patch_scores, map.grid_h, map.grid_w, u, v);
        }
    }
    return map;
}

DetectionResult detect_sounding_object(const SimilarityMap& map, const CandidatePool& pool) {
    if (pool.candidates.empty()) {
        throw std::invalid_argument("detect_sounding_object: empty candidate pool");
    }
    DetectionResult result;
    result.pooled_scores.reserve(pool.candidates.size());
    for (const BinaryMask& mask : pool.candidates) {
        if (mask.height != map.height || mask.width != map.width) {
            throw std::invalid_argument("detect_sounding_object: mask extents do not match map");
        }
        const std::uint32_t t = mask.frames / 2;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::uint32_t y = 0; y < mask.height; ++y) {
            for (std::uint32_t x = 0; x < mask.width; ++x) {
                if (mask.at(t, y, x)) {
                    sum += map.pixel(y, x);
                    ++count;
                }
            }
        }
        result.pooled_scores.push_back(
            count ? sum / static_cast<double>(count) : -std::numeric_limits<double>::infinity());
    }
    result.predicted = 0;
    for (std::size_t c = 1; c < result.pooled_scores.size(); ++c) {
        if (result.pooled_scores[c] > result.pooled_scores[result.predicted]) result.predicted = c;
    }
    result.hit = std::find(pool.positive_indices.begin(), pool.positive_indices.end(),
                           result.predicted) != pool.positive_indices.end();
    return result;
}

double top1_accuracy(std::span<const DetectionResult> results) {
    if (results.empty()) throw std::invalid_argument("top1_accuracy: no results");
    std::size_t hits = 0;
    for (const DetectionResult& r : results) hits += r.hit ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

AucResult auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_labels(labels, scores, "auc_roc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks keep the tie contribution an exact multiple of 1/2, making the
    // area equal the pair-counting statistic bit for bit.
    std::size_t n_pos = 0;
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                rank_sum_pos += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    const double numerator =
        rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;

    AucResult out;
    out.area = numerator / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    // Curve points at each distinct threshold, descending.
    out.thresholds.push_back(std::numeric_limits<double>::infinity());
    out.xs.push_back(0.0);
    out.ys.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t r = n;
    while (r > 0) {
        std::size_t q = r;
        while (q > 0 && scores[order[q - 1]] == scores[order[r - 1]]) --q;
        for (std::size_t k = q; k < r; ++k) {
            if (labels[order[k]]) ++tp;
            else ++fp;
        }
        out.thresholds.push_back(scores[order[r - 1]]);
        out.xs.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
        out.ys.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
        r = q;
    }
    return out;
}

AucResult auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_labels(labels, scores, "auc_pr");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t n_pos = 0;
    for (const std::uint8_t l : labels) n_pos += l;

    AucResult out;
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) ++tp;
            else ++fp;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        out.area += (recall - prev_recall) * precision;
        prev_recall = recall;
        out.thresholds.push_back(scores[order[i]]);
        out.xs.push_back(recall);
        out.ys.push_back(precision);
        i = j;
    }
    return out;
}

DiscoveryResult discovery_eval(const ModelParams& params, const Dataset& dataset, double theta,
                               unsigned threads) {
    if (dataset.samples.empty()) throw std::invalid_argument("discovery_eval: empty dataset");
    const std::size_t n = dataset.samples.size();
    DiscoveryResult result;
    result.av_scores.resize(n);
    result.al_scores.resize(n);
    result.labels.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const SyntheticSample& s = dataset.samples[i];
        const VisualForward vfwd = encode_visual(s.patch_features, params.vision);
        const PoolForward pool =
            object_aware_pool(vfwd.embeddings, interaction_grid(s, dataset.spec), theta);
        const ModalityEmbedding e_a = encode_audio(s.audio, params.audio);
        const ModalityEmbedding e_l = encode_language(s.narration, params.language);
        result.av_scores[i] = dot(e_a.values, pool.embedding.values);
        result.al_scores[i] = dot(e_a.values, e_l.values);
        result.labels[i] = s.sounding ? 1 : 0;
    });
    result.av_roc = auc_roc(result.av_scores, result.labels);
    result.av_pr = auc_pr(result.av_scores, result.labels);
    result.al_roc = auc_roc(result.al_scores, result.labels);
    result.al_pr = auc_pr(result.al_scores, result.labels);
    return result;
}

DetectionEval detection_eval(const ModelParams& params, const Dataset& dataset, unsigned threads) {
    const std::size_t n = dataset.samples.size();
    std::vector<std::uint8_t> sounding(n, 0);
    for (std::size_t i = 0; i < n; ++i) sounding[i] = dataset.samples[i].sounding ? 1 : 0;

    std::vector<DetectionResult> per_sample(n);
    parallel_for(n, threads, [&](std::size_t i) {
        if (!sounding[i]) return;
        const SyntheticSample& s = dataset.samples[i];
        const VisualForward vfwd = encode_visual(s.patch_features, params.vision);
        const PatchEmbeddings mid = frame_slice(vfwd.embeddings, vfwd.embeddings.frames / 2);
        const ModalityEmbedding e_a = encode_audio(s.audio, params.audio);
        const SimilarityMap map =
            similarity_map(mid, e_a, dataset.spec.height, dataset.spec.width, dataset.spec.patch_size);
        per_sample[i] = detect_sounding_object(map, s.pool);
    });

    DetectionEval out;
    for (std::size_t i = 0; i < n; ++i) {
        if (sounding[i]) {
            out.detections.push_back({i, std::move(per_sample[i])});
        } else {
            ++out.skipped_non_sounding;
        }
    }
    if (out.detections.empty()) {
        throw std::runtime_error("detection_eval: no sounding samples in dataset");
    }
    std::vector<DetectionResult> results;
    results.reserve(out.detections.size());
    for (const SampleDetection& d : out.detections) results.push_back(d.result);
    out.accuracy = top1_accuracy(results);
    return out;
}

ClusterResult agglomerative_cluster(const std::vector<std::vector<double>>& points, std::size_t k) {
    const std::size_t n = points.size();
    if (k == 0) throw std::invalid_argument("agglomerative_cluster: k must be positive");
    if (n < k) throw std::invalid_argument("agglomerative_cluster: fewer points than clusters");

    // S holds sums of base pairwise distances across cluster pairs; the
    // average-linkage distance is S / (|A| * |B|).
    std::vector<double> s_matrix(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double ni = l2_norm(points[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double nj = l2_norm(points[j]);
            if (ni == 0.0 || nj == 0.0) {
                throw std::invalid_argument("agglomerative_cluster: zero-norm point");
            }
            const double d = 1.0 - dot(points[i], points[j]) / (ni * nj);
            s_matrix[i * n + j] = d;
            s_matrix[j * n + i] = d;
        }
    }
    std::vector<bool> active(n, true);
    std::vector<std::size_t> size(n, 1);
    std::vector<std::size_t> cluster_of(n);
    std::iota(cluster_of.begin(), cluster_of.end(), 0);

    const auto link = [&](std::size_t a, std::size_t b) {
        return s_matrix[a * n + b] / (static_cast<double>(size[a]) * static_cast<double>(size[b]));
    };

    // Cached nearest neighbor per row (over columns > row), refreshed lazily.
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> nn(n, kNone);
    std::vector<double> nd(n, 0.0);
    const auto refresh_row = [&](std::size_t i) {
        nn[i] = kNone;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!active[j]) continue;
            const double d = link(i, j);
            if (nn[i] == kNone || d < nd[i]) {
                nn[i] = j;
                nd[i] = d;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) refresh_row(i);

    ClusterResult result;
    std::size_t active_count = n;
    while (active_count > k) {
        std::size_t best_i = kNone;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i] || nn[i] == kNone) continue;
            if (best_i == kNone || nd[i] < nd[best_i]) best_i = i;
        }
        const std::size_t i = best_i;
        const std::size_t j = nn[i];
        result.merges.emplace_back(i, j);

        for (std::size_t m = 0; m < n; ++m) {
            if (!active[m] || m == i || m == j) continue;
            s_matrix[m * n + i] += s_matrix[m * n + j];
            s_matrix[i * n + m] = s_matrix[m * n + i];
        }
        size[i] += size[j];
        active[j] = false;
        --active_count;
        for (std::size_t p = 0; p < n; ++p) {
            if (cluster_of[p] == j) cluster_of[p] = i;
        }

        // Rows pointing at the merged pair are stale; rows below i may have a
        // new best in column i.
        refresh_row(i);
        for (std::size_t m = 0; m < n; ++m) {
            if (!active[m] || m == i) continue;
            if (nn[m] == i || nn[m] == j) {
                refresh_row(m);
            } else if (m < i) {
                const double d = link(m, i);
                if (nn[m] == kNone || d < nd[m] || (d == nd[m] && i < nn[m])) {
                    nn[m] = i;
                    nd[m] = d;
                }
            }
        }
    }

    // Labels 0..k-1 ordered by ascending cluster root.
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) roots.push_back(i);
    }
    result.assignments.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto it = std::lower_bound(roots.begin(), roots.end(), cluster_of[p]);
        result.assignments[p] = static_cast<std::uint32_t>(it - roots.begin());
    }
    return result;
}

bool vision_only_baseline(std::span<const BinaryMask> predictions,
                          std::span<const BinaryMask> gts, double min_iou) {
    if (predictions.size() > 2) {
        throw std::invalid_argument("vision_only_baseline: at most two predictions");
    }
    for (const BinaryMask& p : predictions) {
        for (const BinaryMask& g : gts) {
            if (mask_iou(p, g) >= min_iou) return true;
        }
    }
    return false;
}

void write_pgm(const std::filesystem::path& path, const SimilarityMap& map) {
    atomic_write_file(path, [&](std::ostream& out) {
        out << "P5\n" << map.width << " " << map.height << "\n255\n";
        for (const double s : map.pixels) {
            const double mapped = std::clamp((s + 1.0) / 2.0 * 255.0, 0.0, 255.0);
            const auto byte = static_cast<unsigned char>(std::lround(mapped));
            out.put(static_cast<char>(byte));
        }
    });
}

}  // namespace sndobj
