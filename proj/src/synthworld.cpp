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

#include "sndobj/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sndobj/rng.hpp"
#include "sndobj/util.hpp"

namespace sndobj {

namespace {

constexpr char kDatasetMagic[] = "SNDOBJ1";
constexpr int kPlacementRetries = 200;
constexpr int kJitterRetries = 50;

struct Rect {
    std::uint32_t y = 0, x = 0, h = 0, w = 0;

    bool overlaps(const Rect& o) const {
        return y < o.y + o.h && o.y < y + h && x < o.x + o.w && o.x < x + w;
    }
};

BinaryMask rect_mask(const WorldSpec& spec, const Rect& r) {
    BinaryMask m(spec.frames, spec.height, spec.width);
    for (std::uint32_t t = 0; t < spec.frames; ++t) {
        for (std::uint32_t y = r.y; y < r.y + r.h; ++y) {
            for (std::uint32_t x = r.x; x < r.x + r.w; ++x) m.set(t, y, x, true);
        }
    }
    return m;
}

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
    return l2_normalize(std::span<const double>(rng.normal_vec(dim)));
}

std::vector<double> noisy(const std::vector<double>& base, double sigma, Rng& rng) {
    std::vector<double> v(base.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + sigma * rng.normal();
    return v;
}

// Pixel coverage of each patch by a rectangle, computed on rect geometry
// directly (one frame; masks are static across frames).
double patch_coverage(const Rect& r, std::uint32_t py, std::uint32_t px, std::uint32_t ps) {
    const std::uint32_t y0 = std::max(r.y, py * ps);
    const std::uint32_t y1 = std::min(r.y + r.h, (py + 1) * ps);
    const std::uint32_t x0 = std::max(r.x, px * ps);
    const std::uint32_t x1 = std::min(r.x + r.w, (px + 1) * ps);
    if (y1 <= y0 || x1 <= x0) return 0.0;
    return static_cast<double>((y1 - y0) * (x1 - x0)) / (static_cast<double>(ps) * ps);
}

void write_spec(wire::Writer& w, const WorldSpec& s) {
    for (const std::uint32_t v : {s.materials, s.actions, s.height, s.width, s.patch_size,
                                  s.frames, s.visual_dim, s.audio_dim, s.lang_dim}) {
        w.u32(v);
    }
    w.f64(s.sigma);
    w.f64(s.p_non_sounding);
    w.f64(s.p_two_objects);
    for (const std::uint32_t v : {s.min_objects, s.max_objects, s.min_object_px, s.max_object_px,
                                  s.min_candidates, s.max_candidates}) {
        w.u32(v);
    }
}

WorldSpec read_spec(wire::Reader& r) {
    WorldSpec s;
    s.materials = r.u32();
    s.actions = r.u32();
    s.height = r.u32();
    s.width = r.u32();
    s.patch_size = r.u32();
    s.frames = r.u32();
    s.visual_dim = r.u32();
    s.audio_dim = r.u32();
    s.lang_dim = r.u32();
    s.sigma = r.f64();
    s.p_non_sounding = r.f64();
    s.p_two_objects = r.f64();
    s.min_objects = r.u32();
    s.max_objects = r.u32();
    s.min_object_px = r.u32();
    s.max_object_px = r.u32();
    s.min_candidates = r.u32();
    s.max_candidates = r.u32();
    try {
        s.validate();
    } catch (const std::exception& e) {
        r.fail(std::string("invalid world spec: ") + e.what());
    }
    return s;
}

void write_vec(wire::Writer& w, const std::vector<double>& v) {
    for (const double x : v) w.f64(x);
}

std::vector<double> read_vec(wire::Reader& r, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = r.f64();
    return v;
}

void write_sample(wire::Writer& w, const SyntheticSample& s) {
    for (const double v : s.patch_features.data) w.f64(v);
    w.u32(static_cast<std::uint32_t>(s.gt_objects.size()));
    for (const PlacedObject& o : s.gt_objects) {
        w.u32(o.material);
        write_mask(w, o.mask);
    }
    w.u32(s.action);
    write_vec(w, s.audio);
    write_vec(w, s.narration);
    w.u32(s.sounding ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.distractors.size()));
    for (const PlacedObject& o : s.distractors) {
        w.u32(o.material);
        write_mask(w, o.mask);
    }
    w.u32(static_cast<std::uint32_t>(s.pool.candidates.size()));
    for (const BinaryMask& m : s.pool.candidates) write_mask(w, m);
    w.u32(static_cast<std::uint32_t>(s.pool.positive_indices.size()));
    for (const std::size_t p : s.pool.positive_indices) w.u32(static_cast<std::uint32_t>(p));
}

SyntheticSample read_sample(wire::Reader& r, const WorldSpec& spec) {
    SyntheticSample s;
    const std::size_t feat_count = static_cast<std::size_t>(spec.frames) *
                                   spec.patches_per_frame() * spec.visual_dim;
    s.patch_features = DenseArray({spec.frames, spec.patches_per_frame(), spec.visual_dim},
                                  read_vec(r, feat_count));
    const std::uint32_t gt_count = r.u32();
    if (gt_count < 1 || gt_count > 2) r.fail("ground-truth object count outside 1..2");
    for (std::uint32_t i = 0; i < gt_count; ++i) {
        PlacedObject o;
        o.material = r.u32();
        if (o.material >= spec.materials) r.fail("material id out of range");
        o.mask = read_mask(r);
        s.gt_objects.push_back(std::move(o));
    }
    s.action = r.u32();
    if (s.action >= spec.actions) r.fail("action id out of range");
    s.audio = read_vec(r, spec.audio_dim);
    s.narration = read_vec(r, spec.lang_dim);
    s.sounding = r.u32() != 0;
    const std::uint32_t distractor_count = r.u32();
    for (std::uint32_t i = 0; i < distractor_count; ++i) {
        PlacedObject o;
        o.material = r.u32();
        if (o.material >= spec.materials) r.fail("material id out of range");
        o.mask = read_mask(r);
        s.distractors.push_back(std::move(o));
    }
    const std::uint32_t candidate_count = r.u32();
    for (std::uint32_t i = 0; i < candidate_count; ++i) s.pool.candidates.push_back(read_mask(r));
    const std::uint32_t positive_count = r.u32();
    if (positive_count == 0) r.fail("candidate pool without positives");
    for (std::uint32_t i = 0; i < positive_count; ++i) {
        const std::uint32_t p = r.u32();
        if (p >= candidate_count) r.fail("positive index out of range");
        s.pool.positive_indices.push_back(p);
    }
    return s;
}

}  // namespace

void WorldSpec::validate() const {
    if (materials < 2 || actions < 2) {
        throw std::invalid_argument("WorldSpec: material and action counts must be >= 2");
    }
    if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
        throw std::invalid_argument("WorldSpec: extents must divide evenly into patches");
    }
    if (frames == 0 || visual_dim == 0 || audio_dim == 0 || lang_dim == 0) {
        throw std::invalid_argument("WorldSpec: frames and feature dims must be positive");
    }
    if (sigma < 0.0) throw std::invalid_argument("WorldSpec: sigma must be non-negative");
    if (p_non_sounding < 0.0 || p_non_sounding > 1.0 || p_two_objects < 0.0 || p_two_objects > 1.0) {
        throw std::invalid_argument("WorldSpec: probabilities must be in [0,1]");
    }
    if (min_objects < 1 || max_objects < min_objects) {
        throw std::invalid_argument("WorldSpec: bad object count range");
    }
    if (min_object_px < 1 || max_object_px < min_object_px || max_object_px > height ||
        max_object_px > width) {
        throw std::invalid_argument("WorldSpec: bad object size range");
    }
    if (min_candidates < 1 || max_candidates < min_candidates) {
        throw std::invalid_argument("WorldSpec: bad candidate count range");
    }
}

PrototypeBanks generate_world(const WorldSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, "world"));
    PrototypeBanks banks;
    for (std::uint32_t m = 0; m < spec.materials; ++m) {
        banks.material_visual.push_back(unit_vector(rng, spec.visual_dim));
    }
    for (std::uint32_t m = 0; m < spec.materials; ++m) {
        banks.material_audio.push_back(unit_vector(rng, spec.audio_dim));
    }
    for (std::uint32_t a = 0; a < spec.actions; ++a) {
        banks.action_narration.push_back(unit_vector(rng, spec.lang_dim));
    }
    banks.offscreen_audio = unit_vector(rng, spec.audio_dim);
    banks.scene_visual = unit_vector(rng, spec.visual_dim);
    return banks;
}

SyntheticSample generate_sample(const PrototypeBanks& banks, const WorldSpec& spec,
                                std::uint64_t seed) {
    spec.validate();
    if (banks.material_visual.size() != spec.materials ||
        banks.action_narration.size() != spec.actions) {
        throw std::invalid_argument("generate_sample: banks do not match spec");
    }
    Rng rng(seed);

    // Non-overlapping rectangles with bounded retries.
    const std::uint32_t object_count =
        spec.min_objects + static_cast<std::uint32_t>(rng.integer(spec.max_objects - spec.min_objects + 1));
    std::vector<Rect> rects;
    for (std::uint32_t o = 0; o < object_count; ++o) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
            Rect r;
            r.h = spec.min_object_px +
                  static_cast<std::uint32_t>(rng.integer(spec.max_object_px - spec.min_object_px + 1));
            r.w = spec.min_object_px +
                  static_cast<std::uint32_t>(rng.integer(spec.max_object_px - spec.min_object_px + 1));
            r.y = static_cast<std::uint32_t>(rng.integer(spec.height - r.h + 1));
            r.x = static_cast<std::uint32_t>(rng.integer(spec.width - r.w + 1));
            placed = std::none_of(rects.begin(), rects.end(),
                                  [&](const Rect& other) { return r.overlaps(other); });
            if (placed) rects.push_back(r);
        }
        if (!placed) {
            throw std::runtime_error("generate_sample: object placement failed after retries");
        }
    }

    // Material identities: distinct while they last, uniform after.
    std::vector<std::uint32_t> material_ids(spec.materials);
    for (std::uint32_t m = 0; m < spec.materials; ++m) material_ids[m] = m;
    rng.shuffle(material_ids);
    std::vector<std::uint32_t> materials(object_count);
    for (std::uint32_t o = 0; o < object_count; ++o) {
        materials[o] = (o < spec.materials)
                           ? material_ids[o]
                           : static_cast<std::uint32_t>(rng.integer(spec.materials));
    }

    const bool two_objects = object_count >= 2 && rng.uniform() < spec.p_two_objects;
    const std::size_t n_sounding = two_objects ? 2 : 1;
    std::vector<std::size_t> sounding_idx = rng.sample_indices(object_count, n_sounding);
    std::sort(sounding_idx.begin(), sounding_idx.end());

    SyntheticSample s;
    for (std::uint32_t o = 0; o < object_count; ++o) {
        PlacedObject obj;
        obj.mask = rect_mask(spec, rects[o]);
        obj.material = materials[o];
        const bool is_sounding_object =
            std::find(sounding_idx.begin(), sounding_idx.end(), o) != sounding_idx.end();
        (is_sounding_object ? s.gt_objects : s.distractors).push_back(std::move(obj));
    }

    // Patch features: each patch belongs to the object covering most of it,
    // or to the scene background.
    const std::uint32_t n_patches = spec.patches_per_frame();
    s.patch_features = DenseArray::zeros({spec.frames, n_patches, spec.visual_dim});
    std::vector<int> owner(n_patches, -1);
    for (std::uint32_t py = 0; py < spec.patches_y(); ++py) {
        for (std::uint32_t px = 0; px < spec.patches_x(); ++px) {
            double best = 0.0;
            int best_o = -1;
            for (std::uint32_t o = 0; o < object_count; ++o) {
                const double cov = patch_coverage(rects[o], py, px, spec.patch_size);
                if (cov > best) {
                    best = cov;
                    best_o = static_cast<int>(o);
                }
            }
            owner[py * spec.patches_x() + px] = best_o;
        }
    }
    for (std::uint32_t t = 0; t < spec.frames; ++t) {
        for (std::uint32_t p = 0; p < n_patches; ++p) {
            const std::vector<double>& base =
                owner[p] >= 0 ? banks.material_visual[materials[static_cast<std::size_t>(owner[p])]]
                              : banks.scene_visual;
            for (std::uint32_t d = 0; d < spec.visual_dim; ++d) {
                s.patch_features.at(t, p, d) = base[d] + spec.sigma * rng.normal();
            }
        }
    }

    // Audio: the sounding material's prototype, a renormalized mix for
    // two-object interactions, or the off-screen prototype.
    s.sounding = rng.uniform() >= spec.p_non_sounding;
    std::vector<double> audio_proto;
    if (s.sounding) {
        if (n_sounding == 1) {
            audio_proto = banks.material_audio[materials[sounding_idx[0]]];
        } else {
            const auto& a = banks.material_audio[materials[sounding_idx[0]]];
            const auto& b = banks.material_audio[materials[sounding_idx[1]]];
            std::vector<double> mix(a.size());
            for (std::size_t d = 0; d < a.size(); ++d) mix[d] = 0.5 * (a[d] + b[d]);
            audio_proto = l2_normalize(std::span<const double>(mix));
        }
    } else {
        audio_proto = banks.offscreen_audio;
    }
    s.audio = noisy(audio_proto, spec.sigma, rng);

    s.action = static_cast<std::uint32_t>(rng.integer(spec.actions));
    s.narration = noisy(banks.action_narration[s.action], spec.sigma, rng);

    // Candidate pool: every placed object plus jittered proposals, positives
    // recovered through IoU matching against the ground truth.
    std::vector<BinaryMask> candidates;
    for (const PlacedObject& o : s.gt_objects) candidates.push_back(o.mask);
    for (const PlacedObject& o : s.distractors) candidates.push_back(o.mask);
    const std::uint32_t target =
        std::max<std::uint32_t>(
            spec.min_candidates +
                static_cast<std::uint32_t>(rng.integer(spec.max_candidates - spec.min_candidates + 1)),
            object_count);
    std::vector<BinaryMask> gt_masks;
    for (const PlacedObject& o : s.gt_objects) gt_masks.push_back(o.mask);
    while (candidates.size() < target) {
        BinaryMask jittered;
        bool ok = false;
        for (int attempt = 0; attempt < kJitterRetries && !ok; ++attempt) {
            const Rect& src = rects[rng.integer(object_count)];
            Rect j;
            j.h = std::clamp<std::uint32_t>(
                static_cast<std::uint32_t>(std::lround(src.h * rng.uniform(0.6, 1.4))), 4,
                spec.height);
            j.w = std::clamp<std::uint32_t>(
                static_cast<std::uint32_t>(std::lround(src.w * rng.uniform(0.6, 1.4))), 4,
                spec.width);
            const auto shift = [&](std::uint32_t base, std::uint32_t extent, std::uint32_t limit) {
                const double lo = spec.patch_size * 0.5;
                const double hi = spec.patch_size * 1.5;
                const double delta = rng.uniform(lo, hi) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
                const double pos = std::clamp(static_cast<double>(base) + delta, 0.0,
                                              static_cast<double>(limit - extent));
                return static_cast<std::uint32_t>(std::lround(pos));
            };
            j.y = shift(src.y, j.h, spec.height);
            j.x = shift(src.x, j.w, spec.width);
            jittered = rect_mask(spec, j);
            ok = std::all_of(gt_masks.begin(), gt_masks.end(), [&](const BinaryMask& gt) {
                return mask_iou(jittered, gt) < 0.5;
            });
        }
        candidates.push_back(std::move(jittered));  // last attempt stands if none cleared
    }
    s.pool = match_candidates(candidates, gt_masks, 0.5);
    return s;
}

Dataset generate_dataset(const WorldSpec& spec, std::uint64_t seed, std::size_t count,
                         std::uint64_t seed_offset, unsigned threads) {
    Dataset ds;
    ds.spec = spec;
    ds.samples.resize(count);
    const PrototypeBanks banks = generate_world(spec, seed);
    parallel_for(count, threads, [&](std::size_t i) {
        ds.samples[i] = generate_sample(banks, spec, derive_seed(seed, "sample", seed_offset + i));
    });
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    dataset.spec.validate();
    atomic_write_file(path, [&](std::ostream& out) {
        wire::Writer w(out);
        w.str(kDatasetMagic);
        write_spec(w, dataset.spec);
        w.u32(static_cast<std::uint32_t>(dataset.samples.size()));
        for (const SyntheticSample& s : dataset.samples) write_sample(w, s);
    });
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    wire::Reader r(in, path.string());
    r.expect_magic(kDatasetMagic);
    Dataset ds;
    ds.spec = read_spec(r);
    const std::uint32_t count = r.u32();
    ds.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) ds.samples.push_back(read_sample(r, ds.spec));
    return ds;
}

}  // namespace sndobj
