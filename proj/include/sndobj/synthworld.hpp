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
#include <vector>

#include "sndobj/maskops.hpp"
#include "sndobj/numerics.hpp"

namespace sndobj {

// Parameters of a procedural world: scenes of non-overlapping rectangular
// objects with material identities, correlated audio/narration features, and
// candidate pools for detection.
struct WorldSpec {
    std::uint32_t materials = 2;
    std::uint32_t actions = 3;
    std::uint32_t height = 64;
    std::uint32_t width = 64;
    std::uint32_t patch_size = 16;
    std::uint32_t frames = 2;
    std::uint32_t visual_dim = 32;
    std::uint32_t audio_dim = 32;
    std::uint32_t lang_dim = 32;
    double sigma = 0.05;            // feature noise scale
    double p_non_sounding = 0.0;    // probability the audio is off-screen
    double p_two_objects = 0.0;     // probability the interaction involves two objects
    std::uint32_t min_objects = 2;
    std::uint32_t max_objects = 4;
    std::uint32_t min_object_px = 24;
    std::uint32_t max_object_px = 28;
    std::uint32_t min_candidates = 5;
    std::uint32_t max_candidates = 5;

    void validate() const;
    std::uint32_t patches_y() const { return height / patch_size; }
    std::uint32_t patches_x() const { return width / patch_size; }
    std::uint32_t patches_per_frame() const { return patches_y() * patches_x(); }
};

// Unit-norm prototype vectors shared by every sample of a world.
struct PrototypeBanks {
    std::vector<std::vector<double>> material_visual;
    std::vector<std::vector<double>> material_audio;
    std::vector<std::vector<double>> action_narration;
    std::vector<double> offscreen_audio;
    std::vector<double> scene_visual;
};

struct PlacedObject {
    BinaryMask mask;
    std::uint32_t material = 0;
};

struct SyntheticSample {
    DenseArray patch_features;  // frames x patches x visual_dim
    std::vector<PlacedObject> gt_objects;  // 1 or 2 objects driving the interaction
    std::vector<PlacedObject> distractors;
    std::uint32_t action = 0;
    std::vector<double> audio;
    std::vector<double> narration;
    bool sounding = true;
    CandidatePool pool;
};

PrototypeBanks generate_world(const WorldSpec& spec, std::uint64_t seed);
SyntheticSample generate_sample(const PrototypeBanks& banks, const WorldSpec& spec,
                                std::uint64_t seed);

struct Dataset {
    WorldSpec spec;
    std::vector<SyntheticSample> samples;
};

// Dataset file: magic "SNDOBJ1", spec block, sample count, then per-sample
// records. Integers are u32 LE, floats 64-bit LE.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

/// Deterministically generates `count` samples; sample i draws its seed from
/// (seed, seed_offset + i), so splits generated with disjoint offset ranges
/// share no randomness.
Dataset generate_dataset(const WorldSpec& spec, std::uint64_t seed, std::size_t count,
                         std::uint64_t seed_offset = 0, unsigned threads = 1);

}  // namespace sndobj
