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
#include <map>
#include <optional>
#include <string>

#include "sndobj/kvconfig.hpp"
#include "sndobj/synthworld.hpp"
#include "sndobj/trainer.hpp"

namespace sndobj {

inline constexpr char kVersion[] = "0.1.0";
inline constexpr char kOutDirEnv[] = "SNDOBJ_OUT_DIR";

/// Output directory resolution: explicit flag, then $SNDOBJ_OUT_DIR, then cwd.
std::filesystem::path resolve_out_dir(const std::optional<std::string>& flag);

struct WorldFileConfig {
    WorldSpec spec;
    std::size_t train_count = 0;
    std::size_t finetune_count = 0;
    std::size_t eval_count = 0;
    std::map<std::string, std::string> snapshot;
};

/// World spec plus split sizes from a flat key-value file.
WorldFileConfig resolve_world_config(KvConfig& kv);

// CLI flags that may override config-file values; flags win.
struct TrainOverrides {
    std::optional<double> lr, tau, theta, beta;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> batch_size, epochs_align, epochs_refine, epochs_finetune;
    std::optional<std::uint32_t> embed_dim, hidden_dim;
    std::optional<bool> use_object_mask;
    std::optional<std::string> optimizer;
};

struct ResolvedTrainConfig {
    TrainConfig config;
    std::map<std::string, std::string> snapshot;
};

ResolvedTrainConfig resolve_train_config(KvConfig* kv, const TrainOverrides& overrides);

struct GenDataOptions {
    std::filesystem::path spec_file;
    std::optional<std::string> out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = machine parallelism
};

struct TrainOptions {
    std::optional<std::filesystem::path> config_file;
    std::optional<std::filesystem::path> pretrain_path;
    std::optional<std::filesystem::path> finetune_path;
    std::optional<std::filesystem::path> init_checkpoint;
    std::string stage = "all";  // all | pretrain | align | refine | finetune
    std::optional<std::string> out_dir;
    TrainOverrides overrides;
    unsigned threads = 0;
};

struct EvalObjectsOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path dataset;
    std::optional<std::string> out_dir;
    std::uint32_t dump_maps = 0;  // write PGMs for the first N evaluated samples
    unsigned threads = 0;
};

struct EvalActionsOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path dataset;
    std::optional<std::string> out_dir;
    double theta = 0.5;
    unsigned threads = 0;
};

struct ClusterOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path dataset;
    std::optional<std::string> out_dir;
    std::uint32_t k = 20;
    double theta = 0.5;
    unsigned threads = 0;
};

struct GradcheckOptions {
    std::uint64_t seed = 0;
    std::optional<std::string> out_dir;
    double tolerance = 1e-4;
};

int cmd_gen_data(const GenDataOptions& opts);
int cmd_train(const TrainOptions& opts);
int cmd_eval_objects(const EvalObjectsOptions& opts);
int cmd_eval_actions(const EvalActionsOptions& opts);
int cmd_cluster(const ClusterOptions& opts);
int cmd_gradcheck(const GradcheckOptions& opts);

}  // namespace sndobj
