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

#include "sndobj/trainer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sndobj/rng.hpp"
#include "sndobj/util.hpp"

namespace sndobj {

namespace {

// Adam moments for one parameter tensor.
struct Moments {
    std::vector<double> m, v;

    explicit Moments(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, const ModelParams& params) : cfg_(cfg) {
        if (cfg.optimizer == OptimizerKind::adam) {
            for (const Perceptron* p : {&params.vision, &params.audio, &params.language}) {
                states_.emplace_back(p->w1.size());
                states_.emplace_back(p->b1.size());
                states_.emplace_back(p->w2.size());
                states_.emplace_back(p->b2.size());
            }
        }
    }

    void step(ModelParams& params, const ParamGrads& gv, const ParamGrads& ga,
              const ParamGrads& gl) {
        ++t_;
        std::size_t slot = 0;
        apply(params.vision, gv, slot);
        apply(params.audio, ga, slot);
        apply(params.language, gl, slot);
    }

private:
    void apply(Perceptron& p, const ParamGrads& g, std::size_t& slot) {
        std::vector<double>* tensors[4] = {&p.w1, &p.b1, &p.w2, &p.b2};
        const std::vector<double>* grads[4] = {&g.w1, &g.b1, &g.w2, &g.b2};
        for (int k = 0; k < 4; ++k) {
            if (!p.frozen) update(*tensors[k], *grads[k], slot);
            if (cfg_.optimizer == OptimizerKind::adam) ++slot;
        }
    }

    void update(std::vector<double>& theta, const std::vector<double>& grad, std::size_t slot) {
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * grad[i];
            return;
        }
        Moments& mo = states_[slot];
        const double b1 = cfg_.adam_beta1;
        const double b2 = cfg_.adam_beta2;
        const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            mo.m[i] = b1 * mo.m[i] + (1.0 - b1) * grad[i];
            mo.v[i] = b2 * mo.v[i] + (1.0 - b2) * grad[i] * grad[i];
            const double mhat = mo.m[i] / bias1;
            const double vhat = mo.v[i] / bias2;
            theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
    }

    const TrainConfig& cfg_;
    std::vector<Moments> states_;
    std::uint64_t t_ = 0;
};

ObjectnessGrid all_ones_grid(const ObjectnessGrid& like) {
    ObjectnessGrid g = like;
    for (double& s : g.scores) s = 1.0;
    return g;
}

}  // namespace

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::align: return "align";
        case Stage::refine: return "refine";
        case Stage::finetune: return "finetune";
    }
    return "unknown";
}

Stage stage_from_name(const std::string& name) {
    if (name == "align") return Stage::align;
    if (name == "refine") return Stage::refine;
    if (name == "finetune") return Stage::finetune;
    throw std::invalid_argument("unknown stage: " + name);
}

std::uint32_t TrainConfig::epochs_for(Stage s) const {
    switch (s) {
        case Stage::align: return epochs_align;
        case Stage::refine: return epochs_refine;
        case Stage::finetune: return epochs_finetune;
    }
    return 0;
}

void TrainConfig::validate() const {
    if (epochs_align < 1 || epochs_refine < 1 || epochs_finetune < 1) {
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    }
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (tau <= 0.0) throw std::invalid_argument("TrainConfig: tau must be positive");
    if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("TrainConfig: theta must be in [0,1]");
    if (beta_percent < 0.0 || beta_percent > 100.0) {
        throw std::invalid_argument("TrainConfig: beta must be in [0,100]");
    }
    if (embed_dim < 1) throw std::invalid_argument("TrainConfig: embed_dim must be >= 1");
    ConsensusConfig c = consensus;
    c.tau = tau;
    c.validate();
}

std::string TrainReport::fingerprint() const {
    std::ostringstream out;
    out.precision(17);
    for (const EpochRecord& e : epochs) {
        out << e.stage << ':' << e.epoch << ':' << e.mean_loss << ':' << e.max_grad_norm << ':'
            << e.pool_fallbacks << ':' << e.missing_backgrounds << '\n';
    }
    out << final_checkpoint << '\n';
    return out.str();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

ModelParams init_for_dataset(const Dataset& dataset, const TrainConfig& config) {
    return init_model(dataset.spec.visual_dim, dataset.spec.audio_dim, dataset.spec.lang_dim,
                      config.hidden_dim, config.embed_dim, config.seed, config.freeze_language);
}

void check_model_matches(const ModelParams& params, const WorldSpec& spec) {
    if (params.vision.input_dim != spec.visual_dim || params.audio.input_dim != spec.audio_dim ||
        params.language.input_dim != spec.lang_dim) {
        throw std::runtime_error("model/dataset mismatch: encoder input dims differ from dataset feature dims");
    }
}

TrainReport run_stage(const Dataset& dataset, ModelParams& params, const TrainConfig& config,
                      Stage stage) {
    config.validate();
    if (dataset.samples.empty()) throw std::invalid_argument("run_stage: empty dataset");
    check_model_matches(params, dataset.spec);
    const double t_start = now_seconds();
    const std::string name = stage_name(stage);
    const std::size_t n = dataset.samples.size();

    ConsensusConfig consensus = config.consensus;
    consensus.tau = config.tau;

    // Objectness of the interaction: union of the ground-truth masks.
    std::vector<ObjectnessGrid> grids(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<BinaryMask> gt;
        for (const PlacedObject& o : dataset.samples[i].gt_objects) gt.push_back(o.mask);
        grids[i] = patchify_mask(union_masks(gt), dataset.spec.patch_size);
    }

    Optimizer optimizer(config, params);
    TrainReport report;
    for (std::uint32_t epoch = 1; epoch <= config.epochs_for(stage); ++epoch) {
        const double e_start = now_seconds();
        EpochRecord record;
        record.stage = name;
        record.epoch = epoch;
        const auto batches =
            make_batches(n, config.batch_size, derive_seed(config.seed, "batches/" + name, epoch));
        double loss_sum = 0.0;
        std::size_t sample_count = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch_idx = batches[b];
            const std::size_t bs = batch_idx.size();

            std::vector<VisualForward> vfwd(bs);
            std::vector<PoolForward> vpool(bs);
            std::vector<PoolForward> bgpool(bs);
            std::vector<bool> has_bg(bs, false);
            std::vector<VectorForward> afwd(bs);
            std::vector<VectorForward> lfwd(bs);
            BatchEmbeddings batch;
            batch.vision.resize(bs);
            batch.audio.resize(bs);
            if (stage != Stage::finetune) batch.language.resize(bs);
            if (stage == Stage::finetune) batch.background.resize(bs);

            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = batch_idx[k];
                const SyntheticSample& s = dataset.samples[i];
                vfwd[k] = encode_visual(s.patch_features, params.vision);
                const ObjectnessGrid pooled_grid =
                    config.use_object_mask ? grids[i] : all_ones_grid(grids[i]);
                vpool[k] = object_aware_pool(vfwd[k].embeddings, pooled_grid, config.theta);
                if (vpool[k].fallback) ++record.pool_fallbacks;
                batch.vision[k] = vpool[k].embedding.values;
                afwd[k] = encode_vector(s.audio, params.audio);
                batch.audio[k] = afwd[k].embedding;
                if (stage != Stage::finetune) {
                    lfwd[k] = encode_vector(s.narration, params.language);
                    batch.language[k] = lfwd[k].embedding;
                } else {
                    // Background sampling always sees the true objectness grid.
                    try {
                        bgpool[k] = background_pool(
                            vfwd[k].embeddings, grids[i], config.theta, config.beta_percent,
                            derive_seed(config.seed, "background/" + name,
                                        static_cast<std::uint64_t>(epoch) * n + i));
                        has_bg[k] = true;
                        batch.background[k] = bgpool[k].embedding.values;
                    } catch (const std::runtime_error&) {
                        ++record.missing_backgrounds;
                    }
                }
            }

            LossOutput loss;
            switch (stage) {
                case Stage::align: loss = align_loss(batch, config.tau); break;
                case Stage::refine: loss = refine_loss(batch, consensus); break;
                case Stage::finetune: loss = finetune_loss(batch, config.tau); break;
            }
            if (!std::isfinite(loss.value)) {
                throw std::runtime_error("run_stage: non-finite loss at stage " + name + " epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b));
            }
            loss_sum += loss.value * static_cast<double>(bs);
            sample_count += bs;

            ParamGrads gv = ParamGrads::zeros_like(params.vision);
            ParamGrads ga = ParamGrads::zeros_like(params.audio);
            ParamGrads gl = ParamGrads::zeros_like(params.language);
            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = batch_idx[k];
                const SyntheticSample& s = dataset.samples[i];
                backward_visual(s.patch_features, vfwd[k], vpool[k], loss.d_vision[k],
                                params.vision, gv);
                if (stage == Stage::finetune && has_bg[k] && loss.d_background[k].has_value()) {
                    backward_visual(s.patch_features, vfwd[k], bgpool[k], *loss.d_background[k],
                                    params.vision, gv);
                }
                backward_audio(afwd[k], loss.d_audio[k], params.audio, ga);
                if (stage != Stage::finetune && !params.language.frozen) {
                    backward_language(lfwd[k], loss.d_language[k], params.language, gl);
                }
            }
            double grad_sq = gv.squared_norm() + ga.squared_norm();
            if (!params.language.frozen) grad_sq += gl.squared_norm();
            record.max_grad_norm = std::max(record.max_grad_norm, std::sqrt(grad_sq));

            optimizer.step(params, gv, ga, gl);
        }
        record.mean_loss = loss_sum / static_cast<double>(sample_count);
        record.wall_s = now_seconds() - e_start;
        report.epochs.push_back(record);
    }
    report.wall_s = now_seconds() - t_start;
    return report;
}

PipelineResult run_pipeline(const Dataset& pretrain, const Dataset& finetune_set,
                            ModelParams params, const TrainConfig& config) {
    PipelineResult result;
    result.align_report = run_stage(pretrain, params, config, Stage::align);
    result.after_align = params;
    result.refine_report = run_stage(pretrain, params, config, Stage::refine);
    result.after_refine = params;
    result.finetune_report = run_stage(finetune_set, params, config, Stage::finetune);
    result.after_finetune = params;
    return result;
}

}  // namespace sndobj
