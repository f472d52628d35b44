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

#include "sndobj/gradcheck.hpp"

#include <functional>

#include "sndobj/losses.hpp"
#include "sndobj/rng.hpp"
#include "sndobj/trainer.hpp"
#include "sndobj/util.hpp"

namespace sndobj {

namespace {

constexpr double kTheta = 0.5;
constexpr double kBeta = 50.0;
constexpr double kTau = 0.07;
constexpr std::uint32_t kPatches = 4;

enum class LossKind { align, consensus, refine, finetune };

const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::align: return "align";
        case LossKind::consensus: return "consensus";
        case LossKind::refine: return "refine";
        case LossKind::finetune: return "finetune";
    }
    return "?";
}

struct Fixture {
    ModelParams params;
    std::vector<DenseArray> raw_vision;             // per sample, 1 x kPatches x dim
    std::vector<std::vector<double>> raw_audio;
    std::vector<std::vector<double>> raw_language;
    std::vector<ObjectnessGrid> grids;
    std::vector<std::uint64_t> bg_seeds;
    std::vector<bool> has_background;
};

Fixture make_fixture(std::uint64_t seed, std::uint32_t batch_size, std::uint32_t dim) {
    Fixture f;
    f.params.vision = Perceptron::random_init(dim, dim, dim, derive_seed(seed, "p/vision"));
    f.params.audio = Perceptron::random_init(dim, dim, dim, derive_seed(seed, "p/audio"));
    f.params.language = Perceptron::random_init(dim, dim, dim, derive_seed(seed, "p/language"));
    Rng rng(derive_seed(seed, "inputs"));
    for (std::uint32_t k = 0; k < batch_size; ++k) {
        f.raw_vision.push_back(DenseArray({1, kPatches, dim}, rng.normal_vec(kPatches * dim)));
        f.raw_audio.push_back(rng.normal_vec(dim));
        f.raw_language.push_back(rng.normal_vec(dim));
        ObjectnessGrid grid;
        grid.frames = 1;
        grid.patches_y = 1;
        grid.patches_x = kPatches;
        grid.scores = {0.9, 0.1, rng.uniform(), rng.uniform()};
        f.grids.push_back(grid);
        f.bg_seeds.push_back(derive_seed(seed, "bg", k));
        f.has_background.push_back(k != 0);  // sample 0 exercises the no-background path
    }
    return f;
}

// One full forward pass under a candidate parameter set.
BatchEmbeddings forward_batch(const Fixture& f, const ModelParams& params, bool with_language,
                              bool with_background) {
    BatchEmbeddings batch;
    const std::size_t bs = f.raw_audio.size();
    batch.vision.resize(bs);
    batch.audio.resize(bs);
    if (with_language) batch.language.resize(bs);
    if (with_background) batch.background.resize(bs);
    for (std::size_t k = 0; k < bs; ++k) {
        const VisualForward vfwd = encode_visual(f.raw_vision[k], params.vision);
        batch.vision[k] = object_aware_pool(vfwd.embeddings, f.grids[k], kTheta).embedding.values;
        batch.audio[k] = encode_vector(f.raw_audio[k], params.audio).embedding;
        if (with_language) {
            batch.language[k] = encode_vector(f.raw_language[k], params.language).embedding;
        }
        if (with_background && f.has_background[k]) {
            batch.background[k] =
                background_pool(vfwd.embeddings, f.grids[k], kTheta, kBeta, f.bg_seeds[k])
                    .embedding.values;
        }
    }
    return batch;
}

struct LossEval {
    std::function<LossOutput(const BatchEmbeddings&)> compute;
    bool with_language = true;
    bool with_background = false;
};

// The functional the finite differences probe. Consensus-family losses take
// frozen targets so the probe matches the stop-gradient semantics.
LossEval make_loss_eval(LossKind kind, const ConsensusConfig& consensus,
                        const std::vector<double>& targets) {
    LossEval eval;
    switch (kind) {
        case LossKind::align:
            eval.compute = [](const BatchEmbeddings& b) { return align_loss(b, kTau); };
            break;
        case LossKind::consensus:
            eval.compute = [&consensus, targets](const BatchEmbeddings& b) {
                return consensus_loss_with_targets(b, consensus, targets);
            };
            break;
        case LossKind::refine:
            eval.compute = [&consensus, targets](const BatchEmbeddings& b) {
                return refine_loss_with_targets(b, consensus, targets);
            };
            break;
        case LossKind::finetune:
            eval.compute = [](const BatchEmbeddings& b) { return finetune_loss(b, kTau); };
            eval.with_language = false;
            eval.with_background = true;
            break;
    }
    return eval;
}

GradCheckReport check_embedding_grads(const LossEval& eval, const BatchEmbeddings& batch,
                                      const LossOutput& loss, double h) {
    GradCheckReport report;
    BatchEmbeddings probe = batch;
    const std::size_t bs = batch.size();
    const auto check_slot = [&](std::vector<double>& slot, const std::vector<double>& analytic) {
        const DenseArray x0 = DenseArray::vec(slot);
        const auto f = [&](const DenseArray& cand) {
            slot = cand.data;
            const double value = eval.compute(probe).value;
            return value;
        };
        report.absorb(check_gradient(f, x0, DenseArray::vec(analytic), h));
        slot = x0.data;
    };
    for (std::size_t k = 0; k < bs; ++k) {
        check_slot(probe.vision[k], loss.d_vision[k]);
        check_slot(probe.audio[k], loss.d_audio[k]);
        if (eval.with_language) check_slot(probe.language[k], loss.d_language[k]);
        if (eval.with_background && probe.background[k].has_value()) {
            check_slot(*probe.background[k], *loss.d_background[k]);
        }
    }
    return report;
}

// Analytic parameter gradients assembled by the same backward path the
// trainer uses.
void accumulate_param_grads(const Fixture& f, const ModelParams& params, const LossEval& eval,
                            const LossOutput& loss, ParamGrads& gv, ParamGrads& ga,
                            ParamGrads& gl) {
    const std::size_t bs = f.raw_audio.size();
    for (std::size_t k = 0; k < bs; ++k) {
        const VisualForward vfwd = encode_visual(f.raw_vision[k], params.vision);
        const PoolForward vpool = object_aware_pool(vfwd.embeddings, f.grids[k], kTheta);
        backward_visual(f.raw_vision[k], vfwd, vpool, loss.d_vision[k], params.vision, gv);
        if (eval.with_background && f.has_background[k] && loss.d_background[k].has_value()) {
            const PoolForward bgpool =
                background_pool(vfwd.embeddings, f.grids[k], kTheta, kBeta, f.bg_seeds[k]);
            backward_visual(f.raw_vision[k], vfwd, bgpool, *loss.d_background[k], params.vision, gv);
        }
        const VectorForward afwd = encode_vector(f.raw_audio[k], params.audio);
        backward_audio(afwd, loss.d_audio[k], params.audio, ga);
        if (eval.with_language) {
            const VectorForward lfwd = encode_vector(f.raw_language[k], params.language);
            backward_language(lfwd, loss.d_language[k], params.language, gl);
        }
    }
}

GradCheckReport check_param_grads(const Fixture& f, const LossEval& eval, const LossOutput& loss,
                                  double h) {
    GradCheckReport report;
    ModelParams probe = f.params;
    ParamGrads gv = ParamGrads::zeros_like(probe.vision);
    ParamGrads ga = ParamGrads::zeros_like(probe.audio);
    ParamGrads gl = ParamGrads::zeros_like(probe.language);
    accumulate_param_grads(f, probe, eval, loss, gv, ga, gl);

    const auto check_tensor = [&](std::vector<double>& tensor, const std::vector<double>& analytic) {
        const DenseArray x0 = DenseArray::vec(tensor);
        const auto func = [&](const DenseArray& cand) {
            tensor = cand.data;
            const BatchEmbeddings batch =
                forward_batch(f, probe, eval.with_language, eval.with_background);
            return eval.compute(batch).value;
        };
        report.absorb(check_gradient(func, x0, DenseArray::vec(analytic), h));
        tensor = x0.data;
    };
    check_tensor(probe.vision.w1, gv.w1);
    check_tensor(probe.vision.b1, gv.b1);
    check_tensor(probe.vision.w2, gv.w2);
    check_tensor(probe.vision.b2, gv.b2);
    check_tensor(probe.audio.w1, ga.w1);
    check_tensor(probe.audio.b1, ga.b1);
    check_tensor(probe.audio.w2, ga.w2);
    check_tensor(probe.audio.b2, ga.b2);
    if (eval.with_language) {
        check_tensor(probe.language.w1, gl.w1);
        check_tensor(probe.language.b1, gl.b1);
        check_tensor(probe.language.w2, gl.w2);
        check_tensor(probe.language.b2, gl.b2);
    }
    return report;
}

}  // namespace

GradCheckSummary run_gradcheck(std::uint64_t seed, std::uint32_t num_batches,
                               std::uint32_t batch_size, std::uint32_t dim, double h) {
    const double t0 = now_seconds();
    GradCheckSummary summary;
    ConsensusConfig consensus;
    consensus.tau = kTau;

    for (const LossKind kind :
         {LossKind::align, LossKind::consensus, LossKind::refine, LossKind::finetune}) {
        LossGradCheck entry;
        entry.loss = loss_kind_name(kind);
        for (std::uint32_t b = 0; b < num_batches; ++b) {
            const Fixture f = make_fixture(derive_seed(seed, "gradcheck/batch", b), batch_size, dim);
            const bool needs_language = kind != LossKind::finetune;
            const bool needs_background = kind == LossKind::finetune;
            const BatchEmbeddings batch =
                forward_batch(f, f.params, needs_language, needs_background);
            std::vector<double> targets;
            if (kind == LossKind::consensus || kind == LossKind::refine) {
                targets = consensus_scores(batch, consensus);
            }
            const LossEval eval = make_loss_eval(kind, consensus, targets);
            const LossOutput loss = eval.compute(batch);
            entry.embeddings.absorb(check_embedding_grads(eval, batch, loss, h));
            entry.parameters.absorb(check_param_grads(f, eval, loss, h));
        }
        summary.overall.absorb(entry.embeddings);
        summary.overall.absorb(entry.parameters);
        summary.per_loss.push_back(std::move(entry));
    }
    summary.wall_s = now_seconds() - t0;
    return summary;
}

}  // namespace sndobj
