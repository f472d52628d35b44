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

#include "sndobj/encoders.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sndobj/rng.hpp"
#include "sndobj/util.hpp"

namespace sndobj {

namespace {

constexpr char kCheckpointMagic[] = "SNDCKPT1";
constexpr std::uint32_t kCheckpointVersion = 1;

// z = W2 tanh(W1 x + b1) + b2, or the affine special case. `hidden_out`
// receives the tanh activations when a hidden layer exists.
void perceptron_forward(const Perceptron& p, std::span<const double> x,
                        std::span<double> hidden_out, std::span<double> z_out) {
    if (p.hidden_dim == 0) {
        for (std::size_t o = 0; o < p.output_dim; ++o) {
            double s = p.b2[o];
            const double* row = p.w2.data() + o * p.input_dim;
            for (std::size_t i = 0; i < p.input_dim; ++i) s += row[i] * x[i];
            z_out[o] = s;
        }
        return;
    }
    for (std::size_t h = 0; h < p.hidden_dim; ++h) {
        double s = p.b1[h];
        const double* row = p.w1.data() + h * p.input_dim;
        for (std::size_t i = 0; i < p.input_dim; ++i) s += row[i] * x[i];
        hidden_out[h] = std::tanh(s);
    }
    for (std::size_t o = 0; o < p.output_dim; ++o) {
        double s = p.b2[o];
        const double* row = p.w2.data() + o * p.hidden_dim;
        for (std::size_t h = 0; h < p.hidden_dim; ++h) s += row[h] * hidden_out[h];
        z_out[o] = s;
    }
}

// Accumulates parameter gradients for dz at one input; optionally emits dx.
void perceptron_backward(const Perceptron& p, std::span<const double> x,
                         std::span<const double> hidden, std::span<const double> dz,
                         ParamGrads& grads, std::span<double> dx) {
    if (p.hidden_dim == 0) {
        for (std::size_t o = 0; o < p.output_dim; ++o) {
            const double g = dz[o];
            grads.b2[o] += g;
            double* row = grads.w2.data() + o * p.input_dim;
            for (std::size_t i = 0; i < p.input_dim; ++i) row[i] += g * x[i];
        }
        if (!dx.empty()) {
            for (std::size_t i = 0; i < p.input_dim; ++i) {
                double s = 0.0;
                for (std::size_t o = 0; o < p.output_dim; ++o) {
                    s += dz[o] * p.w2[o * p.input_dim + i];
                }
                dx[i] += s;
            }
        }
        return;
    }
    std::vector<double> da(p.hidden_dim, 0.0);
    for (std::size_t h = 0; h < p.hidden_dim; ++h) {
        double dh = 0.0;
        for (std::size_t o = 0; o < p.output_dim; ++o) {
            dh += dz[o] * p.w2[o * p.hidden_dim + h];
        }
        da[h] = dh * (1.0 - hidden[h] * hidden[h]);
    }
    for (std::size_t o = 0; o < p.output_dim; ++o) {
        const double g = dz[o];
        grads.b2[o] += g;
        double* row = grads.w2.data() + o * p.hidden_dim;
        for (std::size_t h = 0; h < p.hidden_dim; ++h) row[h] += g * hidden[h];
    }
    for (std::size_t h = 0; h < p.hidden_dim; ++h) {
        const double g = da[h];
        grads.b1[h] += g;
        double* row = grads.w1.data() + h * p.input_dim;
        for (std::size_t i = 0; i < p.input_dim; ++i) row[i] += g * x[i];
    }
    if (!dx.empty()) {
        for (std::size_t i = 0; i < p.input_dim; ++i) {
            double s = 0.0;
            for (std::size_t h = 0; h < p.hidden_dim; ++h) {
                s += da[h] * p.w1[h * p.input_dim + i];
            }
            dx[i] += s;
        }
    }
}

// d(z/||z||) pullback: dm = (g - e (g.e)) / ||m||.
std::vector<double> normalize_backward(std::span<const double> unit, double norm,
                                       std::span<const double> upstream) {
    const double ge = dot(upstream, unit);
    std::vector<double> dm(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        dm[i] = (upstream[i] - unit[i] * ge) / norm;
    }
    return dm;
}

PoolForward pool_over(const PatchEmbeddings& e,
                      std::vector<std::pair<std::uint32_t, std::uint32_t>> kept, bool fallback) {
    PoolForward out;
    out.kept = std::move(kept);
    out.fallback = fallback;
    out.pooled.assign(e.dim, 0.0);
    for (const auto& [t, n] : out.kept) {
        const auto p = e.patch(t, n);
        for (std::size_t d = 0; d < e.dim; ++d) out.pooled[d] += p[d];
    }
    const double inv = 1.0 / static_cast<double>(out.kept.size());
    for (double& v : out.pooled) v *= inv;
    out.norm = l2_norm(out.pooled);
    out.embedding.modality = Modality::vision;
    out.embedding.pooled_fallback = fallback;
    out.embedding.values = l2_normalize(std::span<const double>(out.pooled));
    return out;
}

void backward_vector_impl(const VectorForward& fwd, std::span<const double> upstream,
                          const Perceptron& params, ParamGrads& grads,
                          std::vector<double>* input_grad) {
    const std::vector<double> dz = normalize_backward(fwd.embedding, fwd.norm, upstream);
    std::span<double> dx;
    if (input_grad) {
        input_grad->assign(params.input_dim, 0.0);
        dx = std::span<double>(*input_grad);
    }
    perceptron_backward(params, fwd.input, fwd.hidden, dz, grads, dx);
}

void write_perceptron(wire::Writer& w, const Perceptron& p) {
    w.u32(static_cast<std::uint32_t>(p.input_dim));
    w.u32(static_cast<std::uint32_t>(p.hidden_dim));
    w.u32(static_cast<std::uint32_t>(p.output_dim));
    w.u32(p.frozen ? 1 : 0);
    for (const auto* vec : {&p.w1, &p.b1, &p.w2, &p.b2}) {
        for (const double v : *vec) w.f64(v);
    }
}

Perceptron read_perceptron(wire::Reader& r) {
    Perceptron p;
    p.input_dim = r.u32();
    p.hidden_dim = r.u32();
    p.output_dim = r.u32();
    p.frozen = r.u32() != 0;
    const std::size_t w2_cols = p.hidden_dim ? p.hidden_dim : p.input_dim;
    p.w1.resize(p.hidden_dim * p.input_dim);
    p.b1.resize(p.hidden_dim);
    p.w2.resize(p.output_dim * w2_cols);
    p.b2.resize(p.output_dim);
    for (auto* vec : {&p.w1, &p.b1, &p.w2, &p.b2}) {
        for (double& v : *vec) v = r.f64();
    }
    p.validate();
    return p;
}

}  // namespace

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::vision: return "vision";
        case Modality::audio: return "audio";
        case Modality::language: return "language";
    }
    return "unknown";
}

Perceptron Perceptron::random_init(std::size_t input, std::size_t hidden, std::size_t output,
                                   std::uint64_t seed, bool frozen) {
    if (input == 0 || output == 0) {
        throw std::invalid_argument("Perceptron: input/output dims must be positive");
    }
    Perceptron p;
    p.input_dim = input;
    p.hidden_dim = hidden;
    p.output_dim = output;
    p.frozen = frozen;
    Rng rng(seed);
    const std::size_t w2_cols = hidden ? hidden : input;
    p.w1 = rng.normal_vec(hidden * input, hidden ? 1.0 / std::sqrt(static_cast<double>(input)) : 0.0);
    p.b1.assign(hidden, 0.0);
    p.w2 = rng.normal_vec(output * w2_cols, 1.0 / std::sqrt(static_cast<double>(w2_cols)));
    p.b2.assign(output, 0.0);
    return p;
}

Perceptron Perceptron::identity(std::size_t dim) {
    Perceptron p;
    p.input_dim = dim;
    p.hidden_dim = 0;
    p.output_dim = dim;
    p.w2.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) p.w2[i * dim + i] = 1.0;
    p.b2.assign(dim, 0.0);
    return p;
}

void Perceptron::validate() const {
    const std::size_t w2_cols = hidden_dim ? hidden_dim : input_dim;
    if (input_dim == 0 || output_dim == 0 || w1.size() != hidden_dim * input_dim ||
        b1.size() != hidden_dim || w2.size() != output_dim * w2_cols || b2.size() != output_dim) {
        throw std::invalid_argument("Perceptron: inconsistent shapes");
    }
    for (const auto* vec : {&w1, &b1, &w2, &b2}) {
        for (const double v : *vec) {
            if (!std::isfinite(v)) throw std::invalid_argument("Perceptron: non-finite parameter");
        }
    }
}

VisualForward encode_visual(const DenseArray& raw_patches, const Perceptron& params) {
    if (raw_patches.rank() != 3 || raw_patches.shape[2] != params.input_dim) {
        throw std::invalid_argument("encode_visual: raw patches must be T x N x input_dim");
    }
    const std::size_t frames = raw_patches.shape[0];
    const std::size_t patches = raw_patches.shape[1];
    VisualForward fwd;
    fwd.embeddings.frames = frames;
    fwd.embeddings.patches = patches;
    fwd.embeddings.dim = params.output_dim;
    fwd.embeddings.values.assign(frames * patches * params.output_dim, 0.0);
    fwd.hidden.assign(frames * patches * params.hidden_dim, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t n = 0; n < patches; ++n) {
            const std::span<const double> x(
                raw_patches.data.data() + (t * patches + n) * params.input_dim, params.input_dim);
            std::span<double> hidden(fwd.hidden.data() + (t * patches + n) * params.hidden_dim,
                                     params.hidden_dim);
            perceptron_forward(params, x, hidden, fwd.embeddings.patch(t, n));
        }
    }
    return fwd;
}

VectorForward encode_vector(std::span<const double> feature, const Perceptron& params) {
    if (feature.size() != params.input_dim) {
        throw std::invalid_argument("encode_vector: feature dim mismatch");
    }
    VectorForward fwd;
    fwd.input.assign(feature.begin(), feature.end());
    fwd.hidden.assign(params.hidden_dim, 0.0);
    fwd.raw.assign(params.output_dim, 0.0);
    perceptron_forward(params, feature, fwd.hidden, fwd.raw);
    fwd.norm = l2_norm(fwd.raw);
    fwd.embedding = l2_normalize(std::span<const double>(fwd.raw));
    return fwd;
}

ModalityEmbedding encode_audio(std::span<const double> feature, const Perceptron& params) {
    ModalityEmbedding e;
    e.modality = Modality::audio;
    e.values = encode_vector(feature, params).embedding;
    return e;
}

ModalityEmbedding encode_language(std::span<const double> feature, const Perceptron& params) {
    ModalityEmbedding e;
    e.modality = Modality::language;
    e.values = encode_vector(feature, params).embedding;
    return e;
}

PoolForward object_aware_pool(const PatchEmbeddings& e, const ObjectnessGrid& grid, double theta) {
    if (grid.frames != e.frames || grid.patches_per_frame() != e.patches) {
        throw std::invalid_argument("object_aware_pool: grid extents do not match embeddings");
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> kept;
    for (std::uint32_t t = 0; t < grid.frames; ++t) {
        for (std::uint32_t p = 0; p < grid.patches_per_frame(); ++p) {
            if (grid.at(t, p) >= theta) kept.emplace_back(t, p);
        }
    }
    bool fallback = false;
    if (kept.empty()) {
        fallback = true;
        for (std::uint32_t t = 0; t < grid.frames; ++t) {
            for (std::uint32_t p = 0; p < grid.patches_per_frame(); ++p) kept.emplace_back(t, p);
        }
    }
    return pool_over(e, std::move(kept), fallback);
}

PoolForward background_pool(const PatchEmbeddings& e, const ObjectnessGrid& grid, double theta,
                            double beta_percent, std::uint64_t seed) {
    if (grid.frames != e.frames || grid.patches_per_frame() != e.patches) {
        throw std::invalid_argument("background_pool: grid extents do not match embeddings");
    }
    auto kept = sample_background(grid, theta, beta_percent, seed);
    return pool_over(e, std::move(kept), false);
}

ParamGrads ParamGrads::zeros_like(const Perceptron& p) {
    ParamGrads g;
    g.w1.assign(p.w1.size(), 0.0);
    g.b1.assign(p.b1.size(), 0.0);
    g.w2.assign(p.w2.size(), 0.0);
    g.b2.assign(p.b2.size(), 0.0);
    return g;
}

double ParamGrads::squared_norm() const {
    double s = 0.0;
    for (const auto* vec : {&w1, &b1, &w2, &b2}) {
        for (const double v : *vec) s += v * v;
    }
    return s;
}

void backward_visual(const DenseArray& raw_patches, const VisualForward& fwd,
                     const PoolForward& pool, std::span<const double> upstream,
                     const Perceptron& params, ParamGrads& grads, DenseArray* input_grads) {
    if (upstream.size() != params.output_dim) {
        throw std::invalid_argument("backward_visual: upstream dim mismatch");
    }
    const std::vector<double> dm =
        normalize_backward(pool.embedding.values, pool.norm, upstream);
    // Mean pooling spreads the gradient equally over kept patches; everything
    // outside the kept set stays at zero.
    std::vector<double> dz(params.output_dim);
    const double inv = 1.0 / static_cast<double>(pool.kept.size());
    for (std::size_t d = 0; d < params.output_dim; ++d) dz[d] = dm[d] * inv;
    if (input_grads) *input_grads = DenseArray::zeros(raw_patches.shape);
    const std::size_t patches = fwd.embeddings.patches;
    for (const auto& [t, n] : pool.kept) {
        const std::span<const double> x(
            raw_patches.data.data() + (static_cast<std::size_t>(t) * patches + n) * params.input_dim,
            params.input_dim);
        const std::span<const double> hidden(
            fwd.hidden.data() + (static_cast<std::size_t>(t) * patches + n) * params.hidden_dim,
            params.hidden_dim);
        std::span<double> dx;
        if (input_grads) {
            dx = std::span<double>(
                input_grads->data.data() +
                    (static_cast<std::size_t>(t) * patches + n) * params.input_dim,
                params.input_dim);
        }
        perceptron_backward(params, x, hidden, dz, grads, dx);
    }
}

void backward_audio(const VectorForward& fwd, std::span<const double> upstream,
                    const Perceptron& params, ParamGrads& grads, std::vector<double>* input_grad) {
    backward_vector_impl(fwd, upstream, params, grads, input_grad);
}

void backward_language(const VectorForward& fwd, std::span<const double> upstream,
                       const Perceptron& params, ParamGrads& grads,
                       std::vector<double>* input_grad) {
    backward_vector_impl(fwd, upstream, params, grads, input_grad);
}

ModelParams init_model(std::size_t visual_in, std::size_t audio_in, std::size_t language_in,
                       std::size_t hidden, std::size_t embed_dim, std::uint64_t seed,
                       bool freeze_language) {
    ModelParams m;
    m.vision = Perceptron::random_init(visual_in, hidden, embed_dim, derive_seed(seed, "init/vision"));
    m.audio = Perceptron::random_init(audio_in, hidden, embed_dim, derive_seed(seed, "init/audio"));
    m.language = Perceptron::random_init(language_in, hidden, embed_dim,
                                         derive_seed(seed, "init/language"), freeze_language);
    return m;
}

std::string serialize_checkpoint(const ModelParams& params, const std::string& stage,
                                 std::uint32_t epoch) {
    std::ostringstream out(std::ios::binary);
    wire::Writer w(out);
    w.str(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(stage.size()));
    w.str(stage);
    w.u32(epoch);
    write_perceptron(w, params.vision);
    write_perceptron(w, params.audio);
    write_perceptron(w, params.language);
    return out.str();
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& stage, std::uint32_t epoch) {
    const std::string blob = serialize_checkpoint(params, stage, epoch);
    atomic_write_file(path, [&](std::ostream& out) { out.write(blob.data(), blob.size()); });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    wire::Reader r(in, path.string());
    r.expect_magic(kCheckpointMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const std::uint32_t stage_len = r.u32();
    if (stage_len > 64) r.fail("implausible stage name length");
    ckpt.stage = r.fixed(stage_len);
    ckpt.epoch = r.u32();
    ckpt.params.vision = read_perceptron(r);
    ckpt.params.audio = read_perceptron(r);
    ckpt.params.language = read_perceptron(r);
    return ckpt;
}

}  // namespace sndobj
