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
#include <string>
#include <vector>

#include "sndobj/numerics.hpp"

namespace sndobj {

struct LossGradCheck {
    std::string loss;
    GradCheckReport embeddings;
    GradCheckReport parameters;
};

struct GradCheckSummary {
    std::vector<LossGradCheck> per_loss;
    GradCheckReport overall;
    double wall_s = 0.0;

    bool passed(double tolerance = 1e-4) const { return overall.max_rel_error <= tolerance; }
};

/// Checks the analytic gradients of every training loss against central
/// finite differences (h = 1e-5), both with respect to each embedding and
/// through the encoders with respect to every parameter. Consensus targets
/// are held fixed during probing, matching the stop-gradient definition of
/// the consensus loss.
GradCheckSummary run_gradcheck(std::uint64_t seed, std::uint32_t num_batches = 10,
                               std::uint32_t batch_size = 4, std::uint32_t dim = 16,
                               double h = 1e-5);

}  // namespace sndobj
