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

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sndobj {

// Row-major dense array of 64-bit floats. Shapes are validated at operation
// boundaries rather than encoded in the type.
struct DenseArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    DenseArray() = default;
    DenseArray(std::vector<std::size_t> s, std::vector<double> d);

    static DenseArray zeros(std::vector<std::size_t> shape);
    static DenseArray vec(std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool finite() const;

    double& at(std::size_t i);
    double at(std::size_t i) const;
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Unit-norm copy of v. A zero vector has no direction and is rejected.
std::vector<double> l2_normalize(std::span<const double> v);
DenseArray l2_normalize(const DenseArray& v);

/// log(sum_i exp(x_i)) with max subtraction; never overflows for |x_i| <= 700.
double log_sum_exp(std::span<const double> xs);

/// Central-difference gradient estimate, one probe pair per coordinate.
/// Throws if f evaluates to a non-finite value at any probe point.
DenseArray finite_diff_grad(const std::function<double(const DenseArray&)>& f,
                            const DenseArray& x, double h);

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t probe_count = 0;

    void absorb(const GradCheckReport& other);
};

/// Relative error with a small-denominator floor: |a-b| / max(|a|, |b|, 1e-6).
double rel_error(double a, double b);

/// Compares an analytic gradient against central finite differences of f.
GradCheckReport check_gradient(const std::function<double(const DenseArray&)>& f,
                               const DenseArray& x, const DenseArray& analytic, double h);

}  // namespace sndobj
