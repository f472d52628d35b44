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

#include "sndobj/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sndobj {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const std::size_t e : shape) n *= e;
    return n;
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != data.size()) {
        throw std::invalid_argument("DenseArray: data length does not match shape");
    }
}

DenseArray DenseArray::zeros(std::vector<std::size_t> shape) {
    const std::size_t n = shape_product(shape);
    return DenseArray(std::move(shape), std::vector<double>(n, 0.0));
}

DenseArray DenseArray::vec(std::vector<double> values) {
    const std::size_t n = values.size();
    return DenseArray({n}, std::move(values));
}

bool DenseArray::finite() const {
    return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

double& DenseArray::at(std::size_t i) { return data[i]; }
double DenseArray::at(std::size_t i) const { return data[i]; }
double& DenseArray::at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
double DenseArray::at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
double& DenseArray::at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
}
double DenseArray::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> l2_normalize(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("l2_normalize: empty vector");
    const double n = l2_norm(v);
    if (n == 0.0 || !std::isfinite(n)) {
        throw std::invalid_argument("l2_normalize: degenerate input (zero or non-finite norm)");
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

DenseArray l2_normalize(const DenseArray& v) {
    if (v.rank() != 1) throw std::invalid_argument("l2_normalize: expected rank-1 array");
    return DenseArray::vec(l2_normalize(std::span<const double>(v.data)));
}

double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = xs[0];
    for (const double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) throw std::invalid_argument("log_sum_exp: non-finite input");
    double s = 0.0;
    for (const double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

DenseArray finite_diff_grad(const std::function<double(const DenseArray&)>& f,
                            const DenseArray& x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    DenseArray grad = DenseArray::zeros(x.shape);
    DenseArray probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = probe.data[k];
        probe.data[k] = saved + h;
        const double fp = f(probe);
        probe.data[k] = saved - h;
        const double fm = f(probe);
        probe.data[k] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_diff_grad: non-finite function value at probe " +
                                     std::to_string(k));
        }
        grad.data[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

void GradCheckReport::absorb(const GradCheckReport& other) {
    max_rel_error = std::max(max_rel_error, other.max_rel_error);
    max_abs_error = std::max(max_abs_error, other.max_abs_error);
    probe_count += other.probe_count;
}

double rel_error(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom;
}

GradCheckReport check_gradient(const std::function<double(const DenseArray&)>& f,
                               const DenseArray& x, const DenseArray& analytic, double h) {
    if (analytic.size() != x.size()) {
        throw std::invalid_argument("check_gradient: gradient/input size mismatch");
    }
    const DenseArray fd = finite_diff_grad(f, x, h);
    GradCheckReport report;
    report.probe_count = x.size();
    for (std::size_t k = 0; k < x.size(); ++k) {
        report.max_rel_error = std::max(report.max_rel_error, rel_error(analytic.data[k], fd.data[k]));
        report.max_abs_error = std::max(report.max_abs_error, std::fabs(analytic.data[k] - fd.data[k]));
    }
    return report;
}

}  // namespace sndobj
