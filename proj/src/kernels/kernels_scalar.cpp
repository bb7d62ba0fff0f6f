// Copyright 2026 The TextPortal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "textportal/kernels.hpp"

#include <cstddef>

namespace textportal::kernels::scalar {

CosineParts cosine_parts(std::span<const double> query, std::span<const float> row) {
    CosineParts out;
    const std::size_t n = query.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = query[i];
        const double b = static_cast<double>(row[i]);
        out.dot += a * b;
        out.norm_a += a * a;
        out.norm_b += b * b;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace textportal::kernels::scalar
