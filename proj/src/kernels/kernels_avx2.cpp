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

// Compiled with -mavx2 -mfma. Nothing in this file may be called unless
// detected_isa() reported kAvx2.

#include <immintrin.h>

#include <cstddef>

#include "textportal/kernels.hpp"

namespace textportal::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

CosineParts cosine_parts(std::span<const double> query, std::span<const float> row) {
    const std::size_t n = query.size();
    const double* a = query.data();
    const float* b = row.data();

    __m256d dot0 = _mm256_setzero_pd();
    __m256d dot1 = _mm256_setzero_pd();
    __m256d na0 = _mm256_setzero_pd();
    __m256d na1 = _mm256_setzero_pd();
    __m256d nb0 = _mm256_setzero_pd();
    __m256d nb1 = _mm256_setzero_pd();

    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 bf = _mm256_loadu_ps(b + i);
        __m256d b0 = _mm256_cvtps_pd(_mm256_castps256_ps128(bf));
        __m256d b1 = _mm256_cvtps_pd(_mm256_extractf128_ps(bf, 1));
        __m256d a0 = _mm256_loadu_pd(a + i);
        __m256d a1 = _mm256_loadu_pd(a + i + 4);
        dot0 = _mm256_fmadd_pd(a0, b0, dot0);
        dot1 = _mm256_fmadd_pd(a1, b1, dot1);
        na0 = _mm256_fmadd_pd(a0, a0, na0);
        na1 = _mm256_fmadd_pd(a1, a1, na1);
        nb0 = _mm256_fmadd_pd(b0, b0, nb0);
        nb1 = _mm256_fmadd_pd(b1, b1, nb1);
    }

    CosineParts out;
    out.dot = hsum(_mm256_add_pd(dot0, dot1));
    out.norm_a = hsum(_mm256_add_pd(na0, na1));
    out.norm_b = hsum(_mm256_add_pd(nb0, nb1));
    for (; i < n; ++i) {
        const double x = a[i];
        const double y = static_cast<double>(b[i]);
        out.dot += x * y;
        out.norm_a += x * x;
        out.norm_b += y * y;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                               acc1);
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y.data() + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), vy);
        _mm256_storeu_pd(y.data() + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace textportal::kernels::avx2
