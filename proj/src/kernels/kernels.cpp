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

#include <atomic>
#include <cstdlib>
#include <string>

#include "textportal/kernels.hpp"

namespace textportal::kernels {

namespace {

Isa detect() {
#if defined(TEXTPORTAL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::kAvx2;
#endif
    return Isa::kScalar;
}

Isa initial() {
    const Isa best = detect();
    // TEXTPORTAL_SIMD=scalar pins the reference kernels.
    if (const char* env = std::getenv("TEXTPORTAL_SIMD"); env && std::string(env) == "scalar") {
        return Isa::kScalar;
    }
    return best;
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{initial()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::kScalar: return "scalar";
        case Isa::kAvx2: return "avx2";
    }
    return "unknown";
}

Isa detected_isa() {
    static const Isa isa = detect();
    return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

Isa set_active_isa(Isa isa) {
    if (isa == Isa::kAvx2 && detected_isa() != Isa::kAvx2) isa = Isa::kScalar;
    active().store(isa, std::memory_order_relaxed);
    return isa;
}

CosineParts cosine_parts(std::span<const double> query, std::span<const float> row) {
#if defined(TEXTPORTAL_HAVE_AVX2)
    if (active_isa() == Isa::kAvx2) return avx2::cosine_parts(query, row);
#endif
    return scalar::cosine_parts(query, row);
}

double dot(std::span<const double> a, std::span<const double> b) {
#if defined(TEXTPORTAL_HAVE_AVX2)
    if (active_isa() == Isa::kAvx2) return avx2::dot(a, b);
#endif
    return scalar::dot(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
#if defined(TEXTPORTAL_HAVE_AVX2)
    if (active_isa() == Isa::kAvx2) return avx2::axpy(alpha, x, y);
#endif
    scalar::axpy(alpha, x, y);
}

}  // namespace textportal::kernels
