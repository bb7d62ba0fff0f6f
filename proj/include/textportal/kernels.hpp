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

#pragma once

#include <span>
#include <string_view>

// Dense arithmetic inner loops. Every kernel has a scalar reference in
// namespace `scalar`; the AVX2 variants in namespace `avx2` are only
// compiled on x86-64 and only called when the CPU reports AVX2 and FMA.
// The unqualified entry points dispatch to the best available variant.
//
// All reductions accumulate in double precision. Variants are not
// bit-identical to each other (summation order differs), but a given
// variant is deterministic for identical inputs.

namespace textportal::kernels {

/// Dot product plus both squared norms, computed in one pass.
struct CosineParts {
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
};

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

/// Best variant supported by this build and this CPU.
Isa detected_isa();
/// Variant used by the dispatching entry points.
Isa active_isa();
/// Overrides dispatch (tests, benchmarking). Requesting an unsupported
/// variant falls back to scalar. Returns the variant now active.
Isa set_active_isa(Isa isa);

CosineParts cosine_parts(std::span<const double> query, std::span<const float> row);
double dot(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
CosineParts cosine_parts(std::span<const double> query, std::span<const float> row);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace scalar

#if defined(TEXTPORTAL_HAVE_AVX2)
namespace avx2 {
CosineParts cosine_parts(std::span<const double> query, std::span<const float> row);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace avx2
#endif

}  // namespace textportal::kernels
