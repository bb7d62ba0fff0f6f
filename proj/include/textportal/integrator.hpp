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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "textportal/memory.hpp"

namespace textportal {

inline constexpr double kDefaultThreshold = 0.95;

/// Similarity-weighted average of the neighbours' label vectors, over the
/// union of their label keys. Similarities are clamped to [0, 1] first.
/// Throws NoNeighbors or AllZeroSimilarity.
LabelVector integrate(std::span<const Neighbor> neighbors);

/// Rank-weighted mean similarity of the (descending) neighbours:
///   sum_i sim_i * (k - i + 1) / sum_i i,   i = 1..k,  k = min(|neighbors|, K)
/// Throws NoNeighbors.
double confidence(std::span<const Neighbor> neighbors, std::size_t K = kDefaultTopK);
double confidence(std::span<const double> sorted_similarities, std::size_t K = kDefaultTopK);

enum class Route { kLocal, kLlm };

std::string_view route_name(Route r);

struct RouteDecision {
    Route route = Route::kLlm;
    double confidence = 0.0;
    double threshold = kDefaultThreshold;
};

/// Local iff confidence > threshold.
RouteDecision route(double confidence, double threshold = kDefaultThreshold);

/// Gate used by the portal. No neighbours gives confidence 0. With fewer than
/// K neighbours the answer is Llm unless every similarity is exactly 1.
RouteDecision decide_route(std::span<const Neighbor> neighbors, std::size_t K = kDefaultTopK,
                           double threshold = kDefaultThreshold);

struct LocalPrediction {
    LabelVector scores;
    double confidence = 0.0;
    std::vector<std::uint64_t> neighbor_ids;
};

/// Secondary keys used when two candidates have the same score.
struct TieBreak {
    /// Higher prior first (e.g. trained head probabilities). Optional.
    std::map<std::string, double> prior;
    /// Most recent use first.
    std::map<std::string, Instant> last_used;
};

struct RankedEntry {
    std::string function_id;
    double score = 0.0;
};

/// Orders scored candidates: score desc, prior desc, last use desc, id asc.
std::vector<RankedEntry> rank_scores(const std::map<std::string, double>& scores, const TieBreak& tie = {});

}  // namespace textportal
