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

#include "textportal/integrator.hpp"

#include <algorithm>

namespace textportal {

namespace {

double clamp_unit(double s) { return std::clamp(s, 0.0, 1.0); }

}  // namespace

LabelVector integrate(std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) throw Error(ErrorCode::kNoNeighbors, "integrate needs at least one neighbour");
    double denom = 0.0;
    for (const auto& n : neighbors) denom += clamp_unit(n.similarity);
    if (denom <= 0.0) throw Error(ErrorCode::kAllZeroSimilarity, "all neighbour similarities are zero");

    std::map<std::string, double> acc;
    for (const auto& n : neighbors) {
        const double s = clamp_unit(n.similarity);
        for (const auto& [id, w] : n.record->label.weights()) acc[id] += w * s;
    }
    for (auto& [_, v] : acc) v /= denom;
    return LabelVector(std::move(acc));
}

double confidence(std::span<const double> sorted_similarities, std::size_t K) {
    if (sorted_similarities.empty()) throw Error(ErrorCode::kNoNeighbors, "confidence needs a neighbour");
    if (K == 0) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
    const std::size_t k = std::min(sorted_similarities.size(), K);
    double num = 0.0;
    double denom = 0.0;
    for (std::size_t i = 1; i <= k; ++i) {
        num += clamp_unit(sorted_similarities[i - 1]) * static_cast<double>(k - i + 1);
        denom += static_cast<double>(i);
    }
    return num / denom;
}

double confidence(std::span<const Neighbor> neighbors, std::size_t K) {
    std::vector<double> sims;
    sims.reserve(neighbors.size());
    for (const auto& n : neighbors) sims.push_back(n.similarity);
    return confidence(sims, K);
}

std::string_view route_name(Route r) { return r == Route::kLocal ? "local" : "llm"; }

RouteDecision route(double confidence, double threshold) {
    return RouteDecision{confidence > threshold ? Route::kLocal : Route::kLlm, confidence, threshold};
}

RouteDecision decide_route(std::span<const Neighbor> neighbors, std::size_t K, double threshold) {
    if (neighbors.empty()) return RouteDecision{Route::kLlm, 0.0, threshold};
    auto decision = route(confidence(neighbors, K), threshold);
    if (neighbors.size() < K) {
        const bool saturated =
            std::all_of(neighbors.begin(), neighbors.end(), [](const Neighbor& n) { return n.similarity >= 1.0; });
        if (!saturated) decision.route = Route::kLlm;
    }
    return decision;
}

std::vector<RankedEntry> rank_scores(const std::map<std::string, double>& scores, const TieBreak& tie) {
    std::vector<RankedEntry> out;
    out.reserve(scores.size());
    for (const auto& [id, s] : scores) out.push_back({id, s});

    auto prior = [&](const std::string& id) {
        auto it = tie.prior.find(id);
        return it == tie.prior.end() ? 0.0 : it->second;
    };
    auto last = [&](const std::string& id) {
        auto it = tie.last_used.find(id);
        return it == tie.last_used.end() ? Instant::min() : it->second;
    };
    std::sort(out.begin(), out.end(), [&](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (const double pa = prior(a.function_id), pb = prior(b.function_id); pa != pb) return pa > pb;
        if (const auto la = last(a.function_id), lb = last(b.function_id); la != lb) return la > lb;
        return a.function_id < b.function_id;
    });
    return out;
}

}  // namespace textportal
