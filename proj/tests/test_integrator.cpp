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

#include <doctest.h>

#include "support.hpp"
#include "textportal/integrator.hpp"

using namespace textportal;
using tp_test::Gen;

namespace {

Neighbor nb(const std::string& id, double sim) { return {tp_test::record_with(LabelVector::one_hot(id)), sim}; }

std::vector<Neighbor> with_sims(const std::vector<double>& sims) {
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < sims.size(); ++i) out.push_back(nb("F" + std::to_string(i), sims[i]));
    return out;
}

std::vector<Neighbor> random_neighbors(Gen& g, std::size_t k, std::size_t n_fn) {
    const auto ids = tp_test::fn_ids(n_fn);
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({tp_test::record_with(g.label(ids)), g.uniform(-0.2, 1.05)});
    if (std::all_of(out.begin(), out.end(), [](const Neighbor& n) { return n.similarity <= 0.0; })) {
        out[0].similarity = 0.5;
    }
    return out;
}

}  // namespace

TEST_CASE("integrate fixtures") {
    const auto one = std::vector<Neighbor>{{tp_test::record_with(LabelVector({{"a", 0.3}, {"b", 0.7}})), 0.42}};
    CHECK(integrate(one) == LabelVector({{"a", 0.3}, {"b", 0.7}}));

    const auto two = std::vector<Neighbor>{nb("f1", 1.0), nb("f2", 0.5)};
    const auto p = integrate(two);
    CHECK(p.at("f1") == doctest::Approx(1.0 / 1.5).epsilon(1e-15));
    CHECK(p.at("f2") == doctest::Approx(0.5 / 1.5).epsilon(1e-15));

    try {
        integrate({});
        FAIL("expected NoNeighbors");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNoNeighbors);
    }
    try {
        integrate(std::vector<Neighbor>{nb("a", 0.0), nb("b", -0.3)});
        FAIL("expected AllZeroSimilarity");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kAllZeroSimilarity);
    }
}

TEST_CASE("integrate agrees with the reference on random neighbours") {
    Gen g(71);
    for (int c = 0; c < 500; ++c) {
        const auto n = random_neighbors(g, 1 + g.index(5), 1 + g.index(10));
        const auto got = integrate(n);
        const auto want = tp_test::ref_integrate(n);
        REQUIRE(got.size() == want.size());
        for (const auto& [k, v] : want) CHECK(std::abs(got.at(k) - v) < 1e-9);
        CHECK(std::abs(got.total() - 1.0) < 1e-9);
    }
}

TEST_CASE("integrate is scale invariant and convex") {
    Gen g(72);
    for (int c = 0; c < 300; ++c) {
        auto n = random_neighbors(g, 1 + g.index(5), 1 + g.index(8));
        for (auto& x : n) x.similarity = g.uniform(0.01, 0.5);
        const auto base = integrate(n);
        const double scale = g.uniform(0.1, 1.9);
        auto scaled = n;
        for (auto& x : scaled) x.similarity *= scale;
        const auto again = integrate(scaled);
        for (const auto& [k, v] : base.weights()) {
            CHECK(std::abs(again.at(k) - v) < 1e-12);
            double lo = 1.0, hi = 0.0;
            for (const auto& x : n) {
                lo = std::min(lo, x.record->label.at(k));
                hi = std::max(hi, x.record->label.at(k));
            }
            CHECK(v >= lo - 1e-12);
            CHECK(v <= hi + 1e-12);
        }
    }
}

TEST_CASE("confidence fixtures") {
    CHECK(confidence(with_sims({1, 1, 1, 1, 1})) == 1.0);
    CHECK(confidence(with_sims({1, 1, 1, 1, 0.5})) == 14.5 / 15.0);
    CHECK(confidence(with_sims({0.9, 0.9, 0.9, 0.9, 0.9})) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(confidence(with_sims({1, 1})) == 1.0);
    CHECK(confidence(with_sims({1, 0.5})) == doctest::Approx((2.0 + 0.5) / 3.0));
    try {
        confidence(std::vector<Neighbor>{});
        FAIL("expected NoNeighbors");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNoNeighbors);
    }
}

TEST_CASE("confidence is monotone and bounded") {
    Gen g(73);
    for (int c = 0; c < 500; ++c) {
        std::vector<double> sims = g.vec(5, 0.0, 1.0);
        std::sort(sims.rbegin(), sims.rend());
        const double base = confidence(sims);
        CHECK(base >= 0.0);
        CHECK(base <= 1.0);
        const std::size_t i = g.index(5);
        auto up = sims;
        up[i] = std::min(1.0, up[i] + g.uniform(0.0, 0.3));
        CHECK(confidence(up) >= base);
    }
}

TEST_CASE("route decisions") {
    CHECK(route(14.5 / 15.0).route == Route::kLocal);
    CHECK(route(0.9).route == Route::kLlm);
    CHECK(route(0.95).route == Route::kLlm);
    CHECK(route(0.95).threshold == 0.95);
    CHECK(route(0.96, 0.97).route == Route::kLlm);

    CHECK(decide_route({}).route == Route::kLlm);
    CHECK(decide_route({}).confidence == 0.0);
    CHECK(decide_route(with_sims({1, 1, 1, 1, 0.5})).route == Route::kLocal);
    CHECK(decide_route(with_sims({1, 1})).route == Route::kLocal);
    CHECK(decide_route(with_sims({1, 0.99, 0.99})).route == Route::kLlm);
}

TEST_CASE("rank_scores ordering") {
    TieBreak tie;
    tie.prior = {{"b", 0.2}, {"c", 0.2}};
    tie.last_used = {{"c", instant_from_ms(10)}, {"d", instant_from_ms(5)}};
    const auto r = rank_scores({{"a", 0.9}, {"b", 0.1}, {"c", 0.1}, {"d", 0.1}, {"e", 0.1}}, tie);
    std::vector<std::string> ids;
    for (const auto& e : r) ids.push_back(e.function_id);
    CHECK(ids == std::vector<std::string>{"a", "c", "b", "d", "e"});
}
