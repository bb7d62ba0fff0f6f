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

#include <fstream>

#include "support.hpp"
#include "textportal/memory.hpp"

using namespace textportal;
using tp_test::Gen;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::kInvalidArgument;
}

FunctionDescriptor fn(const std::string& app, const std::string& action) {
    return FunctionDescriptor::make(app, action);
}

/// Exhaustive scan with the documented ordering.
std::vector<std::pair<std::uint64_t, double>> brute_top_k(const PersonalDatabase& db, const std::string& user,
                                                          const std::vector<double>& q, std::size_t k) {
    std::vector<std::tuple<double, std::int64_t, std::uint64_t>> all;
    for (const auto& r : db.snapshot()) {
        double s = tp_test::ref_cosine(q, r->feature) * (r->user_id == user ? 1.05 : 1.0);
        if (s > 1.0) s = 1.0;
        all.emplace_back(s, to_ms(r->timestamp), r->id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<std::pair<std::uint64_t, double>> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.emplace_back(std::get<2>(all[i]), std::get<0>(all[i]));
    return out;
}

}  // namespace

TEST_CASE("function descriptors") {
    CHECK(fn("Maps", "search").id == "Maps-search");
    const auto chat = FunctionDescriptor::make("WhatsApp", "chat", std::string("Mom"));
    CHECK(chat.id == "WhatsApp-Mom");
    CHECK(chat.is_chat());
    CHECK(code_of([] { FunctionDescriptor::make("WhatsApp", "chat"); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { FunctionDescriptor::make("Maps", "search", std::string("Mom")); }) ==
          ErrorCode::kInvalidArgument);
    CHECK(code_of([] { FunctionDescriptor::make("", "search"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("label vectors validate") {
    LabelVector ok({{"a", 0.5}, {"b", 0.5}});
    ok.validate();
    CHECK(ok.total() == 1.0);
    CHECK(ok.argmax() == "a");
    CHECK(code_of([] { LabelVector({{"a", 0.9}}).validate(); }) == ErrorCode::kInvalidLabel);
    CHECK(code_of([] { LabelVector({{"a", 1.2}, {"b", -0.2}}).validate(); }) == ErrorCode::kInvalidLabel);
}

TEST_CASE("similarity") {
    const std::vector<double> q{1.0, 0.0};
    CHECK(similarity(q, std::vector<float>{1.0f, 0.0f}, true) == 1.0);
    const std::vector<float> half{0.5f, static_cast<float>(std::sqrt(0.75))};
    CHECK(similarity(q, half, false) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(similarity(q, half, true) == doctest::Approx(0.525).epsilon(1e-7));
    CHECK(similarity(q, std::vector<float>{-1.0f, 0.0f}, true) == doctest::Approx(-1.05));
    CHECK(code_of([&] { similarity(q, std::vector<float>{0.0f, 0.0f}, false); }) == ErrorCode::kZeroVector);
    CHECK(code_of([&] { similarity(q, std::vector<float>{1.0f}, false); }) == ErrorCode::kDimensionMismatch);

    Gen g(21);
    for (int i = 0; i < 500; ++i) {
        const auto a = g.vec(12);
        const auto b = g.fvec(12);
        const double other = similarity(a, b, false);
        const double same = similarity(a, b, true);
        CHECK(same <= 1.0);
        CHECK(other <= 1.0);
        if (other >= 0.0) CHECK(same >= other);
    }
}

TEST_CASE("top_k basics") {
    PersonalDatabase db("u", 2);
    CHECK(db.top_k("u", std::vector<double>{1.0, 0.0}).empty());

    const double c9 = 0.9, c5 = 0.5, c2 = 0.2;
    auto unit = [](double c) { return std::vector<float>{float(c), float(std::sqrt(1 - c * c))}; };
    db.append(tp_test::live_record("other", "A-search", unit(c5), 1));
    db.append(tp_test::live_record("other", "B-search", unit(c9), 2));
    db.append(tp_test::live_record("other", "C-search", unit(c2), 3));
    const auto n = db.top_k("u", std::vector<double>{1.0, 0.0});
    REQUIRE(n.size() == 3);
    CHECK(n[0].record->chosen == "B-search");
    CHECK(n[1].record->chosen == "A-search");
    CHECK(n[2].record->chosen == "C-search");
    CHECK(n[0].similarity == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("append validates and is immediately visible") {
    PersonalDatabase db("u", 3);
    const std::vector<float> f{0.2f, 0.3f, 0.9f};
    const auto id = db.append(tp_test::live_record("u", "A-search", f, 10));
    const auto n = db.top_k("u", std::vector<double>{0.2, 0.3, 0.9});
    REQUIRE(n.size() == 1);
    CHECK(n[0].record->id == id);
    CHECK(n[0].similarity == doctest::Approx(1.0));

    auto bad = tp_test::live_record("u", "A-search", f, 11);
    bad.label = LabelVector({{"A-search", 0.9}});
    CHECK(code_of([&] { db.append(bad); }) == ErrorCode::kInvalidLabel);
    CHECK(code_of([&] { db.append(tp_test::live_record("u", "A-search", {1.0f}, 12)); }) ==
          ErrorCode::kDimensionMismatch);
    CHECK(code_of([&] { db.append(tp_test::live_record("u", "A-search", f, 5)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("equal similarity ties go to the newer record") {
    PersonalDatabase db("u", 2);
    db.append(tp_test::live_record("u", "Old-search", {1.0f, 0.0f}, 100));
    db.append(tp_test::live_record("u", "New-search", {2.0f, 0.0f}, 200));
    const auto n = db.top_k("u", std::vector<double>{1.0, 0.0});
    REQUIRE(n.size() == 2);
    CHECK(n[0].record->chosen == "New-search");
    CHECK(n[0].similarity == n[1].similarity);
}

TEST_CASE("chat filter") {
    PersonalDatabase db("u", 2);
    db.append(tp_test::live_record("u", "A-search", {1.0f, 0.0f}, 1, false));
    db.append(tp_test::live_record("u", "WhatsApp-Mom", {1.0f, 0.1f}, 2, true));
    RetrievalOptions o;
    o.chat_filter = true;
    auto n = db.top_k("u", std::vector<double>{1.0, 0.0}, o);
    REQUIRE(n.size() == 1);
    CHECK(n[0].record->chosen == "WhatsApp-Mom");
    o.chat_filter = false;
    n = db.top_k("u", std::vector<double>{1.0, 0.0}, o);
    REQUIRE(n.size() == 1);
    CHECK(n[0].record->chosen == "A-search");
}

TEST_CASE("top_k agrees with an exhaustive scan") {
    Gen g(31);
    const auto ids = tp_test::fn_ids(6);
    for (std::size_t size : {1u, 5u, 10u, 57u, 400u, 10000u}) {
        const std::size_t dim = 16;
        PersonalDatabase db("me", dim);
        for (std::size_t i = 0; i < size; ++i) {
            auto r = tp_test::live_record(g.coin() ? "me" : "them", ids[g.index(ids.size())], g.fvec(dim), 0);
            r.origin = Origin::kBootstrap;
            r.timestamp = instant_from_ms(g.integer(0, 50));
            db.append(r);
        }
        const int probes = size > 1000 ? 5 : 20;
        for (int p = 0; p < probes; ++p) {
            const auto q = g.vec(dim);
            const std::size_t k = 1 + g.index(8);
            const auto got = db.top_k("me", q, {k, std::nullopt, 1.05});
            const auto want = brute_top_k(db, "me", q, k);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].record->id == want[i].first);
                CHECK(std::abs(got[i].similarity - want[i].second) < 1e-9);
            }
        }
    }
}

TEST_CASE("apportion") {
    CHECK(apportion(120, std::vector<double>{8, 3, 1}) == std::vector<std::size_t>{80, 30, 10});
    CHECK(apportion(10, std::vector<double>{1, 1, 1}) == std::vector<std::size_t>{4, 3, 3});
    CHECK(apportion(0, std::vector<double>{1, 2}) == std::vector<std::size_t>{0, 0});
    Gen g(41);
    for (int i = 0; i < 500; ++i) {
        const std::size_t total = g.index(1000);
        const auto w = g.vec(1 + g.index(12), 0.01, 5.0);
        const auto a = apportion(total, w);
        std::size_t sum = 0;
        double wsum = 0.0;
        for (double x : w) wsum += x;
        for (std::size_t k = 0; k < a.size(); ++k) {
            sum += a[k];
            CHECK(std::abs(double(a[k]) - double(total) * w[k] / wsum) < 1.0);
        }
        CHECK(sum == total);
    }
}

TEST_CASE("bootstrap quotas") {
    auto templ = [](const FunctionDescriptor& f, std::size_t n) {
        return generate_synthetic(f, n, nullptr, instant_from_ms(0));
    };

    SUBCASE("8 search, 3 record, 1 translate") {
        std::vector<FunctionDescriptor> fs;
        for (int i = 0; i < 8; ++i) fs.push_back(fn("S" + std::to_string(i), "search"));
        for (int i = 0; i < 3; ++i) fs.push_back(fn("R" + std::to_string(i), "record"));
        fs.push_back(fn("T", "translate"));
        std::vector<BootstrapPlan> plan;
        const auto out = bootstrap(fs, {}, templ, {}, 10, &plan);
        CHECK(out.size() == 120);
        std::map<std::string, std::size_t> per_action;
        for (const auto& r : out) {
            for (const auto& f : fs) {
                if (f.id == r.chosen) ++per_action[f.action];
            }
        }
        CHECK(per_action["search"] == 80);
        CHECK(per_action["record"] == 30);
        CHECK(per_action["translate"] == 10);
        for (const auto& r : out) CHECK(r.origin == Origin::kSynthetic);
    }

    SUBCASE("one function") {
        const std::vector<FunctionDescriptor> fs{fn("Maps", "search")};
        const auto out = bootstrap(fs, {}, templ, {}, 10);
        CHECK(out.size() == 10);
        for (const auto& r : out) CHECK(r.chosen == "Maps-search");
    }

    SUBCASE("pool records are used first, the rest synthesised") {
        const std::vector<FunctionDescriptor> fs{fn("Maps", "search"), fn("Browser", "search")};
        std::vector<UsageRecord> pool;
        for (int i = 0; i < 30; ++i) {
            auto r = tp_test::live_record("p", "Maps-search", {}, i);
            r.query = "pool " + std::to_string(i);
            pool.push_back(r);
        }
        std::vector<BootstrapPlan> plan;
        const auto out = bootstrap(fs, pool, templ, {}, 10, &plan);
        CHECK(out.size() == 20);
        REQUIRE(plan.size() == 2);
        // weights 31 : 1 over 20 records
        CHECK(plan[0].quota == 19);
        CHECK(plan[0].from_pool == 19);
        CHECK(plan[1].quota == 1);
        CHECK(plan[1].synthetic == 1);
        // newest pool records first
        CHECK(out[0].query == "pool 29");
        CHECK(out[0].origin == Origin::kBootstrap);
        CHECK(out[0].user_id == "p");
    }

    SUBCASE("empty set") {
        CHECK(code_of([&] { bootstrap({}, {}, templ, {}, 10); }) == ErrorCode::kEmptyFunctionSet);
    }

    SUBCASE("totals over random collections") {
        Gen g(51);
        const std::vector<std::string> actions{"search", "record", "translate", "compute", "post"};
        for (int c = 0; c < 200; ++c) {
            std::vector<FunctionDescriptor> fs;
            const int n = g.integer(1, 25);
            for (int i = 0; i < n; ++i) fs.push_back(fn("App" + std::to_string(i), actions[g.index(actions.size())]));
            std::vector<UsageRecord> pool;
            for (int i = 0, m = g.integer(0, 60); i < m; ++i) {
                pool.push_back(tp_test::live_record("p", fs[g.index(fs.size())].id, {}, i));
            }
            const int alpha = g.integer(1, 12);
            std::vector<BootstrapPlan> plan;
            const auto out = bootstrap(fs, pool, templ, {}, alpha, &plan);
            CHECK(out.size() == std::size_t(alpha) * fs.size());
            std::size_t quota = 0;
            for (const auto& p : plan) {
                quota += p.quota;
                CHECK(p.from_pool + p.synthetic == p.quota);
            }
            CHECK(quota == std::size_t(alpha) * fs.size());
        }
    }
}

TEST_CASE("persistence round-trip") {
    tp_test::TempDir dir("persist");
    Gen g(61);
    const std::size_t dim = 12;
    PersonalDatabase db("u", dim);
    const auto ids = tp_test::fn_ids(5);
    for (int i = 0; i < 60; ++i) {
        auto r = tp_test::live_record(g.coin() ? "u" : "x", ids[g.index(5)], g.fvec(dim), i);
        r.label = g.label(ids);
        r.chosen = r.label.argmax();
        r.context.launches.push_back({"Maps", instant_from_ms(i - 1000)});
        if (i % 7 == 0) r.satisfaction = 4;
        db.append(r);
    }
    save_database(db, dir.path() / "u", {{"note", nlohmann::json{{"k", 1}}}});
    const auto loaded = load_database(dir.path() / "u");
    CHECK(loaded.extra.at("note").at("k") == 1);
    REQUIRE(loaded.db->size() == db.size());
    for (int p = 0; p < 20; ++p) {
        const auto q = g.vec(dim);
        const auto a = db.top_k("u", q);
        const auto b = loaded.db->top_k("u", q);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].record->id == b[i].record->id);
            CHECK(a[i].similarity == b[i].similarity);
            CHECK(a[i].record->label == b[i].record->label);
            CHECK(a[i].record->context == b[i].record->context);
            CHECK(a[i].record->satisfaction == b[i].record->satisfaction);
        }
    }

    SUBCASE("truncated vectors") {
        const auto file = dir.path() / "u" / "vectors.bin";
        std::filesystem::resize_file(file, std::filesystem::file_size(file) - 7);
        CHECK(code_of([&] { load_database(dir.path() / "u"); }) == ErrorCode::kCorruptSnapshot);
    }
    SUBCASE("flipped byte in the records") {
        const auto file = dir.path() / "u" / "records.jsonl";
        std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(20);
        f.put('#');
        f.close();
        CHECK(code_of([&] { load_database(dir.path() / "u"); }) == ErrorCode::kCorruptSnapshot);
    }
    SUBCASE("unknown version") {
        const auto file = dir.path() / "u" / "manifest.json";
        nlohmann::json m = nlohmann::json::parse(std::ifstream(file));
        m["version"] = 999;
        std::ofstream(file, std::ios::trunc) << m.dump();
        CHECK(code_of([&] { load_database(dir.path() / "u"); }) == ErrorCode::kVersionMismatch);
    }
    SUBCASE("missing directory") {
        CHECK(code_of([&] { load_database(dir.path() / "nobody"); }) == ErrorCode::kCorruptSnapshot);
    }
}

TEST_CASE("record pool files") {
    tp_test::TempDir dir("pool");
    std::vector<UsageRecord> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(tp_test::live_record("p", "Maps-search", {}, i));
    write_record_pool(dir.path() / "pool.jsonl", pool);
    const auto back = load_record_pool(dir.path() / "pool.jsonl");
    REQUIRE(back.size() == 5);
    CHECK(back[3].chosen == "Maps-search");
    CHECK(back[3].timestamp == instant_from_ms(3));
}
