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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "support.hpp"
#include "textportal/llm.hpp"
#include "textportal/portal.hpp"

using namespace textportal;
using tp_test::Gen;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "failed: " + what;
        }
    }
    void note(const std::string& s) {
        if (pass) detail += (detail.empty() ? "" : "; ") + s;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

template <typename F>
std::optional<ErrorCode> code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::vector<Neighbor> with_sims(const std::vector<double>& sims) {
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        out.push_back({tp_test::record_with(LabelVector::one_hot("F" + std::to_string(i))), sims[i]});
    }
    return out;
}

std::vector<std::string> default_ids() {
    std::vector<std::string> ids;
    for (const auto& f : default_collection()) ids.push_back(f.id);
    return ids;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

eval::Stream reference_stream() {
    eval::StreamSpec spec;
    spec.seed = 42;
    spec.n_users = 4;
    spec.n_days = 7;
    spec.functions_per_user = 20;
    spec.queries_per_day = 30;
    return eval::synth_stream(spec);
}

/// Records every prompt before handing it on.
class PromptTap final : public LlmClient {
public:
    explicit PromptTap(std::shared_ptr<LlmClient> inner) : inner_(std::move(inner)) {}
    std::string complete(const std::string& prompt) override {
        prompts.push_back(prompt);
        return inner_->complete(prompt);
    }
    std::vector<std::string> prompts;

private:
    std::shared_ptr<LlmClient> inner_;
};

// 1
Outcome integrator_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    Gen g(1001);
    double worst = 0.0;
    for (int c = 0; c < 1000; ++c) {
        const auto ids = tp_test::fn_ids(1 + g.index(10));
        std::vector<Neighbor> n;
        for (std::size_t i = 0, k = 1 + g.index(5); i < k; ++i) {
            n.push_back({tp_test::record_with(g.label(ids)), g.uniform(-0.2, 1.05)});
        }
        if (std::all_of(n.begin(), n.end(), [](const Neighbor& x) { return x.similarity <= 0.0; })) {
            n[0].similarity = 0.5;
        }
        const auto got = integrate(n);
        const auto want = tp_test::ref_integrate(n);
        o.require(got.size() == want.size(), "key sets differ");
        for (const auto& [k, v] : want) worst = std::max(worst, std::abs(got.at(k) - v));
    }
    const double secs = seconds_since(t0);
    o.require(worst < 1e-9, "max |delta| " + fmt("%.3g", worst));
    o.require(secs < 5.0, "runtime " + fmt("%.2f", secs) + " s");
    o.note("1000 cases, max |delta| " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s");
    return o;
}

// 2
Outcome confidence_gating() {
    Outcome o;
    const double c1 = confidence(with_sims({1, 1, 1, 1, 0.5}));
    o.require(c1 == 14.5 / 15.0 && fmt("%.4f", c1) == "0.9667", "(1,1,1,1,0.5) gave " + fmt("%.17g", c1));
    o.require(route(c1).route == Route::kLocal, "0.9667 not local");
    o.require(decide_route(with_sims({1, 1, 1, 1, 0.5})).route == Route::kLocal, "decide_route not local");
    const double c2 = confidence(with_sims({0.9, 0.9, 0.9, 0.9, 0.9}));
    o.require(std::abs(c2 - 0.9) < 1e-15, "all 0.9 gave " + fmt("%.17g", c2));
    o.require(route(c2).route == Route::kLlm, "0.9 not llm");
    o.require(route(0.95).route == Route::kLlm, "boundary 0.95 not llm");
    o.require(route(std::nextafter(0.95, 1.0)).route == Route::kLocal, "just above 0.95 not local");
    o.note("0.9667 -> Local, 0.9 -> Llm, 0.95 -> Llm");
    return o;
}

// 3
Outcome gradient_checks() {
    Outcome o;
    const auto t0 = Clock::now();
    Gen g(3003);
    double head = 0.0;
    double gate = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto [p, s] = tp_test::random_head_instance(g, 2 + g.index(7), 1 + g.index(20), 1 + g.index(12));
        head = std::max(head, tp_test::head_grad_error(p, s));
        const auto [gp, gs] = tp_test::random_gate_instance(g, 1 + g.index(20), 1 + g.index(12));
        gate = std::max(gate, tp_test::gate_grad_error(gp, gs));
    }
    const double secs = seconds_since(t0);
    o.require(head < 1e-4, "head rel err " + fmt("%.3g", head));
    o.require(gate < 1e-4, "gate rel err " + fmt("%.3g", gate));
    o.require(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s");
    o.note("50+50 instances, head " + fmt("%.2g", head) + ", gate " + fmt("%.2g", gate) + ", " + fmt("%.3f", secs) +
           " s");
    return o;
}

// 4
Outcome metrics_fixtures() {
    Outcome o;
    const auto m = eval::metrics(tp_test::trials_with_ranks({1, 3, 7}, 10));
    o.require(std::abs(m.hit1 - 1.0 / 3.0) < 1e-12, "hit1");
    o.require(std::abs(m.hit5 - 2.0 / 3.0) < 1e-12, "hit5");
    o.require(std::abs(m.mrr - (1.0 + 1.0 / 3.0 + 1.0 / 7.0) / 3.0) < 1e-12, "mrr");
    o.require(fmt("%.4f", m.mrr) == "0.4921", "mrr rounds to " + fmt("%.4f", m.mrr));
    Gen g(4004);
    int agree = 0;
    for (int r = 0; r < 100; ++r) {
        const std::size_t n_cand = 1 + g.index(25);
        std::vector<std::size_t> ranks;
        for (std::size_t i = 0, n = 1 + g.index(60); i < n; ++i) ranks.push_back(1 + g.index(n_cand));
        const auto got = eval::metrics(tp_test::trials_with_ranks(ranks, n_cand));
        const auto want = tp_test::ref_metrics(ranks);
        if (std::abs(got.hit1 - want[0]) < 1e-12 && std::abs(got.hit5 - want[1]) < 1e-12 &&
            std::abs(got.mrr - want[2]) < 1e-12) {
            ++agree;
        }
    }
    o.require(agree == 100, std::to_string(agree) + "/100 random sets agree");
    o.note("[1,3,7] -> 1/3, 2/3, " + fmt("%.4f", m.mrr) + "; 100/100 random sets agree");
    return o;
}

// 5
Outcome learning_curve(const eval::Stream& stream) {
    Outcome o;
    const auto t0 = Clock::now();
    eval::ReplayOptions opt;
    opt.llm_accuracy = 0.65;
    opt.llm_delay_ms = 200.0;
    opt.clock = std::make_shared<SteadyClock>();
    const auto r = eval::replay_variant(stream, "full", opt);
    const double secs = seconds_since(t0);
    const auto& days = r.report.per_day;
    if (days.size() < 2) {
        o.require(false, "fewer than two days");
        return o;
    }
    const auto& first = days.front();
    const auto& last = days.back();
    double local_ms = 0.0;
    std::size_t local_n = 0;
    for (const auto& t : r.trials) {
        if (t.provenance == "local") {
            local_ms += t.latency_ms;
            ++local_n;
        }
    }
    local_ms = local_n ? local_ms / static_cast<double>(local_n) : 0.0;
    o.require(r.report.failed == 0, std::to_string(r.report.failed) + " failed trials");
    o.require(last.hit1 >= first.hit1 + 0.10,
              "(a) hit1 day1 " + fmt("%.4f", first.hit1) + " final " + fmt("%.4f", last.hit1));
    o.require(last.local_fraction >= 0.50 && last.local_fraction >= first.local_fraction,
              "(b) local day1 " + fmt("%.4f", first.local_fraction) + " final " + fmt("%.4f", last.local_fraction));
    o.require(last.mean_latency_ms < first.mean_latency_ms,
              "(c) latency day1 " + fmt("%.1f", first.mean_latency_ms) + " ms final " +
                  fmt("%.1f", last.mean_latency_ms) + " ms");
    o.require(local_n > 0 && local_ms < 5.0, "local path mean " + fmt("%.3f", local_ms) + " ms");
    o.require(secs < 180.0, "runtime " + fmt("%.1f", secs) + " s");
    o.note("hit1 " + fmt("%.4f", first.hit1) + " -> " + fmt("%.4f", last.hit1) + ", local " +
           fmt("%.4f", first.local_fraction) + " -> " + fmt("%.4f", last.local_fraction) + ", latency " +
           fmt("%.1f", first.mean_latency_ms) + " -> " + fmt("%.1f", last.mean_latency_ms) + " ms, local path " +
           fmt("%.3f", local_ms) + " ms, " + fmt("%.1f", secs) + " s");
    return o;
}

// 6
Outcome baseline_ordering(const eval::Stream& stream) {
    Outcome o;
    eval::ReplayOptions opt;
    opt.llm_accuracy = 0.65;
    const std::vector<std::string> variants{"full", "mfu", "mru", "bayes", "bert-only"};
    const auto reports = eval::run_ablation(stream, variants, opt);
    const double full = reports.at("full").hit1;
    for (const char* b : {"mfu", "mru", "bayes"}) {
        const double h = reports.at(b).hit1;
        o.require(full >= h + 0.05, std::string(b) + " " + fmt("%.4f", h) + " vs full " + fmt("%.4f", full));
    }
    const double bert = reports.at("bert-only").hit1;
    o.require(bert <= full, "bert-only " + fmt("%.4f", bert) + " > full " + fmt("%.4f", full));
    o.note("full " + fmt("%.4f", full) + ", mfu " + fmt("%.4f", reports.at("mfu").hit1) + ", mru " +
           fmt("%.4f", reports.at("mru").hit1) + ", bayes " + fmt("%.4f", reports.at("bayes").hit1) +
           ", bert-only " + fmt("%.4f", bert));
    return o;
}

// 7
Outcome prompt_contracts() {
    Outcome o;
    // Through the serving path: the bootstrap gives the user 200 stored records.
    auto clock = std::make_shared<SimulatedClock>();
    auto tap = std::make_shared<PromptTap>(
        std::make_shared<ScriptedStubLlm>(ScriptedStubLlm::Options{1.0, 42, 0.0, clock}));
    auto config = default_portal_config();
    config.mode = RouteMode::kLlmOnly;
    Portal portal(config, tap, clock);
    portal.predict({"u", "sushi near me", {{}, instant_from_ms(1'704'067'200'000)}});
    const std::size_t stored = portal.database("u")->size();
    o.require(stored >= 20, "only " + std::to_string(stored) + " stored records");
    o.require(tap->prompts.size() == 1, "expected one LLM call");
    const std::size_t blocks = tap->prompts.empty() ? 0 : count_of(tap->prompts[0], "\nOutput: ");
    o.require(blocks == 20, std::to_string(blocks) + " few-shot blocks");

    const auto ids = default_ids();
    Gen g(7007);
    int round_trips = 0;
    for (int i = 0; i < 50; ++i) {
        auto pool = ids;
        std::shuffle(pool.begin(), pool.end(), g.engine());
        pool.resize(1 + g.index(5));
        if (parse_ranking(render_ranking(pool), ids).ranked == pool) ++round_trips;
    }
    o.require(round_trips == 50, std::to_string(round_trips) + "/50 round trips");

    const std::vector<std::string> bad{
        "no idea",
        "",
        "   \n\n\t",
        "I'm sorry, I cannot help with that request.",
        "1. Pizza\n2. Burgers\n3. Tacos",
        "Maps",
        "{\"error\": {\"message\": \"rate limit\"}}",
        "1.\n2.\n3.\n4.\n5.",
        "<html><body>502 Bad Gateway</body></html>",
        std::string("\x01\x02\xff\xfe garbage \x7f"),
    };
    int rejected = 0;
    for (const auto& raw : bad) {
        if (code_of([&] { parse_ranking(raw, ids); }) == ErrorCode::kUnparseable) ++rejected;
    }
    o.require(rejected == 10, std::to_string(rejected) + "/10 adversarial rejected");

    // An unparseable reply falls back instead of failing the request.
    auto stub = std::make_shared<ScriptedStubLlm>(ScriptedStubLlm::Options{1.0, 42, 0.0, clock});
    stub->add_fixture("Input:", bad[4]);
    Portal fallback(config, stub, clock);
    const auto p = fallback.predict({"u", "sushi", {{}, instant_from_ms(1'704'067'200'000)}});
    o.require(p.llm_error == std::string("Unparseable") && !p.entries.empty(), "unparseable reply not handled");

    o.note(std::to_string(blocks) + " blocks from " + std::to_string(stored) + " records, 50/50 round trips, 10/10 " +
           "adversarial Unparseable with fallback");
    return o;
}

// 8
Outcome label_fusion() {
    Outcome o;
    const std::vector<std::string> known{"A", "B", "C", "D", "E", "F", "X"};
    const auto in = fuse_label("A", LlmRanking{{"A", "B", "C", "D", "E"}}, known);
    o.require(in == LabelVector({{"A", 0.8}, {"B", 0.07}, {"C", 0.06}, {"D", 0.04}, {"E", 0.03}}), "in-top-5");
    o.require(in.total() == 1.0, "in-top-5 sum " + fmt("%.17g", in.total()));
    const auto out = fuse_label("X", LlmRanking{{"B", "C", "D", "E", "F"}}, known);
    o.require(out == LabelVector({{"X", 0.8}, {"B", 0.07}, {"C", 0.06}, {"D", 0.04}, {"E", 0.03}}), "not-in-top-5");
    o.require(out.total() == 1.0, "not-in-top-5 sum " + fmt("%.17g", out.total()));
    Gen g(8008);
    int exact = 0;
    for (int i = 0; i < 500; ++i) {
        auto pool = known;
        std::shuffle(pool.begin(), pool.end(), g.engine());
        std::vector<std::string> ranked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(g.index(6)));
        if (fuse_label(known[g.index(known.size())], LlmRanking{ranked}, known).total() == 1.0) ++exact;
    }
    o.require(exact == 500, std::to_string(exact) + "/500 random sums exactly 1");
    o.note("both fixtures exact, 500/500 random sums exactly 1");
    return o;
}

// 9
Outcome bootstrap_arithmetic() {
    Outcome o;
    auto templ = [](const FunctionDescriptor& f, std::size_t n) {
        return generate_synthetic(f, n, nullptr, instant_from_ms(0));
    };
    std::vector<FunctionDescriptor> fs;
    for (int i = 0; i < 8; ++i) fs.push_back(FunctionDescriptor::make("S" + std::to_string(i), "search"));
    for (int i = 0; i < 3; ++i) fs.push_back(FunctionDescriptor::make("R" + std::to_string(i), "record"));
    fs.push_back(FunctionDescriptor::make("T", "translate"));
    const auto out = bootstrap(fs, {}, templ, {}, 10);
    std::map<std::string, std::size_t> per_action;
    for (const auto& r : out) ++per_action[r.chosen.substr(r.chosen.find('-') + 1)];
    o.require(per_action["search"] == 80 && per_action["record"] == 30 && per_action["translate"] == 10,
              "quotas " + std::to_string(per_action["search"]) + "/" + std::to_string(per_action["record"]) + "/" +
                  std::to_string(per_action["translate"]));

    Gen g(9009);
    const std::vector<std::string> actions{"search", "record", "translate", "compute", "post"};
    int ok = 0;
    for (int c = 0; c < 200; ++c) {
        std::vector<FunctionDescriptor> coll;
        const int n = g.integer(1, 25);
        for (int i = 0; i < n; ++i) {
            coll.push_back(FunctionDescriptor::make("App" + std::to_string(i), actions[g.index(actions.size())]));
        }
        std::vector<UsageRecord> pool;
        for (int i = 0, m = g.integer(0, 60); i < m; ++i) {
            pool.push_back(tp_test::live_record("p", coll[g.index(coll.size())].id, {}, i));
        }
        const int alpha = g.integer(1, 12);
        if (bootstrap(coll, pool, templ, {}, alpha).size() == static_cast<std::size_t>(alpha) * coll.size()) ++ok;
    }
    o.require(ok == 200, std::to_string(ok) + "/200 random totals");
    o.note("(8,3,1) -> (80,30,10), 200/200 random totals equal alpha x count");
    return o;
}

// 10
Outcome persistence_determinism(const eval::Stream& stream) {
    Outcome o;
    tp_test::TempDir dir("acceptance");
    auto config = default_portal_config();
    config.data_dir = dir.path() / "users";
    const Instant base = instant_from_ms(1'704'067'200'000);
    auto probe = [&](Portal& portal) {
        std::vector<std::string> out;
        for (int i = 0; i < 20; ++i) {
            auto p = portal.predict({"u", "probe " + std::to_string(i * 13), {{}, base + std::chrono::hours(5)}});
            p.request_id.clear();
            out.push_back(nlohmann::json(p).dump());
        }
        return out;
    };
    std::vector<std::string> before;
    {
        auto clock = std::make_shared<SimulatedClock>();
        Portal portal(config, std::make_shared<ScriptedStubLlm>(ScriptedStubLlm::Options{0.65, 42, 0.0, clock}), clock);
        for (int i = 0; i < 30; ++i) {
            const auto p = portal.predict({"u", "query " + std::to_string(i % 11), {{}, base + std::chrono::minutes(i)}});
            portal.select({"u", p.request_id, p.full_ranking[static_cast<std::size_t>(i) % 3], std::nullopt});
        }
        portal.retrain("u");
        portal.save_all();
        before = probe(portal);
    }
    auto clock = std::make_shared<SimulatedClock>();
    Portal restored(config, std::make_shared<ScriptedStubLlm>(ScriptedStubLlm::Options{0.65, 42, 0.0, clock}), clock);
    const auto after = probe(restored);
    int same = 0;
    for (std::size_t i = 0; i < before.size(); ++i) same += before[i] == after[i] ? 1 : 0;
    o.require(same == 20, std::to_string(same) + "/20 probes identical");

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    eval::ReplayOptions opt;
    opt.llm_accuracy = 0.65;
    opt.trial_log = dir.path() / "a.jsonl";
    eval::replay_variant(stream, "full", opt);
    opt.trial_log = dir.path() / "b.jsonl";
    eval::replay_variant(stream, "full", opt);
    const auto a = slurp(dir.path() / "a.jsonl");
    const auto b = slurp(dir.path() / "b.jsonl");
    o.require(!a.empty() && a == b, "replay logs differ");
    o.note("20/20 probes identical after reload; two replays give identical " + std::to_string(count_of(a, "\n")) +
           "-line logs");
    return o;
}

// 11
Outcome calibration() {
    Outcome o;
    std::mt19937_64 rng(1111);
    const auto vocab = eval::synth_app_vocab();
    const Instant now = instant_from_ms(1'704'067'200'000);
    const auto& cat = eval::catalog();
    int within = 0;
    const int n = 10'000;
    for (int i = 0; i < n; ++i) {
        const std::string target = cat[static_cast<std::size_t>(i) % cat.size()].function.app;
        const auto c = eval::synth_context(rng, target, vocab, now);
        bool hit = false;
        for (const auto& l : c.launches) hit = hit || (l.app == target && seconds_between(l.at, now) <= 60.0);
        within += hit ? 1 : 0;
    }
    const double rate = static_cast<double>(within) / n;
    o.require(std::abs(rate - 0.3362) <= 0.02, "rate " + fmt("%.4f", rate));
    o.note("rate " + fmt("%.4f", rate) + " (target 0.3362 +/- 0.02)");
    return o;
}

}  // namespace

int main() {
    const auto stream = reference_stream();
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, integrator_oracle},
        {2, confidence_gating},
        {3, gradient_checks},
        {4, metrics_fixtures},
        {5, [&] { return learning_curve(stream); }},
        {6, [&] { return baseline_ordering(stream); }},
        {7, prompt_contracts},
        {8, label_fusion},
        {9, bootstrap_arithmetic},
        {10, [&] { return persistence_determinism(stream); }},
        {11, calibration},
    };
    int failures = 0;
    for (const auto& [id, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
