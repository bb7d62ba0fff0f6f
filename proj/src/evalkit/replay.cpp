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

#include <algorithm>
#include <fstream>

#include "textportal/evalkit.hpp"

namespace textportal::eval {

namespace {

std::vector<std::string> ids_of(const std::vector<FunctionDescriptor>& fs) {
    std::vector<std::string> out;
    for (const auto& f : fs) out.push_back(f.id);
    return out;
}

class PortalSystem final : public System {
public:
    PortalSystem(std::string name, PortalConfig config, const Stream& stream, const ReplayOptions& options)
        : name_(std::move(name)), clock_(options.clock ? options.clock : std::make_shared<SimulatedClock>()) {
        ScriptedStubLlm::Options stub;
        stub.accuracy = options.llm_accuracy;
        stub.seed = options.llm_seed;
        stub.delay_ms = options.llm_delay_ms;
        stub.clock = clock_;
        llm_ = std::make_shared<ScriptedStubLlm>(stub);
        portal_ = std::make_unique<Portal>(std::move(config), llm_, clock_);
        portal_->set_bootstrap_pool(synth_pool(stream.spec.seed + 1));
        for (const auto& [uid, fs] : stream.collections) portal_->provision(uid, fs);
        retrain_ = options.daily_retrain;
    }

    std::string name() const override { return name_; }

    Trial serve(const TrialInput& input) override {
        llm_->set_truth(input.query, input.truth);
        const auto p = portal_->predict({input.user_id, input.query, input.context});
        last_request_ = p.request_id;
        return Trial{input, p.full_ranking, std::string(provenance_name(p.provenance)), p.latency_ms, std::nullopt};
    }

    void feedback(const TrialInput& input, const Trial&) override {
        portal_->select({input.user_id, last_request_, input.truth, std::nullopt});
    }

    void end_of_day(int) override {
        if (retrain_) portal_->retrain_all();
    }

    Portal& portal() { return *portal_; }

private:
    std::string name_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<ScriptedStubLlm> llm_;
    std::unique_ptr<Portal> portal_;
    std::string last_request_;
    bool retrain_ = true;
};

class BaselineSystem final : public System {
public:
    BaselineSystem(std::string name, const Stream& stream, const ReplayOptions& options)
        : name_(std::move(name)),
          clock_(options.clock ? options.clock : std::make_shared<SimulatedClock>()),
          vocab_(stream.app_vocab) {
        for (const auto& [uid, fs] : stream.collections) candidates_[uid] = ids_of(fs);
    }

    std::string name() const override { return name_; }

    Trial serve(const TrialInput& input) override {
        const double start = clock_->now_ms();
        const auto it = candidates_.find(input.user_id);
        if (it == candidates_.end()) throw Error(ErrorCode::kUnknownUser, "no user " + input.user_id);
        const auto& history = history_[input.user_id];
        std::vector<std::string> ranking;
        if (name_ == "mfu") {
            ranking = baseline_mfu(history, it->second);
        } else if (name_ == "mru") {
            ranking = baseline_mru(history, it->second);
        } else {
            ranking = baseline_bayes(history, context_apps(input.context), it->second, vocab_);
        }
        return Trial{input, std::move(ranking), "baseline", clock_->now_ms() - start, std::nullopt};
    }

    void feedback(const TrialInput& input, const Trial&) override {
        history_[input.user_id].push_back({input.truth, input.context.now, context_apps(input.context)});
    }

    void end_of_day(int) override {}

private:
    std::string name_;
    std::shared_ptr<Clock> clock_;
    std::vector<std::string> vocab_;
    std::map<std::string, std::vector<std::string>> candidates_;
    std::map<std::string, std::vector<HistoryEvent>> history_;
};

PortalConfig base_config(const Stream& stream) {
    PortalConfig c;
    c.app_vocab = stream.app_vocab;
    for (const auto& e : catalog()) c.default_collection.push_back(e.function);
    c.telemetry_buffer = 0;
    return c;
}

}  // namespace

const std::vector<std::string>& variant_names() {
    static const std::vector<std::string> names{"full",      "general", "nocontext", "llm-only",
                                                "bert-only", "mfu",     "mru",       "bayes"};
    return names;
}

std::unique_ptr<System> make_system(const std::string& variant, const Stream& stream, const ReplayOptions& options) {
    if (variant == "mfu" || variant == "mru" || variant == "bayes") {
        return std::make_unique<BaselineSystem>(variant, stream, options);
    }
    PortalConfig c = base_config(stream);
    if (variant == "full") {
    } else if (variant == "general") {
        c.merged_store = true;
        c.user_weight = 1.0;
        c.threshold = 0.97;
    } else if (variant == "nocontext") {
        c.use_context = false;
    } else if (variant == "llm-only") {
        c.mode = RouteMode::kLlmOnly;
    } else if (variant == "bert-only") {
        c.mode = RouteMode::kLocalOnly;
    } else {
        throw Error(ErrorCode::kUnknownVariant, "unknown variant " + variant);
    }
    return std::make_unique<PortalSystem>(variant, std::move(c), stream, options);
}

nlohmann::json trial_to_json(const Trial& t) {
    nlohmann::json j{{"user_id", t.input.user_id}, {"day", t.input.day},       {"query", t.input.query},
                     {"truth", t.input.truth},     {"provenance", t.provenance}, {"latency_ms", t.latency_ms}};
    std::vector<std::string> top(t.ranking.begin(),
                                 t.ranking.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, t.ranking.size())));
    j["top5"] = top;
    if (t.error) {
        j["error"] = *t.error;
    } else {
        const auto it = std::find(t.ranking.begin(), t.ranking.end(), t.input.truth);
        j["rank"] = it == t.ranking.end() ? 0 : (it - t.ranking.begin()) + 1;
    }
    return j;
}

ReplayResult replay(const Stream& stream, System& system, const ReplayOptions& options) {
    if (stream.trials.empty()) throw Error(ErrorCode::kEmptyTrials, "stream has no trials");
    std::ofstream log;
    if (!options.trial_log.empty()) {
        log.open(options.trial_log, std::ios::trunc);
        if (!log) throw Error(ErrorCode::kInvalidArgument, "cannot write " + options.trial_log.string());
    }

    ReplayResult result;
    result.variant = system.name();
    int day = stream.trials.front().day;
    for (const auto& input : stream.trials) {
        if (input.day != day) {
            system.end_of_day(day);
            day = input.day;
        }
        Trial t{input, {}, "", 0.0, std::nullopt};
        try {
            t = system.serve(input);
            system.feedback(input, t);
        } catch (const Error& e) {
            t.error = e.what();
        }
        if (log.is_open()) log << trial_to_json(t).dump() << '\n';
        result.trials.push_back(std::move(t));
    }
    result.report = metrics(result.trials);
    return result;
}

ReplayResult replay_variant(const Stream& stream, const std::string& variant, const ReplayOptions& options) {
    auto system = make_system(variant, stream, options);
    return replay(stream, *system, options);
}

std::map<std::string, MetricsReport> run_ablation(const Stream& stream, std::span<const std::string> variants,
                                                  const ReplayOptions& options) {
    std::map<std::string, MetricsReport> out;
    for (const auto& v : variants) {
        ReplayOptions o = options;
        o.trial_log.clear();
        out[v] = replay_variant(stream, v, o).report;
    }
    return out;
}

}  // namespace textportal::eval
