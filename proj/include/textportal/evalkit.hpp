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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textportal/portal.hpp"

namespace textportal::eval {

// ---------------------------------------------------------------------------
// Trials and metrics
// ---------------------------------------------------------------------------

/// One query of a stream, before it is served.
struct TrialInput {
    std::string user_id;
    int day = 0;  // 1-based
    std::string query;
    ContextSnapshot context;
    std::string truth;
};

/// A served trial. `ranking` covers every candidate, best first.
struct Trial {
    TrialInput input;
    std::vector<std::string> ranking;
    std::string provenance;  // local | llm | fallback_frequency | baseline
    double latency_ms = 0.0;
    std::optional<std::string> error;
};

struct DayMetrics {
    int day = 0;
    std::size_t trials = 0;
    double hit1 = 0.0;
    double hit5 = 0.0;
    double mrr = 0.0;
    double local_fraction = 0.0;
    double mean_latency_ms = 0.0;
};

struct MetricsReport {
    std::size_t trials = 0;
    std::size_t failed = 0;
    double hit1 = 0.0;
    double hit5 = 0.0;
    double mrr = 0.0;
    double local_fraction = 0.0;
    double mean_latency_ms = 0.0;
    std::vector<DayMetrics> per_day;
};

void to_json(nlohmann::json& j, const DayMetrics& d);
void to_json(nlohmann::json& j, const MetricsReport& r);

/// 1-based position of the truth in the ranking. Throws InvalidTrial when
/// it is absent.
std::size_t rank_of(const Trial& t);

/// Hit@1, Hit@5 and MRR over the full rankings, overall and per day.
/// Trials carrying an error are counted in `failed` and otherwise skipped.
/// Throws EmptyTrials, InvalidTrial.
MetricsReport metrics(std::span<const Trial> trials);

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct HistoryEvent {
    std::string function_id;
    Instant at;
    std::vector<std::string> context_apps;
};

/// Most frequently used first; equal counts go to the more recent, then the
/// smaller id. Never-used functions follow in candidate order.
std::vector<std::string> baseline_mfu(std::span<const HistoryEvent> history, std::span<const std::string> candidates);
/// Most recently used first; never-used functions follow in candidate order.
std::vector<std::string> baseline_mru(std::span<const HistoryEvent> history, std::span<const std::string> candidates);
/// P(f) * prod_a P(a | f) over the context apps, with add-one smoothing on
/// both factors over `app_vocab`. Ties fall back to the MFU order.
std::vector<std::string> baseline_bayes(std::span<const HistoryEvent> history,
                                        std::span<const std::string> context_apps,
                                        std::span<const std::string> candidates,
                                        std::span<const std::string> app_vocab);

/// Apps launched within `window_seconds` before the query, deduplicated.
std::vector<std::string> context_apps(const ContextSnapshot& context, double window_seconds = 600.0);

// ---------------------------------------------------------------------------
// Synthetic streams
// ---------------------------------------------------------------------------

struct CatalogEntry {
    FunctionDescriptor function;
    std::vector<std::string> phrases;
};

/// The functions synthetic users draw from, each with its phrase set.
const std::vector<CatalogEntry>& catalog();
/// Apps used in synthetic contexts (catalog apps plus distractors).
std::vector<std::string> synth_app_vocab();

struct StreamSpec {
    std::uint64_t seed = 42;
    int n_users = 4;
    int n_days = 7;
    int functions_per_user = 20;
    int queries_per_day = 30;
    double noise = 0.15;
    std::size_t phrases_per_function = 6;
};

void to_json(nlohmann::json& j, const StreamSpec& s);
void from_json(const nlohmann::json& j, StreamSpec& s);

struct Stream {
    StreamSpec spec;
    std::vector<std::string> app_vocab;
    std::map<std::string, std::vector<FunctionDescriptor>> collections;
    /// Ordered by context time across all users.
    std::vector<TrialInput> trials;
};

/// Launch probabilities for the target app: within 1 min, 1 to 5 min,
/// 5 to 10 min. Otherwise it is absent.
inline constexpr double kTargetWithin1Min = 0.3362;
inline constexpr double kTargetWithin5Min = 0.3218;
inline constexpr double kTargetWithin10Min = 0.1737;

/// A context for a query whose function lives in `target_app`: the target
/// placed by the probabilities above plus up to three distractor launches,
/// none of which is the target.
ContextSnapshot synth_context(std::mt19937_64& rng, const std::string& target_app,
                              std::span<const std::string> app_vocab, Instant now);

/// Deterministic for a given spec. Throws InvalidArgument on counts < 1 or
/// more functions per user than the catalog has.
Stream synth_stream(const StreamSpec& spec);

/// Usage records from users outside the stream, for bootstrapping.
std::vector<UsageRecord> synth_pool(std::uint64_t seed, std::size_t records_per_function = 8);

void write_stream(const std::filesystem::path& file, const Stream& stream);
Stream read_stream(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Something that can be replayed: a portal variant or a baseline.
class System {
public:
    virtual ~System() = default;
    virtual std::string name() const = 0;
    virtual Trial serve(const TrialInput& input) = 0;
    /// The truth is fed back after every trial.
    virtual void feedback(const TrialInput& input, const Trial& served) = 0;
    virtual void end_of_day(int day) = 0;
};

struct ReplayOptions {
    double llm_accuracy = 0.65;
    std::uint64_t llm_seed = 42;
    double llm_delay_ms = 0.0;
    /// Shared by the stub LLM and the portal; SimulatedClock when null.
    std::shared_ptr<Clock> clock;
    bool daily_retrain = true;
    std::filesystem::path trial_log;  // JSONL; empty disables
};

/// Names accepted by make_system().
const std::vector<std::string>& variant_names();

/// full, general, nocontext, llm-only, bert-only, mfu, mru, bayes.
/// Throws UnknownVariant.
std::unique_ptr<System> make_system(const std::string& variant, const Stream& stream, const ReplayOptions& options);

struct ReplayResult {
    std::string variant;
    MetricsReport report;
    std::vector<Trial> trials;
};

/// Serves every trial in order, feeding the truth back, retraining at day
/// boundaries. System errors become failed trials.
ReplayResult replay(const Stream& stream, System& system, const ReplayOptions& options = {});
ReplayResult replay_variant(const Stream& stream, const std::string& variant, const ReplayOptions& options = {});

nlohmann::json trial_to_json(const Trial& t);

/// One report per variant, same stream and options.
std::map<std::string, MetricsReport> run_ablation(const Stream& stream, std::span<const std::string> variants,
                                                  const ReplayOptions& options = {});

/// variant,day,trials,hit1,hit5,mrr,local_fraction,mean_latency_ms
std::string per_day_csv(const std::map<std::string, MetricsReport>& reports);

}  // namespace textportal::eval
