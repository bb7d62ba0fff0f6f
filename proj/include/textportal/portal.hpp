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

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "textportal/encoder.hpp"
#include "textportal/integrator.hpp"
#include "textportal/llm.hpp"
#include "textportal/memory.hpp"
#include "textportal/trainer.hpp"

namespace textportal {

/// How queries are routed.
enum class RouteMode {
    kCascade,    // confidence gate decides
    kLocalOnly,  // never ask the LLM
    kLlmOnly,    // always ask the LLM, with randomly sampled examples
};

std::string_view route_mode_name(RouteMode m);
RouteMode route_mode_from_name(std::string_view s);

struct PortalConfig {
    EncoderConfig encoder;
    ContextConfig context;
    /// Fixed app vocabulary for the app-usage features; order matters.
    std::vector<std::string> app_vocab;
    std::vector<FunctionDescriptor> default_collection;

    std::size_t top_k = kDefaultTopK;
    double threshold = kDefaultThreshold;
    double user_weight = kDefaultUserWeight;
    std::size_t few_shot = kDefaultFewShot;
    std::size_t history_budget = kDefaultHistoryBudget;
    RouteMode mode = RouteMode::kCascade;
    /// Zero the app and time parts of every feature.
    bool use_context = true;
    /// One database shared by every user.
    bool merged_store = false;
    /// Serve the last selection for a query the user has typed before.
    bool repeat_recall = true;
    std::uint64_t example_seed = 7;

    int bootstrap_alpha = kDefaultBootstrapAlpha;
    std::filesystem::path bootstrap_pool;  // JSONL of records; empty: synthetic only
    bool synthetic_from_llm = false;

    TrainOptions train;
    int retrain_hour_utc = 3;

    std::filesystem::path data_dir;       // per-user snapshots; empty keeps everything in memory
    std::filesystem::path telemetry_log;  // JSONL; empty disables the file
    std::size_t telemetry_buffer = 2000;
    bool auto_provision = true;
    bool show_provenance = true;

    std::size_t feature_dim() const;
};

void to_json(nlohmann::json& j, const PortalConfig& c);
void from_json(const nlohmann::json& j, PortalConfig& c);

/// Twenty everyday text functions used for new users, most used first.
std::vector<FunctionDescriptor> default_collection();
/// Apps referenced by the default collection plus common context apps.
std::vector<std::string> default_app_vocab();
PortalConfig default_portal_config();
PortalConfig load_portal_config(const std::filesystem::path& file);

struct OverrideFilter {
    std::string raw;
    std::vector<std::string> matched;
};

/// Splits at the last '*': text before it (trimmed) is the query, text after
/// it (trimmed) the filter. No '*' means no filter.
std::pair<std::string, std::optional<std::string>> parse_override(const std::string& text);

/// Ids whose app, action or description contains `filter` (ASCII
/// case-insensitive).
std::vector<std::string> match_filter(const std::string& filter, std::span<const FunctionDescriptor> functions);

enum class Provenance { kLocal, kLlm, kFallbackFrequency };

std::string_view provenance_name(Provenance p);

struct PredictRequest {
    std::string user_id;
    std::string text;
    ContextSnapshot context;
};

struct PredictionEntry {
    std::string function_id;
    double score = 0.0;
    int rank = 0;
};

struct PredictionList {
    std::string request_id;
    std::vector<PredictionEntry> entries;  // at most five
    Provenance provenance = Provenance::kFallbackFrequency;
    double confidence = 0.0;
    double latency_ms = 0.0;
    double llm_latency_ms = 0.0;
    bool chat = false;
    bool recalled = false;
    std::optional<OverrideFilter> filter;
    /// Set when an LLM call was made and failed; the list then comes from
    /// the local path or the frequency fallback.
    std::optional<std::string> llm_error;
    /// Every function in the user's collection, best first.
    std::vector<std::string> full_ranking;
};

void to_json(nlohmann::json& j, const PredictionList& p);

struct SelectRequest {
    std::string user_id;
    std::string request_id;
    std::string function_id;
    std::optional<int> satisfaction;
};

struct SelectAck {
    std::uint64_t record_id = 0;
    LabelVector label;
    std::string execution;
};

void to_json(nlohmann::json& j, const SelectAck& a);

/// Stand-in for on-device execution of the chosen function.
class ExecutionAdapter {
public:
    virtual ~ExecutionAdapter() = default;
    virtual std::string execute(const FunctionDescriptor& function, const std::string& text) = 0;
};

/// Records "would execute <function> with text <text>" and nothing else.
class RecordingExecutionAdapter final : public ExecutionAdapter {
public:
    std::string execute(const FunctionDescriptor& function, const std::string& text) override;
    std::vector<std::string> log() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> log_;
};

/// Parameters served to predict(); replaced wholesale by retraining.
struct UserModel {
    HeadParams head;
    ChatGateParams gate;
    std::optional<TrainReport> last_report;
};

/// The serving pipeline for any number of users.
class Portal {
public:
    Portal(PortalConfig config, std::shared_ptr<LlmClient> llm, std::shared_ptr<Clock> clock = nullptr,
           std::shared_ptr<ExecutionAdapter> executor = nullptr);
    ~Portal();

    Portal(const Portal&) = delete;
    Portal& operator=(const Portal&) = delete;

    const PortalConfig& config() const { return config_; }

    /// Throws InvalidRequest, UnknownUser (auto-provision off).
    PredictionList predict(const PredictRequest& request);
    /// Throws UnknownUser, UnknownRequest, UnknownFunction, DuplicateSelection.
    SelectAck select(const SelectRequest& request);

    std::vector<FunctionDescriptor> functions(const std::string& user_id);
    /// Throws DuplicateFunction.
    std::vector<FunctionDescriptor> add_function(const std::string& user_id, FunctionDescriptor function);
    /// Throws UnknownFunction, LastFunction.
    std::vector<FunctionDescriptor> remove_function(const std::string& user_id, const std::string& function_id);

    /// Trains head and gate on a snapshot of the store and swaps them in.
    /// Throws RetrainInProgress when the user is already retraining.
    TrainReport retrain(const std::string& user_id);
    std::map<std::string, TrainReport> retrain_all();

    /// Creates the user if needed (default collection plus bootstrap records).
    void provision(const std::string& user_id);
    /// Same, with a collection other than the default. No-op for known users.
    void provision(const std::string& user_id, std::vector<FunctionDescriptor> collection);
    bool has_user(const std::string& user_id) const;
    std::vector<std::string> users() const;

    /// Snapshot to `<data_dir>/<user_id>`; no-op without a data dir.
    void save_user(const std::string& user_id);
    void save_all();

    std::shared_ptr<const UserModel> model(const std::string& user_id);
    std::shared_ptr<PersonalDatabase> database(const std::string& user_id);

    /// Records used to bootstrap new users.
    void set_bootstrap_pool(std::vector<UsageRecord> pool);

    FeatureVector featurize(const std::string& query, const ContextSnapshot& context) const;

    std::vector<nlohmann::json> telemetry(std::size_t limit = 200) const;

private:
    struct Store;
    struct User;
    struct Served;

    std::shared_ptr<User> user(const std::string& user_id, bool create);
    std::shared_ptr<User> load_or_create(const std::string& user_id,
                                         const std::optional<std::vector<FunctionDescriptor>>& collection);
    void seed_user(User& u);
    void index_record(Store& store, const UsageRecord& r);
    void emit(const std::string& request_id, const std::string& user_id, std::string_view stage, double latency_ms,
              const nlohmann::json& extra);
    std::vector<std::string> completion_order(const User& u, const UserModel& m, std::span<const double> feature,
                                              const std::vector<std::string>& ids) const;

    PortalConfig config_;
    std::shared_ptr<LlmClient> llm_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<ExecutionAdapter> executor_;
    std::unique_ptr<TextEncoder> encoder_;
    std::vector<UsageRecord> pool_;
    std::shared_ptr<Store> shared_store_;

    mutable std::mutex users_mutex_;
    std::map<std::string, std::shared_ptr<User>> users_;

    mutable std::mutex telemetry_mutex_;
    std::deque<nlohmann::json> telemetry_;
    std::ofstream telemetry_out_;
};

}  // namespace textportal
