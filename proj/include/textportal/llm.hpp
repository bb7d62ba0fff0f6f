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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "textportal/memory.hpp"
#include "textportal/types.hpp"

namespace httplib {
class Server;
}

namespace textportal {

inline constexpr std::size_t kDefaultFewShot = 20;
inline constexpr std::size_t kDefaultHistoryBudget = 200;
inline constexpr std::size_t kRankingLength = 5;
inline constexpr const char* kPromptTemplateVersion = "v1";

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

struct FewShotExample {
    std::string input;
    std::string app_usage;
    std::string time;
    std::string output;
};

/// Task description, option list (names only), up to M examples ordered by
/// similarity, and the query block asking for a top-five ranking.
struct FunctionPrompt {
    std::string task_description;
    std::vector<std::string> candidate_options;
    std::vector<FewShotExample> few_shot;
    std::string input_query;

    std::string render() const;
};

struct ContactPrompt {
    std::string task_description;
    std::vector<std::string> contacts;
    /// contact -> newest messages, oldest first, at most cap(|contacts|) each.
    std::vector<std::pair<std::string, std::vector<std::string>>> chat_histories;
    std::string input_query;

    std::string render() const;
};

/// "Monday 13:05" (UTC).
std::string describe_time(Instant t);
/// "Maps (45s ago), Browser (4m ago)" for launches inside the window, most
/// recent first; "none" when there are none.
std::string describe_app_usage(const ContextSnapshot& context, double window_seconds = 600.0);

/// Throws NoCandidates. `examples` are used in similarity order, at most M.
FunctionPrompt build_function_prompt(const std::string& query, const ContextSnapshot& context,
                                     std::span<const Neighbor> examples,
                                     std::span<const FunctionDescriptor> candidates, std::size_t M = kDefaultFewShot,
                                     double window_seconds = 600.0);

/// Prompt built from arbitrary records (no similarity order), used when the
/// examples are sampled rather than retrieved.
FunctionPrompt build_function_prompt_from_records(const std::string& query, const ContextSnapshot& context,
                                                  std::span<const std::shared_ptr<const UsageRecord>> examples,
                                                  std::span<const FunctionDescriptor> candidates,
                                                  std::size_t M = kDefaultFewShot, double window_seconds = 600.0);

/// Per-contact history cap: floor(budget / contacts).
std::size_t history_cap(std::size_t contact_count, std::size_t budget = kDefaultHistoryBudget);

/// Throws NoContacts. `histories` maps contact function id -> messages,
/// oldest first.
ContactPrompt build_contact_prompt(const std::string& query, std::span<const FunctionDescriptor> contacts,
                                   const std::map<std::string, std::vector<std::string>>& histories,
                                   std::size_t budget = kDefaultHistoryBudget);

// ---------------------------------------------------------------------------
// Ranked output
// ---------------------------------------------------------------------------

struct LlmRanking {
    std::vector<std::string> ranked;  // function ids, most likely first
};

/// Recovers up to five candidate names, in order. Each line is matched
/// exactly (after stripping list markers), then case-insensitively with
/// punctuation normalised, then by scanning for candidate names inside the
/// line. Unknown names are dropped, duplicates keep their first position.
/// Throws Unparseable when nothing is recovered.
LlmRanking parse_ranking(const std::string& raw, std::span<const std::string> candidates);

/// "1. A\n2. B\n..." as requested by the prompts.
std::string render_ranking(std::span<const std::string> ranked);

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

/// Single-step text completion. Implementations throw Timeout,
/// TransportError or RateLimited; callers fall back to the local path.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

struct LlmEndpointConfig {
    std::string url;  // full chat-completions URL
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "TEXTPORTAL_LLM_API_KEY";
    int timeout_ms = 8000;
    std::size_t max_concurrent = 4;
    std::filesystem::path audit_log;  // JSONL; empty disables
};

void to_json(nlohmann::json& j, const LlmEndpointConfig& c);
void from_json(const nlohmann::json& j, LlmEndpointConfig& c);

/// OpenAI-compatible chat-completion client. The API key is read from the
/// environment per request and never written to the audit log.
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(LlmEndpointConfig config);
    std::string complete(const std::string& prompt) override;

    const LlmEndpointConfig& config() const { return config_; }

private:
    void audit(const nlohmann::json& entry);

    LlmEndpointConfig config_;
    std::counting_semaphore<1024> slots_;
    std::mutex audit_mutex_;
    std::ofstream audit_out_;
};

/// Test double. Scripted fixtures (prompt substring -> verbatim reply) win;
/// otherwise the stub reads the option list and the query input out of the
/// prompt and, when it knows the query's true function, ranks it first with
/// probability `accuracy` (seeded) or puts a random wrong option first.
/// Unknown queries get the first five options in prompt order.
class ScriptedStubLlm final : public LlmClient {
public:
    struct Options {
        double accuracy = 1.0;
        std::uint64_t seed = 42;
        double delay_ms = 0.0;
        std::shared_ptr<Clock> clock;  // waited on for delay_ms; SteadyClock if null
    };

    ScriptedStubLlm();
    explicit ScriptedStubLlm(Options options);

    std::string complete(const std::string& prompt) override;

    void add_fixture(std::string prompt_substring, std::string reply);
    void set_truth(const std::string& query, const std::string& function_id);
    /// Makes every call fail with the given error.
    void fail_with(std::optional<ErrorCode> code);

    std::size_t call_count() const { return calls_.load(); }

private:
    Options options_;
    std::mutex mutex_;
    std::mt19937_64 rng_;
    std::vector<std::pair<std::string, std::string>> fixtures_;
    std::map<std::string, std::string> truth_;
    std::optional<ErrorCode> failure_;
    std::atomic<std::size_t> calls_{0};
};

/// Serves any LlmClient behind POST /v1/chat/completions on 127.0.0.1.
class ChatCompletionServer {
public:
    explicit ChatCompletionServer(std::shared_ptr<LlmClient> backend);
    ~ChatCompletionServer();

    ChatCompletionServer(const ChatCompletionServer&) = delete;
    ChatCompletionServer& operator=(const ChatCompletionServer&) = delete;

    /// Binds an ephemeral port and starts serving in the background.
    int start();
    void stop();
    std::string url() const;

private:
    std::shared_ptr<LlmClient> backend_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// The (input, options) pair a stub recovers from a rendered prompt.
struct ParsedPrompt {
    std::string input;
    std::vector<std::string> options;
};
ParsedPrompt parse_prompt(const std::string& prompt);

// ---------------------------------------------------------------------------
// Synthetic records
// ---------------------------------------------------------------------------

/// n records for `function`: texts from the LLM when available, topped up
/// with "<action> <app> sample i" templates. One-hot labels, origin
/// synthetic, user "synthetic". Throws InvalidArgument when n == 0.
std::vector<UsageRecord> generate_synthetic(const FunctionDescriptor& function, std::size_t n, LlmClient* llm,
                                            Instant at, const Featurizer& featurize = {});

std::string synthetic_prompt(const FunctionDescriptor& function, std::size_t n);

}  // namespace textportal
