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

#include <httplib.h>

#include <chrono>

#include "http_util.hpp"
#include "textportal/llm.hpp"

namespace textportal {

void to_json(nlohmann::json& j, const LlmEndpointConfig& c) {
    j = nlohmann::json{{"url", c.url},
                       {"model", c.model},
                       {"api_key_env", c.api_key_env},
                       {"timeout_ms", c.timeout_ms},
                       {"max_concurrent", c.max_concurrent},
                       {"audit_log", c.audit_log.string()}};
}

void from_json(const nlohmann::json& j, LlmEndpointConfig& c) {
    c.url = j.value("url", c.url);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
    c.audit_log = j.value("audit_log", c.audit_log.string());
}

HttpLlmClient::HttpLlmClient(LlmEndpointConfig config)
    : config_(std::move(config)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_concurrent, 1, 1024))) {
    if (config_.url.empty()) throw Error(ErrorCode::kInvalidArgument, "LLM endpoint url is empty");
    if (config_.timeout_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "LLM timeout must be positive");
    detail::split_url(config_.url);
    if (!config_.audit_log.empty()) {
        if (config_.audit_log.has_parent_path()) std::filesystem::create_directories(config_.audit_log.parent_path());
        audit_out_.open(config_.audit_log, std::ios::app);
    }
}

void HttpLlmClient::audit(const nlohmann::json& entry) {
    if (!audit_out_.is_open()) return;
    std::lock_guard lock(audit_mutex_);
    audit_out_ << entry.dump() << '\n';
    audit_out_.flush();
}

std::string HttpLlmClient::complete(const std::string& prompt) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};

    const auto url = detail::split_url(config_.url);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (auto key = detail::env_or_empty(config_.api_key_env); !key.empty()) {
        headers.emplace("Authorization", "Bearer " + key);
    }
    const nlohmann::json body{{"model", config_.model},
                              {"temperature", 0},
                              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};

    nlohmann::json entry{{"model", config_.model}, {"prompt", prompt}};
    const auto started = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    };
    auto fail = [&](ErrorCode code, const std::string& message) -> Error {
        entry["error"] = error_code_name(code);
        entry["latency_ms"] = elapsed_ms();
        audit(entry);
        return Error(code, message);
    };

    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        const bool timed_out =
            res.error() == httplib::Error::ConnectionTimeout || elapsed_ms() >= config_.timeout_ms * 0.98;
        if (timed_out) throw fail(ErrorCode::kTimeout, "no LLM reply within " + std::to_string(config_.timeout_ms) + " ms");
        throw fail(ErrorCode::kTransportError, "LLM request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) throw fail(ErrorCode::kRateLimited, "LLM endpoint rate limited");
    if (res->status != 200) {
        throw fail(ErrorCode::kTransportError, "LLM endpoint returned HTTP " + std::to_string(res->status));
    }

    std::string content;
    try {
        content = nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw fail(ErrorCode::kTransportError, std::string("malformed LLM response: ") + e.what());
    }
    entry["response"] = content;
    entry["latency_ms"] = elapsed_ms();
    audit(entry);
    return content;
}

ChatCompletionServer::ChatCompletionServer(std::shared_ptr<LlmClient> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
    server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        std::string prompt;
        try {
            const auto body = nlohmann::json::parse(req.body);
            for (const auto& m : body.at("messages")) {
                if (!prompt.empty()) prompt += "\n";
                prompt += m.at("content").get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            return;
        }
        try {
            const auto reply = backend_->complete(prompt);
            const nlohmann::json out{
                {"object", "chat.completion"},
                {"choices", nlohmann::json::array({{{"index", 0},
                                                    {"message", {{"role", "assistant"}, {"content", reply}}},
                                                    {"finish_reason", "stop"}}})}};
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            res.status = e.code() == ErrorCode::kRateLimited ? 429 : 502;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

ChatCompletionServer::~ChatCompletionServer() { stop(); }

int ChatCompletionServer::start() {
    port_ = server_->bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error(ErrorCode::kTransportError, "cannot bind a local port");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ChatCompletionServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string ChatCompletionServer::url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

}  // namespace textportal
