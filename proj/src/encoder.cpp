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

#include "textportal/encoder.hpp"

#include <httplib.h>

#include <cctype>
#include <cmath>
#include <numbers>

#include "http_util.hpp"
#include "textportal/kernels.hpp"

namespace textportal {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::int64_t kMsPerDay = 86'400'000;
constexpr double kUntrainedGateBias = -4.0;

void normalize_in_place(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq <= 0.0 || !std::isfinite(sq)) {
        throw Error(ErrorCode::kZeroVector, "cannot normalise a zero or non-finite vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

}  // namespace

void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = nlohmann::json{{"kind", c.kind},         {"dim", c.dim},          {"hash_seed", c.hash_seed},
                       {"endpoint", c.endpoint}, {"model", c.model},      {"api_key_env", c.api_key_env},
                       {"timeout_ms", c.timeout_ms}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
    EncoderConfig d;
    c.kind = j.value("kind", d.kind);
    c.dim = j.value("dim", d.dim);
    c.hash_seed = j.value("hash_seed", d.hash_seed);
    c.endpoint = j.value("endpoint", d.endpoint);
    c.model = j.value("model", d.model);
    c.api_key_env = j.value("api_key_env", d.api_key_env);
    c.timeout_ms = j.value("timeout_ms", d.timeout_ms);
}

void to_json(nlohmann::json& j, const ContextConfig& c) {
    j = nlohmann::json{{"tau_seconds", c.tau_seconds}, {"window_seconds", c.window_seconds}};
}

void from_json(const nlohmann::json& j, ContextConfig& c) {
    ContextConfig d;
    c.tau_seconds = j.value("tau_seconds", d.tau_seconds);
    c.window_seconds = j.value("window_seconds", d.window_seconds);
}

HashTrigramEncoder::HashTrigramEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "encoder dimension must be positive");
}

std::string HashTrigramEncoder::normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

TextVector HashTrigramEncoder::encode(std::string_view text) const {
    const std::string norm = normalize(text);
    if (norm.empty()) throw Error(ErrorCode::kEmptyInput, "text is empty after trimming");

    const std::string padded = " " + norm + " ";
    TextVector v(dim_, 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = kFnvOffset ^ seed_;
        for (std::size_t k = 0; k < 3; ++k) {
            h ^= static_cast<unsigned char>(padded[i + k]);
            h *= kFnvPrime;
        }
        v[h % dim_] += 1.0;
    }
    normalize_in_place(v);
    return v;
}

ExternalEncoder::ExternalEncoder(EncoderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "external encoder needs encoder.endpoint");
    }
}

TextVector ExternalEncoder::encode(std::string_view text) const {
    const std::string clean = trim(text);
    if (clean.empty()) throw Error(ErrorCode::kEmptyInput, "text is empty after trimming");

    const auto url = detail::split_url(config_.endpoint);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (auto key = detail::env_or_empty(config_.api_key_env); !key.empty()) {
        headers.emplace("Authorization", "Bearer " + key);
    }
    const nlohmann::json body{{"model", config_.model}, {"input", clean}};
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::kTransportError, "embedding request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) throw Error(ErrorCode::kRateLimited, "embedding endpoint rate limited");
    if (res->status != 200) {
        throw Error(ErrorCode::kTransportError, "embedding endpoint returned HTTP " + std::to_string(res->status));
    }

    TextVector v;
    try {
        const auto j = nlohmann::json::parse(res->body);
        v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kTransportError, std::string("malformed embedding response: ") + e.what());
    }
    if (v.size() != config_.dim) {
        throw Error(ErrorCode::kDimensionMismatch, "embedding has dimension " + std::to_string(v.size()) +
                                                       ", configured " + std::to_string(config_.dim));
    }
    normalize_in_place(v);
    return v;
}

std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& config) {
    if (config.kind == "hash") return std::make_unique<HashTrigramEncoder>(config.dim, config.hash_seed);
    if (config.kind == "external") return std::make_unique<ExternalEncoder>(config);
    throw Error(ErrorCode::kInvalidArgument, "unknown encoder.kind " + config.kind);
}

ContextVector encode_context(const ContextSnapshot& snapshot, std::span<const std::string> app_vocab,
                             Instant now, const ContextConfig& config) {
    ContextVector out;
    out.app_part.assign(app_vocab.size(), 0.0);
    for (const auto& launch : snapshot.launches) {
        const double dt = seconds_between(launch.at, now);
        if (dt < 0.0 || dt > config.window_seconds) continue;
        for (std::size_t a = 0; a < app_vocab.size(); ++a) {
            if (app_vocab[a] == launch.app) {
                out.app_part[a] += std::exp(-dt / config.tau_seconds);
                break;
            }
        }
    }

    const std::int64_t ms = to_ms(now);
    std::int64_t days = ms / kMsPerDay;
    std::int64_t ms_of_day = ms % kMsPerDay;
    if (ms_of_day < 0) {
        ms_of_day += kMsPerDay;
        days -= 1;
    }
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(ms_of_day) / static_cast<double>(kMsPerDay);
    out.time_part[0] = std::sin(angle);
    out.time_part[1] = std::cos(angle);
    // 1970-01-01 was a Thursday; index 0 is Monday.
    const std::int64_t weekday = ((days + 3) % 7 + 7) % 7;
    out.time_part[2 + static_cast<std::size_t>(weekday)] = 1.0;
    return out;
}

FeatureVector assemble_feature(const TextVector& text, const ContextVector& context,
                               std::size_t expected_text_dim, std::size_t expected_app_dim) {
    if (text.size() != expected_text_dim || context.app_part.size() != expected_app_dim) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "feature parts have sizes " + std::to_string(text.size()) + "+" +
                        std::to_string(context.app_part.size()) + ", expected " +
                        std::to_string(expected_text_dim) + "+" + std::to_string(expected_app_dim));
    }
    FeatureVector v;
    v.reserve(text.size() + context.app_part.size() + kTimeFeatureDim);
    v.insert(v.end(), text.begin(), text.end());
    v.insert(v.end(), context.app_part.begin(), context.app_part.end());
    v.insert(v.end(), context.time_part.begin(), context.time_part.end());
    return v;
}

ChatGateParams ChatGateParams::untrained(std::size_t dim) {
    return ChatGateParams{std::vector<double>(dim, 0.0), kUntrainedGateBias};
}

void to_json(nlohmann::json& j, const ChatGateParams& p) {
    j = nlohmann::json{{"weights", p.weights}, {"bias", p.bias}};
}

void from_json(const nlohmann::json& j, ChatGateParams& p) {
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double chat_gate(std::span<const double> feature, const ChatGateParams& params) {
    if (feature.size() != params.weights.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "gate has " + std::to_string(params.weights.size()) +
                                                       " weights for a feature of size " +
                                                       std::to_string(feature.size()));
    }
    return sigmoid(kernels::dot(params.weights, feature) + params.bias);
}

}  // namespace textportal
