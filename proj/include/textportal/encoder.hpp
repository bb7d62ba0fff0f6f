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

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textportal/types.hpp"

namespace textportal {

using TextVector = std::vector<double>;
using FeatureVector = std::vector<double>;

/// sin, cos of the hour-of-day angle, then Monday..Sunday one-hot.
inline constexpr std::size_t kTimeFeatureDim = 9;

struct ContextVector {
    std::vector<double> app_part;
    std::array<double, kTimeFeatureDim> time_part{};
};

struct EncoderConfig {
    std::string kind = "hash";  // hash | external
    std::size_t dim = 256;
    std::uint64_t hash_seed = 17;
    // external provider (OpenAI-compatible /v1/embeddings)
    std::string endpoint;
    std::string model;
    std::string api_key_env = "TEXTPORTAL_EMBEDDING_API_KEY";
    int timeout_ms = 8000;
};

struct ContextConfig {
    double tau_seconds = 300.0;
    double window_seconds = 600.0;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const ContextConfig& c);
void from_json(const nlohmann::json& j, ContextConfig& c);

/// Maps query text to a unit-norm vector. Implementations are pure.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::size_t dim() const = 0;
    /// Throws EmptyInput when the text is blank.
    virtual TextVector encode(std::string_view text) const = 0;
};

/// Character-trigram feature hashing.
///
/// The text is trimmed, lower-cased (ASCII), runs of whitespace are
/// collapsed to one space, and the result is padded with one space on
/// each side. Every 3-byte window is hashed with 64-bit FNV-1a whose
/// offset basis is XOR-ed with the seed; bucket = hash % dim gets +1.
/// The count vector is L2-normalised.
class HashTrigramEncoder final : public TextEncoder {
public:
    HashTrigramEncoder(std::size_t dim, std::uint64_t seed);
    std::size_t dim() const override { return dim_; }
    TextVector encode(std::string_view text) const override;

    static std::string normalize(std::string_view text);

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Embeddings from an external OpenAI-compatible endpoint, re-normalised.
class ExternalEncoder final : public TextEncoder {
public:
    explicit ExternalEncoder(EncoderConfig config);
    std::size_t dim() const override { return config_.dim; }
    TextVector encode(std::string_view text) const override;

private:
    EncoderConfig config_;
};

std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& config);

/// Exponentially decayed launch counts per vocabulary app within the window,
/// plus the time-of-day / weekday encoding of `now`.
ContextVector encode_context(const ContextSnapshot& snapshot, std::span<const std::string> app_vocab,
                             Instant now, const ContextConfig& config = {});

/// text ++ app_part ++ time_part. Throws DimensionMismatch when the parts do
/// not have the expected sizes.
FeatureVector assemble_feature(const TextVector& text, const ContextVector& context,
                               std::size_t expected_text_dim, std::size_t expected_app_dim);

struct ChatGateParams {
    std::vector<double> weights;
    double bias = 0.0;

    /// Untrained gate: zero weights and a bias that keeps everything non-chat.
    static ChatGateParams untrained(std::size_t dim);
};

void to_json(nlohmann::json& j, const ChatGateParams& p);
void from_json(const nlohmann::json& j, ChatGateParams& p);

double sigmoid(double x);

/// Probability that the query is a message to a contact.
double chat_gate(std::span<const double> feature, const ChatGateParams& params);

}  // namespace textportal
