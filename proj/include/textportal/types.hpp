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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "textportal/common.hpp"

namespace textportal {

/// A text-related function: an app plus an action, or an app plus a
/// contact for chat functions.
struct FunctionDescriptor {
    std::string id;
    std::string app;
    std::string action;
    std::optional<std::string> contact;
    std::optional<std::string> description;

    bool is_chat() const { return action == "chat"; }

    /// "App-action" for ordinary functions, "App-Contact" for chat.
    static std::string make_id(const std::string& app, const std::string& action,
                               const std::optional<std::string>& contact);
    /// Builds a descriptor and validates the app/action/contact triple.
    static FunctionDescriptor make(std::string app, std::string action,
                                   std::optional<std::string> contact = std::nullopt,
                                   std::optional<std::string> description = std::nullopt);

    bool operator==(const FunctionDescriptor&) const = default;
};

struct AppLaunch {
    std::string app;
    Instant at;

    bool operator==(const AppLaunch&) const = default;
};

/// Recent app launches and the wall-clock time of the query.
struct ContextSnapshot {
    std::vector<AppLaunch> launches;
    Instant now;

    bool operator==(const ContextSnapshot&) const = default;
};

/// Sparse distribution over function ids.
class LabelVector {
public:
    LabelVector() = default;
    explicit LabelVector(std::map<std::string, double> weights) : weights_(std::move(weights)) {}

    static LabelVector one_hot(const std::string& id) { return LabelVector({{id, 1.0}}); }

    const std::map<std::string, double>& weights() const { return weights_; }
    double at(const std::string& id) const;
    void set(const std::string& id, double w) { weights_[id] = w; }
    bool empty() const { return weights_.empty(); }
    std::size_t size() const { return weights_.size(); }
    std::size_t nonzero_count() const;

    /// Sum of the weights, smallest first.
    double total() const;
    /// Id with the largest weight; ties go to the smaller id.
    std::string argmax() const;
    /// Throws InvalidLabel unless weights are >= 0 and sum to 1 +- tol.
    void validate(double tol = 1e-6) const;

    bool operator==(const LabelVector&) const = default;

private:
    std::map<std::string, double> weights_;
};

enum class Origin { kLive, kBootstrap, kSynthetic };

std::string_view origin_name(Origin o);
Origin origin_from_name(std::string_view s);

/// One interaction stored in a personal database.
struct UsageRecord {
    std::uint64_t id = 0;
    std::string user_id;
    std::string query;
    /// Stored at float32 precision; this is what persistence writes.
    std::vector<float> feature;
    ContextSnapshot context;
    LabelVector label;
    std::string chosen;
    Instant timestamp;
    Origin origin = Origin::kLive;
    bool chat = false;
    std::optional<int> satisfaction;
};

void to_json(nlohmann::json& j, const FunctionDescriptor& f);
void from_json(const nlohmann::json& j, FunctionDescriptor& f);
void to_json(nlohmann::json& j, const ContextSnapshot& c);
void from_json(const nlohmann::json& j, ContextSnapshot& c);
void to_json(nlohmann::json& j, const LabelVector& l);
void from_json(const nlohmann::json& j, LabelVector& l);
/// Record metadata only; the feature vector lives in the binary sidecar.
nlohmann::json record_to_json(const UsageRecord& r);
UsageRecord record_from_json(const nlohmann::json& j);

}  // namespace textportal
