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

#include "textportal/types.hpp"

#include <algorithm>
#include <cmath>

namespace textportal {

std::string FunctionDescriptor::make_id(const std::string& app, const std::string& action,
                                        const std::optional<std::string>& contact) {
    if (action == "chat" && contact) return app + "-" + *contact;
    return app + "-" + action;
}

FunctionDescriptor FunctionDescriptor::make(std::string app, std::string action,
                                            std::optional<std::string> contact,
                                            std::optional<std::string> description) {
    app = trim(app);
    action = trim(action);
    if (contact) contact = trim(*contact);
    if (app.empty() || action.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "function needs a non-empty app and action");
    }
    const bool chat = action == "chat";
    if (chat != (contact.has_value() && !contact->empty())) {
        throw Error(ErrorCode::kInvalidArgument,
                    "a contact is required for chat functions and only for them");
    }
    FunctionDescriptor f;
    f.id = make_id(app, action, contact);
    f.app = std::move(app);
    f.action = std::move(action);
    f.contact = chat ? contact : std::nullopt;
    f.description = std::move(description);
    return f;
}

double LabelVector::at(const std::string& id) const {
    auto it = weights_.find(id);
    return it == weights_.end() ? 0.0 : it->second;
}

std::size_t LabelVector::nonzero_count() const {
    return static_cast<std::size_t>(
        std::count_if(weights_.begin(), weights_.end(), [](const auto& kv) { return kv.second != 0.0; }));
}

double LabelVector::total() const {
    std::vector<double> w;
    w.reserve(weights_.size());
    for (const auto& [_, v] : weights_) w.push_back(v);
    std::sort(w.begin(), w.end());
    double sum = 0.0;
    for (double v : w) sum += v;
    return sum;
}

std::string LabelVector::argmax() const {
    std::string best;
    double best_w = -1.0;
    for (const auto& [id, w] : weights_) {
        if (w > best_w) {
            best = id;
            best_w = w;
        }
    }
    return best;
}

void LabelVector::validate(double tol) const {
    if (weights_.empty()) throw Error(ErrorCode::kInvalidLabel, "label is empty");
    for (const auto& [id, w] : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::kInvalidLabel, "negative or non-finite weight for " + id);
        }
    }
    const double t = total();
    if (std::abs(t - 1.0) > tol) {
        throw Error(ErrorCode::kInvalidLabel, "label sums to " + std::to_string(t));
    }
}

std::string_view origin_name(Origin o) {
    switch (o) {
        case Origin::kLive: return "live";
        case Origin::kBootstrap: return "bootstrap";
        case Origin::kSynthetic: return "synthetic";
    }
    return "live";
}

Origin origin_from_name(std::string_view s) {
    if (s == "live") return Origin::kLive;
    if (s == "bootstrap") return Origin::kBootstrap;
    if (s == "synthetic") return Origin::kSynthetic;
    throw Error(ErrorCode::kInvalidArgument, "unknown origin " + std::string(s));
}

void to_json(nlohmann::json& j, const FunctionDescriptor& f) {
    j = nlohmann::json{{"id", f.id}, {"app", f.app}, {"action", f.action}};
    if (f.contact) j["contact"] = *f.contact;
    if (f.description) j["description"] = *f.description;
}

void from_json(const nlohmann::json& j, FunctionDescriptor& f) {
    std::optional<std::string> contact;
    std::optional<std::string> description;
    if (j.contains("contact") && !j["contact"].is_null()) contact = j["contact"].get<std::string>();
    if (j.contains("description") && !j["description"].is_null()) {
        description = j["description"].get<std::string>();
    }
    f = FunctionDescriptor::make(j.at("app").get<std::string>(), j.at("action").get<std::string>(),
                                 contact, description);
    if (j.contains("id") && j["id"].get<std::string>() != f.id) {
        throw Error(ErrorCode::kInvalidArgument, "function id does not match app/action/contact");
    }
}

void to_json(nlohmann::json& j, const ContextSnapshot& c) {
    nlohmann::json launches = nlohmann::json::array();
    for (const auto& l : c.launches) launches.push_back({{"app", l.app}, {"at_ms", to_ms(l.at)}});
    j = nlohmann::json{{"now_ms", to_ms(c.now)}, {"launches", std::move(launches)}};
}

void from_json(const nlohmann::json& j, ContextSnapshot& c) {
    c.now = instant_from_ms(j.at("now_ms").get<std::int64_t>());
    c.launches.clear();
    if (j.contains("launches")) {
        for (const auto& l : j.at("launches")) {
            c.launches.push_back({l.at("app").get<std::string>(),
                                  instant_from_ms(l.at("at_ms").get<std::int64_t>())});
        }
    }
}

void to_json(nlohmann::json& j, const LabelVector& l) {
    j = nlohmann::json::object();
    for (const auto& [id, w] : l.weights()) j[id] = w;
}

void from_json(const nlohmann::json& j, LabelVector& l) {
    std::map<std::string, double> w;
    for (auto it = j.begin(); it != j.end(); ++it) w[it.key()] = it.value().get<double>();
    l = LabelVector(std::move(w));
}

nlohmann::json record_to_json(const UsageRecord& r) {
    nlohmann::json j{{"id", r.id},
                     {"user_id", r.user_id},
                     {"query", r.query},
                     {"context", r.context},
                     {"label", r.label},
                     {"chosen", r.chosen},
                     {"timestamp_ms", to_ms(r.timestamp)},
                     {"origin", origin_name(r.origin)},
                     {"chat", r.chat}};
    if (r.satisfaction) j["satisfaction"] = *r.satisfaction;
    return j;
}

UsageRecord record_from_json(const nlohmann::json& j) {
    UsageRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.user_id = j.at("user_id").get<std::string>();
    r.query = j.at("query").get<std::string>();
    r.context = j.at("context").get<ContextSnapshot>();
    r.label = j.at("label").get<LabelVector>();
    r.chosen = j.at("chosen").get<std::string>();
    r.timestamp = instant_from_ms(j.at("timestamp_ms").get<std::int64_t>());
    r.origin = origin_from_name(j.at("origin").get<std::string>());
    r.chat = j.value("chat", false);
    if (j.contains("satisfaction")) r.satisfaction = j.at("satisfaction").get<int>();
    return r;
}

}  // namespace textportal
