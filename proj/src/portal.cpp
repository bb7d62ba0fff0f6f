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

#include "textportal/portal.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace textportal {

namespace {

constexpr std::size_t kServedLimit = 4096;
constexpr const char* kSharedStoreId = "*";

}  // namespace

struct Portal::Served {
    std::string query;
    ContextSnapshot context;
    std::vector<float> feature;
    std::optional<LlmRanking> llm;
    Provenance provenance = Provenance::kFallbackFrequency;
    bool selected = false;
};

struct Portal::Store {
    std::shared_ptr<PersonalDatabase> db;
    std::mutex mutex;
    std::optional<Instant> last_live;
    struct Recall {
        std::string chosen;
        Instant at;
        std::uint64_t id = 0;
    };
    /// normalised query -> user -> latest selection
    std::map<std::string, std::map<std::string, Recall>> recall;
};

struct Portal::User {
    std::string id;
    std::mutex mutex;
    std::mutex retrain_mutex;
    std::shared_ptr<Store> store;
    std::vector<FunctionDescriptor> collection;

    std::mutex model_mutex;
    std::shared_ptr<const UserModel> model;

    std::map<std::string, std::size_t> frequency;
    std::map<std::string, Instant> last_used;
    std::map<std::string, std::vector<std::string>> chat_history;

    std::map<std::string, Served> served;
    std::deque<std::string> served_order;
    std::uint64_t next_request = 1;

    std::shared_ptr<const UserModel> current_model() {
        std::lock_guard lock(model_mutex);
        return model;
    }
    void swap_model(std::shared_ptr<const UserModel> m) {
        std::lock_guard lock(model_mutex);
        model = std::move(m);
    }
    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& f : collection) out.push_back(f.id);
        return out;
    }
    const FunctionDescriptor* find(const std::string& fid) const {
        for (const auto& f : collection) {
            if (f.id == fid) return &f;
        }
        return nullptr;
    }
};

std::string_view route_mode_name(RouteMode m) {
    switch (m) {
        case RouteMode::kCascade: return "cascade";
        case RouteMode::kLocalOnly: return "local_only";
        case RouteMode::kLlmOnly: return "llm_only";
    }
    return "cascade";
}

RouteMode route_mode_from_name(std::string_view s) {
    if (s == "cascade") return RouteMode::kCascade;
    if (s == "local_only") return RouteMode::kLocalOnly;
    if (s == "llm_only") return RouteMode::kLlmOnly;
    throw Error(ErrorCode::kInvalidArgument, "unknown route mode " + std::string(s));
}

std::string_view provenance_name(Provenance p) {
    switch (p) {
        case Provenance::kLocal: return "local";
        case Provenance::kLlm: return "llm";
        case Provenance::kFallbackFrequency: return "fallback_frequency";
    }
    return "local";
}

std::size_t PortalConfig::feature_dim() const { return encoder.dim + app_vocab.size() + kTimeFeatureDim; }

void to_json(nlohmann::json& j, const PortalConfig& c) {
    j = nlohmann::json{{"encoder", c.encoder},
                       {"context", c.context},
                       {"app_vocab", c.app_vocab},
                       {"default_collection", c.default_collection},
                       {"top_k", c.top_k},
                       {"threshold", c.threshold},
                       {"user_weight", c.user_weight},
                       {"few_shot", c.few_shot},
                       {"history_budget", c.history_budget},
                       {"mode", route_mode_name(c.mode)},
                       {"use_context", c.use_context},
                       {"merged_store", c.merged_store},
                       {"repeat_recall", c.repeat_recall},
                       {"example_seed", c.example_seed},
                       {"bootstrap_alpha", c.bootstrap_alpha},
                       {"bootstrap_pool", c.bootstrap_pool.string()},
                       {"synthetic_from_llm", c.synthetic_from_llm},
                       {"train", c.train},
                       {"retrain_hour_utc", c.retrain_hour_utc},
                       {"data_dir", c.data_dir.string()},
                       {"telemetry_log", c.telemetry_log.string()},
                       {"telemetry_buffer", c.telemetry_buffer},
                       {"auto_provision", c.auto_provision},
                       {"show_provenance", c.show_provenance}};
}

void from_json(const nlohmann::json& j, PortalConfig& c) {
    if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
    if (j.contains("context")) j.at("context").get_to(c.context);
    c.app_vocab = j.value("app_vocab", c.app_vocab);
    if (j.contains("default_collection")) j.at("default_collection").get_to(c.default_collection);
    c.top_k = j.value("top_k", c.top_k);
    c.threshold = j.value("threshold", c.threshold);
    c.user_weight = j.value("user_weight", c.user_weight);
    c.few_shot = j.value("few_shot", c.few_shot);
    c.history_budget = j.value("history_budget", c.history_budget);
    if (j.contains("mode")) c.mode = route_mode_from_name(j.at("mode").get<std::string>());
    c.use_context = j.value("use_context", c.use_context);
    c.merged_store = j.value("merged_store", c.merged_store);
    c.repeat_recall = j.value("repeat_recall", c.repeat_recall);
    c.example_seed = j.value("example_seed", c.example_seed);
    c.bootstrap_alpha = j.value("bootstrap_alpha", c.bootstrap_alpha);
    c.bootstrap_pool = j.value("bootstrap_pool", c.bootstrap_pool.string());
    c.synthetic_from_llm = j.value("synthetic_from_llm", c.synthetic_from_llm);
    if (j.contains("train")) j.at("train").get_to(c.train);
    c.retrain_hour_utc = j.value("retrain_hour_utc", c.retrain_hour_utc);
    c.data_dir = j.value("data_dir", c.data_dir.string());
    c.telemetry_log = j.value("telemetry_log", c.telemetry_log.string());
    c.telemetry_buffer = j.value("telemetry_buffer", c.telemetry_buffer);
    c.auto_provision = j.value("auto_provision", c.auto_provision);
    c.show_provenance = j.value("show_provenance", c.show_provenance);
}

std::vector<FunctionDescriptor> default_collection() {
    const std::vector<std::tuple<const char*, const char*, const char*>> rows{
        {"Browser", "search", "web search"},
        {"Maps", "search", "places and directions"},
        {"Amazon", "search", "shopping"},
        {"YouTube", "search", "videos"},
        {"Spotify", "search", "songs, artists and podcasts"},
        {"UberEats", "search", "food delivery"},
        {"Instagram", "search", "accounts and tags"},
        {"TikTok", "search", "short videos"},
        {"Wikipedia", "search", "encyclopedia articles"},
        {"Yelp", "search", "restaurants and local businesses"},
        {"Twitter", "search", "posts and trends"},
        {"Reddit", "search", "forums and discussions"},
        {"Netflix", "search", "movies and shows"},
        {"Contacts", "search", "people in the address book"},
        {"Notes", "record", "write a note"},
        {"Translate", "translate", "translate text"},
        {"Wallet", "pay", "send a payment amount"},
        {"Yelp", "review", "write a review"},
        {"Twitter", "share", "post a tweet"},
        {"Reader", "annotate", "highlight and comment"},
    };
    std::vector<FunctionDescriptor> out;
    for (const auto& [app, action, description] : rows) {
        out.push_back(FunctionDescriptor::make(app, action, std::nullopt, std::string(description)));
    }
    return out;
}

std::vector<std::string> default_app_vocab() {
    std::vector<std::string> vocab;
    std::set<std::string> seen;
    for (const auto& f : default_collection()) {
        if (seen.insert(f.app).second) vocab.push_back(f.app);
    }
    for (const char* app : {"Camera", "Photos", "Clock", "Calendar", "Gmail", "Messages", "WhatsApp", "Phone",
                            "Settings", "Weather"}) {
        if (seen.insert(app).second) vocab.emplace_back(app);
    }
    return vocab;
}

PortalConfig default_portal_config() {
    PortalConfig c;
    c.app_vocab = default_app_vocab();
    c.default_collection = default_collection();
    return c;
}

PortalConfig load_portal_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read config " + file.string());
    PortalConfig c = default_portal_config();
    try {
        nlohmann::json::parse(in).get_to(c);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidArgument, "config " + file.string() + ": " + e.what());
    }
    return c;
}

std::pair<std::string, std::optional<std::string>> parse_override(const std::string& text) {
    const auto star = text.rfind('*');
    if (star == std::string::npos) return {trim(text), std::nullopt};
    return {trim(std::string_view(text).substr(0, star)), trim(std::string_view(text).substr(star + 1))};
}

std::vector<std::string> match_filter(const std::string& filter, std::span<const FunctionDescriptor> functions) {
    const std::string needle = to_lower_ascii(trim(filter));
    std::vector<std::string> out;
    if (needle.empty()) return out;
    auto has = [&](std::string_view field) { return to_lower_ascii(field).find(needle) != std::string::npos; };
    for (const auto& f : functions) {
        if (has(f.app) || has(f.action) || (f.description && has(*f.description))) out.push_back(f.id);
    }
    return out;
}

void to_json(nlohmann::json& j, const PredictionList& p) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : p.entries) {
        entries.push_back({{"function_id", e.function_id}, {"score", e.score}, {"rank", e.rank}});
    }
    j = nlohmann::json{{"request_id", p.request_id},
                       {"entries", std::move(entries)},
                       {"provenance", provenance_name(p.provenance)},
                       {"confidence", p.confidence},
                       {"latency_ms", p.latency_ms},
                       {"llm_latency_ms", p.llm_latency_ms},
                       {"chat", p.chat},
                       {"recalled", p.recalled}};
    if (p.filter) j["filter"] = {{"raw", p.filter->raw}, {"matched", p.filter->matched}};
    if (p.llm_error) j["llm_error"] = *p.llm_error;
}

void to_json(nlohmann::json& j, const SelectAck& a) {
    j = nlohmann::json{{"record_id", a.record_id}, {"label", a.label}, {"execution", a.execution}};
}

std::string RecordingExecutionAdapter::execute(const FunctionDescriptor& function, const std::string& text) {
    std::string line = "would execute " + function.id + " with text \"" + text + "\"";
    std::lock_guard lock(mutex_);
    log_.push_back(line);
    return line;
}

std::vector<std::string> RecordingExecutionAdapter::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

Portal::Portal(PortalConfig config, std::shared_ptr<LlmClient> llm, std::shared_ptr<Clock> clock,
               std::shared_ptr<ExecutionAdapter> executor)
    : config_(std::move(config)),
      llm_(std::move(llm)),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()),
      executor_(executor ? std::move(executor) : std::make_shared<RecordingExecutionAdapter>()),
      encoder_(make_encoder(config_.encoder)) {
    if (config_.default_collection.empty()) {
        throw Error(ErrorCode::kEmptyFunctionSet, "the default collection is empty");
    }
    if (config_.top_k == 0) throw Error(ErrorCode::kInvalidArgument, "top_k must be at least 1");
    if (!config_.bootstrap_pool.empty()) pool_ = load_record_pool(config_.bootstrap_pool);
    if (config_.merged_store) {
        shared_store_ = std::make_shared<Store>();
        shared_store_->db = std::make_shared<PersonalDatabase>(kSharedStoreId, config_.feature_dim());
    }
    if (!config_.telemetry_log.empty()) {
        if (config_.telemetry_log.has_parent_path()) {
            std::filesystem::create_directories(config_.telemetry_log.parent_path());
        }
        telemetry_out_.open(config_.telemetry_log, std::ios::app);
    }
}

Portal::~Portal() = default;

void Portal::set_bootstrap_pool(std::vector<UsageRecord> pool) { pool_ = std::move(pool); }

FeatureVector Portal::featurize(const std::string& query, const ContextSnapshot& context) const {
    const auto text = encoder_->encode(query);
    ContextVector ctx;
    if (config_.use_context) {
        ctx = encode_context(context, config_.app_vocab, context.now, config_.context);
    } else {
        ctx.app_part.assign(config_.app_vocab.size(), 0.0);
    }
    return assemble_feature(text, ctx, encoder_->dim(), config_.app_vocab.size());
}

void Portal::emit(const std::string& request_id, const std::string& user_id, std::string_view stage,
                  double latency_ms, const nlohmann::json& extra) {
    nlohmann::json event{{"request_id", request_id}, {"user_id", user_id}, {"stage", stage}, {"latency_ms", latency_ms}};
    for (const auto& [k, v] : extra.items()) event[k] = v;
    std::lock_guard lock(telemetry_mutex_);
    if (telemetry_out_.is_open()) telemetry_out_ << event.dump() << '\n';
    telemetry_.push_back(std::move(event));
    while (telemetry_.size() > config_.telemetry_buffer) telemetry_.pop_front();
}

std::vector<nlohmann::json> Portal::telemetry(std::size_t limit) const {
    std::lock_guard lock(telemetry_mutex_);
    const std::size_t n = std::min(limit, telemetry_.size());
    return {telemetry_.end() - static_cast<std::ptrdiff_t>(n), telemetry_.end()};
}

void Portal::index_record(Store& store, const UsageRecord& r) {
    if (r.origin != Origin::kLive) return;
    auto& slot = store.recall[HashTrigramEncoder::normalize(r.query)][r.user_id];
    if (slot.id == 0 || r.timestamp >= slot.at) slot = {r.chosen, r.timestamp, r.id};
    if (!store.last_live || r.timestamp > *store.last_live) store.last_live = r.timestamp;
}

void Portal::seed_user(User& u) {
    UserModel m;
    m.head = HeadParams::zeros(u.ids(), config_.feature_dim());
    m.gate = ChatGateParams::untrained(config_.feature_dim());
    u.swap_model(std::make_shared<const UserModel>(std::move(m)));

    if (config_.bootstrap_alpha <= 0) return;
    const Instant at = instant_from_ms(0);
    const Featurizer featurize = [this](const std::string& q, const ContextSnapshot& c) { return this->featurize(q, c); };
    LlmClient* synth_llm = config_.synthetic_from_llm ? llm_.get() : nullptr;
    const SyntheticSource synthesize = [&](const FunctionDescriptor& f, std::size_t n) {
        return generate_synthetic(f, n, synth_llm, at, featurize);
    };
    auto records = bootstrap(u.collection, pool_, synthesize, featurize, config_.bootstrap_alpha);
    for (auto& r : records) u.store->db->append(std::move(r));
}

std::shared_ptr<Portal::User> Portal::load_or_create(
    const std::string& user_id, const std::optional<std::vector<FunctionDescriptor>>& collection) {
    if (collection && collection->empty()) throw Error(ErrorCode::kEmptyFunctionSet, "collection is empty");
    auto u = std::make_shared<User>();
    u->id = user_id;
    if (shared_store_) {
        u->store = shared_store_;
        u->collection = collection.value_or(config_.default_collection);
        seed_user(*u);
        return u;
    }

    u->store = std::make_shared<Store>();
    const auto dir = config_.data_dir.empty() ? std::filesystem::path{} : config_.data_dir / user_id;
    if (!dir.empty() && std::filesystem::exists(dir / "manifest.json")) {
        auto loaded = load_database(dir);
        if (loaded.db->feature_dim() != config_.feature_dim()) {
            throw Error(ErrorCode::kDimensionMismatch, "stored features for " + user_id + " have dimension " +
                                                           std::to_string(loaded.db->feature_dim()));
        }
        u->store->db = std::move(loaded.db);
        try {
            u->collection = loaded.extra.at("collection").get<std::vector<FunctionDescriptor>>();
            UserModel m;
            const auto& model = loaded.extra.at("model");
            model.at("head").get_to(m.head);
            model.at("gate").get_to(m.gate);
            u->swap_model(std::make_shared<const UserModel>(std::move(m)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kCorruptSnapshot, std::string("user segments: ") + e.what());
        }
        for (const auto& r : u->store->db->snapshot()) {
            index_record(*u->store, *r);
            if (r->origin != Origin::kLive || r->user_id != user_id) continue;
            ++u->frequency[r->chosen];
            u->last_used[r->chosen] = r->timestamp;
            if (r->chat) u->chat_history[r->chosen].push_back(r->query);
        }
        return u;
    }

    u->store->db = std::make_shared<PersonalDatabase>(user_id, config_.feature_dim());
    u->collection = collection.value_or(config_.default_collection);
    seed_user(*u);
    return u;
}

std::shared_ptr<Portal::User> Portal::user(const std::string& user_id, bool create) {
    if (trim(user_id).empty()) throw Error(ErrorCode::kInvalidRequest, "user_id is required");
    std::lock_guard lock(users_mutex_);
    if (auto it = users_.find(user_id); it != users_.end()) return it->second;
    const bool on_disk = !config_.data_dir.empty() && !config_.merged_store &&
                         std::filesystem::exists(config_.data_dir / user_id / "manifest.json");
    if (!create && !on_disk) throw Error(ErrorCode::kUnknownUser, "no user " + user_id);
    auto u = load_or_create(user_id, std::nullopt);
    users_[user_id] = u;
    return u;
}

void Portal::provision(const std::string& user_id) { user(user_id, true); }

void Portal::provision(const std::string& user_id, std::vector<FunctionDescriptor> collection) {
    if (trim(user_id).empty()) throw Error(ErrorCode::kInvalidRequest, "user_id is required");
    std::lock_guard lock(users_mutex_);
    if (users_.contains(user_id)) return;
    users_[user_id] = load_or_create(user_id, std::move(collection));
}

bool Portal::has_user(const std::string& user_id) const {
    std::lock_guard lock(users_mutex_);
    return users_.contains(user_id);
}

std::vector<std::string> Portal::users() const {
    std::lock_guard lock(users_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : users_) out.push_back(id);
    return out;
}

std::shared_ptr<const UserModel> Portal::model(const std::string& user_id) {
    return user(user_id, false)->current_model();
}

std::shared_ptr<PersonalDatabase> Portal::database(const std::string& user_id) {
    return user(user_id, false)->store->db;
}

std::vector<std::string> Portal::completion_order(const User& u, const UserModel& m, std::span<const double> feature,
                                                  const std::vector<std::string>& ids) const {
    std::map<std::string, double> prior;
    if (!feature.empty() && m.head.dim == feature.size() && !m.head.functions.empty()) {
        prior = m.head.probabilities(feature);
    }
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < u.collection.size(); ++i) position.emplace(u.collection[i].id, i);

    auto lookup = [](const auto& map, const std::string& key, auto fallback) {
        auto it = map.find(key);
        return it == map.end() ? fallback : it->second;
    };
    std::vector<std::string> out = ids;
    std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        if (const double pa = lookup(prior, a, 0.0), pb = lookup(prior, b, 0.0); pa != pb) return pa > pb;
        const std::size_t fa = lookup(u.frequency, a, std::size_t{0}), fb = lookup(u.frequency, b, std::size_t{0});
        if (fa != fb) return fa > fb;
        const Instant la = lookup(u.last_used, a, Instant::min()), lb = lookup(u.last_used, b, Instant::min());
        if (la != lb) return la > lb;
        const std::size_t xa = lookup(position, a, SIZE_MAX), xb = lookup(position, b, SIZE_MAX);
        if (xa != xb) return xa < xb;
        return a < b;
    });
    return out;
}

PredictionList Portal::predict(const PredictRequest& request) {
    const double t_start = clock_->now_ms();
    auto u = user(request.user_id, config_.auto_provision);
    std::lock_guard lock(u->mutex);
    const auto model = u->current_model();

    PredictionList out;
    out.request_id = u->id + "-" + std::to_string(u->next_request++);
    std::vector<std::pair<std::string, nlohmann::json>> stages;
    double t_mark = t_start;
    auto stage = [&](std::string name, nlohmann::json extra = nlohmann::json::object()) {
        const double now = clock_->now_ms();
        extra["latency_ms"] = now - t_mark;
        t_mark = now;
        stages.emplace_back(std::move(name), std::move(extra));
    };

    const auto [clean, filter_text] = parse_override(request.text);
    std::vector<std::string> matched;
    if (filter_text && !filter_text->empty()) {
        matched = match_filter(*filter_text, u->collection);
        out.filter = OverrideFilter{*filter_text, matched};
    }
    const auto all_ids = u->ids();

    Served served;
    served.query = clean;
    served.context = request.context;

    std::vector<std::string> ranked;
    std::map<std::string, double> scores;
    std::vector<double> feature;

    if (clean.empty()) {
        if (matched.size() != 1) {
            throw Error(ErrorCode::kInvalidRequest, "text is empty and the filter does not name a single function");
        }
        ranked = matched;
        scores[matched.front()] = 1.0;
        out.provenance = Provenance::kLocal;
        out.confidence = 1.0;
        stage("override");
    } else {
        feature = featurize(clean, request.context);
        served.feature.assign(feature.begin(), feature.end());
        stage("encode");

        out.chat = chat_gate(feature, model->gate) >= 0.5;
        std::vector<std::string> candidates;
        bool gated = false;
        if (!matched.empty()) {
            candidates = matched;
        } else {
            for (const auto& f : u->collection) {
                if (f.is_chat() == out.chat) candidates.push_back(f.id);
            }
            gated = !candidates.empty();
            if (!gated) candidates = all_ids;
        }
        const std::set<std::string> candidate_set(candidates.begin(), candidates.end());
        stage("gate", {{"chat", out.chat}, {"candidates", candidates.size()}});

        RetrievalOptions ro;
        ro.k = std::max(config_.top_k, config_.few_shot);
        ro.user_weight = config_.user_weight;
        if (gated) ro.chat_filter = out.chat;
        const auto retrieved = u->store->db->top_k(u->id, feature, ro);
        const std::span<const Neighbor> neighbors(retrieved.data(), std::min(retrieved.size(), config_.top_k));

        std::map<std::string, double> local;
        try {
            const auto fused = integrate(neighbors);
            for (const auto& [fid, w] : fused.weights()) {
                if (w > 0.0 && candidate_set.contains(fid)) local[fid] = w;
            }
        } catch (const Error&) {
            local.clear();
        }
        const auto decision = decide_route(neighbors, config_.top_k, config_.threshold);
        out.confidence = decision.confidence;
        stage("retrieve", {{"neighbors", neighbors.size()}});

        std::optional<std::string> recalled;
        if (config_.repeat_recall && config_.mode != RouteMode::kLlmOnly) {
            std::lock_guard store_lock(u->store->mutex);
            auto it = u->store->recall.find(HashTrigramEncoder::normalize(clean));
            if (it != u->store->recall.end()) {
                const Store::Recall* best = nullptr;
                if (auto own = it->second.find(u->id); own != it->second.end()) {
                    best = &own->second;
                } else if (config_.merged_store) {
                    for (const auto& [_, r] : it->second) {
                        if (!best || r.at > best->at || (r.at == best->at && r.id > best->id)) best = &r;
                    }
                }
                const bool allowed = best && u->find(best->chosen) &&
                                     (matched.empty() || candidate_set.contains(best->chosen));
                if (allowed) recalled = best->chosen;
            }
        }

        Route route = decision.route;
        if (config_.mode == RouteMode::kLocalOnly) route = Route::kLocal;
        if (config_.mode == RouteMode::kLlmOnly) route = Route::kLlm;
        if (recalled) route = Route::kLocal;
        stage("route", {{"route", route_name(route)}, {"recalled", recalled.has_value()}});

        auto order_by_local = [&](const std::vector<std::string>& ids) {
            std::map<std::string, double> sub;
            for (const auto& fid : ids) {
                if (auto it = local.find(fid); it != local.end()) sub[fid] = it->second;
            }
            std::vector<std::string> head;
            for (const auto& e : rank_scores(sub)) head.push_back(e.function_id);
            std::vector<std::string> rest;
            for (const auto& fid : ids) {
                if (!sub.contains(fid)) rest.push_back(fid);
            }
            auto tail = completion_order(*u, *model, feature, rest);
            head.insert(head.end(), tail.begin(), tail.end());
            return head;
        };

        if (recalled) {
            out.provenance = Provenance::kLocal;
            out.recalled = true;
            out.confidence = 1.0;
            ranked.push_back(*recalled);
            scores[*recalled] = 1.0;
            std::vector<std::string> rest;
            for (const auto& fid : candidates) {
                if (fid != *recalled) rest.push_back(fid);
            }
            for (const auto& fid : order_by_local(rest)) {
                ranked.push_back(fid);
                if (auto it = local.find(fid); it != local.end()) scores[fid] = std::min(it->second, 1.0);
            }
        } else {
            bool answered = false;
            if (route == Route::kLlm && llm_) {
                const double t_llm = clock_->now_ms();
                try {
                    std::string prompt;
                    std::vector<FunctionDescriptor> cand_fns;
                    for (const auto& fid : candidates) cand_fns.push_back(*u->find(fid));
                    const bool contact_prompt = gated && out.chat;
                    if (contact_prompt) {
                        prompt = build_contact_prompt(clean, cand_fns, u->chat_history, config_.history_budget).render();
                    } else if (config_.mode == RouteMode::kLlmOnly) {
                        auto all = u->store->db->snapshot();
                        std::mt19937_64 rng(config_.example_seed ^ std::hash<std::string>{}(out.request_id));
                        std::vector<std::shared_ptr<const UsageRecord>> sample;
                        std::sample(all.begin(), all.end(), std::back_inserter(sample), config_.few_shot, rng);
                        prompt = build_function_prompt_from_records(clean, request.context, sample, cand_fns,
                                                                    config_.few_shot, config_.context.window_seconds)
                                     .render();
                    } else {
                        prompt = build_function_prompt(clean, request.context, retrieved, cand_fns, config_.few_shot,
                                                       config_.context.window_seconds)
                                     .render();
                    }
                    const auto raw = llm_->complete(prompt);
                    auto ranking = parse_ranking(raw, candidates);
                    out.provenance = Provenance::kLlm;
                    served.llm = ranking;
                    const double total = [&] {
                        double s = 0.0;
                        for (std::size_t i = 0; i < ranking.ranked.size(); ++i) s += static_cast<double>(5 - i);
                        return s;
                    }();
                    for (std::size_t i = 0; i < ranking.ranked.size(); ++i) {
                        ranked.push_back(ranking.ranked[i]);
                        scores[ranking.ranked[i]] = static_cast<double>(5 - i) / total;
                    }
                    std::vector<std::string> rest;
                    for (const auto& fid : candidates) {
                        if (!scores.contains(fid)) rest.push_back(fid);
                    }
                    for (const auto& fid : order_by_local(rest)) ranked.push_back(fid);
                    answered = true;
                } catch (const Error& e) {
                    out.llm_error = std::string(error_code_name(e.code()));
                }
                out.llm_latency_ms = clock_->now_ms() - t_llm;
                stage("llm", {{"ok", answered}});
            }
            if (!answered) {
                if (!local.empty()) {
                    out.provenance = Provenance::kLocal;
                    for (const auto& fid : order_by_local(candidates)) {
                        ranked.push_back(fid);
                        if (auto it = local.find(fid); it != local.end()) scores[fid] = it->second;
                    }
                } else {
                    out.provenance = Provenance::kFallbackFrequency;
                    ranked = completion_order(*u, *model, feature, candidates);
                }
            }
        }
    }

    for (std::size_t i = 0; i < ranked.size() && out.entries.size() < kRankingLength; ++i) {
        const auto it = scores.find(ranked[i]);
        out.entries.push_back({ranked[i], it == scores.end() ? 0.0 : it->second, static_cast<int>(i + 1)});
    }
    out.full_ranking = ranked;
    std::vector<std::string> others;
    const std::set<std::string> in_ranked(ranked.begin(), ranked.end());
    for (const auto& fid : all_ids) {
        if (!in_ranked.contains(fid)) others.push_back(fid);
    }
    for (auto& fid : completion_order(*u, *model, feature, others)) out.full_ranking.push_back(std::move(fid));
    stage("rank", {{"entries", out.entries.size()}});

    out.latency_ms = clock_->now_ms() - t_start;
    served.provenance = out.provenance;
    u->served[out.request_id] = std::move(served);
    u->served_order.push_back(out.request_id);
    while (u->served_order.size() > kServedLimit) {
        u->served.erase(u->served_order.front());
        u->served_order.pop_front();
    }

    for (auto& [name, extra] : stages) {
        extra["provenance"] = provenance_name(out.provenance);
        extra["confidence"] = out.confidence;
        const double ms = extra["latency_ms"].get<double>();
        emit(out.request_id, u->id, name, ms, extra);
    }
    return out;
}

SelectAck Portal::select(const SelectRequest& request) {
    auto u = user(request.user_id, false);
    std::lock_guard lock(u->mutex);
    auto it = u->served.find(request.request_id);
    if (it == u->served.end()) throw Error(ErrorCode::kUnknownRequest, "no served prediction " + request.request_id);
    Served& served = it->second;
    if (served.selected) throw Error(ErrorCode::kDuplicateSelection, "request " + request.request_id + " already has a selection");
    const FunctionDescriptor* fn = u->find(request.function_id);
    if (!fn) throw Error(ErrorCode::kUnknownFunction, "no function " + request.function_id + " in the collection");
    if (request.satisfaction && (*request.satisfaction < 1 || *request.satisfaction > 5)) {
        throw Error(ErrorCode::kInvalidRequest, "satisfaction must be between 1 and 5");
    }

    SelectAck ack;
    const auto ids = u->ids();
    ack.label = fuse_label(fn->id, served.provenance == Provenance::kLlm ? served.llm : std::nullopt, ids);

    Instant at = served.context.now;
    if (!served.query.empty()) {
        std::lock_guard store_lock(u->store->mutex);
        if (u->store->last_live && at < *u->store->last_live) at = *u->store->last_live;
        UsageRecord r;
        r.user_id = u->id;
        r.query = served.query;
        r.feature = served.feature;
        r.context = served.context;
        r.label = ack.label;
        r.chosen = fn->id;
        r.timestamp = at;
        r.origin = Origin::kLive;
        r.chat = fn->is_chat();
        r.satisfaction = request.satisfaction;
        r.id = u->store->db->append(r);
        ack.record_id = r.id;
        index_record(*u->store, r);
    }
    served.selected = true;
    ++u->frequency[fn->id];
    u->last_used[fn->id] = at;
    if (fn->is_chat() && !served.query.empty()) u->chat_history[fn->id].push_back(served.query);
    ack.execution = executor_->execute(*fn, served.query);
    emit(request.request_id, u->id, "select", 0.0,
         {{"function_id", fn->id}, {"record_id", ack.record_id}, {"provenance", provenance_name(served.provenance)}});
    return ack;
}

std::vector<FunctionDescriptor> Portal::functions(const std::string& user_id) {
    auto u = user(user_id, config_.auto_provision);
    std::lock_guard lock(u->mutex);
    return u->collection;
}

std::vector<FunctionDescriptor> Portal::add_function(const std::string& user_id, FunctionDescriptor function) {
    auto u = user(user_id, config_.auto_provision);
    std::lock_guard lock(u->mutex);
    if (u->find(function.id)) throw Error(ErrorCode::kDuplicateFunction, function.id + " is already in the collection");
    auto m = std::make_shared<UserModel>(*u->current_model());
    if (!m->head.index_of(function.id)) m->head.add_function(function.id);
    u->collection.push_back(std::move(function));
    u->swap_model(std::move(m));
    return u->collection;
}

std::vector<FunctionDescriptor> Portal::remove_function(const std::string& user_id, const std::string& function_id) {
    auto u = user(user_id, config_.auto_provision);
    std::lock_guard lock(u->mutex);
    auto it = std::find_if(u->collection.begin(), u->collection.end(),
                           [&](const FunctionDescriptor& f) { return f.id == function_id; });
    if (it == u->collection.end()) throw Error(ErrorCode::kUnknownFunction, "no function " + function_id);
    if (u->collection.size() == 1) throw Error(ErrorCode::kLastFunction, "cannot remove the last function");
    u->collection.erase(it);
    auto m = std::make_shared<UserModel>(*u->current_model());
    if (m->head.index_of(function_id)) m->head.remove_function(function_id);
    u->swap_model(std::move(m));
    return u->collection;
}

TrainReport Portal::retrain(const std::string& user_id) {
    auto u = user(user_id, false);
    std::unique_lock retrain_lock(u->retrain_mutex, std::try_to_lock);
    if (!retrain_lock.owns_lock()) throw Error(ErrorCode::kRetrainInProgress, "retraining already running for " + user_id);

    std::vector<std::string> ids;
    {
        std::lock_guard lock(u->mutex);
        ids = u->ids();
    }
    const auto records = u->store->db->snapshot();
    TrainReport report;
    if (records.empty()) return report;

    const std::size_t dim = config_.feature_dim();
    HeadParams head = HeadParams::zeros(ids, dim);
    const auto samples = head_samples(records, head);
    if (!samples.empty()) std::tie(head, report) = train_head_samples(samples, head, config_.train);
    auto gate = train_chat_gate(records, dim, config_.train);

    {
        std::lock_guard lock(u->mutex);
        // The collection may have changed while training ran.
        for (const auto& fid : std::vector<std::string>(head.functions)) {
            if (!u->find(fid)) head.remove_function(fid);
        }
        for (const auto& f : u->collection) {
            if (!head.index_of(f.id)) head.add_function(f.id);
        }
        UserModel m;
        m.head = std::move(head);
        m.gate = std::move(gate.params);
        m.last_report = report;
        u->swap_model(std::make_shared<const UserModel>(std::move(m)));
    }
    emit("", u->id, "retrain", report.wall_ms,
         {{"epochs", report.epochs}, {"initial_loss", report.initial_loss}, {"final_loss", report.final_loss}});
    save_user(user_id);
    return report;
}

std::map<std::string, TrainReport> Portal::retrain_all() {
    std::map<std::string, TrainReport> out;
    for (const auto& id : users()) out[id] = retrain(id);
    return out;
}

void Portal::save_user(const std::string& user_id) {
    if (config_.data_dir.empty() || config_.merged_store) return;
    auto u = user(user_id, false);
    std::lock_guard lock(u->mutex);
    const auto m = u->current_model();
    std::map<std::string, nlohmann::json> extra;
    extra["collection"] = u->collection;
    extra["model"] = {{"head", m->head}, {"gate", m->gate}};
    std::filesystem::create_directories(config_.data_dir);
    save_database(*u->store->db, config_.data_dir / user_id, extra);
}

void Portal::save_all() {
    for (const auto& id : users()) save_user(id);
}

}  // namespace textportal
