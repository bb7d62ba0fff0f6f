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

#include "textportal/http_api.hpp"

#include <httplib.h>

#include <chrono>

#include "textportal/kernels.hpp"

namespace textportal {

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    reply(res, http_status(code), {{"error", error_code_name(code)}, {"message", message}});
}

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        auto body = nlohmann::json::parse(req.body);
        if (!body.is_object()) throw Error(ErrorCode::kInvalidRequest, "request body must be a JSON object");
        return body;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidRequest, std::string("malformed JSON: ") + e.what());
    }
}

std::string required_string(const nlohmann::json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
        throw Error(ErrorCode::kInvalidRequest, std::string("missing string field \"") + key + "\"");
    }
    return body[key].get<std::string>();
}

std::string required_param(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) throw Error(ErrorCode::kInvalidRequest, std::string("missing query parameter ") + key);
    return req.get_param_value(key);
}

/// Wraps a handler so every failure becomes a JSON error response.
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, e.code(), e.what());
        } catch (const nlohmann::json::exception& e) {
            reply_error(res, ErrorCode::kInvalidRequest, e.what());
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
        }
    };
}

nlohmann::json functions_json(const std::vector<FunctionDescriptor>& fs) { return {{"functions", fs}}; }

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument:
        case ErrorCode::kEmptyInput:
        case ErrorCode::kInvalidLabel:
        case ErrorCode::kInvalidRequest:
        case ErrorCode::kDimensionMismatch:
            return 400;
        case ErrorCode::kUnknownUser:
        case ErrorCode::kUnknownRequest:
        case ErrorCode::kUnknownFunction:
            return 404;
        case ErrorCode::kDuplicateSelection:
        case ErrorCode::kDuplicateFunction:
        case ErrorCode::kLastFunction:
        case ErrorCode::kRetrainInProgress:
            return 409;
        case ErrorCode::kTimeout:
        case ErrorCode::kTransportError:
        case ErrorCode::kRateLimited:
            return 502;
        default:
            return 500;
    }
}

ContextSnapshot context_from_json(const nlohmann::json& body) {
    ContextSnapshot c;
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
    c.now = now;
    if (!body.contains("context") || body["context"].is_null()) return c;
    const auto& ctx = body["context"];
    try {
        if (ctx.contains("now_ms")) c.now = instant_from_ms(ctx.at("now_ms").get<std::int64_t>());
        for (const auto& l : ctx.value("launches", nlohmann::json::array())) {
            c.launches.push_back({l.at("app").get<std::string>(), instant_from_ms(l.at("at_ms").get<std::int64_t>())});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidRequest, std::string("malformed context: ") + e.what());
    }
    return c;
}

PortalServer::PortalServer(std::shared_ptr<Portal> portal, ServerOptions options)
    : portal_(std::move(portal)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

PortalServer::~PortalServer() { stop(); }

void PortalServer::routes() {
    auto& s = *server_;
    const bool show_provenance = portal_->config().show_provenance;

    s.Post("/v1/predict", guarded([this, show_provenance](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        PredictRequest pr{required_string(body, "user_id"), required_string(body, "text"), context_from_json(body)};
        nlohmann::json out = portal_->predict(pr);
        if (!show_provenance) out.erase("provenance");
        reply(res, 200, out);
    }));

    s.Post("/v1/select", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        SelectRequest sr{required_string(body, "user_id"), required_string(body, "request_id"),
                         required_string(body, "function_id"), std::nullopt};
        if (body.contains("satisfaction") && !body["satisfaction"].is_null()) {
            if (!body["satisfaction"].is_number_integer()) {
                throw Error(ErrorCode::kInvalidRequest, "satisfaction must be an integer");
            }
            sr.satisfaction = body["satisfaction"].get<int>();
        }
        reply(res, 200, portal_->select(sr));
    }));

    s.Get("/v1/functions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, functions_json(portal_->functions(required_param(req, "user_id"))));
    }));

    s.Post("/v1/functions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const auto user_id = required_string(body, "user_id");
        if (!body.contains("function") || !body["function"].is_object()) {
            throw Error(ErrorCode::kInvalidRequest, "missing object field \"function\"");
        }
        FunctionDescriptor f;
        try {
            body["function"].get_to(f);
        } catch (const Error& e) {
            throw Error(ErrorCode::kInvalidRequest, e.what());
        }
        reply(res, 201, functions_json(portal_->add_function(user_id, std::move(f))));
    }));

    s.Delete("/v1/functions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200,
              functions_json(portal_->remove_function(required_param(req, "user_id"), required_param(req, "id"))));
    }));

    s.Post("/v1/retrain", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = req.body.empty() ? nlohmann::json::object() : parse_body(req);
        nlohmann::json out = nlohmann::json::object();
        if (body.contains("user_id")) {
            const auto id = required_string(body, "user_id");
            out[id] = portal_->retrain(id);
        } else {
            for (const auto& [id, report] : portal_->retrain_all()) out[id] = report;
        }
        reply(res, 200, {{"reports", out}});
    }));

    s.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200,
              {{"status", "ok"},
               {"users", portal_->users().size()},
               {"simd", kernels::isa_name(kernels::active_isa())}});
    }));

    s.Get("/v1/telemetry", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::size_t limit = 200;
        if (req.has_param("limit")) {
            try {
                limit = std::stoul(req.get_param_value("limit"));
            } catch (const std::exception&) {
                throw Error(ErrorCode::kInvalidRequest, "limit must be a non-negative integer");
            }
        }
        reply(res, 200, {{"events", portal_->telemetry(limit)}});
    }));

    if (!options_.static_dir.empty()) s.set_mount_point("/", options_.static_dir.string());
}

int PortalServer::start() {
    port_ = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                               : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
    if (port_ <= 0) throw Error(ErrorCode::kTransportError, "cannot bind " + options_.host);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    if (options_.daily_retrain) timer_ = std::thread([this] { retrain_loop(); });
    return port_;
}

void PortalServer::run() {
    start();
    if (thread_.joinable()) thread_.join();
}

void PortalServer::stop() {
    {
        std::lock_guard lock(timer_mutex_);
        stopping_ = true;
    }
    timer_cv_.notify_all();
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    if (timer_.joinable()) timer_.join();
}

void PortalServer::retrain_loop() {
    using namespace std::chrono;
    const int hour = portal_->config().retrain_hour_utc;
    std::unique_lock lock(timer_mutex_);
    while (!stopping_) {
        const auto now = system_clock::now();
        auto next = floor<days>(now) + hours(hour);
        if (next <= now) next += days(1);
        if (timer_cv_.wait_until(lock, next, [this] { return stopping_; })) break;
        lock.unlock();
        for (const auto& id : portal_->users()) {
            try {
                portal_->retrain(id);
            } catch (const Error&) {
                // keep serving with the old parameters
            }
        }
        lock.lock();
    }
}

}  // namespace textportal
