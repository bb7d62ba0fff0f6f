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

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "textportal/portal.hpp"

namespace httplib {
class Server;
}

namespace textportal {

/// HTTP status for an error code: 400 for malformed input, 404 for unknown
/// entities, 409 for conflicts, 502 for upstream failures, 500 otherwise.
int http_status(ErrorCode code);

/// ContextSnapshot from a request body; a missing "now_ms" means the current
/// system time.
ContextSnapshot context_from_json(const nlohmann::json& body);

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path static_dir;
    /// Retrain every user once a day at the configured UTC hour.
    bool daily_retrain = false;
};

/// JSON API over a Portal:
///   POST   /v1/predict    {user_id, text, context?}           -> PredictionList
///   POST   /v1/select     {user_id, request_id, function_id, satisfaction?}
///   GET    /v1/functions?user_id=
///   POST   /v1/functions  {user_id, function: {app, action, contact?, description?}}
///   DELETE /v1/functions?user_id=&id=
///   POST   /v1/retrain    {user_id?}
///   GET    /v1/health
///   GET    /v1/telemetry?limit=
/// Errors are {"error": <code name>, "message": <text>}.
class PortalServer {
public:
    PortalServer(std::shared_ptr<Portal> portal, ServerOptions options);
    ~PortalServer();

    PortalServer(const PortalServer&) = delete;
    PortalServer& operator=(const PortalServer&) = delete;

    /// Binds and serves in a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const { return port_; }

private:
    void routes();
    void retrain_loop();

    std::shared_ptr<Portal> portal_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::thread timer_;
    std::mutex timer_mutex_;
    std::condition_variable timer_cv_;
    bool stopping_ = false;
    int port_ = 0;
};

}  // namespace textportal
