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

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "textportal/evalkit.hpp"
#include "textportal/http_api.hpp"
#include "textportal/kernels.hpp"

using namespace textportal;

namespace {

PortalServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path);
    return nlohmann::json::parse(in);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
    out << text;
}

PortalConfig config_from(const std::string& path) {
    return path.empty() ? default_portal_config() : load_portal_config(path);
}

std::shared_ptr<LlmClient> llm_from(const std::string& config_path, bool stub) {
    if (stub) return std::make_shared<ScriptedStubLlm>();
    if (config_path.empty()) return nullptr;
    const auto j = read_json(config_path);
    if (!j.contains("llm")) return nullptr;
    return std::make_shared<HttpLlmClient>(j.at("llm").get<LlmEndpointConfig>());
}

void print_table(const std::map<std::string, eval::MetricsReport>& reports) {
    std::printf("%-10s %8s %8s %8s %8s %10s\n", "variant", "hit1", "hit5", "mrr", "local", "latency_ms");
    for (const auto& [name, r] : reports) {
        std::printf("%-10s %8.4f %8.4f %8.4f %8.4f %10.2f\n", name.c_str(), r.hit1, r.hit5, r.mrr, r.local_fraction,
                    r.mean_latency_ms);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"textportal: personalized text-to-function routing"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string config_path;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    bool use_stub = false;
    bool daily = false;
    serve->add_option("-c,--config", config_path, "portal config JSON (optional \"llm\" section)");
    serve->add_option("--host", host);
    serve->add_option("-p,--port", port);
    serve->add_option("--static", static_dir, "directory served at /");
    serve->add_flag("--stub-llm", use_stub, "answer LLM calls with the scripted stub");
    serve->add_flag("--daily-retrain", daily, "retrain all users once a day");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic stream");
    eval::StreamSpec spec;
    std::string stream_out = "stream.jsonl";
    std::string pool_out;
    gen->add_option("--seed", spec.seed);
    gen->add_option("--users", spec.n_users);
    gen->add_option("--days", spec.n_days);
    gen->add_option("--functions", spec.functions_per_user);
    gen->add_option("--queries", spec.queries_per_day);
    gen->add_option("--noise", spec.noise);
    gen->add_option("-o,--out", stream_out);
    gen->add_option("--pool", pool_out, "also write a bootstrap record pool (JSONL)");

    // replay / ablate
    std::string stream_in;
    std::string variant = "full";
    std::vector<std::string> variants = eval::variant_names();
    std::string out_dir = "results";
    eval::ReplayOptions ropt;
    bool real_clock = false;
    auto* rep = app.add_subcommand("replay", "replay a stream through one variant");
    rep->add_option("-s,--stream", stream_in)->required();
    rep->add_option("-v,--variant", variant);
    rep->add_option("--accuracy", ropt.llm_accuracy, "stub LLM accuracy");
    rep->add_option("--llm-seed", ropt.llm_seed);
    rep->add_option("--delay-ms", ropt.llm_delay_ms, "stub LLM delay");
    rep->add_flag("--real-clock", real_clock, "measure latency on the wall clock");
    rep->add_option("-o,--out-dir", out_dir);

    auto* abl = app.add_subcommand("ablate", "replay a stream through several variants");
    abl->add_option("-s,--stream", stream_in)->required();
    abl->add_option("--variants", variants);
    abl->add_option("--accuracy", ropt.llm_accuracy);
    abl->add_option("--llm-seed", ropt.llm_seed);
    abl->add_option("--delay-ms", ropt.llm_delay_ms);
    abl->add_flag("--real-clock", real_clock);
    abl->add_option("-o,--out-dir", out_dir);

    // report
    std::string report_in;
    auto* report = app.add_subcommand("report", "print a report.json as a table");
    report->add_option("report", report_in)->required();

    // retrain
    std::string user_id;
    auto* retrain = app.add_subcommand("retrain", "retrain stored users now");
    retrain->add_option("-c,--config", config_path)->required();
    retrain->add_option("-u,--user", user_id, "one user (default: every stored user)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            auto config = config_from(config_path);
            auto portal = std::make_shared<Portal>(config, llm_from(config_path, use_stub));
            PortalServer server(portal, {host, port, static_dir, daily});
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "textportal listening on " << host << ":" << port << " (simd "
                      << kernels::isa_name(kernels::active_isa()) << ")\n";
            server.run();
            portal->save_all();
            g_server = nullptr;
        } else if (*gen) {
            const auto stream = eval::synth_stream(spec);
            eval::write_stream(stream_out, stream);
            if (!pool_out.empty()) write_record_pool(pool_out, eval::synth_pool(spec.seed + 1));
            std::cout << "wrote " << stream.trials.size() << " trials to " << stream_out << "\n";
        } else if (*rep || *abl) {
            const auto stream = eval::read_stream(stream_in);
            if (real_clock) ropt.clock = std::make_shared<SteadyClock>();
            std::filesystem::create_directories(out_dir);
            std::map<std::string, eval::MetricsReport> reports;
            if (*rep) {
                ropt.trial_log = std::filesystem::path(out_dir) / (variant + ".trials.jsonl");
                reports[variant] = eval::replay_variant(stream, variant, ropt).report;
            } else {
                for (const auto& v : variants) {
                    ropt.trial_log = std::filesystem::path(out_dir) / (v + ".trials.jsonl");
                    reports[v] = eval::replay_variant(stream, v, ropt).report;
                }
            }
            nlohmann::json j = nlohmann::json::object();
            for (const auto& [name, r] : reports) j[name] = r;
            write_text(std::filesystem::path(out_dir) / "report.json", j.dump(2) + "\n");
            write_text(std::filesystem::path(out_dir) / "per_day.csv", eval::per_day_csv(reports));
            print_table(reports);
        } else if (*report) {
            const auto j = read_json(report_in);
            std::map<std::string, eval::MetricsReport> reports;
            for (const auto& [name, r] : j.items()) {
                eval::MetricsReport m;
                m.trials = r.value("trials", std::size_t{0});
                m.hit1 = r.value("hit1", 0.0);
                m.hit5 = r.value("hit5", 0.0);
                m.mrr = r.value("mrr", 0.0);
                m.local_fraction = r.value("local_fraction", 0.0);
                m.mean_latency_ms = r.value("mean_latency_ms", 0.0);
                reports[name] = m;
            }
            print_table(reports);
        } else if (*retrain) {
            auto config = config_from(config_path);
            if (config.data_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "config has no data_dir");
            Portal portal(config, nullptr);
            std::vector<std::string> targets;
            if (!user_id.empty()) {
                targets.push_back(user_id);
            } else if (std::filesystem::exists(config.data_dir)) {
                for (const auto& entry : std::filesystem::directory_iterator(config.data_dir)) {
                    if (std::filesystem::exists(entry.path() / "manifest.json")) {
                        targets.push_back(entry.path().filename().string());
                    }
                }
            }
            for (const auto& id : targets) {
                const auto r = portal.retrain(id);
                std::cout << id << ": " << nlohmann::json(r).dump() << "\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
