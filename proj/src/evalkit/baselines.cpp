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

#include <algorithm>
#include <cmath>

#include "textportal/evalkit.hpp"

namespace textportal::eval {

namespace {

struct Usage {
    std::size_t count = 0;
    Instant last = Instant::min();
};

std::map<std::string, Usage> usage_of(std::span<const HistoryEvent> history) {
    std::map<std::string, Usage> out;
    for (const auto& e : history) {
        auto& u = out[e.function_id];
        ++u.count;
        u.last = std::max(u.last, e.at);
    }
    return out;
}

/// Used candidates sorted by `before`, then the unused ones in input order.
template <typename Less>
std::vector<std::string> used_then_rest(std::span<const std::string> candidates,
                                        const std::map<std::string, Usage>& usage, Less before) {
    std::vector<std::string> used;
    std::vector<std::string> rest;
    for (const auto& c : candidates) (usage.contains(c) ? used : rest).push_back(c);
    std::stable_sort(used.begin(), used.end(), before);
    used.insert(used.end(), rest.begin(), rest.end());
    return used;
}

}  // namespace

std::vector<std::string> context_apps(const ContextSnapshot& context, double window_seconds) {
    std::vector<std::string> out;
    for (const auto& l : context.launches) {
        const double dt = seconds_between(l.at, context.now);
        if (dt < 0.0 || dt > window_seconds) continue;
        if (std::find(out.begin(), out.end(), l.app) == out.end()) out.push_back(l.app);
    }
    return out;
}

std::vector<std::string> baseline_mfu(std::span<const HistoryEvent> history, std::span<const std::string> candidates) {
    const auto usage = usage_of(history);
    return used_then_rest(candidates, usage, [&](const std::string& a, const std::string& b) {
        const auto& ua = usage.at(a);
        const auto& ub = usage.at(b);
        if (ua.count != ub.count) return ua.count > ub.count;
        if (ua.last != ub.last) return ua.last > ub.last;
        return a < b;
    });
}

std::vector<std::string> baseline_mru(std::span<const HistoryEvent> history, std::span<const std::string> candidates) {
    const auto usage = usage_of(history);
    return used_then_rest(candidates, usage, [&](const std::string& a, const std::string& b) {
        const auto& ua = usage.at(a);
        const auto& ub = usage.at(b);
        if (ua.last != ub.last) return ua.last > ub.last;
        return a < b;
    });
}

std::vector<std::string> baseline_bayes(std::span<const HistoryEvent> history,
                                        std::span<const std::string> context,
                                        std::span<const std::string> candidates,
                                        std::span<const std::string> app_vocab) {
    const auto mfu = baseline_mfu(history, candidates);
    if (context.empty()) return mfu;

    const double vocab = static_cast<double>(std::max<std::size_t>(app_vocab.size(), 1));
    const double n_fn = static_cast<double>(candidates.size());
    std::map<std::string, double> count;
    std::map<std::string, double> app_total;
    std::map<std::pair<std::string, std::string>, double> app_count;
    double n = 0.0;
    for (const auto& e : history) {
        count[e.function_id] += 1.0;
        n += 1.0;
        for (const auto& a : e.context_apps) {
            app_count[{e.function_id, a}] += 1.0;
            app_total[e.function_id] += 1.0;
        }
    }

    std::map<std::string, double> log_score;
    for (const auto& f : candidates) {
        double s = std::log((count[f] + 1.0) / (n + n_fn));
        for (const auto& a : context) {
            const auto it = app_count.find({f, a});
            const double c = it == app_count.end() ? 0.0 : it->second;
            s += std::log((c + 1.0) / (app_total[f] + vocab));
        }
        log_score[f] = s;
    }
    std::map<std::string, std::size_t> mfu_pos;
    for (std::size_t i = 0; i < mfu.size(); ++i) mfu_pos[mfu[i]] = i;
    std::vector<std::string> out(mfu);
    std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        if (log_score[a] != log_score[b]) return log_score[a] > log_score[b];
        return mfu_pos[a] < mfu_pos[b];
    });
    return out;
}

}  // namespace textportal::eval
