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
#include <sstream>

#include "textportal/evalkit.hpp"

namespace textportal::eval {

namespace {

struct Accumulator {
    std::size_t n = 0;
    std::size_t hit1 = 0;
    std::size_t hit5 = 0;
    double rr = 0.0;
    std::size_t local = 0;
    double latency = 0.0;

    void add(const Trial& t, std::size_t rank) {
        ++n;
        if (rank == 1) ++hit1;
        if (rank <= 5) ++hit5;
        rr += 1.0 / static_cast<double>(rank);
        if (t.provenance == "local") ++local;
        latency += t.latency_ms;
    }
    double frac(std::size_t k) const { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }
};

}  // namespace

void to_json(nlohmann::json& j, const DayMetrics& d) {
    j = nlohmann::json{{"day", d.day},   {"trials", d.trials},
                       {"hit1", d.hit1}, {"hit5", d.hit5},
                       {"mrr", d.mrr},   {"local_fraction", d.local_fraction},
                       {"mean_latency_ms", d.mean_latency_ms}};
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = nlohmann::json{{"trials", r.trials},
                       {"failed", r.failed},
                       {"hit1", r.hit1},
                       {"hit5", r.hit5},
                       {"mrr", r.mrr},
                       {"local_fraction", r.local_fraction},
                       {"mean_latency_ms", r.mean_latency_ms},
                       {"per_day", r.per_day}};
}

std::size_t rank_of(const Trial& t) {
    const auto it = std::find(t.ranking.begin(), t.ranking.end(), t.input.truth);
    if (it == t.ranking.end()) {
        throw Error(ErrorCode::kInvalidTrial, "truth " + t.input.truth + " is not among the ranked candidates");
    }
    return static_cast<std::size_t>(it - t.ranking.begin()) + 1;
}

MetricsReport metrics(std::span<const Trial> trials) {
    if (trials.empty()) throw Error(ErrorCode::kEmptyTrials, "metrics need at least one trial");
    Accumulator all;
    std::map<int, Accumulator> days;
    MetricsReport out;
    for (const auto& t : trials) {
        if (t.error) {
            ++out.failed;
            continue;
        }
        const std::size_t r = rank_of(t);
        all.add(t, r);
        days[t.input.day].add(t, r);
    }
    out.trials = all.n;
    out.hit1 = all.frac(all.hit1);
    out.hit5 = all.frac(all.hit5);
    out.mrr = all.n ? all.rr / static_cast<double>(all.n) : 0.0;
    out.local_fraction = all.frac(all.local);
    out.mean_latency_ms = all.n ? all.latency / static_cast<double>(all.n) : 0.0;
    for (const auto& [day, a] : days) {
        out.per_day.push_back({day, a.n, a.frac(a.hit1), a.frac(a.hit5), a.rr / static_cast<double>(a.n),
                               a.frac(a.local), a.latency / static_cast<double>(a.n)});
    }
    return out;
}

std::string per_day_csv(const std::map<std::string, MetricsReport>& reports) {
    std::ostringstream out;
    out.precision(10);
    out << "variant,day,trials,hit1,hit5,mrr,local_fraction,mean_latency_ms\n";
    for (const auto& [variant, r] : reports) {
        for (const auto& d : r.per_day) {
            out << variant << ',' << d.day << ',' << d.trials << ',' << d.hit1 << ',' << d.hit5 << ',' << d.mrr << ','
                << d.local_fraction << ',' << d.mean_latency_ms << '\n';
        }
    }
    return out.str();
}

}  // namespace textportal::eval
