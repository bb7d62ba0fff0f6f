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

#include "textportal/llm.hpp"

namespace textportal {

ScriptedStubLlm::ScriptedStubLlm() : ScriptedStubLlm(Options{}) {}

ScriptedStubLlm::ScriptedStubLlm(Options options) : options_(std::move(options)), rng_(options_.seed) {
    if (!(options_.accuracy >= 0.0 && options_.accuracy <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "stub accuracy must be in [0, 1]");
    }
    if (!options_.clock) options_.clock = std::make_shared<SteadyClock>();
}

void ScriptedStubLlm::add_fixture(std::string prompt_substring, std::string reply) {
    std::lock_guard lock(mutex_);
    fixtures_.emplace_back(std::move(prompt_substring), std::move(reply));
}

void ScriptedStubLlm::set_truth(const std::string& query, const std::string& function_id) {
    std::lock_guard lock(mutex_);
    truth_[trim(query)] = function_id;
}

void ScriptedStubLlm::fail_with(std::optional<ErrorCode> code) {
    std::lock_guard lock(mutex_);
    failure_ = code;
}

std::string ScriptedStubLlm::complete(const std::string& prompt) {
    ++calls_;
    if (options_.delay_ms > 0.0) options_.clock->wait_ms(options_.delay_ms);

    std::lock_guard lock(mutex_);
    if (failure_) throw Error(*failure_, "stub configured to fail");
    for (const auto& [needle, reply] : fixtures_) {
        if (prompt.find(needle) != std::string::npos) return reply;
    }

    const ParsedPrompt parsed = parse_prompt(prompt);
    std::vector<std::string> options = parsed.options;
    std::vector<std::string> ranked;
    const auto truth = truth_.find(trim(parsed.input));
    const bool known = truth != truth_.end() &&
                       std::find(options.begin(), options.end(), truth->second) != options.end();
    if (!known || options.empty()) {
        for (std::size_t i = 0; i < options.size() && i < kRankingLength; ++i) ranked.push_back(options[i]);
        return render_ranking(ranked);
    }

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const bool correct = coin(rng_) < options_.accuracy || options.size() == 1;
    std::vector<std::string> others;
    for (const auto& o : options) {
        if (o != truth->second) others.push_back(o);
    }
    std::shuffle(others.begin(), others.end(), rng_);
    if (correct) {
        ranked.push_back(truth->second);
        for (std::size_t i = 0; i < others.size() && ranked.size() < kRankingLength; ++i) ranked.push_back(others[i]);
    } else {
        ranked.push_back(others.front());
        // The true answer lands somewhere in the remaining slots or is dropped.
        std::vector<std::string> rest(others.begin() + 1, others.end());
        rest.push_back(truth->second);
        std::shuffle(rest.begin(), rest.end(), rng_);
        for (std::size_t i = 0; i < rest.size() && ranked.size() < kRankingLength; ++i) ranked.push_back(rest[i]);
    }
    return render_ranking(ranked);
}

}  // namespace textportal
