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
#include <cctype>
#include <set>
#include <sstream>

#include "textportal/llm.hpp"

namespace textportal {

namespace {

constexpr const char* kFunctionTask =
    "A smartphone user typed a short piece of text. The text is exactly what they would enter into the "
    "text box of the function they want to use, not a command describing it. Using the examples of this "
    "user's earlier inputs, predict which of the options below the user wants to use the text with.";

constexpr const char* kContactTask =
    "A smartphone user typed a chat message. Using the recent chat history with each contact, predict "
    "which contact the message is meant for.";

constexpr const char* kRankInstruction =
    "Rank the five most likely options, most likely first. Answer with exactly five lines of the form "
    "\"1. <option>\", using names from the option list and nothing else.";

constexpr const char* kContactInstruction =
    "Rank the five most likely contacts, most likely first. Answer with up to five lines of the form "
    "\"1. <contact>\", using names from the contact list and nothing else.";

const std::array<const char*, 7> kWeekdays{"Monday", "Tuesday", "Wednesday", "Thursday",
                                           "Friday", "Saturday", "Sunday"};

std::string one_line(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    }
    return trim(out);
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (is_alnum(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

/// Drops list markers ("1.", "2)", "-", "*"), markdown emphasis and quotes.
std::string strip_line(std::string_view raw) {
    std::string s = trim(raw);
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':')) {
        s = trim(std::string_view(s).substr(i + 1));
    } else if (!s.empty() && (s[0] == '-' || s[0] == '*' || s[0] == '+')) {
        // "**Name**" is emphasis, not a bullet.
        if (!(s.size() > 1 && s[0] == '*' && s[1] == '*')) s = trim(std::string_view(s).substr(1));
    }
    auto strip_chars = [](std::string& t, std::string_view chars) {
        while (!t.empty() && chars.find(t.front()) != std::string_view::npos) t.erase(t.begin());
        while (!t.empty() && chars.find(t.back()) != std::string_view::npos) t.pop_back();
    };
    strip_chars(s, "*_`\"' ");
    std::string t = s;
    strip_chars(t, ".,;:!");
    return trim(t);
}

std::string time_of_day(Instant t) {
    const std::int64_t ms = to_ms(t);
    constexpr std::int64_t kDay = 86'400'000;
    std::int64_t in_day = ms % kDay;
    if (in_day < 0) in_day += kDay;
    const auto minutes = in_day / 60'000;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(minutes / 60), static_cast<int>(minutes % 60));
    return buf;
}

FewShotExample example_from(const UsageRecord& r, double window_seconds) {
    return FewShotExample{one_line(r.query), describe_app_usage(r.context, window_seconds),
                          describe_time(r.context.now), r.chosen};
}

std::string query_block(const std::string& label, const std::string& text, const ContextSnapshot& context,
                        double window_seconds, const char* instruction) {
    std::ostringstream out;
    out << label << ": " << one_line(text) << '\n';
    if (label == "Input") {
        out << "App usage: " << describe_app_usage(context, window_seconds) << '\n';
        out << "Time: " << describe_time(context.now) << '\n';
    }
    out << instruction;
    return out.str();
}

std::vector<std::string> option_names(std::span<const FunctionDescriptor> candidates) {
    std::vector<std::string> names;
    for (const auto& f : candidates) names.push_back(f.id);
    return names;
}

}  // namespace

std::string describe_time(Instant t) {
    const std::int64_t ms = to_ms(t);
    constexpr std::int64_t kDay = 86'400'000;
    std::int64_t days = ms / kDay;
    if (ms % kDay < 0) days -= 1;
    const auto weekday = static_cast<std::size_t>(((days + 3) % 7 + 7) % 7);
    return std::string(kWeekdays[weekday]) + " " + time_of_day(t);
}

std::string describe_app_usage(const ContextSnapshot& context, double window_seconds) {
    std::vector<std::pair<double, std::string>> recent;
    for (const auto& l : context.launches) {
        const double dt = seconds_between(l.at, context.now);
        if (dt < 0.0 || dt > window_seconds) continue;
        recent.emplace_back(dt, l.app);
    }
    if (recent.empty()) return "none";
    std::stable_sort(recent.begin(), recent.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::ostringstream out;
    for (std::size_t i = 0; i < recent.size(); ++i) {
        if (i) out << ", ";
        const auto secs = static_cast<long long>(recent[i].first);
        out << recent[i].second << " (";
        if (secs < 60) out << secs << "s ago)";
        else out << secs / 60 << "m ago)";
    }
    return out.str();
}

std::string FunctionPrompt::render() const {
    std::ostringstream out;
    out << "### Task\n" << task_description << "\n\n### Options\n";
    for (const auto& o : candidate_options) out << o << '\n';
    out << "\n### Examples\n";
    if (few_shot.empty()) out << "(none)\n";
    for (const auto& e : few_shot) {
        out << "Input: " << e.input << "\nApp usage: " << e.app_usage << "\nTime: " << e.time
            << "\nOutput: " << e.output << "\n\n";
    }
    if (!few_shot.empty()) {
        // keep exactly one blank line before the next header
        std::string s = out.str();
        s.pop_back();
        out.str(s);
        out.seekp(0, std::ios::end);
    }
    out << "\n### Query\n" << input_query << '\n';
    return out.str();
}

std::string ContactPrompt::render() const {
    std::ostringstream out;
    out << "### Task\n" << task_description << "\n\n### Contacts\n";
    for (const auto& c : contacts) out << c << '\n';
    out << "\n### Chat histories\n";
    for (const auto& [contact, messages] : chat_histories) {
        out << '[' << contact << "]\n";
        if (messages.empty()) out << "(no messages)\n";
        for (const auto& m : messages) out << "- " << m << '\n';
    }
    out << "\n### Query\n" << input_query << '\n';
    return out.str();
}

FunctionPrompt build_function_prompt(const std::string& query, const ContextSnapshot& context,
                                     std::span<const Neighbor> examples,
                                     std::span<const FunctionDescriptor> candidates, std::size_t M,
                                     double window_seconds) {
    if (candidates.empty()) throw Error(ErrorCode::kNoCandidates, "function prompt needs candidates");
    std::vector<const Neighbor*> ordered;
    for (const auto& n : examples) ordered.push_back(&n);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Neighbor* a, const Neighbor* b) { return a->similarity > b->similarity; });

    FunctionPrompt p;
    p.task_description = kFunctionTask;
    p.candidate_options = option_names(candidates);
    for (std::size_t i = 0; i < ordered.size() && i < M; ++i) {
        p.few_shot.push_back(example_from(*ordered[i]->record, window_seconds));
    }
    p.input_query = query_block("Input", query, context, window_seconds, kRankInstruction);
    return p;
}

FunctionPrompt build_function_prompt_from_records(const std::string& query, const ContextSnapshot& context,
                                                  std::span<const std::shared_ptr<const UsageRecord>> examples,
                                                  std::span<const FunctionDescriptor> candidates, std::size_t M,
                                                  double window_seconds) {
    if (candidates.empty()) throw Error(ErrorCode::kNoCandidates, "function prompt needs candidates");
    FunctionPrompt p;
    p.task_description = kFunctionTask;
    p.candidate_options = option_names(candidates);
    for (std::size_t i = 0; i < examples.size() && i < M; ++i) {
        p.few_shot.push_back(example_from(*examples[i], window_seconds));
    }
    p.input_query = query_block("Input", query, context, window_seconds, kRankInstruction);
    return p;
}

std::size_t history_cap(std::size_t contact_count, std::size_t budget) {
    return contact_count == 0 ? 0 : budget / contact_count;
}

ContactPrompt build_contact_prompt(const std::string& query, std::span<const FunctionDescriptor> contacts,
                                   const std::map<std::string, std::vector<std::string>>& histories,
                                   std::size_t budget) {
    if (contacts.empty()) throw Error(ErrorCode::kNoContacts, "contact prompt needs at least one contact");
    const std::size_t cap = history_cap(contacts.size(), budget);

    ContactPrompt p;
    p.task_description = kContactTask;
    for (const auto& c : contacts) {
        p.contacts.push_back(c.id);
        std::vector<std::string> kept;
        if (auto it = histories.find(c.id); it != histories.end()) {
            const auto& all = it->second;
            const std::size_t start = all.size() > cap ? all.size() - cap : 0;
            for (std::size_t i = start; i < all.size(); ++i) kept.push_back(one_line(all[i]));
        }
        p.chat_histories.emplace_back(c.id, std::move(kept));
    }
    p.input_query = query_block("Message", query, ContextSnapshot{}, 0.0, kContactInstruction);
    return p;
}

LlmRanking parse_ranking(const std::string& raw, std::span<const std::string> candidates) {
    std::map<std::string, std::string> exact;
    std::map<std::string, std::string> squashed;
    for (const auto& c : candidates) {
        exact.emplace(c, c);
        squashed.emplace(squash(c), c);
    }

    LlmRanking out;
    std::set<std::string> seen;
    auto take = [&](const std::string& id) {
        if (out.ranked.size() < kRankingLength && seen.insert(id).second) out.ranked.push_back(id);
    };

    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line) && out.ranked.size() < kRankingLength) {
        const std::string item = strip_line(line);
        if (item.empty()) continue;
        if (auto it = exact.find(item); it != exact.end()) {
            take(it->second);
            continue;
        }
        if (const auto key = squash(item); !key.empty()) {
            if (auto it = squashed.find(key); it != squashed.end()) {
                take(it->second);
                continue;
            }
        }
        // Candidate names mentioned inside prose, in order of appearance.
        const std::string lower = to_lower_ascii(line);
        std::vector<std::tuple<std::size_t, std::size_t, std::string>> hits;  // pos, -len, name
        for (const auto& c : candidates) {
            const std::string needle = to_lower_ascii(c);
            if (needle.empty()) continue;
            for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
                const bool left_ok = pos == 0 || !is_alnum(lower[pos - 1]);
                const std::size_t end = pos + needle.size();
                const bool right_ok = end >= lower.size() || !is_alnum(lower[end]);
                if (left_ok && right_ok) hits.emplace_back(pos, needle.size(), c);
            }
        }
        std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
            return std::get<1>(a) > std::get<1>(b);
        });
        std::size_t covered = 0;
        for (const auto& [pos, len, name] : hits) {
            if (pos < covered) continue;
            take(name);
            covered = pos + len;
        }
    }
    if (out.ranked.empty()) throw Error(ErrorCode::kUnparseable, "no candidate recovered from LLM output");
    return out;
}

std::string render_ranking(std::span<const std::string> ranked) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ranked.size(); ++i) out << i + 1 << ". " << ranked[i] << '\n';
    return out.str();
}

ParsedPrompt parse_prompt(const std::string& prompt) {
    ParsedPrompt out;
    std::istringstream lines(prompt);
    std::string line;
    enum class Section { kOther, kOptions, kQuery } section = Section::kOther;
    while (std::getline(lines, line)) {
        if (line.rfind("### ", 0) == 0) {
            const std::string name = line.substr(4);
            section = (name == "Options" || name == "Contacts") ? Section::kOptions
                      : name == "Query"                         ? Section::kQuery
                                                                : Section::kOther;
            continue;
        }
        if (section == Section::kOptions) {
            if (!trim(line).empty()) out.options.push_back(trim(line));
        } else if (section == Section::kQuery && out.input.empty()) {
            for (const char* label : {"Input: ", "Message: "}) {
                if (line.rfind(label, 0) == 0) out.input = line.substr(std::string_view(label).size());
            }
        }
    }
    return out;
}

std::string synthetic_prompt(const FunctionDescriptor& function, std::size_t n) {
    std::ostringstream out;
    out << "### Generate\nWrite " << n << " different texts that a smartphone user might type into the text box "
        << "of " << function.app << " in order to " << function.action;
    if (function.contact) out << " with " << *function.contact;
    out << ". Write one text per line and nothing else.\n";
    return out.str();
}

std::vector<UsageRecord> generate_synthetic(const FunctionDescriptor& function, std::size_t n, LlmClient* llm,
                                            Instant at, const Featurizer& featurize) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "generate_synthetic needs n >= 1");

    std::vector<std::string> texts;
    if (llm) {
        try {
            std::istringstream lines(llm->complete(synthetic_prompt(function, n)));
            std::string line;
            while (std::getline(lines, line) && texts.size() < n) {
                auto t = strip_line(line);
                if (!t.empty()) texts.push_back(std::move(t));
            }
        } catch (const Error&) {
            texts.clear();
        }
    }
    for (std::size_t i = texts.size(); i < n; ++i) {
        texts.push_back(function.action + " " + function.app + " sample " + std::to_string(i + 1));
    }

    std::vector<UsageRecord> out;
    out.reserve(n);
    for (auto& text : texts) {
        UsageRecord r;
        r.user_id = "synthetic";
        r.query = std::move(text);
        r.context = ContextSnapshot{{}, at};
        r.label = LabelVector::one_hot(function.id);
        r.chosen = function.id;
        r.timestamp = at;
        r.origin = Origin::kSynthetic;
        r.chat = function.is_chat();
        if (featurize) {
            const auto v = featurize(r.query, r.context);
            r.feature.assign(v.begin(), v.end());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace textportal
