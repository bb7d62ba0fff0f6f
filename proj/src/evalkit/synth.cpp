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

// Synthetic users. Each catalog function has a phrase set whose length
// profile follows its action (payments are a few digits, reviews run to a
// couple of dozen words). A user keeps a handful of phrases per function,
// uses functions with Zipf(1) frequencies at habitual hours, and sometimes
// types something new.

#include <algorithm>
#include <cmath>
#include <fstream>

#include "textportal/evalkit.hpp"

namespace textportal::eval {

namespace {

constexpr std::int64_t kBaseMs = 1'704'067'200'000;  // 2024-01-01T00:00:00Z, a Monday
constexpr std::int64_t kDayMs = 86'400'000;

using Phrases = std::vector<std::string>;

Phrases expand(const std::vector<std::string>& templates, const std::vector<std::string>& items) {
    Phrases out;
    for (const auto& item : items) {
        for (const auto& t : templates) {
            std::string p = t;
            const auto at = p.find("{}");
            if (at != std::string::npos) p.replace(at, 2, item);
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
        }
    }
    return out;
}

Phrases pair_up(const std::vector<std::string>& templates, const std::vector<std::string>& a,
                const std::vector<std::string>& b) {
    Phrases out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t t = 0; t < templates.size(); ++t) {
            std::string p = templates[t];
            const auto& second = b[(i + t) % b.size()];
            if (auto at = p.find("{}"); at != std::string::npos) p.replace(at, 2, a[i]);
            if (auto at = p.find("{}"); at != std::string::npos) p.replace(at, 2, second);
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<CatalogEntry> build_catalog() {
    std::vector<CatalogEntry> c;
    auto add = [&](const char* app, const char* action, const char* description, Phrases phrases) {
        c.push_back({FunctionDescriptor::make(app, action, std::nullopt, std::string(description)), std::move(phrases)});
    };
    auto chat = [&](const char* app, const char* contact, Phrases phrases) {
        c.push_back({FunctionDescriptor::make(app, "chat", std::string(contact)), std::move(phrases)});
    };

    add("Browser", "search", "web search",
        expand({"{}", "how to {}", "what is {}"},
               {"inflation", "tie a tie", "a roth ira", "boil an egg", "reset a router", "the speed of light",
                "photosynthesis", "file taxes online", "clean a cast iron pan", "machine learning"}));
    add("Maps", "search", "places and directions",
        expand({"{}", "directions to {}", "{} near me"},
               {"gas station", "airport terminal 2", "central station", "pharmacy", "parking garage", "city hall",
                "nearest atm", "ev charger", "post office", "hardware store"}));
    add("Amazon", "search", "shopping",
        expand({"{}", "buy {}", "{} deals"},
               {"usb c cable", "running shoes", "phone case", "air fryer", "paper towels", "bluetooth speaker",
                "yoga mat", "coffee beans", "desk lamp", "hdmi adapter"}));
    add("YouTube", "search", "videos",
        expand({"{} tutorial", "{} video", "{} highlights"},
               {"guitar chords", "knife sharpening", "premier league", "makeup", "excel pivot table", "lofi beats",
                "car detailing", "origami crane", "home workout", "drone footage"}));
    add("Spotify", "search", "songs, artists and podcasts",
        expand({"{}", "{} playlist", "{} album"},
               {"taylor swift", "jazz for study", "the weeknd", "morning run", "daft punk", "true crime podcast",
                "coldplay", "classical piano", "kendrick lamar", "chill acoustic"}));
    add("UberEats", "search", "food delivery",
        expand({"{}", "{} delivery", "order {}"},
               {"pad thai", "pepperoni pizza", "sushi platter", "burrito bowl", "pho", "chicken wings",
                "bubble tea", "falafel wrap", "ramen", "poke bowl"}));
    add("Instagram", "search", "accounts and tags",
        expand({"#{}", "{}", "{} official"},
               {"natgeo", "streetphotography", "nasa", "foodporn", "nike", "travelgram", "cristiano", "catsofinstagram",
                "architecture", "sunsetlovers"}));
    add("TikTok", "search", "short videos",
        expand({"{}", "{} trend", "{} challenge"},
               {"dance", "life hacks", "cooking asmr", "pranks", "skincare routine", "booktok", "gym tok",
                "funny dogs", "outfit ideas", "magic tricks"}));
    add("Wikipedia", "search", "encyclopedia articles",
        expand({"{}", "history of {}", "{} wiki"},
               {"roman empire", "marie curie", "the french revolution", "quantum mechanics", "mount kilimanjaro",
                "byzantine empire", "the printing press", "ada lovelace", "plate tectonics", "the silk road"}));
    add("Yelp", "search", "restaurants and local businesses",
        expand({"best {}", "{} open now", "top rated {}"},
               {"brunch spots", "dentist", "barber shop", "bakery", "car wash", "nail salon", "steakhouse",
                "vegan restaurant", "dry cleaner", "dim sum"}));
    add("Twitter", "search", "posts and trends",
        expand({"{}", "{} news", "#{}"},
               {"elections", "world cup", "earthquake", "apple event", "bitcoin", "climate summit", "oscars",
                "spacex launch", "layoffs", "heatwave"}));
    add("Reddit", "search", "forums and discussions",
        expand({"r/{}", "{} reddit", "{} advice"},
               {"personalfinance", "buildapc", "mechanical keyboards", "houseplants", "relationships", "cooking",
                "running", "legaladvice", "homelab", "solotravel"}));
    add("Netflix", "search", "movies and shows",
        expand({"{}", "watch {}", "{} season 2"},
               {"stranger things", "the crown", "wednesday", "squid game", "ozark", "bridgerton", "dark",
                "money heist", "the witcher", "narcos"}));
    add("Contacts", "search", "people in the address book",
        expand({"{}", "{} phone", "{} email"},
               {"john smith", "dr patel", "aunt maria", "plumber", "landlord", "coach mike", "dentist office",
                "emma watson", "kevin lee", "sarah connor"}));
    add("Notes", "record", "write a note",
        pair_up({"buy {} and {} on the way home", "remember to bring {} and {} tomorrow",
                 "idea: combine {} with {} for the project"},
                {"milk", "batteries", "the charger", "umbrella", "passport", "eggs", "printer paper", "flowers"},
                {"bread", "tape", "the keys", "sunscreen", "tickets", "apples", "envelopes", "a card"}));
    add("Translate", "translate", "translate text",
        expand({"{}"},
               {"where is the train station", "how much does this cost", "thank you very much",
                "i would like the bill please", "do you speak english", "i am allergic to peanuts",
                "can you help me please", "what time does it open", "one ticket to the city center",
                "where is the nearest hospital", "donde esta el bano", "je voudrais un cafe", "wo ist der bahnhof",
                "quanto costa questo", "ich habe eine frage", "merci beaucoup", "una mesa para dos por favor",
                "excuse me is this seat taken", "i lost my wallet", "how do you say good morning"}));
    {
        Phrases pay;
        for (int n : {5, 8, 12, 15, 18, 20, 25, 30, 35, 40, 45, 50, 60, 75, 80, 99, 100, 120, 150, 200, 250, 300, 450,
                      500}) {
            pay.push_back(std::to_string(n));
            if (n % 3 == 0) pay.push_back(std::to_string(n) + ".50");
        }
        add("Wallet", "pay", "send a payment amount", pay);
    }
    add("Yelp", "review", "write a review",
        pair_up({"Great spot for {}. The staff were friendly and quick, the portions were generous, and the prices "
                 "were fair. Only downside was the parking, but I would still come back with {} next week.",
                 "Honestly disappointed with the {} tonight. We waited almost forty minutes, the table was sticky and "
                 "nobody checked on us. The {} saved the evening a little but not enough to return.",
                 "Solid neighborhood place. Tried the {} on a friend's recommendation and it did not disappoint. "
                 "Cozy atmosphere, clean restrooms, and the {} for dessert was excellent. Four stars overall."},
                {"tacos al pastor", "the brunch menu", "wood fired pizza", "the ramen", "their burgers",
                 "the seafood platter", "the curry", "the tasting menu"},
                {"the whole family", "coworkers", "the tiramisu", "the cheesecake", "the churros", "my parents",
                 "the gelato", "friends"}));
    add("Twitter", "share", "post a tweet",
        pair_up({"just finished {} and honestly it was worth every minute, highly recommend to {}",
                 "can't believe {} is finally happening, who else is excited about {}",
                 "hot take: {} is overrated and {} deserves way more attention"},
                {"the marathon", "the new album", "that book", "the season finale", "my first 10k", "the concert",
                 "the product launch", "the road trip"},
                {"everyone", "the weekend", "anyone bored", "all my friends", "the new update", "summer",
                 "indie games", "my followers"}));
    add("Reader", "annotate", "highlight and comment",
        pair_up({"this argument about {} contradicts {}", "key point: {} explains the shift toward {}",
                 "question for class: does {} really lead to {}"},
                {"market incentives", "the narrator's choice", "the control group", "early urbanization",
                 "memory decay", "the treaty", "feedback loops", "the protagonist"},
                {"chapter three", "the results section", "modern cities", "the second half", "their hypothesis",
                 "the conclusion", "stable systems", "the earlier claim"}));

    // Beyond the default twenty.
    add("Gmail", "search", "emails and attachments",
        expand({"from:{}", "{} receipt", "{} invoice"},
               {"amazon", "landlord", "airbnb", "hr team", "school", "bank", "united airlines", "utility company"}));
    add("Calendar", "record", "create an event",
        pair_up({"{} with {} at 3pm", "{} {} tomorrow morning", "{} and {} friday evening"},
                {"dentist appointment", "team sync", "lunch", "parent teacher meeting", "gym session",
                 "haircut", "call"},
                {"dr lee", "the design team", "sarah", "mom", "coach", "the landlord", "grandpa"}));
    add("Photos", "search", "photo library",
        expand({"photos of {}", "{} pictures", "{}"},
               {"the beach trip", "my dog", "birthday party", "snow", "receipts", "the wedding", "sunsets",
                "screenshots"}));
    add("Weather", "search", "forecasts",
        expand({"weather in {}", "{} forecast", "will it rain in {}"},
               {"paris", "seattle", "tokyo", "chicago", "london", "denver", "miami", "berlin"}));
    add("Calculator", "compute", "arithmetic",
        expand({"{}"}, {"12*7", "145/5", "3.5+8.25", "1200*0.15", "99-47", "64^0.5", "250/4", "18*12", "7.5*3",
                        "1000-385", "42+58", "360/12", "15% of 80", "2^10", "81/9", "4.2*1.1"}));

    chat("WhatsApp", "Mom",
         expand({"{}"}, {"i'll be home for dinner", "did you call grandma", "love you too", "can you pick me up at 6",
                         "what time is the family lunch", "happy birthday mom", "i landed safely",
                         "do we need anything from the store"}));
    chat("WhatsApp", "Alex",
         expand({"{}"}, {"are we still on for the game", "bro did you see that goal", "send me the pics",
                         "running 10 min late", "want to grab lunch", "that movie was wild",
                         "what's the wifi password", "see you at the gym"}));
    chat("Messages", "Sam",
         expand({"{}"}, {"meeting moved to 3pm", "can you review my draft", "thanks for covering today",
                         "the client approved it", "please send the slides", "call me when free",
                         "i'll share the notes", "lunch order for the team"}));
    return c;
}

std::string perturb(const std::string& phrase, std::mt19937_64& rng) {
    static const std::vector<std::string> tails{"please", "now", "asap", "again", "today", "tonight", "quick"};
    std::uniform_int_distribution<int> pick(0, 2);
    switch (pick(rng)) {
        case 0: {
            std::uniform_int_distribution<std::size_t> t(0, tails.size() - 1);
            return phrase + " " + tails[t(rng)];
        }
        case 1: {
            if (phrase.size() < 4) return phrase + "!";
            std::uniform_int_distribution<std::size_t> at(1, phrase.size() - 2);
            std::string s = phrase;
            s.erase(at(rng), 1);
            return s;
        }
        default:
            return to_lower_ascii(phrase) == phrase ? phrase + "?" : to_lower_ascii(phrase);
    }
}

}  // namespace

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> c = build_catalog();
    return c;
}

std::vector<std::string> synth_app_vocab() {
    std::vector<std::string> vocab;
    for (const auto& e : catalog()) {
        if (std::find(vocab.begin(), vocab.end(), e.function.app) == vocab.end()) vocab.push_back(e.function.app);
    }
    for (const char* app : {"Camera", "Clock", "Settings", "Phone", "Files"}) vocab.emplace_back(app);
    return vocab;
}

void to_json(nlohmann::json& j, const StreamSpec& s) {
    j = nlohmann::json{{"seed", s.seed},
                       {"n_users", s.n_users},
                       {"n_days", s.n_days},
                       {"functions_per_user", s.functions_per_user},
                       {"queries_per_day", s.queries_per_day},
                       {"noise", s.noise},
                       {"phrases_per_function", s.phrases_per_function}};
}

void from_json(const nlohmann::json& j, StreamSpec& s) {
    s.seed = j.value("seed", s.seed);
    s.n_users = j.value("n_users", s.n_users);
    s.n_days = j.value("n_days", s.n_days);
    s.functions_per_user = j.value("functions_per_user", s.functions_per_user);
    s.queries_per_day = j.value("queries_per_day", s.queries_per_day);
    s.noise = j.value("noise", s.noise);
    s.phrases_per_function = j.value("phrases_per_function", s.phrases_per_function);
}

ContextSnapshot synth_context(std::mt19937_64& rng, const std::string& target_app,
                              std::span<const std::string> app_vocab, Instant now) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ContextSnapshot ctx;
    ctx.now = now;
    auto launch_at = [&](const std::string& app, double lo, double hi) {
        std::uniform_real_distribution<double> dt(lo, hi);
        const auto ms = static_cast<std::int64_t>(std::floor(dt(rng) * 1000.0));
        ctx.launches.push_back({app, now - std::chrono::milliseconds(ms)});
    };

    const double u = unit(rng);
    if (u < kTargetWithin1Min) {
        launch_at(target_app, 0.0, 60.0);
    } else if (u < kTargetWithin1Min + kTargetWithin5Min) {
        launch_at(target_app, 60.001, 300.0);
    } else if (u < kTargetWithin1Min + kTargetWithin5Min + kTargetWithin10Min) {
        launch_at(target_app, 300.001, 600.0);
    }

    std::vector<std::string> others;
    for (const auto& a : app_vocab) {
        if (a != target_app) others.push_back(a);
    }
    std::uniform_int_distribution<int> n_distractors(0, 3);
    const int n = others.empty() ? 0 : n_distractors(rng);
    std::uniform_int_distribution<std::size_t> pick(0, others.empty() ? 0 : others.size() - 1);
    for (int i = 0; i < n; ++i) launch_at(others[pick(rng)], 0.0, 600.0);

    std::sort(ctx.launches.begin(), ctx.launches.end(),
              [](const AppLaunch& a, const AppLaunch& b) { return a.at < b.at; });
    return ctx;
}

Stream synth_stream(const StreamSpec& spec) {
    const auto& cat = catalog();
    if (spec.n_users < 1 || spec.n_days < 1 || spec.functions_per_user < 1 || spec.queries_per_day < 1 ||
        spec.phrases_per_function < 1) {
        throw Error(ErrorCode::kInvalidArgument, "stream counts must be at least 1");
    }
    if (static_cast<std::size_t>(spec.functions_per_user) > cat.size()) {
        throw Error(ErrorCode::kInvalidArgument, "the catalog has only " + std::to_string(cat.size()) + " functions");
    }
    if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "noise must be in [0, 1]");

    std::mt19937_64 rng(spec.seed);
    Stream stream;
    stream.spec = spec;
    stream.app_vocab = synth_app_vocab();

    struct Profile {
        std::vector<std::size_t> functions;  // catalog indices, most used first
        std::vector<double> habit_hour;
        std::vector<Phrases> pool;
        std::discrete_distribution<std::size_t> zipf;
    };
    std::vector<std::string> user_ids;
    std::vector<Profile> profiles;
    for (int u = 0; u < spec.n_users; ++u) {
        const std::string uid = "user-" + std::to_string(u + 1);
        user_ids.push_back(uid);
        std::vector<std::size_t> order(cat.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(static_cast<std::size_t>(spec.functions_per_user));

        Profile p;
        p.functions = order;
        std::uniform_real_distribution<double> hour(8.0, 22.0);
        std::vector<double> weights;
        for (std::size_t r = 0; r < order.size(); ++r) {
            weights.push_back(1.0 / static_cast<double>(r + 1));
            p.habit_hour.push_back(hour(rng));
            Phrases all = cat[order[r]].phrases;
            std::shuffle(all.begin(), all.end(), rng);
            all.resize(std::min(all.size(), spec.phrases_per_function));
            p.pool.push_back(std::move(all));
        }
        p.zipf = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());

        std::vector<std::size_t> in_catalog_order = order;
        std::sort(in_catalog_order.begin(), in_catalog_order.end());
        auto& collection = stream.collections[uid];
        for (auto i : in_catalog_order) collection.push_back(cat[i].function);
        profiles.push_back(std::move(p));
    }

    struct Pending {
        TrialInput trial;
        std::size_t user = 0;
        std::size_t seq = 0;
    };
    std::vector<Pending> all;
    std::normal_distribution<double> jitter(0.0, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t seq = 0;
    for (int day = 1; day <= spec.n_days; ++day) {
        for (std::size_t u = 0; u < profiles.size(); ++u) {
            auto& p = profiles[u];
            for (int q = 0; q < spec.queries_per_day; ++q) {
                const std::size_t r = p.zipf(rng);
                const auto& entry = cat[p.functions[r]];
                const double hour = std::clamp(p.habit_hour[r] + jitter(rng), 0.0, 23.99);
                const Instant now =
                    instant_from_ms(kBaseMs + (day - 1) * kDayMs + static_cast<std::int64_t>(hour * 3'600'000.0));

                std::string query;
                if (unit(rng) < spec.noise) {
                    Phrases unseen;
                    for (const auto& ph : entry.phrases) {
                        if (std::find(p.pool[r].begin(), p.pool[r].end(), ph) == p.pool[r].end()) unseen.push_back(ph);
                    }
                    if (!unseen.empty() && unit(rng) < 0.5) {
                        std::uniform_int_distribution<std::size_t> pick(0, unseen.size() - 1);
                        query = unseen[pick(rng)];
                    } else {
                        std::uniform_int_distribution<std::size_t> pick(0, p.pool[r].size() - 1);
                        query = perturb(p.pool[r][pick(rng)], rng);
                    }
                } else {
                    std::uniform_int_distribution<std::size_t> pick(0, p.pool[r].size() - 1);
                    query = p.pool[r][pick(rng)];
                }
                TrialInput t{user_ids[u], day, std::move(query),
                             synth_context(rng, entry.function.app, stream.app_vocab, now), entry.function.id};
                all.push_back({std::move(t), u, seq++});
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const Pending& a, const Pending& b) {
        if (a.trial.context.now != b.trial.context.now) return a.trial.context.now < b.trial.context.now;
        if (a.user != b.user) return a.user < b.user;
        return a.seq < b.seq;
    });
    for (auto& p : all) stream.trials.push_back(std::move(p.trial));
    return stream;
}

std::vector<UsageRecord> synth_pool(std::uint64_t seed, std::size_t records_per_function) {
    std::mt19937_64 rng(seed);
    const auto vocab = synth_app_vocab();
    std::vector<UsageRecord> out;
    std::uniform_int_distribution<int> user(1, 5);
    std::uniform_int_distribution<std::int64_t> offset(1, 30 * kDayMs);
    std::uint64_t id = 1;
    for (const auto& entry : catalog()) {
        std::uniform_int_distribution<std::size_t> pick(0, entry.phrases.size() - 1);
        for (std::size_t i = 0; i < records_per_function; ++i) {
            UsageRecord r;
            r.id = id++;
            r.user_id = "pool-" + std::to_string(user(rng));
            r.query = entry.phrases[pick(rng)];
            r.timestamp = instant_from_ms(kBaseMs - offset(rng));
            r.context = synth_context(rng, entry.function.app, vocab, r.timestamp);
            r.label = LabelVector::one_hot(entry.function.id);
            r.chosen = entry.function.id;
            r.chat = entry.function.is_chat();
            out.push_back(std::move(r));
        }
    }
    return out;
}

void write_stream(const std::filesystem::path& file, const Stream& stream) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + file.string());
    nlohmann::json meta{{"type", "meta"}, {"spec", stream.spec}, {"app_vocab", stream.app_vocab}};
    for (const auto& [uid, fs] : stream.collections) meta["collections"][uid] = fs;
    out << meta.dump() << '\n';
    for (const auto& t : stream.trials) {
        out << nlohmann::json{{"type", "trial"},   {"user_id", t.user_id}, {"day", t.day},
                              {"query", t.query}, {"context", t.context}, {"truth", t.truth}}
                   .dump()
            << '\n';
    }
}

Stream read_stream(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read stream " + file.string());
    Stream s;
    std::string line;
    std::size_t lineno = 0;
    bool have_meta = false;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "meta") {
                j.at("spec").get_to(s.spec);
                j.at("app_vocab").get_to(s.app_vocab);
                for (const auto& [uid, fs] : j.at("collections").items()) {
                    s.collections[uid] = fs.get<std::vector<FunctionDescriptor>>();
                }
                have_meta = true;
            } else if (type == "trial") {
                TrialInput t;
                j.at("user_id").get_to(t.user_id);
                j.at("day").get_to(t.day);
                j.at("query").get_to(t.query);
                j.at("context").get_to(t.context);
                j.at("truth").get_to(t.truth);
                s.trials.push_back(std::move(t));
            } else {
                throw Error(ErrorCode::kInvalidTrial, "unknown line type " + type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidTrial, file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_meta) throw Error(ErrorCode::kInvalidTrial, file.string() + " has no meta line");
    for (const auto& t : s.trials) {
        const auto it = s.collections.find(t.user_id);
        if (it == s.collections.end()) throw Error(ErrorCode::kInvalidTrial, "trial for unknown user " + t.user_id);
        if (std::none_of(it->second.begin(), it->second.end(),
                         [&](const FunctionDescriptor& f) { return f.id == t.truth; })) {
            throw Error(ErrorCode::kInvalidTrial, "truth " + t.truth + " is not in " + t.user_id + "'s collection");
        }
    }
    return s;
}

}  // namespace textportal::eval
