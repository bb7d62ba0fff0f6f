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

// Shared generators and independent reference implementations for tests.
// The references are deliberately naive: plain loops, no kernels, no
// shared helpers with the library.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "textportal/evalkit.hpp"
#include "textportal/integrator.hpp"
#include "textportal/memory.hpp"
#include "textportal/trainer.hpp"

namespace tp_test {

using namespace textportal;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    bool coin(double p = 0.5) { return uniform() < p; }

    std::vector<double> vec(std::size_t n, double lo = -1.0, double hi = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }

    std::vector<float> fvec(std::size_t n, double lo = -1.0, double hi = 1.0) {
        std::vector<float> v(n);
        for (auto& x : v) x = static_cast<float>(uniform(lo, hi));
        return v;
    }

    /// Random distribution over a subset of `ids` (1..max_nonzero entries).
    LabelVector label(const std::vector<std::string>& ids, std::size_t max_nonzero = 5) {
        std::vector<std::string> pool = ids;
        std::shuffle(pool.begin(), pool.end(), rng_);
        const std::size_t n = 1 + index(std::min(max_nonzero, pool.size()));
        std::vector<double> w(n);
        double total = 0.0;
        for (auto& x : w) total += (x = uniform(0.05, 1.0));
        std::map<std::string, double> m;
        for (std::size_t i = 0; i < n; ++i) m[pool[i]] = w[i] / total;
        return LabelVector(std::move(m));
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline std::vector<std::string> fn_ids(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("App" + std::to_string(i) + "-search");
    return out;
}

inline std::shared_ptr<const UsageRecord> record_with(LabelVector label, std::vector<float> feature = {},
                                                      std::string user = "u", std::uint64_t id = 0) {
    auto r = std::make_shared<UsageRecord>();
    r->id = id;
    r->user_id = std::move(user);
    r->query = "q";
    r->feature = std::move(feature);
    r->chosen = label.argmax();
    r->label = std::move(label);
    r->timestamp = instant_from_ms(0);
    return r;
}

inline UsageRecord live_record(const std::string& user, const std::string& fn, std::vector<float> feature,
                               std::int64_t ms, bool chat = false) {
    UsageRecord r;
    r.user_id = user;
    r.query = fn + " query";
    r.feature = std::move(feature);
    r.label = LabelVector::one_hot(fn);
    r.chosen = fn;
    r.timestamp = instant_from_ms(ms);
    r.context.now = r.timestamp;
    r.chat = chat;
    return r;
}

// ---------------------------------------------------------------------------
// Reference implementations
// ---------------------------------------------------------------------------

/// Weighted label average, written out key by key.
inline std::map<std::string, double> ref_integrate(const std::vector<Neighbor>& neighbors) {
    std::set<std::string> keys;
    for (const auto& n : neighbors) {
        for (const auto& [k, _] : n.record->label.weights()) keys.insert(k);
    }
    std::map<std::string, double> out;
    for (const auto& key : keys) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& n : neighbors) {
            double s = n.similarity;
            if (s < 0.0) s = 0.0;
            if (s > 1.0) s = 1.0;
            const auto& w = n.record->label.weights();
            const auto it = w.find(key);
            num += (it == w.end() ? 0.0 : it->second) * s;
            den += s;
        }
        out[key] = num / den;
    }
    return out;
}

inline double ref_cosine(const std::vector<double>& a, const std::vector<float>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * static_cast<double>(b[i]);
        na += a[i] * a[i];
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Hit@1, Hit@5 and MRR from ranks alone.
inline std::array<double, 3> ref_metrics(const std::vector<std::size_t>& ranks) {
    double h1 = 0.0, h5 = 0.0, rr = 0.0;
    for (auto r : ranks) {
        h1 += r == 1 ? 1.0 : 0.0;
        h5 += r <= 5 ? 1.0 : 0.0;
        rr += 1.0 / static_cast<double>(r);
    }
    const double n = static_cast<double>(ranks.size());
    return {h1 / n, h5 / n, rr / n};
}

/// Trials whose truth sits at the given 1-based ranks among `n_candidates`.
inline std::vector<eval::Trial> trials_with_ranks(const std::vector<std::size_t>& ranks, std::size_t n_candidates,
                                                  int day = 1) {
    std::vector<eval::Trial> out;
    const auto ids = fn_ids(n_candidates);
    for (auto r : ranks) {
        eval::Trial t;
        t.input.day = day;
        t.input.user_id = "u";
        t.input.query = "q";
        t.input.truth = ids[r - 1];
        t.ranking = ids;
        t.provenance = "local";
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline double rel_err(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / scale;
}

/// Largest relative error between the analytic head gradient and central
/// differences over every parameter.
inline double head_grad_error(const HeadParams& p, const std::vector<HeadSample>& samples, double eps = 1e-5) {
    HeadParams grad;
    head_loss(p, samples, &grad);
    double worst = 0.0;
    HeadParams q = p;
    for (std::size_t r = 0; r < p.functions.size(); ++r) {
        for (std::size_t c = 0; c <= p.dim; ++c) {
            double& slot = c < p.dim ? q.weights[r][c] : q.bias[r];
            const double keep = slot;
            slot = keep + eps;
            const double up = head_loss(q, samples);
            slot = keep - eps;
            const double down = head_loss(q, samples);
            slot = keep;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = c < p.dim ? grad.weights[r][c] : grad.bias[r];
            // Coordinates whose true derivative is ~0 are compared absolutely.
            const double err = std::max(std::abs(analytic), std::abs(numeric)) < 1e-7 ? std::abs(analytic - numeric)
                                                                                    : rel_err(analytic, numeric);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline double gate_grad_error(const ChatGateParams& p, const std::vector<GateSample>& samples, double eps = 1e-5) {
    ChatGateParams grad;
    gate_loss(p, samples, &grad);
    double worst = 0.0;
    ChatGateParams q = p;
    const std::size_t dim = p.weights.size();
    for (std::size_t c = 0; c <= dim; ++c) {
        double& slot = c < dim ? q.weights[c] : q.bias;
        const double keep = slot;
        slot = keep + eps;
        const double up = gate_loss(q, samples);
        slot = keep - eps;
        const double down = gate_loss(q, samples);
        slot = keep;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = c < dim ? grad.weights[c] : grad.bias;
        const double err = std::max(std::abs(analytic), std::abs(numeric)) < 1e-7 ? std::abs(analytic - numeric)
                                                                                : rel_err(analytic, numeric);
        worst = std::max(worst, err);
    }
    return worst;
}

/// Random head instance: N functions, dimension d, soft targets.
inline std::pair<HeadParams, std::vector<HeadSample>> random_head_instance(Gen& g, std::size_t n_fn, std::size_t dim,
                                                                           std::size_t n_samples) {
    auto p = HeadParams::zeros(fn_ids(n_fn), dim);
    for (auto& row : p.weights) row = g.vec(dim, -0.5, 0.5);
    p.bias = g.vec(n_fn, -0.5, 0.5);
    std::vector<HeadSample> samples;
    for (std::size_t i = 0; i < n_samples; ++i) {
        HeadSample s;
        s.x = g.vec(dim);
        s.y.assign(n_fn, 0.0);
        double total = 0.0;
        for (auto& y : s.y) total += (y = g.coin(0.6) ? g.uniform() : 0.0);
        if (total == 0.0) {
            s.y[g.index(n_fn)] = 1.0;
        } else {
            for (auto& y : s.y) y /= total;
        }
        samples.push_back(std::move(s));
    }
    return {p, samples};
}

inline std::pair<ChatGateParams, std::vector<GateSample>> random_gate_instance(Gen& g, std::size_t dim,
                                                                               std::size_t n_samples) {
    ChatGateParams p{g.vec(dim, -0.5, 0.5), g.uniform(-0.5, 0.5)};
    std::vector<GateSample> samples;
    for (std::size_t i = 0; i < n_samples; ++i) samples.push_back({g.vec(dim), g.coin() ? 1.0 : 0.0});
    return {p, samples};
}

// ---------------------------------------------------------------------------
// Filesystem
// ---------------------------------------------------------------------------

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("textportal-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace tp_test
