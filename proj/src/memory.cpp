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

#include "textportal/memory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "textportal/kernels.hpp"

namespace textportal {

namespace {

double scaled_cosine(const kernels::CosineParts& p, double alpha) {
    const double cos = p.dot / std::sqrt(p.norm_a * p.norm_b);
    return std::min(cos * alpha, 1.0);
}

bool ranks_before(const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.record->timestamp != b.record->timestamp) return a.record->timestamp > b.record->timestamp;
    return a.record->id < b.record->id;
}

}  // namespace

double similarity(std::span<const double> query, std::span<const float> candidate, bool same_user,
                  double user_weight) {
    if (query.size() != candidate.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "similarity between vectors of size " +
                                                       std::to_string(query.size()) + " and " +
                                                       std::to_string(candidate.size()));
    }
    const auto parts = kernels::cosine_parts(query, candidate);
    if (parts.norm_a == 0.0 || parts.norm_b == 0.0) {
        throw Error(ErrorCode::kZeroVector, "similarity with an all-zero vector");
    }
    return scaled_cosine(parts, same_user ? user_weight : 1.0);
}

PersonalDatabase::PersonalDatabase(std::string user_id, std::size_t feature_dim)
    : user_id_(std::move(user_id)), feature_dim_(feature_dim) {}

std::uint64_t PersonalDatabase::append(UsageRecord record) {
    record.label.validate();
    if (record.label.nonzero_count() > 5) {
        throw Error(ErrorCode::kInvalidLabel, "label has more than five nonzero entries");
    }
    if (record.label.at(record.chosen) < record.label.weights().at(record.label.argmax())) {
        throw Error(ErrorCode::kInvalidLabel, "chosen function " + record.chosen + " is not the label maximum");
    }
    if (record.feature.size() != feature_dim_) {
        throw Error(ErrorCode::kDimensionMismatch, "record feature has size " +
                                                       std::to_string(record.feature.size()) + ", store expects " +
                                                       std::to_string(feature_dim_));
    }

    std::unique_lock lock(mutex_);
    if (record.origin == Origin::kLive) {
        if (last_live_ && record.timestamp < *last_live_) {
            throw Error(ErrorCode::kInvalidArgument, "live record timestamps must be non-decreasing");
        }
        last_live_ = record.timestamp;
    }
    if (record.id == 0 || record.id < next_id_) record.id = next_id_;
    next_id_ = record.id + 1;
    const auto id = record.id;
    records_.push_back(std::make_shared<const UsageRecord>(std::move(record)));
    return id;
}

std::vector<Neighbor> PersonalDatabase::top_k(const std::string& query_user, std::span<const double> query,
                                              const RetrievalOptions& options) const {
    if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
    if (query.size() != feature_dim_) {
        throw Error(ErrorCode::kDimensionMismatch, "query has size " + std::to_string(query.size()) +
                                                       ", store expects " + std::to_string(feature_dim_));
    }

    std::vector<Neighbor> scored;
    {
        std::shared_lock lock(mutex_);
        scored.reserve(records_.size());
        for (const auto& rec : records_) {
            if (options.chat_filter && rec->chat != *options.chat_filter) continue;
            const auto parts = kernels::cosine_parts(query, rec->feature);
            if (parts.norm_a == 0.0) throw Error(ErrorCode::kZeroVector, "query feature is all zero");
            if (parts.norm_b == 0.0) continue;
            const double alpha = rec->user_id == query_user ? options.user_weight : 1.0;
            scored.push_back({rec, scaled_cosine(parts, alpha)});
        }
    }

    const std::size_t k = std::min(options.k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), ranks_before);
    scored.resize(k);
    return scored;
}

std::vector<std::shared_ptr<const UsageRecord>> PersonalDatabase::snapshot() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::size_t PersonalDatabase::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
    std::vector<std::size_t> out(weights.size(), 0);
    if (weights.empty()) return out;
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (sum <= 0.0) throw Error(ErrorCode::kInvalidArgument, "apportion needs a positive weight sum");

    std::vector<double> remainder(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = exact - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % order.size()]];
    return out;
}

std::vector<UsageRecord> bootstrap(std::span<const FunctionDescriptor> user_functions,
                                   std::span<const UsageRecord> global_pool, const SyntheticSource& synthesize,
                                   const Featurizer& featurize, int alpha, std::vector<BootstrapPlan>* plan) {
    if (user_functions.empty()) throw Error(ErrorCode::kEmptyFunctionSet, "bootstrap needs at least one function");
    if (alpha < 1) throw Error(ErrorCode::kInvalidArgument, "alpha must be at least 1");

    // Pool records per function, newest first.
    std::map<std::string, std::vector<const UsageRecord*>> by_function;
    for (const auto& r : global_pool) by_function[r.chosen].push_back(&r);
    for (auto& [_, recs] : by_function) {
        std::sort(recs.begin(), recs.end(), [](const UsageRecord* a, const UsageRecord* b) {
            if (a->timestamp != b->timestamp) return a->timestamp > b->timestamp;
            return a->id < b->id;
        });
    }

    // Actions in order of first appearance.
    std::vector<std::string> actions;
    std::map<std::string, std::vector<const FunctionDescriptor*>> members;
    for (const auto& f : user_functions) {
        if (!members.contains(f.action)) actions.push_back(f.action);
        members[f.action].push_back(&f);
    }

    std::vector<UsageRecord> out;
    for (const auto& action : actions) {
        const auto& fs = members[action];
        // alpha * count is the action's exact share of alpha * |functions|.
        const std::size_t action_quota = static_cast<std::size_t>(alpha) * fs.size();
        std::vector<double> weights;
        for (const auto* f : fs) {
            auto it = by_function.find(f->id);
            weights.push_back(static_cast<double>(it == by_function.end() ? 0 : it->second.size()) + 1.0);
        }
        const auto quotas = apportion(action_quota, weights);

        for (std::size_t i = 0; i < fs.size(); ++i) {
            const FunctionDescriptor& f = *fs[i];
            BootstrapPlan entry{f.id, quotas[i], 0, 0};
            auto it = by_function.find(f.id);
            const std::size_t available = it == by_function.end() ? 0 : it->second.size();
            entry.from_pool = std::min(available, quotas[i]);
            for (std::size_t n = 0; n < entry.from_pool; ++n) {
                UsageRecord r = *it->second[n];
                r.id = 0;
                r.origin = Origin::kBootstrap;
                r.label = LabelVector::one_hot(f.id);
                r.chat = f.is_chat();
                r.satisfaction.reset();
                r.feature.clear();
                out.push_back(std::move(r));
            }
            entry.synthetic = quotas[i] - entry.from_pool;
            if (entry.synthetic > 0) {
                auto synth = synthesize(f, entry.synthetic);
                if (synth.size() != entry.synthetic) {
                    throw Error(ErrorCode::kInvalidArgument, "synthetic source returned " +
                                                                 std::to_string(synth.size()) + " records for " +
                                                                 std::to_string(entry.synthetic) + " requested");
                }
                for (auto& r : synth) {
                    r.id = 0;
                    r.origin = Origin::kSynthetic;
                    r.chat = f.is_chat();
                    out.push_back(std::move(r));
                }
            }
            if (plan) plan->push_back(entry);
        }
    }

    if (featurize) {
        for (auto& r : out) {
            if (!r.feature.empty()) continue;
            const auto v = featurize(r.query, r.context);
            r.feature.assign(v.begin(), v.end());
        }
    }
    return out;
}

}  // namespace textportal
