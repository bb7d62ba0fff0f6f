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

#include "textportal/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "textportal/kernels.hpp"

namespace textportal {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void check_dim(std::span<const double> x, std::size_t dim) {
    if (x.size() != dim) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "sample has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(dim));
    }
}

/// Shared descent loop. `loss_grad(params, grad*)` evaluates the objective;
/// `step(params, grad, lr)` returns params - lr * grad.
template <typename P>
std::pair<P, TrainReport> descend(P params, const std::function<double(const P&, P*)>& loss_grad,
                                  const std::function<P(const P&, const P&, double)>& step,
                                  const TrainOptions& options, std::size_t samples) {
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.samples = samples;
    P grad = params;
    double loss = loss_grad(params, &grad);
    report.initial_loss = loss;
    double lr = options.lr;
    int halvings = 0;
    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        P candidate = step(params, grad, lr);
        P candidate_grad = candidate;
        const double next = loss_grad(candidate, &candidate_grad);
        report.epochs = epoch + 1;
        if (!(next <= loss)) {
            if (halvings >= options.max_halvings) break;
            ++halvings;
            lr *= 0.5;
            continue;
        }
        const double delta = loss - next;
        params = std::move(candidate);
        grad = std::move(candidate_grad);
        loss = next;
        if (delta < options.tol) break;
    }
    report.final_loss = loss;
    report.wall_ms = elapsed_ms(start);
    return {std::move(params), report};
}

std::vector<double> dense(const std::vector<float>& f) { return {f.begin(), f.end()}; }

}  // namespace

LabelVector fuse_label(const std::string& selected, const std::optional<LlmRanking>& llm_top5,
                       std::span<const std::string> known) {
    if (std::find(known.begin(), known.end(), selected) == known.end()) {
        throw Error(ErrorCode::kUnknownFunction, "selected function " + selected + " is not in the collection");
    }
    if (!llm_top5) return LabelVector::one_hot(selected);

    LabelVector label;
    std::size_t slot = 1;
    for (const auto& id : llm_top5->ranked) {
        if (slot >= kFusionWeights.size()) break;
        if (id == selected || label.weights().contains(id)) continue;
        if (std::find(known.begin(), known.end(), id) == known.end()) continue;
        label.set(id, kFusionWeights[slot++]);
    }
    if (slot == kFusionWeights.size()) {
        label.set(selected, kFusionWeights[0]);
    } else {
        label.set(selected, 0.0);
        label.set(selected, 1.0 - label.total());
    }
    return label;
}

HeadParams HeadParams::zeros(std::vector<std::string> functions, std::size_t dim) {
    HeadParams p;
    p.dim = dim;
    p.weights.assign(functions.size(), std::vector<double>(dim, 0.0));
    p.bias.assign(functions.size(), 0.0);
    p.functions = std::move(functions);
    return p;
}

std::optional<std::size_t> HeadParams::index_of(const std::string& id) const {
    auto it = std::find(functions.begin(), functions.end(), id);
    if (it == functions.end()) return std::nullopt;
    return static_cast<std::size_t>(it - functions.begin());
}

void HeadParams::add_function(const std::string& id) {
    if (index_of(id)) throw Error(ErrorCode::kDuplicateFunction, "head already has " + id);
    functions.push_back(id);
    weights.emplace_back(dim, 0.0);
    bias.push_back(0.0);
}

void HeadParams::remove_function(const std::string& id) {
    const auto i = index_of(id);
    if (!i) throw Error(ErrorCode::kUnknownFunction, "head has no function " + id);
    functions.erase(functions.begin() + static_cast<std::ptrdiff_t>(*i));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(*i));
    bias.erase(bias.begin() + static_cast<std::ptrdiff_t>(*i));
}

std::vector<double> HeadParams::logits(std::span<const double> x) const {
    check_dim(x, dim);
    std::vector<double> z(functions.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = kernels::dot(weights[i], x) + bias[i];
    return z;
}

namespace {

std::vector<double> softmax(std::vector<double> z) {
    if (z.empty()) return z;
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        s += v;
    }
    for (auto& v : z) v /= s;
    return z;
}

}  // namespace

std::map<std::string, double> HeadParams::probabilities(std::span<const double> x) const {
    const auto p = softmax(logits(x));
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < p.size(); ++i) out[functions[i]] = p[i];
    return out;
}

void to_json(nlohmann::json& j, const HeadParams& p) {
    j = nlohmann::json{{"functions", p.functions}, {"weights", p.weights}, {"bias", p.bias}, {"dim", p.dim}};
}

void from_json(const nlohmann::json& j, HeadParams& p) {
    j.at("functions").get_to(p.functions);
    j.at("weights").get_to(p.weights);
    j.at("bias").get_to(p.bias);
    j.at("dim").get_to(p.dim);
    if (p.weights.size() != p.functions.size() || p.bias.size() != p.functions.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "head rows do not match its function list");
    }
    for (const auto& row : p.weights) {
        if (row.size() != p.dim) throw Error(ErrorCode::kDimensionMismatch, "head row has the wrong width");
    }
}

void to_json(nlohmann::json& j, const TrainOptions& o) {
    j = nlohmann::json{{"lr", o.lr}, {"max_epochs", o.max_epochs}, {"tol", o.tol}, {"max_halvings", o.max_halvings}};
}

void from_json(const nlohmann::json& j, TrainOptions& o) {
    o.lr = j.value("lr", o.lr);
    o.max_epochs = j.value("max_epochs", o.max_epochs);
    o.tol = j.value("tol", o.tol);
    o.max_halvings = j.value("max_halvings", o.max_halvings);
}

void to_json(nlohmann::json& j, const TrainReport& r) {
    j = nlohmann::json{{"epochs", r.epochs},
                       {"initial_loss", r.initial_loss},
                       {"final_loss", r.final_loss},
                       {"wall_ms", r.wall_ms},
                       {"samples", r.samples}};
}

std::vector<HeadSample> head_samples(std::span<const std::shared_ptr<const UsageRecord>> records,
                                     const HeadParams& params) {
    std::vector<HeadSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        HeadSample s{dense(r->feature), std::vector<double>(params.functions.size(), 0.0)};
        check_dim(s.x, params.dim);
        double mass = 0.0;
        for (const auto& [id, w] : r->label.weights()) {
            if (auto i = params.index_of(id)) {
                s.y[*i] = w;
                mass += w;
            }
        }
        if (mass > 0.0) out.push_back(std::move(s));
    }
    return out;
}

double head_loss(const HeadParams& params, std::span<const HeadSample> samples, HeadParams* grad) {
    const std::size_t n_fn = params.functions.size();
    if (grad) *grad = HeadParams::zeros(params.functions, params.dim);
    if (samples.empty() || n_fn == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    double loss = 0.0;
    std::vector<double> z(n_fn);
    for (const auto& s : samples) {
        check_dim(s.x, params.dim);
        for (std::size_t i = 0; i < n_fn; ++i) z[i] = kernels::dot(params.weights[i], s.x) + params.bias[i];
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - m);
        const double log_sum = m + std::log(sum);
        double y_mass = 0.0;
        for (std::size_t i = 0; i < n_fn; ++i) {
            if (s.y[i] != 0.0) loss -= s.y[i] * (z[i] - log_sum);
            y_mass += s.y[i];
        }
        if (!grad) continue;
        for (std::size_t i = 0; i < n_fn; ++i) {
            const double dz = (std::exp(z[i] - log_sum) * y_mass - s.y[i]) * inv_n;
            if (dz == 0.0) continue;
            kernels::axpy(dz, s.x, grad->weights[i]);
            grad->bias[i] += dz;
        }
    }
    return loss * inv_n;
}

std::pair<HeadParams, TrainReport> train_head_samples(std::span<const HeadSample> samples, const HeadParams& params,
                                                      const TrainOptions& options) {
    if (samples.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "head training needs at least one record");
    for (const auto& s : samples) {
        check_dim(s.x, params.dim);
        if (s.y.size() != params.functions.size()) {
            throw Error(ErrorCode::kDimensionMismatch, "label width does not match the head");
        }
    }
    auto loss_grad = [&](const HeadParams& p, HeadParams* g) { return head_loss(p, samples, g); };
    auto step = [](const HeadParams& p, const HeadParams& g, double lr) {
        HeadParams next = p;
        for (std::size_t i = 0; i < next.weights.size(); ++i) {
            kernels::axpy(-lr, g.weights[i], next.weights[i]);
            next.bias[i] -= lr * g.bias[i];
        }
        return next;
    };
    return descend<HeadParams>(params, loss_grad, step, options, samples.size());
}

std::pair<HeadParams, TrainReport> train_head(std::span<const std::shared_ptr<const UsageRecord>> records,
                                              const HeadParams& params, const TrainOptions& options) {
    if (records.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "head training needs at least one record");
    const auto samples = head_samples(records, params);
    return train_head_samples(samples, params, options);
}

double gate_loss(const ChatGateParams& params, std::span<const GateSample> samples, ChatGateParams* grad) {
    const std::size_t dim = params.weights.size();
    if (grad) {
        grad->weights.assign(dim, 0.0);
        grad->bias = 0.0;
    }
    if (samples.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    double loss = 0.0;
    for (const auto& s : samples) {
        check_dim(s.x, dim);
        const double z = kernels::dot(params.weights, s.x) + params.bias;
        // log(1 + e^z) computed without overflow
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += softplus - s.y * z;
        if (grad) {
            const double dz = (sigmoid(z) - s.y) * inv_n;
            kernels::axpy(dz, s.x, grad->weights);
            grad->bias += dz;
        }
    }
    return loss * inv_n;
}

GateTrainResult train_chat_gate_samples(std::span<const GateSample> samples, std::size_t dim,
                                        const TrainOptions& options) {
    if (samples.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "gate training needs at least one record");
    std::size_t positives = 0;
    for (const auto& s : samples) {
        check_dim(s.x, dim);
        if (s.y > 0.5) ++positives;
    }
    GateTrainResult out;
    out.params.weights.assign(dim, 0.0);
    if (positives == 0 || positives == samples.size()) {
        const double prior = (static_cast<double>(positives) + 0.5) / (static_cast<double>(samples.size()) + 1.0);
        out.params.bias = std::log(prior / (1.0 - prior));
        out.single_class = true;
        out.report.samples = samples.size();
        out.report.initial_loss = out.report.final_loss = gate_loss(out.params, samples);
        return out;
    }
    auto loss_grad = [&](const ChatGateParams& p, ChatGateParams* g) { return gate_loss(p, samples, g); };
    auto step = [](const ChatGateParams& p, const ChatGateParams& g, double lr) {
        ChatGateParams next = p;
        kernels::axpy(-lr, g.weights, next.weights);
        next.bias -= lr * g.bias;
        return next;
    };
    auto [params, report] = descend<ChatGateParams>(out.params, loss_grad, step, options, samples.size());
    out.params = std::move(params);
    out.report = report;
    return out;
}

GateTrainResult train_chat_gate(std::span<const std::shared_ptr<const UsageRecord>> records, std::size_t dim,
                                const TrainOptions& options) {
    std::vector<GateSample> samples;
    samples.reserve(records.size());
    for (const auto& r : records) samples.push_back({dense(r->feature), r->chat ? 1.0 : 0.0});
    return train_chat_gate_samples(samples, dim, options);
}

}  // namespace textportal
