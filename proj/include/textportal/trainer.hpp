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

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textportal/encoder.hpp"
#include "textportal/llm.hpp"
#include "textportal/types.hpp"

namespace textportal {

/// Weight given to the selected function, then to the LLM's next four picks.
inline constexpr std::array<double, 5> kFusionWeights{0.8, 0.07, 0.06, 0.04, 0.03};

/// Training label for a selection. With an LLM ranking the selected function
/// gets 0.8 and the ranking (selected removed) fills 0.07, 0.06, 0.04, 0.03
/// in order; slots left empty fold back into the selected weight so the
/// total is exactly 1. Without a ranking the label is one-hot.
/// Throws UnknownFunction when `selected` is not in `known`.
LabelVector fuse_label(const std::string& selected, const std::optional<LlmRanking>& llm_top5,
                       std::span<const std::string> known);

/// Linear head: logits = W x + b, one row per function.
struct HeadParams {
    std::vector<std::string> functions;
    std::vector<std::vector<double>> weights;
    std::vector<double> bias;
    std::size_t dim = 0;

    static HeadParams zeros(std::vector<std::string> functions, std::size_t dim);

    /// Appends a zero row. Throws DuplicateFunction.
    void add_function(const std::string& id);
    /// Throws UnknownFunction.
    void remove_function(const std::string& id);
    std::optional<std::size_t> index_of(const std::string& id) const;

    std::vector<double> logits(std::span<const double> x) const;
    /// Softmax over the head's functions.
    std::map<std::string, double> probabilities(std::span<const double> x) const;

    bool operator==(const HeadParams&) const = default;
};

void to_json(nlohmann::json& j, const HeadParams& p);
void from_json(const nlohmann::json& j, HeadParams& p);

struct TrainOptions {
    double lr = 0.1;
    int max_epochs = 200;
    double tol = 1e-6;
    int max_halvings = 10;
};

void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

struct TrainReport {
    int epochs = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double wall_ms = 0.0;
    std::size_t samples = 0;
};

void to_json(nlohmann::json& j, const TrainReport& r);

/// Dense training row: feature and target distribution over head functions.
struct HeadSample {
    std::vector<double> x;
    std::vector<double> y;
};

/// Rows for the head's current functions; label mass on functions outside
/// the head is dropped and records left with no mass are skipped.
std::vector<HeadSample> head_samples(std::span<const std::shared_ptr<const UsageRecord>> records,
                                     const HeadParams& params);

/// Mean softmax cross-entropy and, when `grad` is given, its gradient
/// (same shape as `params`).
double head_loss(const HeadParams& params, std::span<const HeadSample> samples, HeadParams* grad = nullptr);

/// Full-batch gradient descent from zero weights. Throws EmptyTrainingSet,
/// DimensionMismatch.
std::pair<HeadParams, TrainReport> train_head(std::span<const std::shared_ptr<const UsageRecord>> records,
                                              const HeadParams& params, const TrainOptions& options = {});
std::pair<HeadParams, TrainReport> train_head_samples(std::span<const HeadSample> samples, const HeadParams& params,
                                                      const TrainOptions& options = {});

struct GateSample {
    std::vector<double> x;
    double y = 0.0;  // 1 chat, 0 not chat
};

/// Mean binary cross-entropy and, when `grad` is given, its gradient.
double gate_loss(const ChatGateParams& params, std::span<const GateSample> samples, ChatGateParams* grad = nullptr);

struct GateTrainResult {
    ChatGateParams params;
    TrainReport report;
    /// Only one class present: weights zero, bias = logit of the smoothed
    /// class prior.
    bool single_class = false;
};

/// Throws EmptyTrainingSet, DimensionMismatch.
GateTrainResult train_chat_gate(std::span<const std::shared_ptr<const UsageRecord>> records, std::size_t dim,
                                const TrainOptions& options = {});
GateTrainResult train_chat_gate_samples(std::span<const GateSample> samples, std::size_t dim,
                                        const TrainOptions& options = {});

}  // namespace textportal
