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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "textportal/encoder.hpp"
#include "textportal/types.hpp"

namespace textportal {

inline constexpr double kDefaultUserWeight = 1.05;
inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr int kDefaultBootstrapAlpha = 10;

/// Cosine similarity scaled by the same-user weight and clipped above at 1.
/// Negative cosines pass through. Throws ZeroVector / DimensionMismatch.
double similarity(std::span<const double> query, std::span<const float> candidate, bool same_user,
                  double user_weight = kDefaultUserWeight);

struct Neighbor {
    std::shared_ptr<const UsageRecord> record;
    double similarity = 0.0;
};

struct RetrievalOptions {
    std::size_t k = kDefaultTopK;
    /// true: chat records only; false: non-chat only; nullopt: everything.
    std::optional<bool> chat_filter;
    double user_weight = kDefaultUserWeight;
};

/// A user's interaction history. One writer, many readers: append() takes an
/// exclusive lock, queries take a shared one, and records are immutable once
/// appended.
class PersonalDatabase {
public:
    PersonalDatabase(std::string user_id, std::size_t feature_dim);

    PersonalDatabase(const PersonalDatabase&) = delete;
    PersonalDatabase& operator=(const PersonalDatabase&) = delete;

    const std::string& user_id() const { return user_id_; }
    std::size_t feature_dim() const { return feature_dim_; }

    /// Validates the record, assigns the next id and makes it visible to
    /// top_k immediately. Throws InvalidLabel, DimensionMismatch, or
    /// InvalidArgument (live timestamps must not go backwards).
    std::uint64_t append(UsageRecord record);

    /// Best `k` records for `query` by similarity; ties go to the newer
    /// record, then the smaller id. `query_user` decides the same-user boost.
    std::vector<Neighbor> top_k(const std::string& query_user, std::span<const double> query,
                                const RetrievalOptions& options = {}) const;

    /// Consistent point-in-time copy of the record list.
    std::vector<std::shared_ptr<const UsageRecord>> snapshot() const;
    std::size_t size() const;

private:
    std::string user_id_;
    std::size_t feature_dim_;
    mutable std::shared_mutex mutex_;
    std::vector<std::shared_ptr<const UsageRecord>> records_;
    std::uint64_t next_id_ = 1;
    std::optional<Instant> last_live_;
};

/// Largest-remainder apportionment of `total` proportionally to `weights`.
/// Ties in the remainder go to the larger weight, then the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

/// Produces `n` synthetic records for a function (see llm bridge).
using SyntheticSource = std::function<std::vector<UsageRecord>(const FunctionDescriptor&, std::size_t n)>;
/// Computes a stored feature for a query and its context.
using Featurizer = std::function<FeatureVector(const std::string& query, const ContextSnapshot& context)>;

struct BootstrapPlan {
    std::string function_id;
    std::size_t quota = 0;
    std::size_t from_pool = 0;
    std::size_t synthetic = 0;
};

/// Initial records for a new user.
///
/// alpha * |functions| records in total. Each action's share is proportional
/// to how many of the user's functions have that action; inside an action
/// a function's share is proportional to (its pool frequency + 1). Pool
/// records are taken newest first; any shortfall is synthesised. Results are
/// tagged bootstrap or synthetic and keep their source user id, so they
/// never receive the same-user boost.
std::vector<UsageRecord> bootstrap(std::span<const FunctionDescriptor> user_functions,
                                   std::span<const UsageRecord> global_pool, const SyntheticSource& synthesize,
                                   const Featurizer& featurize, int alpha = kDefaultBootstrapAlpha,
                                   std::vector<BootstrapPlan>* plan = nullptr);

/// Snapshot format version written by save_database().
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Writes records.jsonl, vectors.bin and manifest.json (with CRC-32 per
/// segment) into `dir`, plus any `extra` JSON segments (name -> document).
void save_database(const PersonalDatabase& db, const std::filesystem::path& dir,
                   const std::map<std::string, nlohmann::json>& extra = {});

struct LoadedDatabase {
    std::unique_ptr<PersonalDatabase> db;
    std::map<std::string, nlohmann::json> extra;
};

/// Throws CorruptSnapshot on any checksum, size or parse problem and
/// VersionMismatch on an unknown format version.
LoadedDatabase load_database(const std::filesystem::path& dir);

/// Reads a JSONL record pool (records.jsonl layout, no vectors).
std::vector<UsageRecord> load_record_pool(const std::filesystem::path& file);
void write_record_pool(const std::filesystem::path& file, std::span<const UsageRecord> records);

}  // namespace textportal
