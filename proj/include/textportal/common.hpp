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

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace textportal {

enum class ErrorCode {
    kInvalidArgument,
    kEmptyInput,
    kDimensionMismatch,
    kZeroVector,
    kInvalidLabel,
    kEmptyFunctionSet,
    kCorruptSnapshot,
    kVersionMismatch,
    kNoNeighbors,
    kAllZeroSimilarity,
    kNoCandidates,
    kNoContacts,
    kUnparseable,
    kTimeout,
    kTransportError,
    kRateLimited,
    kUnknownFunction,
    kEmptyTrainingSet,
    kInvalidRequest,
    kUnknownUser,
    kUnknownRequest,
    kDuplicateSelection,
    kDuplicateFunction,
    kLastFunction,
    kEmptyTrials,
    kInvalidTrial,
    kUnknownVariant,
    kRetrainInProgress,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure the library reports is an Error carrying a stable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Wall-clock instant, UTC, millisecond resolution.
using Instant = std::chrono::sys_time<std::chrono::milliseconds>;

inline Instant instant_from_ms(std::int64_t ms) { return Instant{std::chrono::milliseconds{ms}}; }
inline std::int64_t to_ms(Instant t) { return t.time_since_epoch().count(); }
inline double seconds_between(Instant earlier, Instant later) {
    return std::chrono::duration<double>(later - earlier).count();
}

/// Source of elapsed time for latency accounting.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_ms() = 0;
    /// Called by components that model a delay; real clocks actually wait.
    virtual void wait_ms(double ms) = 0;
};

class SteadyClock final : public Clock {
public:
    double now_ms() override;
    void wait_ms(double ms) override;
};

/// Deterministic clock: time only moves when someone waits on it.
class SimulatedClock final : public Clock {
public:
    double now_ms() override { return now_; }
    void wait_ms(double ms) override { now_ += ms; }

private:
    double now_ = 0.0;
};

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace textportal
