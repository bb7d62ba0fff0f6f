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

#include "textportal/common.hpp"

#include <cctype>
#include <thread>

namespace textportal {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
        case ErrorCode::kEmptyInput: return "EmptyInput";
        case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
        case ErrorCode::kZeroVector: return "ZeroVector";
        case ErrorCode::kInvalidLabel: return "InvalidLabel";
        case ErrorCode::kEmptyFunctionSet: return "EmptyFunctionSet";
        case ErrorCode::kCorruptSnapshot: return "CorruptSnapshot";
        case ErrorCode::kVersionMismatch: return "VersionMismatch";
        case ErrorCode::kNoNeighbors: return "NoNeighbors";
        case ErrorCode::kAllZeroSimilarity: return "AllZeroSimilarity";
        case ErrorCode::kNoCandidates: return "NoCandidates";
        case ErrorCode::kNoContacts: return "NoContacts";
        case ErrorCode::kUnparseable: return "Unparseable";
        case ErrorCode::kTimeout: return "Timeout";
        case ErrorCode::kTransportError: return "TransportError";
        case ErrorCode::kRateLimited: return "RateLimited";
        case ErrorCode::kUnknownFunction: return "UnknownFunction";
        case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::kInvalidRequest: return "InvalidRequest";
        case ErrorCode::kUnknownUser: return "UnknownUser";
        case ErrorCode::kUnknownRequest: return "UnknownRequest";
        case ErrorCode::kDuplicateSelection: return "DuplicateSelection";
        case ErrorCode::kDuplicateFunction: return "DuplicateFunction";
        case ErrorCode::kLastFunction: return "LastFunction";
        case ErrorCode::kEmptyTrials: return "EmptyTrials";
        case ErrorCode::kInvalidTrial: return "InvalidTrial";
        case ErrorCode::kUnknownVariant: return "UnknownVariant";
        case ErrorCode::kRetrainInProgress: return "RetrainInProgress";
    }
    return "Unknown";
}

double SteadyClock::now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

void SteadyClock::wait_ms(double ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace textportal
