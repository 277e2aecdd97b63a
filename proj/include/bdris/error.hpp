// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdris {

enum class ErrorCode {
    InvalidConfig,
    DegenerateReference,
    ScheduleRankFailure,
    InfeasibleAllocation,
    InsufficientPhase2Length,
    DimensionMismatch,
    PhasePairingViolation,
    RankDeficientPsi,
    RankDeficientTheta1,
    RankDeficientTheta2,
    SingularRegularizedMatrix,
    ZeroChannel,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::ScheduleRankFailure: return "ScheduleRankFailure";
    case ErrorCode::InfeasibleAllocation: return "InfeasibleAllocation";
    case ErrorCode::InsufficientPhase2Length: return "InsufficientPhase2Length";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PhasePairingViolation: return "PhasePairingViolation";
    case ErrorCode::RankDeficientPsi: return "RankDeficientPsi";
    case ErrorCode::RankDeficientTheta1: return "RankDeficientTheta1";
    case ErrorCode::RankDeficientTheta2: return "RankDeficientTheta2";
    case ErrorCode::SingularRegularizedMatrix: return "SingularRegularizedMatrix";
    case ErrorCode::ZeroChannel: return "ZeroChannel";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bdris
