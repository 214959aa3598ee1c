#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppl {

enum class ErrorCode {
    MalformedCsv,
    UnknownCountry,
    EmptyWindow,
    TooFewPoints,
    NonFiniteState,
    NonFiniteDensity,
    DivergentTrajectory,
    TooFewDraws,
    DegenerateSeries,
    NotConverged,
    ZeroSlope,
    ZeroBaseline,
    InvalidSchedule,
    HorizonMismatch,
    SpaceTooLarge,
    InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::UnknownCountry: return "UnknownCountry";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonFiniteDensity: return "NonFiniteDensity";
    case ErrorCode::DivergentTrajectory: return "DivergentTrajectory";
    case ErrorCode::TooFewDraws: return "TooFewDraws";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ZeroSlope: return "ZeroSlope";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::HorizonMismatch: return "HorizonMismatch";
    case ErrorCode::SpaceTooLarge: return "SpaceTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ppl
