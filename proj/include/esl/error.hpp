#pragma once

#include <stdexcept>
#include <string>

namespace esl {

enum class ErrorCode {
    AntipodalPoint,
    NonFinite,
    NonPositiveGamma,
    SamplingTooSmall,
    DegenerateLosses,
    SupportTooSpread,
    NotPositiveDefinite,
    MissingAsset,
    OutOfDomain,
    ZeroVolume,
    NonPositiveSigma,
    DegenerateAlignment,
    EmptyRun,
    BudgetExceeded,
    InvalidArgument,
    Io,
};

const char* to_string(ErrorCode c);

class EslError : public std::runtime_error {
public:
    EslError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace esl
