#include "esl/error.hpp"

namespace esl {

const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::AntipodalPoint: return "AntipodalPoint";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NonPositiveGamma: return "NonPositiveGamma";
        case ErrorCode::SamplingTooSmall: return "SamplingTooSmall";
        case ErrorCode::DegenerateLosses: return "DegenerateLosses";
        case ErrorCode::SupportTooSpread: return "SupportTooSpread";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::MissingAsset: return "MissingAsset";
        case ErrorCode::OutOfDomain: return "OutOfDomain";
        case ErrorCode::ZeroVolume: return "ZeroVolume";
        case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
        case ErrorCode::DegenerateAlignment: return "DegenerateAlignment";
        case ErrorCode::EmptyRun: return "EmptyRun";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace esl
