#include "calagent/errors.hpp"

namespace calagent {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownRoute: return "UnknownRoute";
    case ErrorCode::MultipleEntryViolation: return "MultipleEntryViolation";
    case ErrorCode::NonStarTopology: return "NonStarTopology";
    case ErrorCode::SentinelStep: return "SentinelStep";
    case ErrorCode::HandlerFailure: return "HandlerFailure";
    case ErrorCode::StepBudgetExceeded: return "StepBudgetExceeded";
    case ErrorCode::NluFailure: return "NluFailure";
    case ErrorCode::MalformedDecision: return "MalformedDecision";
    case ErrorCode::TemporalParseFailure: return "TemporalParseFailure";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::EndpointError: return "EndpointError";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::RangeInverted: return "RangeInverted";
    case ErrorCode::UnknownEventId: return "UnknownEventId";
    case ErrorCode::UnknownEvent: return "UnknownEvent";
    case ErrorCode::AmbiguousTitle: return "AmbiguousTitle";
    case ErrorCode::ConflictOnMove: return "ConflictOnMove";
    case ErrorCode::StoreFailure: return "StoreFailure";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::RemoteValidationFailure: return "RemoteValidationFailure";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::TurnInProgress: return "TurnInProgress";
    case ErrorCode::NoHealthySupervisor: return "NoHealthySupervisor";
    case ErrorCode::NoHealthyInstance: return "NoHealthyInstance";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::InstanceDown: return "InstanceDown";
    case ErrorCode::DuplicateAgent: return "DuplicateAgent";
    case ErrorCode::DuplicateCapability: return "DuplicateCapability";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::NoCapableAgent: return "NoCapableAgent";
    case ErrorCode::CapacitySaturated: return "CapacitySaturated";
    case ErrorCode::CorpusParseFailure: return "CorpusParseFailure";
    case ErrorCode::FixtureFailure: return "FixtureFailure";
  }
  return "Unknown";
}

}  // namespace calagent
