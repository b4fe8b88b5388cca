#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calagent {

enum class ErrorCode {
  InvalidArgument,
  // graph-core
  UnknownRoute,
  MultipleEntryViolation,
  NonStarTopology,
  SentinelStep,
  HandlerFailure,
  StepBudgetExceeded,
  // supervisor / nlu
  NluFailure,
  MalformedDecision,
  TemporalParseFailure,
  TransportFailure,
  EndpointError,
  // calendar / agents
  ValidationFailure,
  RangeInverted,
  UnknownEventId,
  UnknownEvent,
  AmbiguousTitle,
  ConflictOnMove,
  StoreFailure,
  AuthFailure,
  RemoteValidationFailure,
  // sessions
  StoreUnavailable,
  UnknownSession,
  TurnInProgress,
  // distributed
  NoHealthySupervisor,
  NoHealthyInstance,
  UnknownInstance,
  InstanceDown,
  DuplicateAgent,
  DuplicateCapability,
  UnknownAgent,
  NoCapableAgent,
  CapacitySaturated,
  // eval
  CorpusParseFailure,
  FixtureFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the REST layer in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace calagent
