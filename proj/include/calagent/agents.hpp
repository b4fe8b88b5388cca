#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calagent/calendar.hpp"
#include "calagent/directive.hpp"
#include "calagent/errors.hpp"
#include "calagent/time.hpp"

namespace calagent {

enum class AgentStatus { ok, needs_info, failed };

std::string_view to_string(AgentStatus s) noexcept;
std::optional<AgentStatus> agent_status_from_string(std::string_view s);

/// A calendar mutation performed by an agent.
struct CalendarAction {
  std::string kind;  // created | updated | deleted
  std::string event_id;
  nlohmann::json payload;  // canonical event JSON

  bool operator==(const CalendarAction&) const = default;
};

nlohmann::json to_json(const CalendarAction& a);

struct AgentResult {
  AgentStatus status = AgentStatus::ok;
  std::string messages;
  std::vector<CalendarAction> actions;
  /// Events the agent reported on (checker hits, conflicts, candidates).
  std::vector<CalendarEvent> events;
  std::optional<ErrorCode> error;
};

/// Agent reply as it appears in the transcript: "<status>: <messages>".
std::string format_report(const AgentResult& r);

struct ParsedReport {
  AgentStatus status = AgentStatus::ok;
  std::string text;
};
/// Messages without a recognised prefix are read as ok.
ParsedReport parse_report(std::string_view content);

/// One event line of a report: "- 'Title' on Thu May 1, 10:00 AM - 11:00 AM (ID evt_...)".
std::string describe_event(const CalendarEvent& e, const TimeZone& zone);

struct ReportedEvent {
  std::string title;
  std::string event_id;
};
/// Event lines recovered from report text, in order.
std::vector<ReportedEvent> parse_event_lines(std::string_view text);

/// Case-insensitive exact matches if any, otherwise case-insensitive
/// substring matches (either string containing the other).
std::vector<CalendarEvent> match_title(const std::vector<CalendarEvent>& events,
                                       std::string_view title);

struct SchedulerOptions {
  std::chrono::minutes default_duration{60};
};

AgentResult scheduler_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock,
                          const SchedulerOptions& options = {});
AgentResult checker_run(const TaskDirective& d, const CalendarStore& cal,
                        const ReferenceClock& clock);
AgentResult remover_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock);
AgentResult modifier_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock);

/// Earliest gap of `length` on the local day of `from`, starting no earlier
/// than `from`. Empty when the day has no such gap.
std::optional<Instant> earliest_gap(const CalendarStore& cal, Instant from, Millis length,
                                    const TimeZone& zone);

}  // namespace calagent
