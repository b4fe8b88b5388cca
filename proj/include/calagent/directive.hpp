#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace calagent {

class ReferenceClock;

enum class TaskType { schedule, check_availability, edit, delete_event };

std::string_view to_string(TaskType t) noexcept;
std::optional<TaskType> task_type_from_string(std::string_view s);

/// Closed set of routes a supervisor decision may name.
enum class RouteTarget {
  calendar_checker_agent,
  event_scheduler_agent,
  event_remover_agent,
  event_modifier_agent,
  user,
  finish,
};

std::string_view to_string(RouteTarget r) noexcept;
/// Accepts the canonical names plus the alias `event_editor_agent`.
std::optional<RouteTarget> route_target_from_string(std::string_view s);
bool is_agent(RouteTarget r) noexcept;
RouteTarget agent_for(TaskType t) noexcept;
/// Only meaningful for agent routes.
TaskType task_for(RouteTarget agent);

using SlotMap = std::map<std::string, std::string>;

struct TaskDirective {
  TaskType task_type = TaskType::schedule;
  SlotMap slots;
  std::string natural_instruction;

  bool has(const std::string& slot) const;
  bool operator==(const TaskDirective&) const = default;
};

nlohmann::json to_json(const TaskDirective& d);
TaskDirective directive_from_json(const nlohmann::json& j);

namespace slot {
inline constexpr const char* title = "title";
inline constexpr const char* date = "date";
inline constexpr const char* time = "time";
inline constexpr const char* end_time = "end_time";
inline constexpr const char* event_id = "event_id";
inline constexpr const char* edit_instruction = "edit_instruction";
inline constexpr const char* start_date = "start_date";
inline constexpr const char* end_date = "end_date";
}  // namespace slot

/// Required slots in the order the supervisor asks for them.
std::vector<std::string> required_slots(TaskType t);
/// For edit, an event_id stands in for the title.
std::vector<std::string> missing_slots(const TaskDirective& d);

/// One interrogative sentence asking for `slot`.
std::string followup_question(TaskType t, const std::string& slot);
/// Inverse of followup_question, used to interpret short answers.
std::optional<std::pair<TaskType, std::string>> question_slot(std::string_view text);

/// Canonical instruction text for an agent, e.g.
/// "Schedule an event titled 'Team Meeting' on 2025-05-01 at 10:00 AM."
std::string render_instruction(const TaskDirective& d);

/// Recovers slots from instruction text. Canonical phrasings decode
/// exactly; other wordings fall back to quoted titles, event ids and
/// temporal phrases (resolved against `clock`).
TaskDirective decode_instruction(TaskType t, std::string_view text, const ReferenceClock& clock);

/// Event ids as issued by the store ("evt_" + 26 base32 characters).
std::vector<std::string> find_event_ids(std::string_view text);

}  // namespace calagent
