#include "calagent/directive.hpp"

#include <regex>

#include "calagent/errors.hpp"
#include "calagent/temporal.hpp"
#include "text_util.hpp"

namespace calagent {

std::string_view to_string(TaskType t) noexcept {
  switch (t) {
    case TaskType::schedule: return "schedule";
    case TaskType::check_availability: return "check_availability";
    case TaskType::edit: return "edit";
    case TaskType::delete_event: return "delete";
  }
  return "schedule";
}

std::optional<TaskType> task_type_from_string(std::string_view s) {
  if (s == "schedule") return TaskType::schedule;
  if (s == "check_availability") return TaskType::check_availability;
  if (s == "edit") return TaskType::edit;
  if (s == "delete") return TaskType::delete_event;
  return std::nullopt;
}

std::string_view to_string(RouteTarget r) noexcept {
  switch (r) {
    case RouteTarget::calendar_checker_agent: return "calendar_checker_agent";
    case RouteTarget::event_scheduler_agent: return "event_scheduler_agent";
    case RouteTarget::event_remover_agent: return "event_remover_agent";
    case RouteTarget::event_modifier_agent: return "event_modifier_agent";
    case RouteTarget::user: return "user";
    case RouteTarget::finish: return "FINISH";
  }
  return "user";
}

std::optional<RouteTarget> route_target_from_string(std::string_view s) {
  if (s == "calendar_checker_agent") return RouteTarget::calendar_checker_agent;
  if (s == "event_scheduler_agent") return RouteTarget::event_scheduler_agent;
  if (s == "event_remover_agent") return RouteTarget::event_remover_agent;
  if (s == "event_modifier_agent" || s == "event_editor_agent") {
    return RouteTarget::event_modifier_agent;
  }
  if (s == "user") return RouteTarget::user;
  if (s == "FINISH") return RouteTarget::finish;
  return std::nullopt;
}

bool is_agent(RouteTarget r) noexcept {
  return r != RouteTarget::user && r != RouteTarget::finish;
}

RouteTarget agent_for(TaskType t) noexcept {
  switch (t) {
    case TaskType::schedule: return RouteTarget::event_scheduler_agent;
    case TaskType::check_availability: return RouteTarget::calendar_checker_agent;
    case TaskType::edit: return RouteTarget::event_modifier_agent;
    case TaskType::delete_event: return RouteTarget::event_remover_agent;
  }
  return RouteTarget::event_scheduler_agent;
}

TaskType task_for(RouteTarget agent) {
  switch (agent) {
    case RouteTarget::event_scheduler_agent: return TaskType::schedule;
    case RouteTarget::calendar_checker_agent: return TaskType::check_availability;
    case RouteTarget::event_modifier_agent: return TaskType::edit;
    case RouteTarget::event_remover_agent: return TaskType::delete_event;
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, std::string(to_string(agent)) + " is not an agent route");
}

bool TaskDirective::has(const std::string& name) const {
  auto it = slots.find(name);
  return it != slots.end() && !detail::trim(it->second).empty();
}

nlohmann::json to_json(const TaskDirective& d) {
  return nlohmann::json{{"task_type", to_string(d.task_type)},
                        {"slots", d.slots},
                        {"natural_instruction", d.natural_instruction}};
}

TaskDirective directive_from_json(const nlohmann::json& j) {
  TaskDirective d;
  auto t = task_type_from_string(j.at("task_type").get<std::string>());
  if (!t) throw Error(ErrorCode::InvalidArgument, "unknown task_type " + j.at("task_type").dump());
  d.task_type = *t;
  d.slots = j.at("slots").get<SlotMap>();
  d.natural_instruction = j.at("natural_instruction").get<std::string>();
  return d;
}

std::vector<std::string> required_slots(TaskType t) {
  switch (t) {
    case TaskType::schedule: return {slot::title, slot::date, slot::time};
    case TaskType::delete_event: return {slot::event_id};
    case TaskType::edit: return {slot::title, slot::edit_instruction};
    case TaskType::check_availability: return {slot::start_date, slot::end_date};
  }
  return {};
}

std::vector<std::string> missing_slots(const TaskDirective& d) {
  std::vector<std::string> out;
  for (auto& name : required_slots(d.task_type)) {
    // An edit addressed by id needs no title.
    if (d.task_type == TaskType::edit && name == slot::title && d.has(slot::event_id)) continue;
    if (!d.has(name)) out.push_back(std::move(name));
  }
  return out;
}

namespace {

struct QuestionEntry {
  TaskType task;
  const char* slot;
  const char* text;
};

constexpr QuestionEntry kQuestions[] = {
    {TaskType::schedule, slot::title, "What should the event be called?"},
    {TaskType::schedule, slot::date, "Which date should I schedule it on?"},
    {TaskType::schedule, slot::time, "What time should it start?"},
    {TaskType::delete_event, slot::event_id, "Which event would you like me to delete?"},
    {TaskType::edit, slot::title, "Which event would you like to change?"},
    {TaskType::edit, slot::edit_instruction, "What exactly would you like to change about it?"},
    {TaskType::check_availability, slot::start_date, "Which day or time range should I check?"},
    {TaskType::check_availability, slot::end_date, "Until when should I check?"},
};

// Titles containing an apostrophe are double-quoted so decoding stays exact.
std::string quote_title(const std::string& title) {
  return title.find('\'') == std::string::npos ? "'" + title + "'" : "\"" + title + "\"";
}

std::string slot_or(const TaskDirective& d, const char* name) {
  auto it = d.slots.find(name);
  return it == d.slots.end() ? std::string() : it->second;
}

std::optional<std::string> first_match(const std::string& text, const std::regex& re, int group = 1) {
  std::smatch m;
  if (std::regex_search(text, m, re)) return m[group].str();
  return std::nullopt;
}

}  // namespace

std::string followup_question(TaskType t, const std::string& name) {
  for (const auto& q : kQuestions) {
    if (q.task == t && name == q.slot) return q.text;
  }
  return "Could you tell me the " + name + "?";
}

std::optional<std::pair<TaskType, std::string>> question_slot(std::string_view text) {
  const std::string trimmed = detail::trim(text);
  for (const auto& q : kQuestions) {
    if (trimmed.size() >= std::string_view(q.text).size() &&
        trimmed.compare(trimmed.size() - std::string_view(q.text).size(),
                        std::string_view::npos, q.text) == 0) {
      return std::make_pair(q.task, std::string(q.slot));
    }
  }
  return std::nullopt;
}

std::string render_instruction(const TaskDirective& d) {
  const std::string title = slot_or(d, slot::title);
  const std::string id = slot_or(d, slot::event_id);
  switch (d.task_type) {
    case TaskType::schedule: {
      std::string s = "Schedule an event titled " + quote_title(title) + " on " +
                      slot_or(d, slot::date) + " at " + slot_or(d, slot::time);
      if (d.has(slot::end_time)) s += " until " + slot_or(d, slot::end_time);
      return s + ".";
    }
    case TaskType::check_availability: {
      std::string s = d.has(slot::title) ? "Find events titled " + quote_title(title)
                                         : std::string("Check availability");
      return s + " from " + slot_or(d, slot::start_date) + " to " + slot_or(d, slot::end_date) + ".";
    }
    case TaskType::delete_event: {
      std::string s = "Delete the event with ID " + id;
      if (d.has(slot::title)) s += " titled " + quote_title(title);
      return s + ".";
    }
    case TaskType::edit: {
      std::string s = "Edit the event";
      if (d.has(slot::title)) s += " titled " + quote_title(title);
      if (!id.empty()) s += d.has(slot::title) ? " (ID " + id + ")" : " with ID " + id;
      return s + ": " + slot_or(d, slot::edit_instruction);
    }
  }
  return {};
}

std::vector<std::string> find_event_ids(std::string_view text) {
  static const std::regex re(R"(\bevt_[0-9A-Za-z]{6,}\b)");
  std::vector<std::string> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    if (std::find(out.begin(), out.end(), it->str()) == out.end()) out.push_back(it->str());
  }
  return out;
}

TaskDirective decode_instruction(TaskType t, std::string_view text_view, const ReferenceClock& clock) {
  static const std::regex titled_re(R"(titled\s+(?:'([^']+)'|\"([^\"]+)\"))", std::regex::icase);
  static const std::regex date_re(R"(\b(\d{4}-\d{2}-\d{2})\b)");
  static const std::regex at_time_re(R"(\bat\s+(\d{1,2}:\d{2}\s*[AaPp][Mm]))");
  static const std::regex until_re(R"(\buntil\s+(\d{1,2}:\d{2}\s*[AaPp][Mm]))");
  static const std::regex range_re(
      R"(from\s+(\d{4}-\d{2}-\d{2}T\d{2}:\d{2})\s+to\s+(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}))");

  const std::string text(text_view);
  TaskDirective d;
  d.task_type = t;
  d.natural_instruction = detail::trim(text);

  std::smatch m;
  if (std::regex_search(text, m, titled_re)) {
    d.slots[slot::title] = m[1].matched ? m[1].str() : m[2].str();
  }
  const auto quoted = detail::find_quoted(text);
  if (!d.has(slot::title) && !quoted.empty() && t != TaskType::check_availability) {
    d.slots[slot::title] = quoted.front().content;
  }
  if (auto ids = find_event_ids(text); !ids.empty()) d.slots[slot::event_id] = ids.front();

  switch (t) {
    case TaskType::schedule: {
      if (auto v = first_match(text, date_re)) d.slots[slot::date] = *v;
      if (auto v = first_match(text, at_time_re)) d.slots[slot::time] = *v;
      if (auto v = first_match(text, until_re)) d.slots[slot::end_time] = *v;
      if (!d.has(slot::date) || !d.has(slot::time)) {
        const std::string masked = detail::mask_ranges(text, quoted);
        for (const auto& span : find_temporal_spans(masked, clock)) {
          if (!d.has(slot::date) && span.expr.date) {
            d.slots[slot::date] = format_iso_date(*span.expr.date);
          }
          if (!d.has(slot::time) && span.expr.time && !span.expr.time->bare) {
            try {
              const auto r = resolve(span.expr, clock);
              const auto tod = std::chrono::duration_cast<std::chrono::minutes>(
                  r.local_start - std::chrono::floor<std::chrono::days>(r.local_start));
              d.slots[slot::time] = format_clock(tod);
            } catch (const Error&) {
            }
          }
        }
      }
      break;
    }
    case TaskType::check_availability: {
      if (std::regex_search(text, m, range_re)) {
        d.slots[slot::start_date] = m[1].str();
        d.slots[slot::end_date] = m[2].str();
      } else {
        const std::string masked = detail::mask_ranges(text, quoted);
        for (const auto& span : find_temporal_spans(masked, clock)) {
          try {
            const auto r = resolve(span.expr, clock);
            if (!r.local_end) continue;
            auto fmt = [](LocalTime lt) {
              const auto day = std::chrono::floor<std::chrono::days>(lt);
              const auto tod = std::chrono::duration_cast<std::chrono::minutes>(lt - day);
              char buf[8];
              std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(tod.count() / 60),
                            static_cast<int>(tod.count() % 60));
              return format_iso_date(std::chrono::year_month_day{
                         std::chrono::sys_days{day.time_since_epoch()}}) +
                     "T" + buf;
            };
            d.slots[slot::start_date] = fmt(r.local_start);
            d.slots[slot::end_date] = fmt(*r.local_end);
            break;
          } catch (const Error&) {
          }
        }
      }
      break;
    }
    case TaskType::delete_event:
      break;
    case TaskType::edit: {
      // Everything after the first ": " that follows the event reference.
      std::size_t after_ref = 0;
      for (const auto& q : quoted) {
        if (q.content == slot_or(d, slot::title)) {
          after_ref = q.end;
          break;
        }
      }
      const auto colon = text.find(": ", after_ref);
      if (colon != std::string::npos) {
        d.slots[slot::edit_instruction] = detail::trim(text.substr(colon + 2));
      }
      break;
    }
  }
  return d;
}

}  // namespace calagent
