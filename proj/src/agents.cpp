#include "calagent/agents.hpp"

#include <regex>

#include "calagent/temporal.hpp"
#include "text_util.hpp"

namespace calagent {

using namespace std::chrono;

std::string_view to_string(AgentStatus s) noexcept {
  switch (s) {
    case AgentStatus::ok: return "ok";
    case AgentStatus::needs_info: return "needs_info";
    case AgentStatus::failed: return "failed";
  }
  return "failed";
}

std::optional<AgentStatus> agent_status_from_string(std::string_view s) {
  if (s == "ok") return AgentStatus::ok;
  if (s == "needs_info") return AgentStatus::needs_info;
  if (s == "failed") return AgentStatus::failed;
  return std::nullopt;
}

nlohmann::json to_json(const CalendarAction& a) {
  return {{"kind", a.kind}, {"event_id", a.event_id}, {"event", a.payload}};
}

std::string format_report(const AgentResult& r) {
  return std::string(to_string(r.status)) + ": " + r.messages;
}

ParsedReport parse_report(std::string_view content) {
  const auto colon = content.find(": ");
  if (colon != std::string_view::npos) {
    if (auto s = agent_status_from_string(content.substr(0, colon))) {
      return {*s, std::string(content.substr(colon + 2))};
    }
  }
  return {AgentStatus::ok, std::string(content)};
}

namespace {

LocalTime local_midnight(LocalTime t) { return floor<days>(t); }

bool same_local_day(Instant a, Instant b, const TimeZone& zone) {
  return local_midnight(zone.to_local(a)) == local_midnight(zone.to_local(b));
}

std::string describe_span(Instant start, Instant end, const TimeZone& zone) {
  // Half-open: an event ending exactly at midnight still reads as same-day.
  const bool same_day = same_local_day(start, end - Millis{1}, zone);
  return format_human(start, zone) + " - " +
         (same_day ? format_human_time(end, zone) : format_human(end, zone));
}

AgentResult fail(ErrorCode code, std::string text) {
  AgentResult r;
  r.status = AgentStatus::failed;
  r.error = code;
  r.messages = std::move(text);
  return r;
}

AgentResult needs_info(std::string text, std::optional<ErrorCode> code = std::nullopt) {
  AgentResult r;
  r.status = AgentStatus::needs_info;
  r.error = code;
  r.messages = std::move(text);
  return r;
}

std::string slot_value(const TaskDirective& d, const char* name) {
  auto it = d.slots.find(name);
  return it == d.slots.end() ? std::string() : detail::trim(it->second);
}

std::string event_lines(const std::vector<CalendarEvent>& events, const TimeZone& zone) {
  std::string out;
  for (const auto& e : events) out += "\n" + describe_event(e, zone);
  return out;
}

std::string plural(std::size_t n, const char* word) {
  return std::to_string(n) + " " + word + (n == 1 ? "" : "s");
}

/// A date or time slot on its own. Throws TemporalParseFailure.
TemporalExpr parse_slot(const std::string& text, const ReferenceClock& clock) {
  return parse_temporal_expr(text, clock);
}

/// Bound for an availability range. Day-grain ends are inclusive days.
Instant parse_bound(const std::string& text, const ReferenceClock& clock, bool is_end) {
  if (auto t = parse_rfc3339(text)) return *t;
  const auto r = resolve(parse_temporal_expr(text, clock), clock);
  if (is_end && r.grain == Grain::day && r.end) return *r.end;
  return r.start;
}

ClockTime clock_of(LocalTime t) {
  const auto tod = duration_cast<minutes>(t - local_midnight(t));
  ClockTime c;
  c.hour = static_cast<int>(tod.count() / 60);
  c.minute = static_cast<int>(tod.count() % 60);
  c.explicit_minutes = true;
  return c;
}

year_month_day date_of(LocalTime t) {
  return year_month_day{sys_days{floor<days>(t).time_since_epoch()}};
}

std::vector<CalendarEvent> all_events(const CalendarStore& cal) {
  return cal.list_events(kBeginningOfTime, kEndOfTime);
}

}  // namespace

std::string describe_event(const CalendarEvent& e, const TimeZone& zone) {
  return "- '" + e.details.title + "' on " + describe_span(e.details.start, e.details.end, zone) +
         " (ID " + e.event_id + ")";
}

std::vector<ReportedEvent> parse_event_lines(std::string_view text) {
  static const std::regex line_re(R"(^- '(.*)' on .* \(ID (evt_[0-9A-Za-z]+)\)$)");
  std::vector<ReportedEvent> out;
  std::size_t pos = 0;
  const std::string s(text);
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    if (nl == std::string::npos) nl = s.size();
    const std::string line = s.substr(pos, nl - pos);
    std::smatch m;
    if (std::regex_match(line, m, line_re)) out.push_back({m[1].str(), m[2].str()});
    pos = nl + 1;
  }
  return out;
}

std::vector<CalendarEvent> match_title(const std::vector<CalendarEvent>& events,
                                       std::string_view title) {
  const std::string want = detail::to_lower(detail::trim(title));
  if (want.empty()) return {};
  std::vector<CalendarEvent> exact;
  std::vector<CalendarEvent> partial;
  for (const auto& e : events) {
    const std::string have = detail::to_lower(e.details.title);
    if (have == want) {
      exact.push_back(e);
    } else if (have.find(want) != std::string::npos || want.find(have) != std::string::npos) {
      partial.push_back(e);
    }
  }
  return exact.empty() ? partial : exact;
}

std::optional<Instant> earliest_gap(const CalendarStore& cal, Instant from, Millis length,
                                    const TimeZone& zone) {
  const LocalTime day_end_local = local_midnight(zone.to_local(from)) + days{1};
  const Instant day_end = zone.to_instant(day_end_local);
  auto events = cal.list_events(from, day_end);
  Instant candidate = from;
  bool moved = true;
  while (moved) {
    moved = false;
    for (const auto& e : events) {
      if (overlaps(candidate, candidate + length, e.details.start, e.details.end)) {
        candidate = e.details.end;
        moved = true;
      }
    }
  }
  if (candidate + length > day_end) return std::nullopt;
  return candidate;
}

// ---------------------------------------------------------------------------
// Scheduler: conflict check first, create only on a clear slot.

AgentResult scheduler_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock,
                          const SchedulerOptions& options) {
  const TimeZone& zone = clock.zone();
  for (const char* name : {slot::title, slot::date, slot::time}) {
    if (!d.has(name)) return needs_info(std::string(name) + " not provided.");
  }
  try {
    const TemporalExpr date_expr = parse_slot(slot_value(d, slot::date), clock);
    const TemporalExpr time_expr = parse_slot(slot_value(d, slot::time), clock);
    if (!date_expr.date) {
      return fail(ErrorCode::TemporalParseFailure,
                  "I could not read a date from '" + slot_value(d, slot::date) + "'.");
    }
    if (!time_expr.time) {
      return fail(ErrorCode::TemporalParseFailure,
                  "I could not read a start time from '" + slot_value(d, slot::time) + "'.");
    }
    TemporalExpr combined;
    combined.date = date_expr.date;
    combined.time = time_expr.time;
    combined.end_time = time_expr.end_time;
    if (d.has(slot::end_time)) {
      const TemporalExpr end_expr = parse_slot(slot_value(d, slot::end_time), clock);
      if (!end_expr.time) {
        return fail(ErrorCode::TemporalParseFailure,
                    "I could not read an end time from '" + slot_value(d, slot::end_time) + "'.");
      }
      combined.end_time = end_expr.time;
    }
    const TemporalResolution r = resolve(combined, clock);

    EventDetails details;
    details.title = slot_value(d, slot::title);
    details.start = r.start;
    details.end = r.end.value_or(r.start + duration_cast<Millis>(options.default_duration));
    details.time_zone = zone.name();
    if (auto desc = slot_value(d, "description"); !desc.empty()) details.description = desc;

    const auto conflicts = cal.check_conflicts(details);
    if (!conflicts.empty()) {
      std::string text = "'" + details.title + "' on " +
                         describe_span(details.start, details.end, zone) + " conflicts with " +
                         plural(conflicts.size(), "existing event") + ":" +
                         event_lines(conflicts, zone) + "\n";
      if (auto gap = earliest_gap(cal, details.start, details.end - details.start, zone)) {
        text += "The earliest free slot that day is " +
                describe_span(*gap, *gap + (details.end - details.start), zone) + ". ";
      } else {
        text += "There is no free slot of that length later that day. ";
      }
      text += "Would you like a different time?";
      AgentResult res = needs_info(std::move(text));
      res.events = conflicts;
      return res;
    }

    const CalendarEvent created = cal.create_event(details);
    AgentResult res;
    res.status = AgentStatus::ok;
    res.messages = "Scheduled '" + created.details.title + "' on " +
                   describe_span(created.details.start, created.details.end, zone) + " (ID " +
                   created.event_id + ").";
    res.actions.push_back({"created", created.event_id, to_json(created)});
    res.events.push_back(created);
    return res;
  } catch (const Error& e) {
    return fail(e.code(), std::string("Could not schedule the event: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

AgentResult checker_run(const TaskDirective& d, const CalendarStore& cal,
                        const ReferenceClock& clock) {
  const TimeZone& zone = clock.zone();
  if (!d.has(slot::start_date) || !d.has(slot::end_date)) {
    return needs_info(std::string(!d.has(slot::start_date) ? "start_date" : "end_date") +
                      " not provided.");
  }
  try {
    const Instant start = parse_bound(slot_value(d, slot::start_date), clock, false);
    const Instant end = parse_bound(slot_value(d, slot::end_date), clock, true);
    if (start > end) {
      return fail(ErrorCode::RangeInverted, "The requested range ends before it starts.");
    }
    auto events = cal.list_events(start, end);
    const std::string range = format_human(start, zone) + " to " + format_human(end, zone);

    AgentResult res;
    res.status = AgentStatus::ok;
    if (d.has(slot::title)) {
      const std::string title = slot_value(d, slot::title);
      events = match_title(events, title);
      if (events.empty()) {
        res.messages = "No events titled '" + title + "' were found.";
      } else {
        res.messages = "Found " + plural(events.size(), "event") + " titled '" + title + "':" +
                       event_lines(events, zone);
      }
    } else if (events.empty()) {
      res.messages = "You are free from " + range + ". No events found.";
    } else {
      res.messages = "You have " + plural(events.size(), "event") + " from " + range + ":" +
                     event_lines(events, zone);
    }
    res.events = std::move(events);
    return res;
  } catch (const Error& e) {
    return fail(e.code(), std::string("Could not check availability: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

AgentResult remover_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock) {
  if (!d.has(slot::event_id)) {
    return needs_info("event_ID not provided. Which event should I delete?");
  }
  const std::string id = slot_value(d, slot::event_id);
  try {
    const CalendarEvent removed = cal.delete_event(id);
    AgentResult res;
    res.status = AgentStatus::ok;
    res.messages = "Deleted '" + removed.details.title + "' on " +
                   describe_span(removed.details.start, removed.details.end, clock.zone()) +
                   " (ID " + removed.event_id + ").";
    res.actions.push_back({"deleted", removed.event_id, to_json(removed)});
    res.events.push_back(removed);
    return res;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownEventId) {
      return fail(e.code(), "No event with ID " + id + " exists; it may already have been deleted.");
    }
    return fail(e.code(), std::string("Could not delete the event: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Modifier: resolve the target, interpret the free-text edit, re-check
// conflicts when the interval moves, then commit one patch.

namespace {

struct EditPlan {
  std::optional<std::string> title;
  std::optional<std::string> description;
  std::optional<Instant> start;
  std::optional<Instant> end;
};

std::optional<Millis> parse_amount(const std::string& number, const std::string& unit) {
  double n = 0;
  if (number == "a" || number == "an" || number == "one") {
    n = 1;
  } else if (number == "half an" || number == "half a") {
    n = 0.5;
  } else if (number == "two") {
    n = 2;
  } else if (number == "three") {
    n = 3;
  } else if (number == "four") {
    n = 4;
  } else {
    try {
      n = std::stod(number);
    } catch (...) {
      return std::nullopt;
    }
  }
  const bool hours = unit.rfind("h", 0) == 0;
  return Millis{static_cast<std::int64_t>(n * (hours ? 3600000.0 : 60000.0))};
}

/// Temporal phrase following `anchor_re` in `masked`, if any.
std::optional<TemporalExpr> temporal_after(const std::string& masked, const std::regex& anchor_re,
                                           const ReferenceClock& clock) {
  std::smatch m;
  if (!std::regex_search(masked, m, anchor_re)) return std::nullopt;
  const std::size_t from = static_cast<std::size_t>(m.position(0) + m.length(0));
  for (const auto& span : find_temporal_spans(masked, clock)) {
    if (span.begin >= from) return span.expr;
  }
  return std::nullopt;
}

EditPlan plan_edit(const std::string& instruction, const CalendarEvent& target,
                   const ReferenceClock& clock) {
  static const std::string amount =
      R"((\d+(?:\.\d+)?|an|a|one|two|three|four|half an?)\s*(hours?|hrs?|minutes?|mins?))";
  static const std::regex rename_kw(R"(\b(rename|retitle|title|call it|name it|renamed)\b)");
  static const std::regex rename_bare(R"(\b(?:rename|retitle)\s+(?:it\s+)?to\s+(.+?)[.!]?$)",
                                      std::regex::icase);
  static const std::regex desc_kw(R"(\b(description|note|notes)\b)");
  static const std::regex desc_bare(
      R"(\b(?:description|note|notes)\b\s*(?::|\bto\b|\bsaying\b)\s*(.+?)[.!]?$)", std::regex::icase);
  static const std::regex duration_re("\\bfor\\s+" + amount);
  static const std::regex long_re(amount + R"(\s+long\b)");
  static const std::regex later_re(R"(\b(later|earlier)\s+by\s+)" + amount);
  static const std::regex later2_re(amount + R"(\s+(later|earlier)\b)");
  static const std::regex extend_re(R"(\b(extend|lengthen|shorten|cut)\w*\b.*?\bby\s+)" + amount);
  static const std::regex end_at(R"(\b(end|ends|finish|finishes|end it|finish it)\s+(at|by)\b)");
  static const std::regex start_at(R"(\b(start|starts|begin|begins|start it)\s+at\b)");
  static const std::regex move_kw(
      R"(\b(move|moved|reschedule|rescheduled|push|pushed|shift|shifted|postpone|postponed|bump|change the time|change the date|change it|make it|to|on|at)\b)");

  const TimeZone& zone = clock.zone();
  const auto quoted = detail::find_quoted(instruction);
  const std::string masked = detail::to_lower(detail::mask_ranges(instruction, quoted));
  EditPlan plan;
  std::smatch m;

  if (std::regex_search(masked, rename_kw)) {
    if (!quoted.empty()) {
      plan.title = quoted.back().content;
    } else if (std::regex_search(instruction, m, rename_bare)) {
      plan.title = detail::trim(m[1].str());
    }
  } else if (std::regex_search(masked, desc_kw)) {
    if (!quoted.empty()) {
      plan.description = quoted.back().content;
    } else if (std::regex_search(instruction, m, desc_bare)) {
      plan.description = detail::trim(m[1].str());
    }
  }

  const LocalTime old_start_local = zone.to_local(target.details.start);
  const Millis length = target.details.end - target.details.start;
  Instant start = target.details.start;
  Instant end = target.details.end;
  bool timing = false;

  auto at_date_time = [&](const TemporalExpr& e, LocalTime fallback) {
    TemporalExpr x = e;
    if (!x.date) x.date = date_of(fallback);
    if (!x.time) x.time = clock_of(fallback);
    x.day_part.reset();
    x.range_end_exclusive.reset();
    return resolve(x, clock);
  };

  if (auto e = temporal_after(masked, end_at, clock); e && e->time) {
    TemporalExpr x = *e;
    if (!x.date) x.date = date_of(zone.to_local(end - Millis{1}));
    end = resolve(x, clock).start;
    timing = true;
  }
  if (auto e = temporal_after(masked, start_at, clock); e && e->time) {
    TemporalExpr x = *e;
    if (!x.date) x.date = date_of(old_start_local);
    start = resolve(x, clock).start;
    timing = true;
  }
  if (!timing) {
    if (std::regex_search(masked, m, later_re) || std::regex_search(masked, m, later2_re)) {
      const bool later_first = m[1].str() == "later" || m[1].str() == "earlier";
      const std::string dir = later_first ? m[1].str() : m[3].str();
      const auto amt = later_first ? parse_amount(m[2].str(), m[3].str())
                                   : parse_amount(m[1].str(), m[2].str());
      if (amt) {
        const Millis shift = dir == "later" ? *amt : -*amt;
        start += shift;
        end += shift;
        timing = true;
      }
    } else if (std::regex_search(masked, m, extend_re)) {
      if (auto amt = parse_amount(m[2].str(), m[3].str())) {
        const bool grow = m[1].str().rfind("extend", 0) == 0 || m[1].str().rfind("lengthen", 0) == 0;
        end += grow ? *amt : -*amt;
        timing = true;
      }
    } else if (std::regex_search(masked, move_kw)) {
      // "move it to Friday at 3 PM", "reschedule to 2025-05-02", "from 2 to 3 PM"
      for (const auto& span : find_temporal_spans(masked, clock)) {
        const auto r = at_date_time(span.expr, old_start_local);
        start = r.start;
        end = (span.expr.end_time && r.end) ? *r.end : start + length;
        timing = true;
        break;
      }
    }
  }
  if (std::regex_search(masked, m, duration_re) || std::regex_search(masked, m, long_re)) {
    if (auto amt = parse_amount(m[1].str(), m[2].str())) {
      end = start + *amt;
      timing = true;
    }
  }
  if (timing) {
    plan.start = start;
    plan.end = end;
  }
  return plan;
}

}  // namespace

AgentResult modifier_run(const TaskDirective& d, CalendarStore& cal, const ReferenceClock& clock) {
  const TimeZone& zone = clock.zone();
  if (!d.has(slot::edit_instruction)) {
    return needs_info("edit_instruction not provided. What exactly should I change?");
  }
  if (!d.has(slot::event_id) && !d.has(slot::title)) {
    return needs_info("event title or event_ID not provided. Which event should I change?");
  }
  try {
    CalendarEvent target;
    if (d.has(slot::event_id)) {
      auto found = cal.get_event(slot_value(d, slot::event_id));
      if (!found) {
        return fail(ErrorCode::UnknownEvent,
                    "No event with ID " + slot_value(d, slot::event_id) + " exists.");
      }
      target = *found;
    } else {
      const std::string title = slot_value(d, slot::title);
      const auto matches = match_title(all_events(cal), title);
      if (matches.empty()) {
        return fail(ErrorCode::UnknownEvent, "No event titled '" + title + "' was found.");
      }
      if (matches.size() > 1) {
        AgentResult res = needs_info("Several events match '" + title + "':" +
                                         event_lines(matches, zone) +
                                         "\nWhich one should I change? Please give its ID.",
                                     ErrorCode::AmbiguousTitle);
        res.events = matches;
        return res;
      }
      target = matches.front();
    }

    const EditPlan plan = plan_edit(slot_value(d, slot::edit_instruction), target, clock);
    if (!plan.title && !plan.description && !plan.start) {
      return needs_info("I could not tell what to change about '" + target.details.title +
                        "'. What exactly should I change?");
    }

    EventPatch patch;
    patch.title = plan.title;
    patch.description = plan.description;
    if (plan.start) {
      EventDetails moved = target.details;
      moved.start = *plan.start;
      moved.end = *plan.end;
      validate(moved);
      auto conflicts = cal.check_conflicts(moved);
      std::erase_if(conflicts, [&](const CalendarEvent& e) { return e.event_id == target.event_id; });
      if (!conflicts.empty()) {
        AgentResult res = needs_info("Moving '" + target.details.title + "' to " +
                                         describe_span(moved.start, moved.end, zone) +
                                         " would conflict with:" + event_lines(conflicts, zone) +
                                         "\nWhich other time would work?",
                                     ErrorCode::ConflictOnMove);
        res.events = conflicts;
        return res;
      }
      if (moved.start != target.details.start) patch.start = moved.start;
      if (moved.end != target.details.end) patch.end = moved.end;
    }

    const CalendarEvent updated = cal.update_event(target.event_id, patch);
    AgentResult res;
    res.status = AgentStatus::ok;
    res.messages = "Updated '" + updated.details.title + "': now on " +
                   describe_span(updated.details.start, updated.details.end, zone) + " (ID " +
                   updated.event_id + ").";
    res.actions.push_back({"updated", updated.event_id, to_json(updated)});
    res.events.push_back(updated);
    return res;
  } catch (const Error& e) {
    return fail(e.code(), std::string("Could not update the event: ") + e.what());
  }
}

}  // namespace calagent
