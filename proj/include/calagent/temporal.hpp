#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calagent/time.hpp"

namespace calagent {

enum class Grain { minute, hour, day };
std::string_view to_string(Grain g) noexcept;

enum class DayPart { morning, afternoon, evening };

/// Fixed windows: morning 08-12, afternoon 12-18, evening 18-22.
struct DayPartWindow {
  std::chrono::minutes begin;
  std::chrono::minutes end;
};
DayPartWindow window_of(DayPart part) noexcept;

enum class Meridiem { none, am, pm };

/// Wall-clock time as written. `bare` marks a number with neither
/// minutes nor am/pm ("at 7"), which is resolved against the clock.
struct ClockTime {
  int hour = 0;
  int minute = 0;
  bool explicit_minutes = false;
  Meridiem meridiem = Meridiem::none;
  bool bare = false;

  bool operator==(const ClockTime&) const = default;
};

/// What a temporal phrase said, before it is pinned to instants.
struct TemporalExpr {
  std::optional<std::chrono::year_month_day> date;
  std::optional<ClockTime> time;
  std::optional<std::chrono::year_month_day> end_date;  // inclusive
  std::optional<ClockTime> end_time;
  std::optional<DayPart> day_part;
  /// Week-style ranges ("next week") carry their own exclusive end day.
  std::optional<std::chrono::year_month_day> range_end_exclusive;

  bool has_date() const { return date.has_value(); }
  bool has_time() const { return time.has_value(); }
};

struct TemporalResolution {
  Instant start{};
  std::optional<Instant> end;
  Grain grain = Grain::day;
  std::string zone;
  LocalTime local_start{};
  std::optional<LocalTime> local_end;
};

/// Parses a complete temporal phrase: ISO dates and datetimes, clock times
/// (10:00 AM, 2 PM, 14:00, noon), today/tomorrow, weekday references
/// ("next Monday" is the first Monday strictly after today), month-name
/// dates, day parts, week ranges and "from X to Y" ranges. Every token must
/// be understood; otherwise Error(TemporalParseFailure) names the span.
TemporalExpr parse_temporal_expr(std::string_view text, const ReferenceClock& clock);

/// Pins an expression to instants in the clock's zone.
TemporalResolution resolve(const TemporalExpr& expr, const ReferenceClock& clock);

inline TemporalResolution parse_temporal(std::string_view text, const ReferenceClock& clock) {
  return resolve(parse_temporal_expr(text, clock), clock);
}

/// A maximal temporal phrase found inside free text.
struct TemporalSpan {
  std::size_t begin = 0;  // byte offsets into the scanned text
  std::size_t end = 0;
  TemporalExpr expr;
};

/// Left-to-right longest-match scan for temporal phrases in an utterance.
std::vector<TemporalSpan> find_temporal_spans(std::string_view text, const ReferenceClock& clock);

/// "10:00 AM" style rendering used in instructions and replies.
std::string format_clock(std::chrono::minutes since_midnight);
std::string format_iso_date(const std::chrono::year_month_day& d);

}  // namespace calagent
